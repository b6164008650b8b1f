#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "symdef/errors.hpp"
#include "symdef/rng.hpp"

namespace symdef {

// ---------------------------------------------------------------------------
// Meta-features
//
// The eight dataset characteristics available as terminal symbols. n, po, p
// and m are counts (integer class); rc, mcp, mkd and xvar are fractions or
// nonnegative reals (float class). All are stored as doubles because they
// only ever feed arithmetic.

struct MetaFeatures {
    double n = 1;      // observations
    double po = 1;     // original features
    double p = 1;      // one-hot encoded features
    double m = 2;      // classes
    double rc = 0;     // categorical feature ratio
    double mcp = 0.5;  // majority class proportion
    double mkd = 0;    // inverse median kernel distance
    double xvar = 0;   // average feature variance
};

enum class MetaFeatureId { N, Po, P, M, Rc, Mcp, Mkd, Xvar };

inline constexpr std::array<MetaFeatureId, 8> kAllMetaFeatures = {
    MetaFeatureId::N,  MetaFeatureId::Po,  MetaFeatureId::P,   MetaFeatureId::M,
    MetaFeatureId::Rc, MetaFeatureId::Mcp, MetaFeatureId::Mkd, MetaFeatureId::Xvar};

inline constexpr std::array<MetaFeatureId, 4> kIntegerMetaFeatures = {
    MetaFeatureId::N, MetaFeatureId::Po, MetaFeatureId::P, MetaFeatureId::M};

inline constexpr std::array<MetaFeatureId, 4> kFloatMetaFeatures = {
    MetaFeatureId::Rc, MetaFeatureId::Mcp, MetaFeatureId::Mkd, MetaFeatureId::Xvar};

constexpr std::string_view name(MetaFeatureId id) {
    switch (id) {
        case MetaFeatureId::N: return "n";
        case MetaFeatureId::Po: return "po";
        case MetaFeatureId::P: return "p";
        case MetaFeatureId::M: return "m";
        case MetaFeatureId::Rc: return "rc";
        case MetaFeatureId::Mcp: return "mcp";
        case MetaFeatureId::Mkd: return "mkd";
        case MetaFeatureId::Xvar: return "xvar";
    }
    return "?";
}

constexpr bool is_integer_class(MetaFeatureId id) {
    return id == MetaFeatureId::N || id == MetaFeatureId::Po || id == MetaFeatureId::P ||
           id == MetaFeatureId::M;
}

inline double value_of(const MetaFeatures& mf, MetaFeatureId id) {
    switch (id) {
        case MetaFeatureId::N: return mf.n;
        case MetaFeatureId::Po: return mf.po;
        case MetaFeatureId::P: return mf.p;
        case MetaFeatureId::M: return mf.m;
        case MetaFeatureId::Rc: return mf.rc;
        case MetaFeatureId::Mcp: return mf.mcp;
        case MetaFeatureId::Mkd: return mf.mkd;
        case MetaFeatureId::Xvar: return mf.xvar;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline void validate(const MetaFeatures& mf) {
    auto fail = [](const char* msg) { throw ValidationError(std::string("meta-features: ") + msg); };
    for (MetaFeatureId id : kAllMetaFeatures) {
        if (!std::isfinite(value_of(mf, id))) fail("all fields must be finite");
    }
    if (mf.n < 1) fail("n must be >= 1");
    if (mf.po < 1) fail("po must be >= 1");
    if (mf.p < 1) fail("p must be >= 1");
    if (mf.m < 2) fail("m must be >= 2");
    if (mf.rc < 0 || mf.rc > 1) fail("rc must be in [0, 1]");
    if (mf.mcp > 1 || mf.mcp < 1.0 / mf.m - 1e-9) fail("mcp must be in [1/m, 1]");
    if (mf.mkd < 0) fail("mkd must be nonnegative");
    if (mf.xvar < 0) fail("xvar must be nonnegative");
}

// ---------------------------------------------------------------------------
// Grammar
//
// The integer/float dichotomy of the grammar: <I> vs <F> slots and the c_i
// vs c_f ephemeral classes.

enum class Kind { Integer, Float };

enum class Op { Exp, Neg, Add, Sub, Mul, TrueDiv, Pow, Max, Min, IfGreater };

inline constexpr std::array<Op, 10> kAllOps = {Op::Exp, Op::Neg, Op::Add, Op::Sub, Op::Mul,
                                               Op::TrueDiv, Op::Pow, Op::Max, Op::Min, Op::IfGreater};

inline constexpr std::array<Op, 7> kBinaryOps = {Op::Add, Op::Sub, Op::Mul, Op::TrueDiv,
                                                 Op::Pow, Op::Max, Op::Min};

constexpr int arity(Op op) {
    switch (op) {
        case Op::Exp:
        case Op::Neg: return 1;
        case Op::IfGreater: return 4;
        default: return 2;
    }
}

constexpr std::string_view name(Op op) {
    switch (op) {
        case Op::Exp: return "exp";
        case Op::Neg: return "neg";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::TrueDiv: return "truediv";
        case Op::Pow: return "pow";
        case Op::Max: return "max";
        case Op::Min: return "min";
        case Op::IfGreater: return "if_greater";
    }
    return "?";
}

// Round to nearest with halves away from zero.
inline double round_half_away(double x) { return std::round(x); }

// Maps a unit deviate to an ephemeral value: c_f ~ loguniform(2^-10, 2^0),
// c_i ~ round(loguniform(2^0, 2^10)). Split out from sampling so boundary
// behavior is directly testable.
inline double ephemeral_from_unit(Kind kind, double u) {
    if (kind == Kind::Float) return std::exp2(-10.0 + 10.0 * u);
    const double raw = std::exp2(10.0 * u);
    return std::clamp(round_half_away(raw), 1.0, 1024.0);
}

inline double sample_ephemeral(Kind kind, Rng& rng) {
    return ephemeral_from_unit(kind, rng.uniform01());
}

// ---------------------------------------------------------------------------
// Expression trees
//
// Immutable after construction; mutation operators build modified copies.
// Ephemeral values are tagged with their class so printing and typing stay
// faithful. Note the sampling ranges ([1,1024] for c_i, (0,1] for c_f) are
// enforced by sample_ephemeral and the ephemeral mutation, not by the
// constructor: published implementation defaults contain constants outside
// those ranges (e.g. 0) and must still be representable.

class Expr {
  public:
    enum class NodeKind { Operator, MetaFeature, Ephemeral };

    static Expr operation(Op op, std::vector<Expr> children) {
        if (children.size() != static_cast<std::size_t>(arity(op))) {
            throw ValidationError(std::string("operator ") + std::string(name(op)) + " expects " +
                                  std::to_string(arity(op)) + " children, got " +
                                  std::to_string(children.size()));
        }
        Expr e;
        e.node_ = NodeKind::Operator;
        e.op_ = op;
        e.children_ = std::move(children);
        return e;
    }

    static Expr meta(MetaFeatureId id) {
        Expr e;
        e.node_ = NodeKind::MetaFeature;
        e.meta_ = id;
        return e;
    }

    static Expr ephemeral(Kind kind, double value) {
        if (!std::isfinite(value)) throw ValidationError("ephemeral constants must be finite");
        Expr e;
        e.node_ = NodeKind::Ephemeral;
        e.ephemeral_kind_ = kind;
        e.value_ = value;
        return e;
    }

    NodeKind node() const { return node_; }
    bool is_terminal() const { return node_ != NodeKind::Operator; }

    Op op() const {
        assert(node_ == NodeKind::Operator);
        return op_;
    }

    MetaFeatureId meta_id() const {
        assert(node_ == NodeKind::MetaFeature);
        return meta_;
    }

    Kind ephemeral_kind() const {
        assert(node_ == NodeKind::Ephemeral);
        return ephemeral_kind_;
    }

    double ephemeral_value() const {
        assert(node_ == NodeKind::Ephemeral);
        return value_;
    }

    const std::vector<Expr>& children() const { return children_; }

    // Terminal class per the grammar; operator applications are <I>
    // productions and admissible anywhere.
    Kind term_class() const {
        switch (node_) {
            case NodeKind::MetaFeature: return is_integer_class(meta_) ? Kind::Integer : Kind::Float;
            case NodeKind::Ephemeral: return ephemeral_kind_;
            case NodeKind::Operator: return Kind::Integer;
        }
        return Kind::Integer;
    }

    // An <I> slot takes operator applications and integer-class terminals; an
    // <F> slot takes anything.
    bool fits_slot(Kind slot) const {
        if (slot == Kind::Float) return true;
        return !(is_terminal() && term_class() == Kind::Float);
    }

    bool operator==(const Expr& other) const {
        if (node_ != other.node_) return false;
        switch (node_) {
            case NodeKind::MetaFeature: return meta_ == other.meta_;
            case NodeKind::Ephemeral:
                return ephemeral_kind_ == other.ephemeral_kind_ && value_ == other.value_;
            case NodeKind::Operator: break;
        }
        if (op_ != other.op_) return false;
        return children_ == other.children_;
    }

  private:
    Expr() = default;

    NodeKind node_ = NodeKind::Ephemeral;
    Op op_ = Op::Add;
    MetaFeatureId meta_ = MetaFeatureId::N;
    Kind ephemeral_kind_ = Kind::Float;
    double value_ = 0.0;
    std::vector<Expr> children_;
};

inline bool structurally_valid(const Expr& e) {
    if (e.is_terminal()) return e.children().empty();
    if (e.children().size() != static_cast<std::size_t>(arity(e.op()))) return false;
    return std::all_of(e.children().begin(), e.children().end(),
                       [](const Expr& c) { return structurally_valid(c); });
}

inline bool well_typed(const Expr& e, Kind root_slot) {
    return structurally_valid(e) && e.fits_slot(root_slot);
}

// ---------------------------------------------------------------------------
// Evaluation
//
// Extended-real arithmetic: division by zero, overflow and invalid operations
// produce +-inf / NaN, which are data at this layer. NaN propagates through
// every operator except if_greater, where a NaN comparison selects the else
// branch.

inline double eval_pow(double base, double exponent) {
    if (std::isnan(base) || std::isnan(exponent)) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(base, exponent);
}

inline double eval_expr(const Expr& e, const MetaFeatures& mf) {
    switch (e.node()) {
        case Expr::NodeKind::MetaFeature: return value_of(mf, e.meta_id());
        case Expr::NodeKind::Ephemeral: return e.ephemeral_value();
        case Expr::NodeKind::Operator: break;
    }
    const auto& c = e.children();
    switch (e.op()) {
        case Op::Exp: return std::exp(eval_expr(c[0], mf));
        case Op::Neg: return -eval_expr(c[0], mf);
        case Op::Add: return eval_expr(c[0], mf) + eval_expr(c[1], mf);
        case Op::Sub: return eval_expr(c[0], mf) - eval_expr(c[1], mf);
        case Op::Mul: return eval_expr(c[0], mf) * eval_expr(c[1], mf);
        case Op::TrueDiv: return eval_expr(c[0], mf) / eval_expr(c[1], mf);
        case Op::Pow: return eval_pow(eval_expr(c[0], mf), eval_expr(c[1], mf));
        case Op::Max: {
            const double a = eval_expr(c[0], mf);
            const double b = eval_expr(c[1], mf);
            if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
            return a < b ? b : a;
        }
        case Op::Min: {
            const double a = eval_expr(c[0], mf);
            const double b = eval_expr(c[1], mf);
            if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
            return b < a ? b : a;
        }
        case Op::IfGreater:
            return eval_expr(c[0], mf) > eval_expr(c[1], mf) ? eval_expr(c[2], mf)
                                                             : eval_expr(c[3], mf);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Structural metrics

struct ExprMetrics {
    std::size_t depth = 0;       // bare terminal = 0
    std::size_t node_count = 1;  // all nodes, terminals included
};

inline ExprMetrics metrics(const Expr& e) {
    ExprMetrics m;
    if (e.is_terminal()) return m;
    std::size_t max_child_depth = 0;
    for (const Expr& c : e.children()) {
        const ExprMetrics cm = metrics(c);
        max_child_depth = std::max(max_child_depth, cm.depth);
        m.node_count += cm.node_count;
    }
    m.depth = 1 + max_child_depth;
    return m;
}

inline std::size_t depth(const Expr& e) { return metrics(e).depth; }
inline std::size_t node_count(const Expr& e) { return metrics(e).node_count; }

// ---------------------------------------------------------------------------
// Random generation
//
// Productions are chosen uniformly at each step; depth 0 forces a terminal.
// constant_only restricts terminals to ephemerals (used for the constant
// baseline search).

namespace detail {

inline Expr random_integer_terminal(Rng& rng, bool constant_only) {
    if (constant_only) return Expr::ephemeral(Kind::Integer, sample_ephemeral(Kind::Integer, rng));
    const std::uint64_t pick = rng.uniform_index(5);
    if (pick == 4) return Expr::ephemeral(Kind::Integer, sample_ephemeral(Kind::Integer, rng));
    return Expr::meta(kIntegerMetaFeatures[static_cast<std::size_t>(pick)]);
}

inline Expr random_float_terminal(Rng& rng, bool constant_only) {
    if (constant_only) return Expr::ephemeral(Kind::Float, sample_ephemeral(Kind::Float, rng));
    const std::uint64_t pick = rng.uniform_index(5);
    if (pick == 4) return Expr::ephemeral(Kind::Float, sample_ephemeral(Kind::Float, rng));
    return Expr::meta(kFloatMetaFeatures[static_cast<std::size_t>(pick)]);
}

// <F> terminal: either class, via <F> ::= <I> | <f>.
inline Expr random_any_terminal(Rng& rng, bool constant_only) {
    return rng.coin() ? random_integer_terminal(rng, constant_only)
                      : random_float_terminal(rng, constant_only);
}

inline Expr random_expr_impl(Kind slot, int depth_budget, Rng& rng, bool constant_only) {
    if (slot == Kind::Float) {
        if (depth_budget <= 0) return random_any_terminal(rng, constant_only);
        if (rng.coin()) return random_float_terminal(rng, constant_only);
        // fall through to the <I> production at the same depth budget
    } else if (depth_budget <= 0) {
        return random_integer_terminal(rng, constant_only);
    }
    switch (rng.uniform_index(4)) {
        case 0: return random_integer_terminal(rng, constant_only);
        case 1: {
            const Op op = rng.coin() ? Op::Exp : Op::Neg;
            std::vector<Expr> kids;
            kids.push_back(random_expr_impl(Kind::Float, depth_budget - 1, rng, constant_only));
            return Expr::operation(op, std::move(kids));
        }
        case 2: {
            const Op op = kBinaryOps[static_cast<std::size_t>(rng.uniform_index(kBinaryOps.size()))];
            std::vector<Expr> kids;
            for (int i = 0; i < 2; ++i)
                kids.push_back(random_expr_impl(Kind::Float, depth_budget - 1, rng, constant_only));
            return Expr::operation(op, std::move(kids));
        }
        default: {
            std::vector<Expr> kids;
            for (int i = 0; i < 4; ++i)
                kids.push_back(random_expr_impl(Kind::Float, depth_budget - 1, rng, constant_only));
            return Expr::operation(Op::IfGreater, std::move(kids));
        }
    }
}

}  // namespace detail

inline Expr random_expr(Kind slot, int max_depth, Rng& rng, bool constant_only = false) {
    if (max_depth < 0) throw ValidationError("random_expr: max_depth must be nonnegative");
    Expr e = detail::random_expr_impl(slot, max_depth, rng, constant_only);
    assert(well_typed(e, slot));
    return e;
}

// ---------------------------------------------------------------------------
// Printing
//
// Canonical prefix notation: truediv(mkd, xvar). Ephemerals print with
// shortest round-trip precision; float-class integral values keep a ".0"
// suffix so the class survives a round-trip.

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string format_ephemeral(Kind kind, double v) {
    std::string s = format_double(v);
    if (kind == Kind::Float && s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

inline void print_formula_to(const Expr& e, std::string& out) {
    switch (e.node()) {
        case Expr::NodeKind::MetaFeature:
            out += name(e.meta_id());
            return;
        case Expr::NodeKind::Ephemeral:
            out += format_ephemeral(e.ephemeral_kind(), e.ephemeral_value());
            return;
        case Expr::NodeKind::Operator: break;
    }
    out += name(e.op());
    out += '(';
    bool first = true;
    for (const Expr& c : e.children()) {
        if (!first) out += ", ";
        first = false;
        print_formula_to(c, out);
    }
    out += ')';
}

}  // namespace detail

inline std::string print_formula(const Expr& e) {
    std::string out;
    detail::print_formula_to(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing
//
// Recursive descent over the printed form. Numbers with a '.' or an exponent
// are float-class ephemerals, bare integers are integer-class. The root slot
// is enforced: a bare float terminal cannot fill an <I> slot.

namespace detail {

class FormulaParser {
  public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    Expr parse(Kind root_slot) {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw FormulaError("unexpected trailing input", pos_);
        if (!e.fits_slot(root_slot))
            throw FormulaError("float-class terminal not allowed in an integer slot", 0);
        return e;
    }

  private:
    static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
    static bool digit(char c) { return c >= '0' && c <= '9'; }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void expect(char c) {
        skip_ws();
        if (peek() != c)
            throw FormulaError(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    Expr parse_expr() {
        skip_ws();
        if (pos_ >= text_.size()) throw FormulaError("unexpected end of input", pos_);
        const char c = text_[pos_];
        if (ident_start(c)) return parse_symbol();
        if (digit(c) || c == '-' || c == '+') return parse_number();
        throw FormulaError("expected identifier or number", pos_);
    }

    Expr parse_symbol() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
        const std::string_view word = text_.substr(start, pos_ - start);
        skip_ws();
        if (peek() == '(') {
            const Op* op = nullptr;
            for (const Op& candidate : kAllOps) {
                if (name(candidate) == word) {
                    op = &candidate;
                    break;
                }
            }
            if (!op) throw FormulaError("unknown operator '" + std::string(word) + "'", start);
            ++pos_;
            std::vector<Expr> args;
            args.push_back(parse_expr());
            skip_ws();
            while (peek() == ',') {
                ++pos_;
                args.push_back(parse_expr());
                skip_ws();
            }
            expect(')');
            if (args.size() != static_cast<std::size_t>(arity(*op))) {
                throw FormulaError("operator '" + std::string(word) + "' expects " +
                                       std::to_string(arity(*op)) + " arguments, got " +
                                       std::to_string(args.size()),
                                   start);
            }
            return Expr::operation(*op, std::move(args));
        }
        for (MetaFeatureId id : kAllMetaFeatures) {
            if (name(id) == word) return Expr::meta(id);
        }
        throw FormulaError("unknown symbol '" + std::string(word) + "'", start);
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        bool is_float = false;
        if (peek() == '-' || peek() == '+') ++pos_;
        if (!digit(peek())) throw FormulaError("malformed number", start);
        while (digit(peek())) ++pos_;
        if (peek() == '.') {
            is_float = true;
            ++pos_;
            if (!digit(peek())) throw FormulaError("digits required after decimal point", pos_);
            while (digit(peek())) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E') {
            is_float = true;
            ++pos_;
            if (peek() == '-' || peek() == '+') ++pos_;
            if (!digit(peek())) throw FormulaError("malformed exponent", pos_);
            while (digit(peek())) ++pos_;
        }
        double value = 0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc{} || res.ptr != text_.data() + pos_)
            throw FormulaError("malformed number", start);
        return Expr::ephemeral(is_float ? Kind::Float : Kind::Integer, value);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_formula(std::string_view text, Kind root_slot = Kind::Float) {
    return detail::FormulaParser(text).parse(root_slot);
}

// ---------------------------------------------------------------------------
// Symbolic configurations: one expression per tunable hyperparameter.

struct SymbolicConfiguration {
    std::string algorithm;
    std::vector<Expr> components;

    bool operator==(const SymbolicConfiguration&) const = default;
};

inline std::string printed(const SymbolicConfiguration& c) {
    std::string out;
    for (std::size_t i = 0; i < c.components.size(); ++i) {
        if (i) out += "; ";
        detail::print_formula_to(c.components[i], out);
    }
    return out;
}

inline bool uses_meta_features(const Expr& e) {
    if (e.node() == Expr::NodeKind::MetaFeature) return true;
    return std::any_of(e.children().begin(), e.children().end(),
                       [](const Expr& c) { return uses_meta_features(c); });
}

inline bool uses_meta_features(const SymbolicConfiguration& c) {
    return std::any_of(c.components.begin(), c.components.end(),
                       [](const Expr& e) { return uses_meta_features(e); });
}

inline std::size_t max_component_depth(const SymbolicConfiguration& c) {
    std::size_t d = 0;
    for (const Expr& e : c.components) d = std::max(d, depth(e));
    return d;
}

inline std::size_t total_node_count(const SymbolicConfiguration& c) {
    std::size_t total = 0;
    for (const Expr& e : c.components) total += node_count(e);
    return total;
}

}  // namespace symdef

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "algctl/errors.hpp"
#include "algctl/numfmt.hpp"

namespace algctl {

// Variable environment: name -> value, kept sorted. Lookup of an unbound
// name throws; there is no silent default.
class Binding {
public:
    Binding() = default;

    Binding(std::initializer_list<std::pair<std::string, double>> init) {
        for (const auto& [name, value] : init) set(name, value);
    }

    Binding& set(std::string_view name, double value) {
        auto it = lower_bound(name);
        if (it != items_.end() && it->first == name)
            it->second = value;
        else
            items_.emplace(it, std::string(name), value);
        return *this;
    }

    const double* find(std::string_view name) const noexcept {
        auto it = lower_bound(name);
        if (it != items_.end() && it->first == name) return &it->second;
        return nullptr;
    }

    double get(std::string_view name) const {
        if (const double* v = find(name)) return *v;
        throw EvalError("unbound variable '" + std::string(name) + "'");
    }

    bool contains(std::string_view name) const noexcept { return find(name) != nullptr; }

    std::size_t size() const noexcept { return items_.size(); }

    const std::vector<std::pair<std::string, double>>& items() const noexcept { return items_; }

private:
    std::vector<std::pair<std::string, double>>::const_iterator lower_bound(std::string_view name) const {
        return std::lower_bound(items_.begin(), items_.end(), name,
                                [](const auto& item, std::string_view n) { return item.first < n; });
    }
    std::vector<std::pair<std::string, double>>::iterator lower_bound(std::string_view name) {
        return std::lower_bound(items_.begin(), items_.end(), name,
                                [](const auto& item, std::string_view n) { return item.first < n; });
    }

    std::vector<std::pair<std::string, double>> items_;
};

enum class NodeKind : std::uint8_t {
    Constant,
    Variable,
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
};

namespace detail {

inline constexpr std::array<std::pair<std::string_view, NodeKind>, 7> kFunctions{{
    {"abs", NodeKind::Abs},
    {"cos", NodeKind::Cos},
    {"exp", NodeKind::Exp},
    {"log", NodeKind::Log},
    {"sin", NodeKind::Sin},
    {"sqrt", NodeKind::Sqrt},
    {"tan", NodeKind::Tan},
}};

inline const NodeKind* function_kind(std::string_view name) {
    for (const auto& [fname, kind] : kFunctions)
        if (fname == name) return &kind;
    return nullptr;
}

// First-order dual number for forward-mode differentiation.
struct Dual {
    double v = 0.0;
    double d = 0.0;
};

} // namespace detail

// Immutable parsed expression. Nodes are stored in evaluation order
// (children always precede parents), so both plain and dual-number
// evaluation are single linear passes.
class Expression {
public:
    struct Node {
        NodeKind kind;
        std::int32_t a = -1;
        std::int32_t b = -1;
        std::int32_t var = -1;
        double value = 0.0;
    };

    Expression() { nodes_.push_back(Node{NodeKind::Constant, -1, -1, -1, 0.0}); }

    // --- construction -------------------------------------------------------

    static Expression parse(std::string_view source);

    static Expression constant(double v) {
        Expression e;
        e.nodes_.clear();
        e.nodes_.push_back(Node{NodeKind::Constant, -1, -1, -1, v});
        return e;
    }

    static Expression variable(std::string name) {
        Expression e;
        e.nodes_.clear();
        e.vars_.push_back(std::move(name));
        e.nodes_.push_back(Node{NodeKind::Variable, -1, -1, 0, 0.0});
        return e;
    }

    friend Expression operator+(const Expression& a, const Expression& b) { return combine(NodeKind::Add, a, b); }
    friend Expression operator-(const Expression& a, const Expression& b) { return combine(NodeKind::Sub, a, b); }
    friend Expression operator*(const Expression& a, const Expression& b) { return combine(NodeKind::Mul, a, b); }
    friend Expression operator/(const Expression& a, const Expression& b) { return combine(NodeKind::Div, a, b); }

    friend Expression operator-(const Expression& a) {
        Expression e = a;
        e.nodes_.push_back(Node{NodeKind::Neg, static_cast<std::int32_t>(e.nodes_.size() - 1), -1, -1, 0.0});
        return e;
    }

    // Returns a copy with variables renamed per `mapping` (names absent from
    // the map are kept). Two distinct variables may not collapse into one.
    Expression renamed(const std::map<std::string, std::string>& mapping) const;

    // --- queries ------------------------------------------------------------

    const std::vector<std::string>& free_variables() const noexcept { return vars_; }

    bool depends_on(std::string_view name) const noexcept {
        return std::binary_search(vars_.begin(), vars_.end(), name);
    }

    std::string to_string() const { return render(static_cast<std::int32_t>(nodes_.size()) - 1); }

    // --- evaluation ---------------------------------------------------------

    double evaluate(const Binding& env) const {
        std::vector<double> slots = bind_slots(env);
        return eval_pass<double>(slots);
    }

    // Exact forward-mode partial derivative with respect to `var` at `env`.
    // `var` must be bound; a variable absent from the tree differentiates
    // to zero.
    double derivative(std::string_view var, const Binding& env) const {
        env.get(var); // unbound names are an error even if the tree ignores them
        std::vector<double> slots = bind_slots(env);
        std::vector<detail::Dual> dual(slots.size());
        for (std::size_t i = 0; i < slots.size(); ++i) dual[i] = {slots[i], 0.0};
        auto it = std::lower_bound(vars_.begin(), vars_.end(), var);
        if (it != vars_.end() && *it == var) dual[static_cast<std::size_t>(it - vars_.begin())].d = 1.0;
        return eval_pass<detail::Dual>(dual).d;
    }

    // Stacked derivative() calls, one per requested name.
    std::vector<double> gradient(std::span<const std::string> vars, const Binding& env) const {
        std::vector<double> g;
        g.reserve(vars.size());
        for (const std::string& v : vars) g.push_back(derivative(v, env));
        return g;
    }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }

private:
    std::vector<Node> nodes_;
    std::vector<std::string> vars_; // sorted, unique

    friend class ExprParser;

    std::vector<double> bind_slots(const Binding& env) const {
        std::vector<double> slots(vars_.size());
        for (std::size_t i = 0; i < vars_.size(); ++i) slots[i] = env.get(vars_[i]);
        return slots;
    }

    [[noreturn]] void domain_fail(std::int32_t node, const std::string& what) const {
        throw DomainError(what, render(node));
    }

    template <class T>
    T eval_pass(std::span<const T> slots) const;

    template <class T>
    T eval_pass(const std::vector<T>& slots) const {
        return eval_pass<T>(std::span<const T>(slots));
    }

    static Expression combine(NodeKind op, const Expression& a, const Expression& b);

    static int precedence(NodeKind k) {
        switch (k) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        default: return 5;
        }
    }

    std::string render(std::int32_t idx) const;
};

// ---------------------------------------------------------------------------
// evaluation

namespace detail {

inline double val(double x) { return x; }
inline double val(const Dual& x) { return x.v; }

} // namespace detail

template <class T>
T Expression::eval_pass(std::span<const T> slots) const {
    using detail::Dual;
    constexpr bool dual_mode = std::is_same_v<T, Dual>;
    std::vector<T> out(nodes_.size());

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        const std::int32_t idx = static_cast<std::int32_t>(i);
        T r{};
        switch (n.kind) {
        case NodeKind::Constant:
            if constexpr (dual_mode) r = {n.value, 0.0};
            else r = n.value;
            break;
        case NodeKind::Variable:
            r = slots[static_cast<std::size_t>(n.var)];
            break;
        case NodeKind::Neg: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if constexpr (dual_mode) r = {-a.v, -a.d};
            else r = -a;
            break;
        }
        case NodeKind::Sin: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if constexpr (dual_mode) r = {std::sin(a.v), a.d * std::cos(a.v)};
            else r = std::sin(a);
            break;
        }
        case NodeKind::Cos: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if constexpr (dual_mode) r = {std::cos(a.v), -a.d * std::sin(a.v)};
            else r = std::cos(a);
            break;
        }
        case NodeKind::Tan: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if constexpr (dual_mode) {
                const double c = std::cos(a.v);
                r = {std::tan(a.v), a.d == 0.0 ? 0.0 : a.d / (c * c)};
            } else {
                r = std::tan(a);
            }
            break;
        }
        case NodeKind::Exp: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if constexpr (dual_mode) {
                const double e = std::exp(a.v);
                r = {e, a.d * e};
            } else {
                r = std::exp(a);
            }
            break;
        }
        case NodeKind::Log: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if (detail::val(a) <= 0.0) domain_fail(idx, "log of non-positive value");
            if constexpr (dual_mode) r = {std::log(a.v), a.d / a.v};
            else r = std::log(a);
            break;
        }
        case NodeKind::Sqrt: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if (detail::val(a) < 0.0) domain_fail(idx, "sqrt of negative value");
            if constexpr (dual_mode) {
                const double s = std::sqrt(a.v);
                double d = 0.0;
                if (a.d != 0.0) {
                    if (s == 0.0) domain_fail(idx, "derivative of sqrt at zero");
                    d = 0.5 * a.d / s;
                }
                r = {s, d};
            } else {
                r = std::sqrt(a);
            }
            break;
        }
        case NodeKind::Abs: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            if constexpr (dual_mode) {
                const double sign = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
                r = {std::fabs(a.v), a.d * sign};
            } else {
                r = std::fabs(a);
            }
            break;
        }
        case NodeKind::Add: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            const T& b = out[static_cast<std::size_t>(n.b)];
            if constexpr (dual_mode) r = {a.v + b.v, a.d + b.d};
            else r = a + b;
            break;
        }
        case NodeKind::Sub: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            const T& b = out[static_cast<std::size_t>(n.b)];
            if constexpr (dual_mode) r = {a.v - b.v, a.d - b.d};
            else r = a - b;
            break;
        }
        case NodeKind::Mul: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            const T& b = out[static_cast<std::size_t>(n.b)];
            if constexpr (dual_mode) r = {a.v * b.v, a.d * b.v + a.v * b.d};
            else r = a * b;
            break;
        }
        case NodeKind::Div: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            const T& b = out[static_cast<std::size_t>(n.b)];
            if (detail::val(b) == 0.0) domain_fail(idx, "division by zero");
            if constexpr (dual_mode) r = {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
            else r = a / b;
            break;
        }
        case NodeKind::Pow: {
            const T& a = out[static_cast<std::size_t>(n.a)];
            const T& b = out[static_cast<std::size_t>(n.b)];
            const double bv = detail::val(a);
            const double ev = detail::val(b);
            if (bv == 0.0 && ev < 0.0) domain_fail(idx, "zero raised to a negative power");
            if (bv < 0.0 && ev != std::trunc(ev)) domain_fail(idx, "fractional power of negative base");
            if constexpr (dual_mode) {
                const double v = std::pow(a.v, b.v);
                double d = 0.0;
                if (b.d != 0.0) {
                    if (a.v <= 0.0) domain_fail(idx, "derivative of power with non-positive base and varying exponent");
                    d += v * std::log(a.v) * b.d;
                }
                if (a.d != 0.0) d += b.v * std::pow(a.v, b.v - 1.0) * a.d;
                r = {v, d};
            } else {
                r = std::pow(a, b);
            }
            break;
        }
        }
        if constexpr (dual_mode) {
            if (!std::isfinite(r.v) || !std::isfinite(r.d)) domain_fail(idx, "non-finite value");
        } else {
            if (!std::isfinite(r)) domain_fail(idx, "non-finite value");
        }
        out[i] = r;
    }
    return out.back();
}

// ---------------------------------------------------------------------------
// structural operations

inline Expression Expression::combine(NodeKind op, const Expression& a, const Expression& b) {
    Expression e;
    e.nodes_.clear();

    // merged, sorted variable table
    e.vars_ = a.vars_;
    for (const std::string& v : b.vars_)
        if (!std::binary_search(e.vars_.begin(), e.vars_.end(), v)) e.vars_.push_back(v);
    std::sort(e.vars_.begin(), e.vars_.end());

    auto slot_of = [&e](const std::string& name) {
        return static_cast<std::int32_t>(std::lower_bound(e.vars_.begin(), e.vars_.end(), name) - e.vars_.begin());
    };

    e.nodes_.reserve(a.nodes_.size() + b.nodes_.size() + 1);
    for (Node n : a.nodes_) {
        if (n.kind == NodeKind::Variable) n.var = slot_of(a.vars_[static_cast<std::size_t>(n.var)]);
        e.nodes_.push_back(n);
    }
    const std::int32_t off = static_cast<std::int32_t>(a.nodes_.size());
    for (Node n : b.nodes_) {
        if (n.a >= 0) n.a += off;
        if (n.b >= 0) n.b += off;
        if (n.kind == NodeKind::Variable) n.var = slot_of(b.vars_[static_cast<std::size_t>(n.var)]);
        e.nodes_.push_back(n);
    }
    e.nodes_.push_back(Node{op, off - 1, static_cast<std::int32_t>(e.nodes_.size()) - 1, -1, 0.0});
    return e;
}

inline Expression Expression::renamed(const std::map<std::string, std::string>& mapping) const {
    std::vector<std::string> new_names;
    new_names.reserve(vars_.size());
    for (const std::string& v : vars_) {
        auto it = mapping.find(v);
        new_names.push_back(it == mapping.end() ? v : it->second);
    }
    {
        std::vector<std::string> check = new_names;
        std::sort(check.begin(), check.end());
        if (std::adjacent_find(check.begin(), check.end()) != check.end())
            throw Error("variable renaming collapses two distinct variables");
    }

    Expression e = *this;
    std::vector<std::string> sorted = new_names;
    std::sort(sorted.begin(), sorted.end());
    e.vars_ = sorted;
    for (Node& n : e.nodes_) {
        if (n.kind != NodeKind::Variable) continue;
        const std::string& name = new_names[static_cast<std::size_t>(n.var)];
        n.var = static_cast<std::int32_t>(std::lower_bound(sorted.begin(), sorted.end(), name) - sorted.begin());
    }
    return e;
}

inline std::string Expression::render(std::int32_t idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    auto wrap = [this](std::int32_t child, bool parens) {
        std::string s = render(child);
        return parens ? "(" + s + ")" : s;
    };
    auto child_prec = [this](std::int32_t child) {
        return precedence(nodes_[static_cast<std::size_t>(child)].kind);
    };

    switch (n.kind) {
    case NodeKind::Constant: return fmt_double(n.value);
    case NodeKind::Variable: return vars_[static_cast<std::size_t>(n.var)];
    case NodeKind::Sin: return "sin(" + render(n.a) + ")";
    case NodeKind::Cos: return "cos(" + render(n.a) + ")";
    case NodeKind::Tan: return "tan(" + render(n.a) + ")";
    case NodeKind::Exp: return "exp(" + render(n.a) + ")";
    case NodeKind::Log: return "log(" + render(n.a) + ")";
    case NodeKind::Sqrt: return "sqrt(" + render(n.a) + ")";
    case NodeKind::Abs: return "abs(" + render(n.a) + ")";
    case NodeKind::Neg: return "-" + wrap(n.a, child_prec(n.a) < 3);
    case NodeKind::Add: return wrap(n.a, false) + "+" + wrap(n.b, child_prec(n.b) <= 1);
    case NodeKind::Sub: return wrap(n.a, false) + "-" + wrap(n.b, child_prec(n.b) <= 1);
    case NodeKind::Mul: return wrap(n.a, child_prec(n.a) < 2) + "*" + wrap(n.b, child_prec(n.b) <= 2);
    case NodeKind::Div: return wrap(n.a, child_prec(n.a) < 2) + "/" + wrap(n.b, child_prec(n.b) <= 2);
    case NodeKind::Pow: return wrap(n.a, child_prec(n.a) < 5) + "^" + wrap(n.b, child_prec(n.b) < 3);
    }
    return {};
}

// ---------------------------------------------------------------------------
// parser
//
// expr   := term (("+"|"-") term)*
// term   := factor (("*"|"/") factor)*
// factor := "-" factor | power
// power  := atom ("^" factor)?
// atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

class ExprParser {
public:
    explicit ExprParser(std::string_view src) : src_(src) {}

    Expression run() {
        std::int32_t root = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail(pos_, "end of input or an operator");
        (void)root;
        return finalize();
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    std::vector<Expression::Node> nodes_;
    std::vector<std::string> var_names_; // first-appearance order

    [[noreturn]] void fail(std::size_t offset, const std::string& expected) {
        throw ParseError(offset, expected,
                         "syntax error at byte " + std::to_string(offset) + ": expected " + expected);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    std::int32_t push(Expression::Node n) {
        nodes_.push_back(n);
        return static_cast<std::int32_t>(nodes_.size()) - 1;
    }

    std::int32_t parse_expr() {
        std::int32_t lhs = parse_term();
        for (;;) {
            skip_ws();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                const NodeKind op = src_[pos_] == '+' ? NodeKind::Add : NodeKind::Sub;
                ++pos_;
                std::int32_t rhs = parse_term();
                lhs = push({op, lhs, rhs, -1, 0.0});
            } else {
                return lhs;
            }
        }
    }

    std::int32_t parse_term() {
        std::int32_t lhs = parse_factor();
        for (;;) {
            skip_ws();
            if (pos_ < src_.size() && (src_[pos_] == '*' || src_[pos_] == '/')) {
                const NodeKind op = src_[pos_] == '*' ? NodeKind::Mul : NodeKind::Div;
                ++pos_;
                std::int32_t rhs = parse_factor();
                lhs = push({op, lhs, rhs, -1, 0.0});
            } else {
                return lhs;
            }
        }
    }

    std::int32_t parse_factor() {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '-') {
            ++pos_;
            std::int32_t inner = parse_factor();
            return push({NodeKind::Neg, inner, -1, -1, 0.0});
        }
        return parse_power();
    }

    std::int32_t parse_power() {
        std::int32_t base = parse_atom();
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '^') {
            ++pos_;
            std::int32_t expo = parse_factor(); // right-associative
            return push({NodeKind::Pow, base, expo, -1, 0.0});
        }
        return base;
    }

    std::int32_t parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail(pos_, "a number, identifier, or '('");
        const char c = src_[pos_];

        if (c == '(') {
            ++pos_;
            std::int32_t inner = parse_expr();
            if (!peek_is(')')) fail(pos_, "')'");
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        fail(pos_, "a number, identifier, or '('");
    }

    std::int32_t parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
                fail(pos_, "a digit after the decimal point");
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
                fail(pos_, "a digit in the exponent");
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        const std::string_view text = src_.substr(start, pos_ - start);
        double value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size()) fail(start, "a valid number");
        return push({NodeKind::Constant, -1, -1, -1, value});
    }

    std::int32_t parse_ident() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        const NodeKind* fn = detail::function_kind(name);

        if (peek_is('(')) {
            if (!fn)
                throw ParseError(start, "a known function name",
                                 "unknown function '" + name + "' at byte " + std::to_string(start));
            ++pos_;
            std::int32_t arg = parse_expr();
            if (!peek_is(')')) fail(pos_, "')'");
            ++pos_;
            return push({*fn, arg, -1, -1, 0.0});
        }
        if (fn)
            throw ParseError(start, "'(' after a function name",
                             "reserved function name '" + name + "' used as a variable at byte " +
                                 std::to_string(start));

        std::int32_t slot = -1;
        for (std::size_t i = 0; i < var_names_.size(); ++i)
            if (var_names_[i] == name) slot = static_cast<std::int32_t>(i);
        if (slot < 0) {
            slot = static_cast<std::int32_t>(var_names_.size());
            var_names_.push_back(name);
        }
        return push({NodeKind::Variable, -1, -1, slot, 0.0});
    }

    Expression finalize() {
        Expression e;
        e.nodes_ = std::move(nodes_);
        std::vector<std::string> sorted = var_names_;
        std::sort(sorted.begin(), sorted.end());
        e.vars_ = sorted;
        for (Expression::Node& n : e.nodes_) {
            if (n.kind != NodeKind::Variable) continue;
            const std::string& name = var_names_[static_cast<std::size_t>(n.var)];
            n.var = static_cast<std::int32_t>(std::lower_bound(sorted.begin(), sorted.end(), name) - sorted.begin());
        }
        return e;
    }
};

inline Expression Expression::parse(std::string_view source) { return ExprParser(source).run(); }

inline Expression parse(std::string_view source) { return Expression::parse(source); }

} // namespace algctl

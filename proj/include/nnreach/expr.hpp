#pragma once

#include "nnreach/interval.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nnreach {

enum class Func { cos, sin, tan, exp, sigmoid, tanh };
enum class BinaryOp { add, sub, mul, div };

const char* func_name(Func f);

/// Immutable expression tree of the dynamics DSL. Copies share structure.
class Expr {
public:
    enum class Kind { var, constant, neg, binary, pow, call };

    Expr();  // the constant 0

    static Expr var(std::string name);
    static Expr constant(double value);
    static Expr neg(Expr operand);
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs);
    static Expr pow(Expr base, unsigned exponent);
    static Expr call(Func f, Expr arg);

    Kind kind() const;
    const std::string& name() const;
    double value() const;
    BinaryOp op() const;
    Func func() const;
    unsigned exponent() const;
    /// Operand of neg/pow/call, left operand of binary.
    const Expr& lhs() const;
    const Expr& rhs() const;

    bool is_constant(double v) const { return kind() == Kind::constant && value() == v; }

    friend bool operator==(const Expr& a, const Expr& b);

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, std::vector<std::string> expected, std::string lexeme);
    std::size_t offset() const { return offset_; }
    const std::vector<std::string>& expected() const { return expected_; }
    const std::string& lexeme() const { return lexeme_; }

private:
    std::size_t offset_;
    std::vector<std::string> expected_;
    std::string lexeme_;
};

class UnboundVariable : public std::runtime_error {
public:
    explicit UnboundVariable(const std::string& name)
        : std::runtime_error("unbound variable '" + name + "'"), name_(name)
    {
    }
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

/// Parse infix text. Precedence: ^ > unary minus > * / > + -, all binary
/// operators left-associative, integer literal exponents only.
Expr parse_expr(std::string_view text);

/// Canonical printer; parse_expr(to_string(e)) == e for parsed trees.
std::string to_string(const Expr& e);

/// Shortest decimal text that round-trips to `v`.
std::string format_number(double v);

/// Light algebraic cleanup: constant folding and 0/1 identities.
Expr simplify(const Expr& e);

Expr differentiate(const Expr& e, std::string_view var);

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& repl);

std::vector<std::string> free_variables(const Expr& e);
bool references_any(const Expr& e, std::span<const std::string> names);
bool contains_func(const Expr& e, Func f);

/// Every `tan(...)` argument is free of `state_vars`.
bool tan_arguments_constant(const Expr& e, std::span<const std::string> state_vars);

/// Denominators of every division in `e`.
std::vector<Expr> denominators(const Expr& e);

// Carrier primitives for scalar and interval evaluation. Taylor models
// provide their own overloads in taylor.hpp.
double apply_func(Func f, double x);
Interval apply_func(Func f, const Interval& x);
inline double pow_int(double x, unsigned n)
{
    double r = 1.0;
    for (unsigned i = 0; i < n; ++i)
        r *= x;
    return r;
}
inline Interval pow_int(const Interval& x, unsigned n) { return pow(x, n); }

/// Expression flattened to a postfix program over indexed variables.
class CompiledExpr {
public:
    CompiledExpr() = default;
    static CompiledExpr compile(const Expr& e, std::span<const std::string> names);

    /// Evaluate with `vars[i]` bound to names[i]; `lift(double)` produces a
    /// carrier constant.
    template <class T, class Lift>
    T run(std::span<const T> vars, Lift&& lift) const;

    bool is_zero() const { return code_.size() == 1 && code_[0].op == Op::constant && code_[0].value == 0.0; }
    const std::vector<int>& used_variables() const { return used_; }

private:
    enum class Op { var, constant, neg, add, sub, mul, div, pow, call };
    struct Instr {
        Op op;
        int index = 0;
        double value = 0.0;
        Func func = Func::exp;
    };
    void emit(const Expr& e, std::span<const std::string> names);

    std::vector<Instr> code_;
    std::vector<int> used_;
};

template <class T, class Lift>
T CompiledExpr::run(std::span<const T> vars, Lift&& lift) const
{
    std::vector<T> stack;
    stack.reserve(code_.size());
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::var:
            stack.push_back(vars[static_cast<std::size_t>(in.index)]);
            break;
        case Op::constant:
            stack.push_back(lift(in.value));
            break;
        case Op::neg:
            stack.back() = -stack.back();
            break;
        case Op::pow:
            stack.back() = pow_int(stack.back(), static_cast<unsigned>(in.index));
            break;
        case Op::call:
            stack.back() = apply_func(in.func, stack.back());
            break;
        default: {
            T rhs = std::move(stack.back());
            stack.pop_back();
            T& lhs = stack.back();
            switch (in.op) {
            case Op::add: lhs = lhs + rhs; break;
            case Op::sub: lhs = lhs - rhs; break;
            case Op::mul: lhs = lhs * rhs; break;
            default: lhs = lhs / rhs; break;
            }
        }
        }
    }
    return std::move(stack.back());
}

/// Evaluate with a name -> value environment (scalar or interval carrier).
template <class T>
T evaluate(const Expr& e, const std::map<std::string, T, std::less<>>& env)
{
    std::vector<std::string> names;
    std::vector<T> values;
    for (const auto& name : free_variables(e)) {
        auto it = env.find(name);
        if (it == env.end())
            throw UnboundVariable(name);
        names.push_back(name);
        values.push_back(it->second);
    }
    const CompiledExpr c = CompiledExpr::compile(e, names);
    return c.run<T>(std::span<const T>(values), [](double v) { return T(v); });
}

} // namespace nnreach

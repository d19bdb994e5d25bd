#include "nnreach/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace nnreach {

struct Expr::Node {
    Kind kind = Kind::constant;
    std::string name;
    double value = 0.0;
    BinaryOp op = BinaryOp::add;
    Func func = Func::exp;
    unsigned exponent = 0;
    Expr lhs;
    Expr rhs;

    Node() = default;
    Node(Kind k) : kind(k) {}
};

// A null node is the constant 0, which keeps default construction trivial.
Expr::Expr() = default;

Expr Expr::var(std::string name)
{
    auto n = std::make_shared<Node>(Kind::var);
    n->name = std::move(name);
    return Expr(std::move(n));
}

Expr Expr::constant(double value)
{
    auto n = std::make_shared<Node>(Kind::constant);
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::neg(Expr operand)
{
    auto n = std::make_shared<Node>(Kind::neg);
    n->lhs = std::move(operand);
    return Expr(std::move(n));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs)
{
    auto n = std::make_shared<Node>(Kind::binary);
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return Expr(std::move(n));
}

Expr Expr::pow(Expr base, unsigned exponent)
{
    auto n = std::make_shared<Node>(Kind::pow);
    n->lhs = std::move(base);
    n->exponent = exponent;
    return Expr(std::move(n));
}

Expr Expr::call(Func f, Expr arg)
{
    auto n = std::make_shared<Node>(Kind::call);
    n->func = f;
    n->lhs = std::move(arg);
    return Expr(std::move(n));
}

namespace {
const std::string kEmptyName;
const Expr kZero;
} // namespace

Expr::Kind Expr::kind() const { return node_ ? node_->kind : Kind::constant; }
const std::string& Expr::name() const { return node_ ? node_->name : kEmptyName; }
double Expr::value() const { return node_ ? node_->value : 0.0; }
BinaryOp Expr::op() const { return node_ ? node_->op : BinaryOp::add; }
Func Expr::func() const { return node_ ? node_->func : Func::exp; }
unsigned Expr::exponent() const { return node_ ? node_->exponent : 0; }
const Expr& Expr::lhs() const { return node_ ? node_->lhs : kZero; }
const Expr& Expr::rhs() const { return node_ ? node_->rhs : kZero; }

bool operator==(const Expr& a, const Expr& b)
{
    if (a.node_ == b.node_)
        return true;
    if (a.kind() != b.kind())
        return false;
    switch (a.kind()) {
    case Expr::Kind::var: return a.name() == b.name();
    case Expr::Kind::constant: return a.value() == b.value();
    case Expr::Kind::neg: return a.lhs() == b.lhs();
    case Expr::Kind::binary: return a.op() == b.op() && a.lhs() == b.lhs() && a.rhs() == b.rhs();
    case Expr::Kind::pow: return a.exponent() == b.exponent() && a.lhs() == b.lhs();
    case Expr::Kind::call: return a.func() == b.func() && a.lhs() == b.lhs();
    }
    return false;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::div, a, b); }
Expr operator-(const Expr& a) { return Expr::neg(a); }

const char* func_name(Func f)
{
    switch (f) {
    case Func::cos: return "cos";
    case Func::sin: return "sin";
    case Func::tan: return "tan";
    case Func::exp: return "exp";
    case Func::sigmoid: return "sigmoid";
    case Func::tanh: return "tanh";
    }
    return "?";
}

namespace {

std::optional<Func> func_from_name(std::string_view s)
{
    for (Func f : {Func::cos, Func::sin, Func::tan, Func::exp, Func::sigmoid, Func::tanh})
        if (s == func_name(f))
            return f;
    return std::nullopt;
}

std::string join_expected(const std::vector<std::string>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ", ";
        out += v[i];
    }
    return out;
}

// ---------------------------------------------------------------- lexer

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, end };

struct Token {
    Tok kind;
    std::size_t offset;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    Token next()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
        const std::size_t start = pos_;
        if (pos_ >= s_.size())
            return {Tok::end, start, "<end>"};
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                ++pos_;
            if (pos_ < s_.size() && s_[pos_] == '.') {
                ++pos_;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                    ++pos_;
            }
            if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
                std::size_t p = pos_ + 1;
                if (p < s_.size() && (s_[p] == '+' || s_[p] == '-'))
                    ++p;
                if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
                    pos_ = p;
                    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                        ++pos_;
                }
            }
            return {Tok::number, start, std::string(s_.substr(start, pos_ - start))};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            return {Tok::ident, start, std::string(s_.substr(start, pos_ - start))};
        }
        ++pos_;
        switch (c) {
        case '+': return {Tok::plus, start, "+"};
        case '-': return {Tok::minus, start, "-"};
        case '*': return {Tok::star, start, "*"};
        case '/': return {Tok::slash, start, "/"};
        case '^': return {Tok::caret, start, "^"};
        case '(': return {Tok::lparen, start, "("};
        case ')': return {Tok::rparen, start, ")"};
        default:
            throw ParseError(start, {"number", "identifier", "operator", "("}, std::string(1, c));
        }
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- parser

class Parser {
public:
    explicit Parser(std::string_view s) : lex_(s) { advance(); }

    Expr parse_all()
    {
        Expr e = parse_sum();
        if (cur_.kind != Tok::end)
            fail({"+", "-", "*", "/", "^", "<end>"});
        return e;
    }

private:
    void advance() { cur_ = lex_.next(); }

    [[noreturn]] void fail(std::vector<std::string> expected) const
    {
        throw ParseError(cur_.offset, std::move(expected), cur_.text);
    }

    Expr parse_sum()
    {
        Expr e = parse_product();
        while (cur_.kind == Tok::plus || cur_.kind == Tok::minus) {
            const BinaryOp op = cur_.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub;
            advance();
            e = Expr::binary(op, e, parse_product());
        }
        return e;
    }

    Expr parse_product()
    {
        Expr e = parse_unary();
        while (cur_.kind == Tok::star || cur_.kind == Tok::slash) {
            const BinaryOp op = cur_.kind == Tok::star ? BinaryOp::mul : BinaryOp::div;
            advance();
            e = Expr::binary(op, e, parse_unary());
        }
        return e;
    }

    Expr parse_unary()
    {
        if (cur_.kind == Tok::minus) {
            advance();
            Expr operand = parse_unary();
            // negative literals are constants, so printed trees parse back unchanged
            if (operand.kind() == Expr::Kind::constant)
                return Expr::constant(-operand.value());
            return Expr::neg(operand);
        }
        return parse_power();
    }

    Expr parse_power()
    {
        Expr e = parse_primary();
        while (cur_.kind == Tok::caret) {
            advance();
            if (cur_.kind != Tok::number || cur_.text.find_first_not_of("0123456789") != std::string::npos)
                fail({"non-negative integer exponent"});
            unsigned n = 0;
            auto [ptr, ec] = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), n);
            if (ec != std::errc())
                fail({"non-negative integer exponent"});
            advance();
            e = Expr::pow(e, n);
        }
        return e;
    }

    Expr parse_primary()
    {
        switch (cur_.kind) {
        case Tok::number: {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), v);
            if (ec != std::errc() || ptr != cur_.text.data() + cur_.text.size())
                fail({"number"});
            advance();
            return Expr::constant(v);
        }
        case Tok::ident: {
            const std::string name = cur_.text;
            advance();
            if (auto f = func_from_name(name)) {
                if (cur_.kind != Tok::lparen)
                    fail({"("});
                advance();
                Expr arg = parse_sum();
                if (cur_.kind != Tok::rparen)
                    fail({")"});
                advance();
                return Expr::call(*f, arg);
            }
            if (cur_.kind == Tok::lparen)
                throw ParseError(cur_.offset, {"operator", "<end>"}, "(");
            return Expr::var(name);
        }
        case Tok::lparen: {
            advance();
            Expr e = parse_sum();
            if (cur_.kind != Tok::rparen)
                fail({")"});
            advance();
            return e;
        }
        default:
            fail({"number", "identifier", "function", "(", "-"});
        }
    }

    Lexer lex_;
    Token cur_{Tok::end, 0, ""};
};

// ---------------------------------------------------------------- printer

int precedence(const Expr& e)
{
    switch (e.kind()) {
    case Expr::Kind::binary:
        return (e.op() == BinaryOp::add || e.op() == BinaryOp::sub) ? 1 : 2;
    case Expr::Kind::neg: return 3;
    case Expr::Kind::pow: return 4;
    case Expr::Kind::constant: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    default: return 5;
    }
}

void print(const Expr& e, int min_prec, std::string& out)
{
    const bool paren = precedence(e) < min_prec;
    if (paren)
        out += '(';
    switch (e.kind()) {
    case Expr::Kind::var: out += e.name(); break;
    case Expr::Kind::constant: out += format_number(e.value()); break;
    case Expr::Kind::neg:
        out += '-';
        print(e.lhs(), 3, out);
        break;
    case Expr::Kind::binary: {
        const int p = precedence(e);
        print(e.lhs(), p, out);
        switch (e.op()) {
        case BinaryOp::add: out += " + "; break;
        case BinaryOp::sub: out += " - "; break;
        case BinaryOp::mul: out += '*'; break;
        case BinaryOp::div: out += '/'; break;
        }
        print(e.rhs(), p + 1, out);
        break;
    }
    case Expr::Kind::pow:
        print(e.lhs(), 5, out);
        out += '^';
        out += std::to_string(e.exponent());
        break;
    case Expr::Kind::call:
        out += func_name(e.func());
        out += '(';
        print(e.lhs(), 0, out);
        out += ')';
        break;
    }
    if (paren)
        out += ')';
}

// ---------------------------------------------------------------- algebra

Expr mk_neg(const Expr& a)
{
    if (a.kind() == Expr::Kind::constant)
        return Expr::constant(-a.value());
    if (a.kind() == Expr::Kind::neg)
        return a.lhs();
    return Expr::neg(a);
}

Expr mk_add(const Expr& a, const Expr& b)
{
    if (a.is_constant(0.0))
        return b;
    if (b.is_constant(0.0))
        return a;
    if (a.kind() == Expr::Kind::constant && b.kind() == Expr::Kind::constant)
        return Expr::constant(a.value() + b.value());
    return a + b;
}

Expr mk_sub(const Expr& a, const Expr& b)
{
    if (b.is_constant(0.0))
        return a;
    if (a.is_constant(0.0))
        return mk_neg(b);
    if (a.kind() == Expr::Kind::constant && b.kind() == Expr::Kind::constant)
        return Expr::constant(a.value() - b.value());
    return a - b;
}

Expr mk_mul(const Expr& a, const Expr& b)
{
    if (a.is_constant(0.0) || b.is_constant(0.0))
        return Expr::constant(0.0);
    if (a.is_constant(1.0))
        return b;
    if (b.is_constant(1.0))
        return a;
    if (a.is_constant(-1.0))
        return mk_neg(b);
    if (b.is_constant(-1.0))
        return mk_neg(a);
    if (a.kind() == Expr::Kind::constant && b.kind() == Expr::Kind::constant)
        return Expr::constant(a.value() * b.value());
    return a * b;
}

Expr mk_div(const Expr& a, const Expr& b)
{
    if (a.is_constant(0.0))
        return Expr::constant(0.0);
    if (b.is_constant(1.0))
        return a;
    if (a.kind() == Expr::Kind::constant && b.kind() == Expr::Kind::constant && b.value() != 0.0)
        return Expr::constant(a.value() / b.value());
    return a / b;
}

Expr mk_pow(const Expr& a, unsigned n)
{
    if (n == 0)
        return Expr::constant(1.0);
    if (n == 1)
        return a;
    if (a.kind() == Expr::Kind::constant)
        return Expr::constant(pow_int(a.value(), n));
    return Expr::pow(a, n);
}

void collect_vars(const Expr& e, std::set<std::string>& out)
{
    switch (e.kind()) {
    case Expr::Kind::var: out.insert(e.name()); break;
    case Expr::Kind::constant: break;
    case Expr::Kind::binary:
        collect_vars(e.lhs(), out);
        collect_vars(e.rhs(), out);
        break;
    default: collect_vars(e.lhs(), out);
    }
}

} // namespace

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected, std::string lexeme)
    : std::runtime_error("parse error at offset " + std::to_string(offset) + ": expected " +
                         join_expected(expected) + ", got '" + lexeme + "'"),
      offset_(offset), expected_(std::move(expected)), lexeme_(std::move(lexeme))
{
}

Expr parse_expr(std::string_view text) { return Parser(text).parse_all(); }

std::string format_number(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string to_string(const Expr& e)
{
    std::string out;
    print(e, 0, out);
    return out;
}

Expr simplify(const Expr& e)
{
    switch (e.kind()) {
    case Expr::Kind::var:
    case Expr::Kind::constant: return e;
    case Expr::Kind::neg: return mk_neg(simplify(e.lhs()));
    case Expr::Kind::pow: return mk_pow(simplify(e.lhs()), e.exponent());
    case Expr::Kind::call: {
        Expr a = simplify(e.lhs());
        if (a.kind() == Expr::Kind::constant && e.func() != Func::tan)
            return Expr::constant(apply_func(e.func(), a.value()));
        return Expr::call(e.func(), a);
    }
    case Expr::Kind::binary: {
        Expr a = simplify(e.lhs());
        Expr b = simplify(e.rhs());
        switch (e.op()) {
        case BinaryOp::add: return mk_add(a, b);
        case BinaryOp::sub: return mk_sub(a, b);
        case BinaryOp::mul: return mk_mul(a, b);
        case BinaryOp::div: return mk_div(a, b);
        }
    }
    }
    return e;
}

Expr differentiate(const Expr& e, std::string_view var)
{
    switch (e.kind()) {
    case Expr::Kind::var: return Expr::constant(e.name() == var ? 1.0 : 0.0);
    case Expr::Kind::constant: return Expr::constant(0.0);
    case Expr::Kind::neg: return mk_neg(differentiate(e.lhs(), var));
    case Expr::Kind::binary: {
        const Expr& a = e.lhs();
        const Expr& b = e.rhs();
        const Expr da = differentiate(a, var);
        const Expr db = differentiate(b, var);
        switch (e.op()) {
        case BinaryOp::add: return mk_add(da, db);
        case BinaryOp::sub: return mk_sub(da, db);
        case BinaryOp::mul: return mk_add(mk_mul(da, b), mk_mul(a, db));
        case BinaryOp::div: return mk_div(mk_sub(mk_mul(da, b), mk_mul(a, db)), mk_pow(b, 2));
        }
        break;
    }
    case Expr::Kind::pow: {
        const unsigned n = e.exponent();
        if (n == 0)
            return Expr::constant(0.0);
        const Expr da = differentiate(e.lhs(), var);
        return mk_mul(mk_mul(Expr::constant(n), mk_pow(e.lhs(), n - 1)), da);
    }
    case Expr::Kind::call: {
        const Expr& a = e.lhs();
        const Expr da = differentiate(a, var);
        if (da.is_constant(0.0))
            return da;
        Expr outer;
        switch (e.func()) {
        case Func::cos: outer = mk_neg(Expr::call(Func::sin, a)); break;
        case Func::sin: outer = Expr::call(Func::cos, a); break;
        case Func::tan: outer = mk_add(Expr::constant(1.0), mk_pow(Expr::call(Func::tan, a), 2)); break;
        case Func::exp: outer = e; break;
        case Func::sigmoid: outer = mk_mul(e, mk_sub(Expr::constant(1.0), e)); break;
        case Func::tanh: outer = mk_sub(Expr::constant(1.0), mk_pow(e, 2)); break;
        }
        return mk_mul(outer, da);
    }
    }
    return Expr::constant(0.0);
}

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& repl)
{
    switch (e.kind()) {
    case Expr::Kind::var: {
        auto it = repl.find(e.name());
        return it == repl.end() ? e : it->second;
    }
    case Expr::Kind::constant: return e;
    case Expr::Kind::neg: return Expr::neg(substitute(e.lhs(), repl));
    case Expr::Kind::pow: return Expr::pow(substitute(e.lhs(), repl), e.exponent());
    case Expr::Kind::call: return Expr::call(e.func(), substitute(e.lhs(), repl));
    case Expr::Kind::binary: return Expr::binary(e.op(), substitute(e.lhs(), repl), substitute(e.rhs(), repl));
    }
    return e;
}

std::vector<std::string> free_variables(const Expr& e)
{
    std::set<std::string> s;
    collect_vars(e, s);
    return {s.begin(), s.end()};
}

bool references_any(const Expr& e, std::span<const std::string> names)
{
    for (const auto& v : free_variables(e))
        if (std::find(names.begin(), names.end(), v) != names.end())
            return true;
    return false;
}

bool contains_func(const Expr& e, Func f)
{
    switch (e.kind()) {
    case Expr::Kind::var:
    case Expr::Kind::constant: return false;
    case Expr::Kind::call: return e.func() == f || contains_func(e.lhs(), f);
    case Expr::Kind::binary: return contains_func(e.lhs(), f) || contains_func(e.rhs(), f);
    default: return contains_func(e.lhs(), f);
    }
}

bool tan_arguments_constant(const Expr& e, std::span<const std::string> state_vars)
{
    switch (e.kind()) {
    case Expr::Kind::var:
    case Expr::Kind::constant: return true;
    case Expr::Kind::call:
        if (e.func() == Func::tan && references_any(e.lhs(), state_vars))
            return false;
        return tan_arguments_constant(e.lhs(), state_vars);
    case Expr::Kind::binary:
        return tan_arguments_constant(e.lhs(), state_vars) && tan_arguments_constant(e.rhs(), state_vars);
    default: return tan_arguments_constant(e.lhs(), state_vars);
    }
}

std::vector<Expr> denominators(const Expr& e)
{
    std::vector<Expr> out;
    auto walk = [&](auto&& self, const Expr& x) -> void {
        switch (x.kind()) {
        case Expr::Kind::var:
        case Expr::Kind::constant: return;
        case Expr::Kind::binary:
            if (x.op() == BinaryOp::div)
                out.push_back(x.rhs());
            self(self, x.lhs());
            self(self, x.rhs());
            return;
        default: self(self, x.lhs());
        }
    };
    walk(walk, e);
    return out;
}

double apply_func(Func f, double x)
{
    switch (f) {
    case Func::cos: return std::cos(x);
    case Func::sin: return std::sin(x);
    case Func::tan: return std::tan(x);
    case Func::exp: return std::exp(x);
    case Func::sigmoid: return sigmoid(x);
    case Func::tanh: return std::tanh(x);
    }
    return x;
}

Interval apply_func(Func f, const Interval& x)
{
    switch (f) {
    case Func::cos: return cos(x);
    case Func::sin: return sin(x);
    case Func::tan: return tan(x);
    case Func::exp: return exp(x);
    case Func::sigmoid: return sigmoid(x);
    case Func::tanh: return tanh(x);
    }
    return x;
}

CompiledExpr CompiledExpr::compile(const Expr& e, std::span<const std::string> names)
{
    CompiledExpr c;
    c.emit(e, names);
    std::sort(c.used_.begin(), c.used_.end());
    c.used_.erase(std::unique(c.used_.begin(), c.used_.end()), c.used_.end());
    return c;
}

void CompiledExpr::emit(const Expr& e, std::span<const std::string> names)
{
    switch (e.kind()) {
    case Expr::Kind::var: {
        auto it = std::find(names.begin(), names.end(), e.name());
        if (it == names.end())
            throw UnboundVariable(e.name());
        const int idx = static_cast<int>(it - names.begin());
        code_.push_back({Op::var, idx});
        used_.push_back(idx);
        return;
    }
    case Expr::Kind::constant: code_.push_back({Op::constant, 0, e.value()}); return;
    case Expr::Kind::neg:
        emit(e.lhs(), names);
        code_.push_back({Op::neg});
        return;
    case Expr::Kind::pow:
        emit(e.lhs(), names);
        code_.push_back({Op::pow, static_cast<int>(e.exponent())});
        return;
    case Expr::Kind::call:
        emit(e.lhs(), names);
        code_.push_back({Op::call, 0, 0.0, e.func()});
        return;
    case Expr::Kind::binary:
        emit(e.lhs(), names);
        emit(e.rhs(), names);
        switch (e.op()) {
        case BinaryOp::add: code_.push_back({Op::add}); break;
        case BinaryOp::sub: code_.push_back({Op::sub}); break;
        case BinaryOp::mul: code_.push_back({Op::mul}); break;
        case BinaryOp::div: code_.push_back({Op::div}); break;
        }
        return;
    }
}

} // namespace nnreach

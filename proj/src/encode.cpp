#include "nnreach/encode.hpp"

#include "nnreach/expr.hpp"
#include "nnreach/automaton.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>

namespace nnreach {

namespace {

double act_value(Activation a, double x)
{
    switch (a) {
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
    case Activation::linear: return x;
    }
    return x;
}

double act_slope(Activation a, double x)
{
    switch (a) {
    case Activation::sigmoid: {
        const double s = sigmoid(x);
        return s * (1.0 - s);
    }
    case Activation::tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::linear: return 1.0;
    }
    return 1.0;
}

// Points where the activation's slope equals s (symmetric pair), if any.
std::vector<double> slope_points(Activation a, double s)
{
    const double peak = a == Activation::sigmoid ? 0.25 : 1.0;
    if (!(s > 0.0) || s >= peak)
        return s == peak ? std::vector<double>{0.0} : std::vector<double>{};
    double x;
    if (a == Activation::sigmoid) {
        const double g = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * s));
        x = std::log(g / (1.0 - g));
    } else {
        x = std::atanh(std::sqrt(1.0 - s));
    }
    return {-x, x};
}

// Absolute outward shift of every line, far above the rounding error of the
// line and activation evaluations.
constexpr double kLineSlack = 1e-12;

Line chord(Activation act, double a, double b)
{
    const double fa = act_value(act, a), fb = act_value(act, b);
    const double s = (fb - fa) / (b - a);
    return {s, fa - s * a};
}

Line tangent(Activation act, double m)
{
    const double s = act_slope(act, m);
    return {s, act_value(act, m) - s * m};
}

} // namespace

std::size_t PwlSandwich::piece_of(double x) const
{
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
    const auto k = static_cast<std::ptrdiff_t>(it - breakpoints.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(pieces()) - 1));
}

PwlSandwich pwl_sandwich(Activation act, const Interval& domain, unsigned n_pieces)
{
    if (n_pieces == 0)
        throw std::invalid_argument("a sandwich needs at least one piece");
    if (act == Activation::linear)
        throw UnsupportedActivation("no sandwich is needed for a linear activation");
    PwlSandwich s;
    s.activation = act;
    s.domain = domain;
    const double lo = domain.lo(), hi = domain.hi();
    for (unsigned k = 0; k <= n_pieces; ++k)
        s.breakpoints.push_back(k == n_pieces ? hi : lo + (hi - lo) * k / n_pieces);
    for (unsigned k = 0; k < n_pieces; ++k) {
        const double a = s.breakpoints[k], b = s.breakpoints[k + 1];
        Line low, up;
        if (!(b > a)) {
            low = up = {0.0, act_value(act, a)};
        } else if (b <= 0.0) {
            up = chord(act, a, b);
            low = tangent(act, 0.5 * (a + b));
        } else if (a >= 0.0) {
            low = chord(act, a, b);
            up = tangent(act, 0.5 * (a + b));
        } else {
            const Line c = chord(act, a, b);
            double gmax = 0.0, gmin = 0.0;
            for (double x : slope_points(act, c.slope)) {
                if (x <= a || x >= b)
                    continue;
                const double g = act_value(act, x) - c.at(x);
                gmax = std::max(gmax, g);
                gmin = std::min(gmin, g);
            }
            up = {c.slope, c.intercept + gmax};
            low = {c.slope, c.intercept + gmin};
        }
        low.intercept -= kLineSlack;
        up.intercept += kLineSlack;
        s.lower.push_back(low);
        s.upper.push_back(up);
        s.max_gap = std::max({s.max_gap, up.at(a) - low.at(a), up.at(b) - low.at(b)});
    }
    return s;
}

// -------------------------------------------------------------------- MILP

std::vector<std::vector<Interval>> preactivation_bounds(const NeuralNetwork& nn, const std::vector<Interval>& box)
{
    check_network(nn);
    if (box.size() != nn.inputs)
        throw ArityMismatch("input box has " + std::to_string(box.size()) + " intervals for " +
                            std::to_string(nn.inputs) + " inputs");
    std::vector<std::vector<Interval>> out;
    std::vector<Interval> a = box;
    for (const auto& l : nn.layers) {
        std::vector<Interval> z, next;
        for (std::size_t r = 0; r < l.rows; ++r) {
            Interval acc(l.bias[r]);
            for (std::size_t c = 0; c < l.cols; ++c)
                acc += Interval(l.w(r, c)) * a[c];
            z.push_back(acc);
            switch (l.activation) {
            case Activation::sigmoid: next.push_back(apply_func(Func::sigmoid, acc)); break;
            case Activation::tanh: next.push_back(apply_func(Func::tanh, acc)); break;
            case Activation::linear: next.push_back(acc); break;
            }
        }
        out.push_back(std::move(z));
        a = std::move(next);
    }
    return out;
}

namespace {

std::string num(double v) { return format_number(v); }

struct RowWriter {
    std::ostringstream& os;

    void term(bool first, double c, const std::string& var)
    {
        if (c == 0.0)
            return;
        if (c < 0)
            os << (first ? "- " : " - ");
        else if (!first)
            os << " + ";
        const double m = std::abs(c);
        if (m != 1.0)
            os << num(m) << " ";
        os << var;
    }
};

std::string pre_name(std::size_t layer, std::size_t i) { return "z" + std::to_string(layer + 1) + "_" + std::to_string(i + 1); }
std::string post_name(std::size_t layer, std::size_t i) { return "a" + std::to_string(layer + 1) + "_" + std::to_string(i + 1); }
std::string in_name(std::size_t j) { return "x" + std::to_string(j + 1); }

} // namespace

std::string export_milp(const NeuralNetwork& nn, const std::vector<Interval>& box, const MilpSettings& s,
                        std::size_t output, bool maximize)
{
    const auto pre = preactivation_bounds(nn, box);
    if (output >= nn.outputs)
        throw std::invalid_argument("output index out of range");
    const std::size_t L = nn.layers.size();
    auto value_name = [&](std::size_t layer, std::size_t i) {
        return nn.layers[layer].activation == Activation::linear ? pre_name(layer, i) : post_name(layer, i);
    };

    std::ostringstream rows, bounds, bins, head;
    RowWriter w{rows};
    std::size_t n_bin = 0;
    double worst_gap = 0.0;
    for (std::size_t j = 0; j < nn.inputs; ++j)
        bounds << " " << num(box[j].lo()) << " <= " << in_name(j) << " <= " << num(box[j].hi()) << "\n";
    for (std::size_t l = 0; l < L; ++l) {
        const Layer& layer = nn.layers[l];
        for (std::size_t i = 0; i < layer.rows; ++i) {
            const std::string z = pre_name(l, i);
            rows << " def" << l + 1 << "_" << i + 1 << ": ";
            w.term(true, 1.0, z);
            for (std::size_t c = 0; c < layer.cols; ++c)
                w.term(false, -layer.w(i, c), l == 0 ? in_name(c) : value_name(l - 1, c));
            rows << " = " << num(layer.bias[i]) << "\n";
            Interval zb = pre[l][i];
            if (layer.activation == Activation::linear) {
                bounds << " " << num(zb.lo()) << " <= " << z << " <= " << num(zb.hi()) << "\n";
                continue;
            }
            if (zb.width() < 1e-9)
                zb = Interval(zb.lo() - 1e-9, zb.hi() + 1e-9);
            const auto sw = pwl_sandwich(layer.activation, zb, s.pieces);
            worst_gap = std::max(worst_gap, sw.max_gap);
            double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
            for (std::size_t k = 0; k < sw.pieces(); ++k) {
                ylo = std::min({ylo, sw.lower[k].at(sw.breakpoints[k]), sw.lower[k].at(sw.breakpoints[k + 1])});
                yhi = std::max({yhi, sw.upper[k].at(sw.breakpoints[k]), sw.upper[k].at(sw.breakpoints[k + 1])});
            }
            double big = zb.width();
            for (std::size_t k = 0; k < sw.pieces(); ++k) {
                big = std::max(big, std::max(sw.lower[k].at(zb.lo()), sw.lower[k].at(zb.hi())) - ylo);
                big = std::max(big, yhi - std::min(sw.upper[k].at(zb.lo()), sw.upper[k].at(zb.hi())));
            }
            big = std::ceil(big + 1.0);
            const std::string y = post_name(l, i);
            const std::string tag = std::to_string(l + 1) + "_" + std::to_string(i + 1);
            rows << " one" << tag << ": ";
            for (std::size_t k = 0; k < sw.pieces(); ++k)
                w.term(k == 0, 1.0, "d" + tag + "_" + std::to_string(k + 1));
            rows << " = 1\n";
            for (std::size_t k = 0; k < sw.pieces(); ++k) {
                const std::string d = "d" + tag + "_" + std::to_string(k + 1);
                const std::string id = tag + "_" + std::to_string(k + 1);
                const Line& lo = sw.lower[k];
                const Line& up = sw.upper[k];
                rows << " xlo" << id << ": ";
                w.term(true, 1.0, z);
                w.term(false, -big, d);
                rows << " >= " << num(sw.breakpoints[k] - big) << "\n";
                rows << " xhi" << id << ": ";
                w.term(true, 1.0, z);
                w.term(false, big, d);
                rows << " <= " << num(sw.breakpoints[k + 1] + big) << "\n";
                rows << " ylo" << id << ": ";
                w.term(true, 1.0, y);
                w.term(false, -lo.slope, z);
                w.term(false, -big, d);
                rows << " >= " << num(lo.intercept - big) << "\n";
                rows << " yhi" << id << ": ";
                w.term(true, 1.0, y);
                w.term(false, -up.slope, z);
                w.term(false, big, d);
                rows << " <= " << num(up.intercept + big) << "\n";
                bins << " " << d << "\n";
                ++n_bin;
            }
            bounds << " " << num(zb.lo()) << " <= " << z << " <= " << num(zb.hi()) << "\n";
            bounds << " " << num(ylo) << " <= " << y << " <= " << num(yhi) << "\n";
        }
    }
    head << "\\ big-M encoding of a " << nn.inputs;
    for (const auto& l : nn.layers)
        head << "-" << l.rows;
    head << " network, " << s.pieces << " pieces per nonlinear neuron, " << n_bin << " binaries\n";
    head << "\\ largest sandwich gap " << num(worst_gap) << "\n";
    head << (maximize ? "Maximize\n" : "Minimize\n");
    head << " obj: " << value_name(L - 1, output) << "\n";
    head << "Subject To\n" << rows.str() << "Bounds\n" << bounds.str();
    if (n_bin)
        head << "Binaries\n" << bins.str();
    head << "End\n";
    return head.str();
}

// --------------------------------------------------------------- LP reader

namespace {

std::string lower_case(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_number(const std::string& t, double& out)
{
    const std::string l = lower_case(t);
    std::string body = l;
    double sign = 1.0;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
        sign = body[0] == '-' ? -1.0 : 1.0;
        body = body.substr(1);
    }
    if (body == "inf" || body == "infinity") {
        out = sign * std::numeric_limits<double>::infinity();
        return true;
    }
    const char* b = t.data();
    const char* e = t.data() + t.size();
    if (*b == '+')
        ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

std::vector<std::string> tokens_of(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty())
            out.push_back(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (c == '<' || c == '>' || c == '=') {
            flush();
            std::string op(1, c);
            if (i + 1 < line.size() && line[i + 1] == '=')
                op += line[++i];
            out.push_back(op);
        } else if ((c == '+' || c == '-') && cur.empty()) {
            // Sign: glue onto a following number, else stand alone.
            out.push_back(std::string(1, c));
        } else {
            cur += c;
        }
    }
    flush();
    return out;
}

RowSense sense_of(const std::string& op, std::size_t line)
{
    if (op == "<=" || op == "<" || op == "=<")
        return RowSense::le;
    if (op == ">=" || op == ">" || op == "=>")
        return RowSense::ge;
    if (op == "=")
        return RowSense::eq;
    throw LpParseError("line " + std::to_string(line) + ": expected a relation, got '" + op + "'");
}

// Linear terms up to the first relation token; returns the index after them.
std::size_t read_terms(const std::vector<std::string>& t, std::size_t i, std::map<std::string, double>& out,
                       LpProblem& p, std::size_t line)
{
    double sign = 1.0, coef = 1.0;
    bool have_coef = false;
    auto note = [&](const std::string& v) {
        if (std::find(p.variables.begin(), p.variables.end(), v) == p.variables.end())
            p.variables.push_back(v);
    };
    for (; i < t.size(); ++i) {
        const std::string& s = t[i];
        if (s == "<=" || s == ">=" || s == "=" || s == "<" || s == ">" || s == "=<" || s == "=>")
            break;
        if (s == "+") {
            sign = 1.0;
            continue;
        }
        if (s == "-") {
            sign = -sign;
            continue;
        }
        double v;
        if (parse_number(s, v)) {
            coef = v;
            have_coef = true;
            continue;
        }
        out[s] += sign * (have_coef ? coef : 1.0);
        note(s);
        sign = 1.0;
        coef = 1.0;
        have_coef = false;
    }
    if (have_coef)
        throw LpParseError("line " + std::to_string(line) + ": constant term in a linear expression");
    return i;
}

double read_rhs(const std::vector<std::string>& t, std::size_t i, std::size_t line)
{
    double sign = 1.0;
    for (; i < t.size() && (t[i] == "+" || t[i] == "-"); ++i)
        sign = t[i] == "-" ? -sign : sign;
    double v;
    if (i + 1 != t.size() || !parse_number(t[i], v))
        throw LpParseError("line " + std::to_string(line) + ": expected a number on the right-hand side");
    return sign * v;
}

} // namespace

LpProblem parse_lp(std::string_view text)
{
    LpProblem p;
    enum class Sec { none, objective, rows, bounds, binaries, done } sec = Sec::none;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    bool have_objective = false;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto c = raw.find('\\'); c != std::string::npos)
            raw.erase(c);
        const std::string l = lower_case(trim(raw));
        if (l.empty())
            continue;
        if (l == "maximize" || l == "maximum" || l == "max" || l == "minimize" || l == "minimum" || l == "min") {
            p.maximize = l.rfind("max", 0) == 0;
            sec = Sec::objective;
            continue;
        }
        if (l == "subject to" || l == "such that" || l == "st" || l == "s.t.") {
            sec = Sec::rows;
            continue;
        }
        if (l == "bounds") {
            sec = Sec::bounds;
            continue;
        }
        if (l == "binaries" || l == "binary" || l == "bin") {
            sec = Sec::binaries;
            continue;
        }
        if (l == "end") {
            sec = Sec::done;
            continue;
        }
        std::string body = trim(raw);
        std::string name;
        if (const auto colon = body.find(':'); colon != std::string::npos && sec != Sec::bounds) {
            name = trim(body.substr(0, colon));
            body = body.substr(colon + 1);
        }
        const auto t = tokens_of(body);
        switch (sec) {
        case Sec::none:
        case Sec::done: throw LpParseError("line " + std::to_string(line) + ": text outside a section");
        case Sec::objective: {
            if (have_objective)
                throw LpParseError("line " + std::to_string(line) + ": more than one objective");
            if (read_terms(t, 0, p.objective, p, line) != t.size())
                throw LpParseError("line " + std::to_string(line) + ": relation in the objective");
            have_objective = true;
            break;
        }
        case Sec::rows: {
            LpRow r;
            r.name = name.empty() ? "r" + std::to_string(p.rows.size() + 1) : name;
            const std::size_t i = read_terms(t, 0, r.coeffs, p, line);
            if (i >= t.size())
                throw LpParseError("line " + std::to_string(line) + ": row without a relation");
            r.sense = sense_of(t[i], line);
            r.rhs = read_rhs(t, i + 1, line);
            p.rows.push_back(std::move(r));
            break;
        }
        case Sec::bounds: {
            // `l <= x <= u`, `x free`, `x >= l`, `x <= u`, `l <= x`
            std::vector<std::string> u;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if ((t[i] == "-" || t[i] == "+") && i + 1 < t.size()) {
                    u.push_back(t[i] + t[i + 1]);
                    ++i;
                } else {
                    u.push_back(t[i]);
                }
            }
            auto note = [&](const std::string& v) {
                if (std::find(p.variables.begin(), p.variables.end(), v) == p.variables.end())
                    p.variables.push_back(v);
            };
            const double inf = std::numeric_limits<double>::infinity();
            double a, b;
            if (u.size() == 2 && lower_case(u[1]) == "free") {
                p.bounds[u[0]] = {-inf, inf};
                note(u[0]);
            } else if (u.size() == 5 && parse_number(u[0], a) && parse_number(u[4], b) && u[1] == "<=" &&
                       u[3] == "<=") {
                p.bounds[u[2]] = {a, b};
                note(u[2]);
            } else if (u.size() == 3 && parse_number(u[2], a)) {
                auto& bd = p.bounds.try_emplace(u[0], 0.0, inf).first->second;
                note(u[0]);
                const RowSense sns = sense_of(u[1], line);
                if (sns == RowSense::le)
                    bd.second = a;
                else if (sns == RowSense::ge)
                    bd.first = a;
                else
                    bd = {a, a};
            } else if (u.size() == 3 && parse_number(u[0], a)) {
                auto& bd = p.bounds.try_emplace(u[2], 0.0, inf).first->second;
                note(u[2]);
                const RowSense sns = sense_of(u[1], line);
                if (sns == RowSense::le)
                    bd.first = a;
                else if (sns == RowSense::ge)
                    bd.second = a;
                else
                    bd = {a, a};
            } else {
                throw LpParseError("line " + std::to_string(line) + ": unrecognized bound");
            }
            break;
        }
        case Sec::binaries:
            for (const auto& v : t) {
                p.binaries.push_back(v);
                if (std::find(p.variables.begin(), p.variables.end(), v) == p.variables.end())
                    p.variables.push_back(v);
            }
            break;
        }
    }
    if (!have_objective)
        throw LpParseError("no objective section");
    if (sec != Sec::done)
        throw LpParseError("missing End");
    for (const auto& b : p.binaries)
        p.bounds[b] = {0.0, 1.0};
    return p;
}

// ----------------------------------------------------------------- simplex

namespace {

constexpr double kPivotTol = 1e-9;

struct Tableau {
    std::vector<std::vector<double>> a;  // m rows, cols + 1 (rhs last)
    std::vector<std::size_t> basis;
    std::size_t cols = 0;

    void pivot(std::size_t r, std::size_t c, std::vector<double>& cost)
    {
        const double inv = 1.0 / a[r][c];
        for (double& v : a[r])
            v *= inv;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (i == r || a[i][c] == 0.0)
                continue;
            const double f = a[i][c];
            for (std::size_t j = 0; j <= cols; ++j)
                a[i][j] -= f * a[r][j];
        }
        if (cost[c] != 0.0) {
            const double f = cost[c];
            for (std::size_t j = 0; j <= cols; ++j)
                cost[j] -= f * a[r][j];
        }
        basis[r] = c;
    }

    // Minimizes the cost row (reduced costs, last entry = -objective).
    // Returns false when unbounded.
    bool run(std::vector<double>& cost, std::size_t allowed)
    {
        for (;;) {
            std::size_t enter = cols;
            for (std::size_t j = 0; j < allowed; ++j)
                if (cost[j] < -kPivotTol) {
                    enter = j;
                    break;
                }
            if (enter == cols)
                return true;
            std::size_t leave = a.size();
            double best = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i][enter] <= kPivotTol)
                    continue;
                const double ratio = a[i][cols] / a[i][enter];
                if (leave == a.size() || ratio < best - 1e-12 ||
                    (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave == a.size())
                return false;
            pivot(leave, enter, cost);
        }
    }
};

} // namespace

LpSolution solve_lp(const LpProblem& p, const std::map<std::string, double>& fixed)
{
    const double inf = std::numeric_limits<double>::infinity();
    // Structural columns: each free variable maps to one or two columns.
    struct VarMap {
        std::string name;
        double offset = 0.0;
        int pos = -1;   // column with coefficient +1
        int neg = -1;   // column with coefficient -1
        double upper_gap = std::numeric_limits<double>::infinity();  // pos <= upper_gap (bounded both sides)
    };
    std::vector<VarMap> vars;
    std::map<std::string, std::size_t> var_index;
    std::size_t ncol = 0;
    for (const auto& v : p.variables) {
        if (fixed.count(v))
            continue;
        auto it = p.bounds.find(v);
        const auto [lo, hi] = it == p.bounds.end() ? std::pair<double, double>{0.0, inf} : it->second;
        VarMap m;
        m.name = v;
        if (std::isfinite(lo)) {
            m.offset = lo;
            m.pos = static_cast<int>(ncol++);
            m.upper_gap = hi - lo;
        } else if (std::isfinite(hi)) {
            m.offset = hi;
            m.neg = static_cast<int>(ncol++);
        } else {
            m.pos = static_cast<int>(ncol++);
            m.neg = static_cast<int>(ncol++);
        }
        var_index[v] = vars.size();
        vars.push_back(m);
    }

    struct StdRow {
        std::vector<double> c;
        RowSense sense;
        double rhs;
    };
    std::vector<StdRow> rows;
    auto lower_row = [&](const std::map<std::string, double>& coeffs, RowSense sense, double rhs) -> bool {
        StdRow r{std::vector<double>(ncol, 0.0), sense, rhs};
        bool any = false;
        for (const auto& [v, c] : coeffs) {
            if (auto f = fixed.find(v); f != fixed.end()) {
                r.rhs -= c * f->second;
                continue;
            }
            const VarMap& m = vars[var_index.at(v)];
            r.rhs -= c * m.offset;
            if (m.pos >= 0)
                r.c[static_cast<std::size_t>(m.pos)] += c;
            if (m.neg >= 0)
                r.c[static_cast<std::size_t>(m.neg)] -= c;
            any = any || c != 0.0;
        }
        if (!any) {
            const double tol = 1e-9 * std::max(1.0, std::abs(rhs));
            return sense == RowSense::le ? r.rhs >= -tol : sense == RowSense::ge ? r.rhs <= tol : std::abs(r.rhs) <= tol;
        }
        rows.push_back(std::move(r));
        return true;
    };

    LpSolution sol;
    for (const auto& r : p.rows)
        if (!lower_row(r.coeffs, r.sense, r.rhs))
            return sol;
    for (const auto& m : vars)
        if (m.pos >= 0 && m.neg < 0 && std::isfinite(m.upper_gap)) {
            if (m.upper_gap < -1e-12)
                return sol;
            StdRow r{std::vector<double>(ncol, 0.0), RowSense::le, m.upper_gap};
            r.c[static_cast<std::size_t>(m.pos)] = 1.0;
            rows.push_back(std::move(r));
        }

    // Presolve: drop rows implied by the column bounds.
    std::vector<double> col_hi(ncol, inf);
    for (const auto& m : vars)
        if (m.pos >= 0 && m.neg < 0)
            col_hi[static_cast<std::size_t>(m.pos)] = m.upper_gap;
    std::vector<StdRow> kept;
    for (auto& r : rows) {
        double amin = 0.0, amax = 0.0;
        for (std::size_t j = 0; j < ncol; ++j) {
            if (r.c[j] > 0) {
                amax += r.c[j] * col_hi[j];
            } else if (r.c[j] < 0) {
                amin += r.c[j] * col_hi[j];
            }
        }
        const bool single_bound = std::count_if(r.c.begin(), r.c.end(), [](double v) { return v != 0.0; }) == 1 &&
                                  r.sense == RowSense::le;
        if (!single_bound && ((r.sense == RowSense::le && amax <= r.rhs) || (r.sense == RowSense::ge && amin >= r.rhs)))
            continue;
        kept.push_back(std::move(r));
    }
    rows = std::move(kept);

    const std::size_t m = rows.size();
    std::size_t n_slack = 0, n_art = 0;
    for (auto& r : rows) {
        if (r.rhs < 0) {
            for (double& v : r.c)
                v = -v;
            r.rhs = -r.rhs;
            if (r.sense != RowSense::eq)
                r.sense = r.sense == RowSense::le ? RowSense::ge : RowSense::le;
        }
        if (r.sense != RowSense::eq)
            ++n_slack;
        if (r.sense != RowSense::le)
            ++n_art;
    }
    Tableau t;
    t.cols = ncol + n_slack + n_art;
    t.a.assign(m, std::vector<double>(t.cols + 1, 0.0));
    t.basis.assign(m, 0);
    std::size_t s_col = ncol, a_col = ncol + n_slack;
    std::vector<double> phase1(t.cols + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        auto& row = t.a[i];
        std::copy(rows[i].c.begin(), rows[i].c.end(), row.begin());
        row[t.cols] = rows[i].rhs;
        if (rows[i].sense == RowSense::le) {
            row[s_col] = 1.0;
            t.basis[i] = s_col++;
        } else {
            if (rows[i].sense == RowSense::ge)
                row[s_col++] = -1.0;
            row[a_col] = 1.0;
            t.basis[i] = a_col;
            phase1[a_col] = 1.0;
            ++a_col;
        }
    }
    for (std::size_t i = 0; i < m; ++i)
        if (t.basis[i] >= ncol + n_slack)
            for (std::size_t j = 0; j <= t.cols; ++j)
                phase1[j] -= t.a[i][j];
    t.run(phase1, t.cols);
    if (-phase1[t.cols] > 1e-7)
        return sol;
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
        if (t.basis[i] < ncol + n_slack)
            continue;
        for (std::size_t j = 0; j < ncol + n_slack; ++j)
            if (std::abs(t.a[i][j]) > kPivotTol) {
                t.pivot(i, j, phase1);
                break;
            }
    }

    std::vector<double> cost(t.cols + 1, 0.0);
    double c0 = 0.0;
    const double dir = p.maximize ? -1.0 : 1.0;
    for (const auto& [v, c] : p.objective) {
        if (auto f = fixed.find(v); f != fixed.end()) {
            c0 += c * f->second;
            continue;
        }
        const VarMap& mv = vars[var_index.at(v)];
        c0 += c * mv.offset;
        if (mv.pos >= 0)
            cost[static_cast<std::size_t>(mv.pos)] += dir * c;
        if (mv.neg >= 0)
            cost[static_cast<std::size_t>(mv.neg)] -= dir * c;
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double f = cost[t.basis[i]];
        if (f != 0.0)
            for (std::size_t j = 0; j <= t.cols; ++j)
                cost[j] -= f * t.a[i][j];
    }
    sol.feasible = true;
    if (!t.run(cost, ncol + n_slack)) {
        sol.bounded = false;
        return sol;
    }
    std::vector<double> x(t.cols, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        x[t.basis[i]] = t.a[i][t.cols];
    double obj = c0;
    for (const auto& mv : vars) {
        double v = mv.offset;
        if (mv.pos >= 0)
            v += x[static_cast<std::size_t>(mv.pos)];
        if (mv.neg >= 0)
            v -= x[static_cast<std::size_t>(mv.neg)];
        sol.values[mv.name] = v;
    }
    for (const auto& [v, c] : fixed)
        sol.values[v] = c;
    for (const auto& [v, c] : p.objective)
        if (!fixed.count(v))
            obj += c * (sol.values[v] - 0.0) - c * 0.0;
    obj = 0.0;
    for (const auto& [v, c] : p.objective)
        obj += c * sol.values[v];
    sol.objective = obj;
    return sol;
}

LpSolution brute_force_milp(const LpProblem& p)
{
    std::vector<std::vector<std::string>> groups;
    std::vector<std::string> grouped;
    auto is_binary = [&](const std::string& v) {
        return std::find(p.binaries.begin(), p.binaries.end(), v) != p.binaries.end();
    };
    for (const auto& r : p.rows) {
        if (r.sense != RowSense::eq || r.rhs != 1.0 || r.coeffs.empty())
            continue;
        bool ok = true;
        for (const auto& [v, c] : r.coeffs)
            ok = ok && c == 1.0 && is_binary(v) &&
                 std::find(grouped.begin(), grouped.end(), v) == grouped.end();
        if (!ok)
            continue;
        std::vector<std::string> g;
        for (const auto& [v, c] : r.coeffs) {
            g.push_back(v);
            grouped.push_back(v);
        }
        groups.push_back(std::move(g));
    }
    for (const auto& b : p.binaries)
        if (std::find(grouped.begin(), grouped.end(), b) == grouped.end())
            groups.push_back({b, ""});  // "" stands for all zero

    LpSolution best;
    std::vector<std::size_t> choice(groups.size(), 0);
    for (;;) {
        std::map<std::string, double> fixed;
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (std::size_t k = 0; k < groups[g].size(); ++k)
                if (!groups[g][k].empty())
                    fixed[groups[g][k]] = k == choice[g] ? 1.0 : 0.0;
        auto s = solve_lp(p, fixed);
        if (s.feasible && !s.bounded)
            return s;
        if (s.feasible &&
            (!best.feasible || (p.maximize ? s.objective > best.objective : s.objective < best.objective)))
            best = std::move(s);
        std::size_t g = 0;
        for (; g < groups.size(); ++g) {
            if (++choice[g] < groups[g].size())
                break;
            choice[g] = 0;
        }
        if (g == groups.size())
            break;
    }
    return best;
}

// ----------------------------------------------------------------- formulas

namespace {

using boost::multiprecision::cpp_int;

// Exact fraction of the shortest decimal reading of v.
std::pair<cpp_int, cpp_int> decimal_fraction(double v)
{
    if (!std::isfinite(v))
        throw NonRationalWeightGuard("weight " + format_number(v) + " is not a finite decimal fraction");
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    std::string s(buf, end);
    const bool neg = s[0] == '-';
    if (neg)
        s.erase(0, 1);
    const auto e = s.find('e');
    std::string mant = s.substr(0, e);
    int exp10 = std::stoi(s.substr(e + 1));
    if (const auto dot = mant.find('.'); dot != std::string::npos) {
        exp10 -= static_cast<int>(mant.size() - dot - 1);
        mant.erase(dot, 1);
    }
    cpp_int n(mant);
    cpp_int d = 1;
    if (exp10 >= 0)
        n *= boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(exp10));
    else
        d = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(-exp10));
    const cpp_int g = boost::multiprecision::gcd(n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    return {neg ? cpp_int(-n) : n, d};
}

// SMT-LIB literal for the decimal reading of v.
std::string smt_number(double v)
{
    const auto [n, d] = decimal_fraction(v);
    const bool neg = n < 0;
    const cpp_int a = neg ? cpp_int(-n) : n;
    std::string body;
    if (d == 1) {
        body = a.str() + ".0";
    } else {
        // d divides a power of ten: scale to 10^k.
        cpp_int p = 1;
        unsigned k = 0;
        while (p % d != 0) {
            p *= 10;
            ++k;
        }
        const std::string digits = cpp_int(a * (p / d)).str();
        const std::string padded = std::string(digits.size() <= k ? k + 1 - digits.size() : 0, '0') + digits;
        body = padded.substr(0, padded.size() - k) + "." + padded.substr(padded.size() - k);
    }
    return neg ? "(- " + body + ")" : body;
}

std::string smt_of(const Expr& e)
{
    switch (e.kind()) {
    case Expr::Kind::var: return e.name();
    case Expr::Kind::constant: return smt_number(e.value());
    case Expr::Kind::neg: return "(- " + smt_of(e.lhs()) + ")";
    case Expr::Kind::pow: return "(^ " + smt_of(e.lhs()) + " " + std::to_string(e.exponent()) + ")";
    case Expr::Kind::call:
        if (e.func() == Func::exp)
            return "(exp " + smt_of(e.lhs()) + ")";
        throw std::invalid_argument("predicate may not use " + std::string(func_name(e.func())));
    case Expr::Kind::binary: {
        const char* op = e.op() == BinaryOp::add ? "+" : e.op() == BinaryOp::sub ? "-" : e.op() == BinaryOp::mul ? "*" : "/";
        return std::string("(") + op + " " + smt_of(e.lhs()) + " " + smt_of(e.rhs()) + ")";
    }
    }
    return "";
}

std::string smt_rel(Rel r) { return r == Rel::le ? "<=" : r == Rel::ge ? ">=" : "="; }

std::string affine_smt(const Layer& l, std::size_t row, const std::function<std::string(std::size_t)>& input)
{
    std::string s = "(+";
    for (std::size_t c = 0; c < l.cols; ++c)
        s += " (* " + smt_number(l.w(row, c)) + " " + input(c) + ")";
    s += " " + smt_number(l.bias[row]) + ")";
    return s;
}

std::string named(const std::string& body, const std::string& name)
{
    return "(assert (! " + body + " :named " + name + "))\n";
}

std::string hidden_name(std::size_t layer, std::size_t i)
{
    return "h" + std::to_string(layer + 1) + "_" + std::to_string(i + 1);
}

Constraint output_predicate(const NeuralNetwork& nn, const std::string& predicate)
{
    Constraint c = parse_constraint(predicate);
    for (const auto& v : free_variables(c.lhs)) {
        bool ok = false;
        for (std::size_t i = 0; i < nn.outputs; ++i)
            ok = ok || v == out_var(i);
        if (!ok)
            throw std::invalid_argument("predicate reads '" + v + "', which is not an output (u1..u" +
                                        std::to_string(nn.outputs) + ")");
    }
    return c;
}

void check_box(const NeuralNetwork& nn, const std::vector<Interval>& box)
{
    check_network(nn);
    if (box.size() != nn.inputs)
        throw ArityMismatch("input box has " + std::to_string(box.size()) + " intervals for " +
                            std::to_string(nn.inputs) + " inputs");
}

void require_single_hidden(const NeuralNetwork& nn)
{
    if (nn.layers.size() != 2 || nn.layers[0].activation == Activation::linear ||
        nn.layers[1].activation != Activation::linear)
        throw ExpFreeNeedsSingleHiddenLayer(
            "the exp-free form needs exactly one sigmoid or tanh hidden layer followed by a linear output layer; "
            "this network has " +
            std::to_string(nn.layers.size()) + " layers");
}

std::string network_shape(const NeuralNetwork& nn)
{
    std::string s = std::to_string(nn.inputs);
    for (const auto& l : nn.layers)
        s += "-" + std::to_string(l.rows) + " " + activation_name(l.activation);
    return s;
}

} // namespace

FormulaRewrite formula_rewrite(const NeuralNetwork& nn, const std::vector<Interval>& box)
{
    check_box(nn, box);
    require_single_hidden(nn);
    const Layer& l = nn.layers[0];
    const int scale = l.activation == Activation::tanh ? 2 : 1;
    cpp_int d0 = 1;
    std::vector<std::vector<std::pair<cpp_int, cpp_int>>> frac(l.rows);
    for (std::size_t r = 0; r < l.rows; ++r)
        for (std::size_t c = 0; c < l.cols; ++c) {
            frac[r].push_back(decimal_fraction(l.w(r, c)));
            d0 = boost::multiprecision::lcm(d0, frac[r].back().second);
        }
    decimal_fraction(l.bias.empty() ? 0.0 : l.bias[0]);
    FormulaRewrite fr;
    fr.d0 = d0.str();
    std::vector<bool> negative(l.cols, false);
    for (std::size_t r = 0; r < l.rows; ++r) {
        std::vector<std::string> row;
        for (std::size_t c = 0; c < l.cols; ++c) {
            const cpp_int rv = frac[r][c].first * (d0 / frac[r][c].second) * scale;
            row.push_back(rv.str());
            if (rv < 0)
                negative[c] = true;
        }
        fr.r.push_back(std::move(row));
    }
    const double d = static_cast<double>(d0);
    for (std::size_t c = 0; c < l.cols; ++c) {
        fr.y_domain.push_back(Interval(std::exp(-box[c].hi() / d), std::exp(-box[c].lo() / d)));
        if (negative[c])
            fr.reciprocal.push_back(c);
    }
    return fr;
}

std::string export_formula(const NeuralNetwork& nn, const std::vector<Interval>& box, const std::string& predicate,
                           FormulaForm form)
{
    check_box(nn, box);
    for (const auto& l : nn.layers) {
        for (double w : l.weights)
            decimal_fraction(w);
        for (double b : l.bias)
            decimal_fraction(b);
    }
    for (const auto& iv : box) {
        decimal_fraction(iv.lo());
        decimal_fraction(iv.hi());
    }
    const Constraint prop = output_predicate(nn, predicate);
    std::ostringstream os;
    const std::size_t L = nn.layers.size();
    auto out_name = [](std::size_t i) { return out_var(i); };

    if (form == FormulaForm::phi0) {
        os << "; phi0 encoding of a " << network_shape(nn) << " network\n";
        os << "; parameters are the exact decimal fractions written below\n";
        os << "; exp is declared as an uninterpreted symbol and stands for the real exponential\n";
        os << "(set-logic ALL)\n(declare-fun exp (Real) Real)\n";
        for (std::size_t j = 0; j < nn.inputs; ++j)
            os << "(declare-fun " << in_name(j) << " () Real)\n";
        for (std::size_t l = 0; l + 1 < L; ++l)
            for (std::size_t i = 0; i < nn.layers[l].rows; ++i)
                os << "(declare-fun " << hidden_name(l, i) << " () Real)\n";
        for (std::size_t i = 0; i < nn.outputs; ++i)
            os << "(declare-fun " << out_name(i) << " () Real)\n";
        for (std::size_t j = 0; j < nn.inputs; ++j)
            os << named("(and (<= " + smt_number(box[j].lo()) + " " + in_name(j) + ") (<= " + in_name(j) + " " +
                            smt_number(box[j].hi()) + "))",
                        "box_" + std::to_string(j + 1));
        for (std::size_t l = 0; l < L; ++l) {
            const Layer& layer = nn.layers[l];
            auto input = [&](std::size_t c) { return l == 0 ? in_name(c) : hidden_name(l - 1, c); };
            for (std::size_t i = 0; i < layer.rows; ++i) {
                const std::string target = l + 1 == L ? out_name(i) : hidden_name(l, i);
                const std::string z = affine_smt(layer, i, input);
                std::string rhs;
                switch (layer.activation) {
                case Activation::sigmoid: rhs = "(/ 1.0 (+ 1.0 (exp (- " + z + "))))"; break;
                case Activation::tanh:
                    rhs = "(/ (- 1.0 (exp (* (- 2.0) " + z + "))) (+ 1.0 (exp (* (- 2.0) " + z + "))))";
                    break;
                case Activation::linear: rhs = z; break;
                }
                os << named("(= " + target + " " + rhs + ")",
                            "neuron_" + std::to_string(l + 1) + "_" + std::to_string(i + 1));
            }
        }
    } else {
        const FormulaRewrite fr = formula_rewrite(nn, box);
        const Layer& hid = nn.layers[0];
        const Layer& outl = nn.layers[1];
        const bool tanh_layer = hid.activation == Activation::tanh;
        os << "; exp-free encoding of a " << network_shape(nn) << " network\n";
        os << "; d0 = " << fr.d0 << "; y_j = exp(-x_j/d0), so exp(-w*x_j) = y_j^(d0*w)";
        os << (tanh_layer ? " and tanh(s) = (1 - exp(-2s))/(1 + exp(-2s))\n" : "\n");
        os << "; z_j = 1/y_j carries negative exponents\n";
        os << "; the constants exp(-b) and the y_j domain endpoints below are floating-point approximations;\n";
        os << "; the integer rewrite is exact, but the rationality of these constants is not checked\n";
        os << "(set-logic QF_NRA)\n";
        for (std::size_t j = 0; j < nn.inputs; ++j)
            os << "(declare-fun y" << j + 1 << " () Real)\n";
        for (std::size_t j : fr.reciprocal)
            os << "(declare-fun zr" << j + 1 << " () Real)\n";
        for (std::size_t i = 0; i < hid.rows; ++i)
            os << "(declare-fun " << hidden_name(0, i) << " () Real)\n";
        for (std::size_t i = 0; i < nn.outputs; ++i)
            os << "(declare-fun " << out_name(i) << " () Real)\n";
        for (std::size_t j = 0; j < nn.inputs; ++j) {
            const std::string y = "y" + std::to_string(j + 1);
            os << named("(and (<= " + smt_number(fr.y_domain[j].lo()) + " " + y + ") (<= " + y + " " +
                            smt_number(fr.y_domain[j].hi()) + "))",
                        "domain_" + std::to_string(j + 1));
        }
        for (std::size_t j : fr.reciprocal)
            os << named("(= (* y" + std::to_string(j + 1) + " zr" + std::to_string(j + 1) + ") 1.0)",
                        "reciprocal_" + std::to_string(j + 1));
        for (std::size_t i = 0; i < hid.rows; ++i) {
            const double k = std::exp(-(tanh_layer ? 2.0 : 1.0) * hid.bias[i]);
            std::string mono = "(* " + smt_number(k);
            for (std::size_t j = 0; j < hid.cols; ++j) {
                const cpp_int r(fr.r[i][j]);
                if (r == 0)
                    continue;
                const std::string base = r > 0 ? "y" + std::to_string(j + 1) : "zr" + std::to_string(j + 1);
                const cpp_int e = r > 0 ? r : cpp_int(-r);
                mono += e == 1 ? " " + base : " (^ " + base + " " + e.str() + ")";
            }
            mono += ")";
            const std::string h = hidden_name(0, i);
            const std::string body = tanh_layer ? "(= (* " + h + " (+ 1.0 " + mono + ")) (- 1.0 " + mono + "))"
                                                : "(= (* " + h + " (+ 1.0 " + mono + ")) 1.0)";
            os << named(body, "neuron_1_" + std::to_string(i + 1));
        }
        for (std::size_t i = 0; i < outl.rows; ++i)
            os << named("(= " + out_name(i) + " " +
                            affine_smt(outl, i, [&](std::size_t c) { return hidden_name(0, c); }) + ")",
                        "neuron_2_" + std::to_string(i + 1));
    }
    os << named("(" + smt_rel(prop.rel) + " " + smt_of(prop.lhs) + " " + smt_number(prop.rhs) + ")", "property");
    os << "(check-sat)\n";
    return os.str();
}

std::map<std::string, double> formula_witness(const NeuralNetwork& nn, std::span<const double> x, FormulaForm form)
{
    check_network(nn);
    if (x.size() != nn.inputs)
        throw ArityMismatch("point has " + std::to_string(x.size()) + " coordinates for " +
                            std::to_string(nn.inputs) + " inputs");
    std::map<std::string, double> env;
    std::vector<double> a(x.begin(), x.end());
    const std::size_t L = nn.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        const Layer& layer = nn.layers[l];
        std::vector<double> next;
        for (std::size_t i = 0; i < layer.rows; ++i) {
            double z = layer.bias[i];
            for (std::size_t c = 0; c < layer.cols; ++c)
                z += layer.w(i, c) * a[c];
            next.push_back(act_value(layer.activation, z));
            env[l + 1 == L ? out_var(i) : hidden_name(l, i)] = next.back();
        }
        a = std::move(next);
    }
    if (form == FormulaForm::phi0) {
        for (std::size_t j = 0; j < nn.inputs; ++j)
            env[in_name(j)] = x[j];
    } else {
        std::vector<Interval> box;
        for (double v : x)
            box.emplace_back(v);
        const FormulaRewrite fr = formula_rewrite(nn, box);
        const double d0 = std::stod(fr.d0);
        for (std::size_t j = 0; j < nn.inputs; ++j)
            env["y" + std::to_string(j + 1)] = std::exp(-x[j] / d0);
        for (std::size_t j : fr.reciprocal)
            env["zr" + std::to_string(j + 1)] = std::exp(x[j] / d0);
    }
    return env;
}

// ------------------------------------------------------------ SMT evaluator

namespace {

struct Sexp {
    std::string atom;
    std::vector<Sexp> list;
    bool is_atom = true;
};

struct SexpReader {
    std::string_view s;
    std::size_t i = 0;

    void skip()
    {
        for (;;) {
            while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
                ++i;
            if (i < s.size() && s[i] == ';') {
                while (i < s.size() && s[i] != '\n')
                    ++i;
                continue;
            }
            return;
        }
    }

    bool done()
    {
        skip();
        return i >= s.size();
    }

    Sexp read()
    {
        skip();
        if (i >= s.size())
            throw std::invalid_argument("unexpected end of formula text");
        if (s[i] == ')')
            throw std::invalid_argument("unbalanced ')' at offset " + std::to_string(i));
        Sexp e;
        if (s[i] == '(') {
            ++i;
            e.is_atom = false;
            for (;;) {
                skip();
                if (i >= s.size())
                    throw std::invalid_argument("unterminated list");
                if (s[i] == ')') {
                    ++i;
                    break;
                }
                e.list.push_back(read());
            }
            return e;
        }
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '(' && s[i] != ')')
            ++i;
        e.atom = std::string(s.substr(start, i - start));
        return e;
    }
};

struct Evaluator {
    const std::map<std::string, double>& env;
    double tol;

    double num(const Sexp& e) const
    {
        if (e.is_atom) {
            double v;
            auto [p, ec] = std::from_chars(e.atom.data(), e.atom.data() + e.atom.size(), v);
            if (ec == std::errc() && p == e.atom.data() + e.atom.size())
                return v;
            auto it = env.find(e.atom);
            if (it == env.end())
                throw std::invalid_argument("no value for '" + e.atom + "'");
            return it->second;
        }
        if (e.list.empty() || !e.list[0].is_atom)
            throw std::invalid_argument("malformed term");
        const std::string& op = e.list[0].atom;
        std::vector<double> args;
        for (std::size_t k = 1; k < e.list.size(); ++k)
            args.push_back(num(e.list[k]));
        if (args.empty())
            throw std::invalid_argument("operator '" + op + "' without arguments");
        if (op == "+")
            return std::accumulate(args.begin(), args.end(), 0.0);
        if (op == "*")
            return std::accumulate(args.begin(), args.end(), 1.0, std::multiplies<>());
        if (op == "-") {
            if (args.size() == 1)
                return -args[0];
            double v = args[0];
            for (std::size_t k = 1; k < args.size(); ++k)
                v -= args[k];
            return v;
        }
        if (op == "/") {
            double v = args[0];
            for (std::size_t k = 1; k < args.size(); ++k)
                v /= args[k];
            return v;
        }
        if (op == "^" && args.size() == 2)
            return std::pow(args[0], args[1]);
        if (op == "exp" && args.size() == 1)
            return std::exp(args[0]);
        throw std::invalid_argument("unknown operator '" + op + "'");
    }

    // Violation amount: 0 when the formula holds within tol.
    double violation(const Sexp& e) const
    {
        if (e.is_atom) {
            if (e.atom == "true")
                return 0.0;
            if (e.atom == "false")
                return std::numeric_limits<double>::infinity();
            throw std::invalid_argument("non-boolean atom '" + e.atom + "'");
        }
        const std::string& op = e.list.at(0).atom;
        if (op == "and") {
            double v = 0.0;
            for (std::size_t k = 1; k < e.list.size(); ++k)
                v = std::max(v, violation(e.list[k]));
            return v;
        }
        if (op == "or") {
            double v = std::numeric_limits<double>::infinity();
            for (std::size_t k = 1; k < e.list.size(); ++k)
                v = std::min(v, violation(e.list[k]));
            return v;
        }
        if (op == "not")
            throw std::invalid_argument("negation is not supported by the evaluator");
        std::vector<double> a;
        for (std::size_t k = 1; k < e.list.size(); ++k)
            a.push_back(num(e.list[k]));
        double v = 0.0;
        for (std::size_t k = 0; k + 1 < a.size(); ++k) {
            if (op == "=")
                v = std::max(v, std::abs(a[k] - a[k + 1]));
            else if (op == "<=" || op == "<")
                v = std::max(v, a[k] - a[k + 1]);
            else if (op == ">=" || op == ">")
                v = std::max(v, a[k + 1] - a[k]);
            else
                throw std::invalid_argument("unknown relation '" + op + "'");
        }
        return v;
    }
};

} // namespace

std::vector<ConjunctResult> evaluate_smt(std::string_view text, const std::map<std::string, double>& env, double tol)
{
    SexpReader rd{text};
    Evaluator ev{env, tol};
    std::vector<ConjunctResult> out;
    while (!rd.done()) {
        const Sexp cmd = rd.read();
        if (cmd.is_atom || cmd.list.empty() || cmd.list[0].atom != "assert")
            continue;
        Sexp body = cmd.list.at(1);
        std::string name = "assert_" + std::to_string(out.size() + 1);
        if (!body.is_atom && !body.list.empty() && body.list[0].atom == "!") {
            for (std::size_t k = 2; k + 1 < body.list.size(); ++k)
                if (body.list[k].atom == ":named")
                    name = body.list[k + 1].atom;
            body = Sexp(body.list.at(1));
        }
        ConjunctResult r;
        r.name = name;
        r.violation = std::max(0.0, ev.violation(body));
        r.holds = r.violation <= tol;
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace nnreach

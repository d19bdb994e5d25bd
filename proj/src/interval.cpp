#include "nnreach/interval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace nnreach {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kElemUlps = kSlackUlps + kElementaryErrorUlps;

double check_finite(double x)
{
    if (!std::isfinite(x))
        throw std::overflow_error("interval endpoint is not finite");
    return x;
}

double pow_down(double x, unsigned n)
{
    double r = 1.0;
    for (unsigned i = 0; i < n; ++i)
        r = std::max(0.0, nudge(r * x, true));
    return r;
}

double pow_up(double x, unsigned n)
{
    double r = 1.0;
    for (unsigned i = 0; i < n; ++i)
        r = nudge(r * x, false);
    return r;
}

// Does [lo, hi] (slightly widened) contain offset + k * period for some integer k?
bool contains_lattice_point(double lo, double hi, double offset, double period)
{
    const double eps = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    const double k = std::ceil((lo - eps - offset) / period);
    return offset + k * period <= hi + eps;
}

} // namespace

double nudge(double x, bool down, int ulps)
{
    for (int i = 0; i < ulps; ++i)
        x = std::nextafter(x, down ? -kInf : kInf);
    return check_finite(x);
}

double sigmoid(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi)
{
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw std::invalid_argument("interval endpoints must be finite");
    if (lo > hi)
        throw std::invalid_argument("interval lower endpoint exceeds upper endpoint");
}

Interval Interval::widened(double lo, double hi, int ulps)
{
    return Interval(nudge(lo, true, ulps), nudge(hi, false, ulps));
}

Interval Interval::symmetric(double r)
{
    r = std::abs(r);
    return Interval(-r, r);
}

double Interval::mid() const
{
    const double m = 0.5 * lo_ + 0.5 * hi_;
    return std::clamp(m, lo_, hi_);
}

double Interval::rad() const
{
    const double m = mid();
    return nudge(std::max(m - lo_, hi_ - m), false, 1);
}

double Interval::mag() const { return std::max(std::abs(lo_), std::abs(hi_)); }

std::pair<Interval, Interval> Interval::split() const
{
    const double m = mid();
    return {Interval(lo_, m), Interval(m, hi_)};
}

Interval& Interval::operator+=(const Interval& o) { return *this = *this + o; }
Interval& Interval::operator-=(const Interval& o) { return *this = *this - o; }
Interval& Interval::operator*=(const Interval& o) { return *this = *this * o; }

Interval operator-(const Interval& a) { return Interval(-a.hi(), -a.lo()); }

Interval operator+(const Interval& a, const Interval& b)
{
    if (b == Interval())
        return a;
    if (a == Interval())
        return b;
    return Interval::widened(a.lo() + b.lo(), a.hi() + b.hi());
}

Interval operator-(const Interval& a, const Interval& b) { return a + (-b); }

Interval operator*(const Interval& a, const Interval& b)
{
    if (a == Interval() || b == Interval())
        return Interval();
    const double p1 = a.lo() * b.lo();
    const double p2 = a.lo() * b.hi();
    const double p3 = a.hi() * b.lo();
    const double p4 = a.hi() * b.hi();
    return Interval::widened(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

Interval operator/(const Interval& a, const Interval& b)
{
    if (b.contains_zero())
        throw DivisionByZeroInterval();
    const double q1 = a.lo() / b.lo();
    const double q2 = a.lo() / b.hi();
    const double q3 = a.hi() / b.lo();
    const double q4 = a.hi() / b.hi();
    return Interval::widened(std::min({q1, q2, q3, q4}), std::max({q1, q2, q3, q4}));
}

Interval operator+(const Interval& a, double b) { return a + Interval(b); }
Interval operator*(double a, const Interval& b) { return Interval(a) * b; }

Interval hull(const Interval& a, const Interval& b)
{
    return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

Interval hull(const Interval& a, double b) { return hull(a, Interval(b)); }

std::optional<Interval> intersect(const Interval& a, const Interval& b)
{
    const double lo = std::max(a.lo(), b.lo());
    const double hi = std::min(a.hi(), b.hi());
    if (lo > hi)
        return std::nullopt;
    return Interval(lo, hi);
}

Interval sqr(const Interval& a) { return pow(a, 2); }

Interval pow(const Interval& a, unsigned n)
{
    if (n == 0)
        return Interval(1.0);
    if (n == 1)
        return a;
    if (n % 2 == 0) {
        const Interval m = abs(a);
        return Interval(pow_down(m.lo(), n), pow_up(m.hi(), n));
    }
    if (a.lo() >= 0.0)
        return Interval(pow_down(a.lo(), n), pow_up(a.hi(), n));
    if (a.hi() <= 0.0)
        return Interval(-pow_up(-a.lo(), n), -pow_down(-a.hi(), n));
    return Interval(-pow_up(-a.lo(), n), pow_up(a.hi(), n));
}

Interval abs(const Interval& a)
{
    if (a.lo() >= 0.0)
        return a;
    if (a.hi() <= 0.0)
        return -a;
    return Interval(0.0, a.mag());
}

Interval recip(const Interval& a) { return Interval(1.0) / a; }

Interval exp(const Interval& a)
{
    return Interval(std::max(0.0, nudge(std::exp(a.lo()), true, kElemUlps)),
                    nudge(std::exp(a.hi()), false, kElemUlps));
}

Interval sigmoid(const Interval& a)
{
    const double lo = std::max(0.0, nudge(sigmoid(a.lo()), true, kElemUlps));
    const double hi = std::min(1.0, nudge(sigmoid(a.hi()), false, kElemUlps));
    return Interval(lo, std::max(lo, hi));
}

Interval tanh(const Interval& a)
{
    const double lo = std::max(-1.0, nudge(std::tanh(a.lo()), true, kElemUlps));
    const double hi = std::min(1.0, nudge(std::tanh(a.hi()), false, kElemUlps));
    return Interval(lo, std::max(lo, hi));
}

Interval cos(const Interval& a)
{
    constexpr double pi = std::numbers::pi;
    if (a.width() >= 2.0 * pi)
        return Interval(-1.0, 1.0);
    const double c1 = std::cos(a.lo());
    const double c2 = std::cos(a.hi());
    double lo = nudge(std::min(c1, c2), true, kElemUlps);
    double hi = nudge(std::max(c1, c2), false, kElemUlps);
    if (contains_lattice_point(a.lo(), a.hi(), 0.0, 2.0 * pi))
        hi = 1.0;
    if (contains_lattice_point(a.lo(), a.hi(), pi, 2.0 * pi))
        lo = -1.0;
    return Interval(std::max(-1.0, lo), std::min(1.0, hi));
}

Interval sin(const Interval& a)
{
    constexpr double pi = std::numbers::pi;
    if (a.width() >= 2.0 * pi)
        return Interval(-1.0, 1.0);
    const double s1 = std::sin(a.lo());
    const double s2 = std::sin(a.hi());
    double lo = nudge(std::min(s1, s2), true, kElemUlps);
    double hi = nudge(std::max(s1, s2), false, kElemUlps);
    if (contains_lattice_point(a.lo(), a.hi(), pi / 2.0, 2.0 * pi))
        hi = 1.0;
    if (contains_lattice_point(a.lo(), a.hi(), -pi / 2.0, 2.0 * pi))
        lo = -1.0;
    return Interval(std::max(-1.0, lo), std::min(1.0, hi));
}

Interval tan(const Interval& a)
{
    constexpr double pi = std::numbers::pi;
    if (a.width() >= pi || contains_lattice_point(a.lo(), a.hi(), pi / 2.0, pi))
        throw TanPoleInRange("tan argument " + to_string(a) + " contains a pole");
    return Interval(nudge(std::tan(a.lo()), true, kElemUlps), nudge(std::tan(a.hi()), false, kElemUlps));
}

std::string to_string(const Interval& a)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%.17g, %.17g]", a.lo(), a.hi());
    return buf;
}

} // namespace nnreach

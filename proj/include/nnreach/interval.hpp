#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace nnreach {

// Every computed endpoint is pushed outward by this many units in the last
// place. Elementary functions additionally absorb the platform error bound.
inline constexpr int kSlackUlps = 4;
inline constexpr int kElementaryErrorUlps = 2;

class DivisionByZeroInterval : public std::domain_error {
public:
    DivisionByZeroInterval() : std::domain_error("interval division by an interval containing zero") {}
};

class TanPoleInRange : public std::domain_error {
public:
    explicit TanPoleInRange(const std::string& what) : std::domain_error(what) {}
};

/// Nudge `x` outward by `ulps` units in the last place (down for `down`).
double nudge(double x, bool down, int ulps = kSlackUlps);

/// Closed real interval [lo, hi] with finite endpoints.
class Interval {
public:
    constexpr Interval() = default;
    constexpr explicit Interval(double v) : lo_(v), hi_(v) {}
    Interval(double lo, double hi);

    /// [lo, hi] widened outward by `ulps` on both sides.
    static Interval widened(double lo, double hi, int ulps = kSlackUlps);
    /// Symmetric interval [-r, r].
    static Interval symmetric(double r);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double width() const { return hi_ - lo_; }
    double mid() const;
    double rad() const;
    /// max(|lo|, |hi|)
    double mag() const;
    bool is_point() const { return lo_ == hi_; }

    bool contains(double x) const { return lo_ <= x && x <= hi_; }
    bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
    bool interior_contains(const Interval& o) const { return lo_ < o.lo_ && o.hi_ < hi_; }
    bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }

    std::pair<Interval, Interval> split() const;

    Interval& operator+=(const Interval& o);
    Interval& operator-=(const Interval& o);
    Interval& operator*=(const Interval& o);

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double lo_ = 0.0;
    double hi_ = 0.0;
};

Interval operator-(const Interval& a);
Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator*(const Interval& a, const Interval& b);
Interval operator/(const Interval& a, const Interval& b);
Interval operator+(const Interval& a, double b);
Interval operator*(double a, const Interval& b);

Interval hull(const Interval& a, const Interval& b);
Interval hull(const Interval& a, double b);
std::optional<Interval> intersect(const Interval& a, const Interval& b);

Interval sqr(const Interval& a);
Interval pow(const Interval& a, unsigned n);
Interval abs(const Interval& a);
Interval recip(const Interval& a);

Interval exp(const Interval& a);
Interval sigmoid(const Interval& a);
Interval tanh(const Interval& a);
Interval cos(const Interval& a);
Interval sin(const Interval& a);
Interval tan(const Interval& a);

/// Scalar logistic function, 1 / (1 + e^-x), computed without overflow.
double sigmoid(double x);

std::string to_string(const Interval& a);

} // namespace nnreach

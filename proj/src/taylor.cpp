#include "nnreach/taylor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace nnreach {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::denorm_min();

// Bound on accumulated floating-point error, itself rounded up generously.
Interval error_interval(double err)
{
    if (err == 0.0)
        return Interval();
    return Interval::symmetric(nudge(err * (1.0 + 1e-10), false, 2));
}

// c += t; returns the exact rounding error magnitude of the addition.
inline double two_sum_into(double& c, double t)
{
    const double s = c + t;
    const double bb = s - c;
    const double e = (c - (s - bb)) + (t - bb);
    c = s;
    return std::abs(e);
}

void generate(unsigned n, unsigned v, unsigned remaining, std::vector<std::uint8_t>& cur,
              std::vector<std::uint8_t>& out)
{
    if (v + 1 == n) {
        cur[v] = static_cast<std::uint8_t>(remaining);
        out.insert(out.end(), cur.begin(), cur.end());
        return;
    }
    for (unsigned e = remaining + 1; e-- > 0;) {
        cur[v] = static_cast<std::uint8_t>(e);
        generate(n, v + 1, remaining - e, cur, out);
    }
}

} // namespace

// ------------------------------------------------------------------ basis

MonomialBasis::MonomialBasis(unsigned n_vars, unsigned order, std::uint64_t nonneg_mask)
    : n_(n_vars), order_(order), mask_(nonneg_mask)
{
    if (order > kMaxTaylorOrder)
        throw std::invalid_argument("Taylor order above " + std::to_string(kMaxTaylorOrder));
    if (n_vars > 20)
        throw std::invalid_argument("too many Taylor model variables");
    if (n_ == 0) {
        degree_.push_back(0);
    } else {
        std::vector<std::uint8_t> cur(n_, 0);
        for (unsigned d = 0; d <= order_; ++d) {
            const std::size_t before = exps_.size();
            generate(n_, 0, d, cur, exps_);
            for (std::size_t k = before; k < exps_.size(); k += n_)
                degree_.push_back(d);
        }
    }
    const std::size_t m = degree_.size();
    nonneg_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        bool nn = true;
        for (unsigned v = 0; v < n_; ++v)
            if (!nonneg_var(v) && exps_[i * n_ + v] % 2 != 0)
                nn = false;
        nonneg_[i] = nn;
    }

    std::vector<std::pair<std::uint64_t, std::uint32_t>> pairs(m);
    for (std::size_t i = 0; i < m; ++i)
        pairs[i] = {key(exponents(i)), static_cast<std::uint32_t>(i)};
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [k, i] : pairs) {
        keys_.push_back(k);
        key_index_.push_back(i);
    }

    product_.assign(m * m, kTruncated);
    std::vector<std::uint8_t> sum(n_);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            bool nn = true;
            for (unsigned v = 0; v < n_; ++v) {
                sum[v] = static_cast<std::uint8_t>(exps_[i * n_ + v] + exps_[j * n_ + v]);
                if (!nonneg_var(v) && sum[v] % 2 != 0)
                    nn = false;
            }
            if (degree_[i] + degree_[j] <= order_)
                product_[i * m + j] = static_cast<int>(index_of(sum));
            else
                product_[i * m + j] = nn ? kTruncatedNonneg : kTruncated;
        }
    }
}

std::uint64_t MonomialBasis::key(std::span<const std::uint8_t> e) const
{
    std::uint64_t k = 0;
    for (unsigned v = 0; v < n_; ++v)
        k = k * (order_ + 1) + e[v];
    return k;
}

long MonomialBasis::index_of(std::span<const std::uint8_t> e) const
{
    unsigned deg = 0;
    for (unsigned v = 0; v < n_; ++v)
        deg += e[v];
    if (deg > order_)
        return -1;
    const std::uint64_t k = key(e);
    auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
    if (it == keys_.end() || *it != k)
        return -1;
    return key_index_[static_cast<std::size_t>(it - keys_.begin())];
}

BasisPtr MonomialBasis::get(unsigned n_vars, unsigned order, std::uint64_t nonneg_mask)
{
    static std::mutex mu;
    static std::map<std::tuple<unsigned, unsigned, std::uint64_t>, BasisPtr> registry;
    std::lock_guard lock(mu);
    auto& slot = registry[{n_vars, order, nonneg_mask}];
    if (!slot)
        slot = std::make_shared<const MonomialBasis>(n_vars, order, nonneg_mask);
    return slot;
}

// ------------------------------------------------------------------ model

TaylorModel::TaylorModel() : TaylorModel(MonomialBasis::get(0, 0)) {}

TaylorModel::TaylorModel(BasisPtr basis, double c) : basis_(std::move(basis)), coeffs_(basis_->size(), 0.0)
{
    coeffs_[0] = c;
}

TaylorModel TaylorModel::constant(BasisPtr basis, const Interval& c)
{
    const double m = c.mid();
    TaylorModel t(std::move(basis), m);
    t.rem_ = c - Interval(m);
    return t;
}

TaylorModel TaylorModel::variable(BasisPtr basis, unsigned var)
{
    if (var >= basis->n_vars() || basis->order() == 0)
        throw std::out_of_range("Taylor model variable index");
    TaylorModel t(basis);
    std::vector<std::uint8_t> e(basis->n_vars(), 0);
    e[var] = 1;
    t.coeffs_[static_cast<std::size_t>(basis->index_of(e))] = 1.0;
    return t;
}

void TaylorModel::require_same(const TaylorModel& o) const
{
    if (basis_ != o.basis_)
        throw DomainMismatch();
}

bool TaylorModel::is_constant() const
{
    return std::all_of(coeffs_.begin() + 1, coeffs_.end(), [](double c) { return c == 0.0; });
}

Interval TaylorModel::poly_bound() const
{
    double lo = coeffs_[0];
    double hi = coeffs_[0];
    double abs_sum = std::abs(coeffs_[0]);
    std::size_t terms = 1;
    for (std::size_t i = 1; i < coeffs_.size(); ++i) {
        const double c = coeffs_[i];
        if (c == 0.0)
            continue;
        ++terms;
        abs_sum += std::abs(c);
        if (basis_->nonneg_term(i)) {
            if (c > 0.0)
                hi += c;
            else
                lo += c;
        } else {
            lo -= std::abs(c);
            hi += std::abs(c);
        }
    }
    if (terms == 1)
        return Interval(coeffs_[0]);
    const double err = static_cast<double>(terms + 1) * kEps * abs_sum + kTiny;
    return Interval::widened(lo - err, hi + err, 1);
}

Interval TaylorModel::bound() const { return poly_bound() + rem_; }

namespace {

double pinned_lower(TaylorModel p)
{
    std::vector<bool> fixed(p.n_vars(), false);
    bool changed = true;
    while (changed) {
        changed = false;
        for (unsigned v = 0; v < p.n_vars(); ++v) {
            if (fixed[v])
                continue;
            const Interval d = p.derivative(v).bound();
            if (d.lo() >= 0.0)
                p = p.substitute(v, p.basis()->nonneg_var(v) ? 0.0 : -1.0);
            else if (d.hi() <= 0.0)
                p = p.substitute(v, 1.0);
            else
                continue;
            fixed[v] = true;
            changed = true;
        }
    }
    return p.bound().lo();
}

} // namespace

Interval TaylorModel::refined_bound() const
{
    TaylorModel p = *this;
    p.rem_ = Interval();
    const Interval plain = poly_bound();
    const double lo = std::max(plain.lo(), pinned_lower(p));
    const double hi = std::min(plain.hi(), -pinned_lower(-p));
    return Interval(lo, hi) + rem_;
}

Interval TaylorModel::eval(std::span<const double> point) const
{
    Interval acc;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (coeffs_[i] == 0.0)
            continue;
        Interval term(coeffs_[i]);
        auto e = basis_->exponents(i);
        for (unsigned v = 0; v < n_vars(); ++v)
            if (e[v] != 0)
                term = term * pow(Interval(point[v]), e[v]);
        acc = acc + term;
    }
    return acc + rem_;
}

TaylorModel& TaylorModel::operator+=(const TaylorModel& o)
{
    require_same(o);
    double err = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (o.coeffs_[i] == 0.0)
            continue;
        err += two_sum_into(coeffs_[i], o.coeffs_[i]);
    }
    rem_ = rem_ + o.rem_ + error_interval(err);
    return *this;
}

TaylorModel& TaylorModel::operator-=(const TaylorModel& o) { return *this += -o; }

TaylorModel& TaylorModel::operator*=(double c)
{
    if (c == 1.0)
        return *this;
    double err = 0.0;
    for (double& x : coeffs_) {
        x *= c;
        err += std::abs(x);
    }
    rem_ = rem_ * Interval(c) + error_interval(err * kEps + kTiny);
    return *this;
}

TaylorModel& TaylorModel::operator+=(double c)
{
    if (c == 0.0)
        return *this;
    coeffs_[0] += c;
    rem_ = rem_ + error_interval(std::abs(coeffs_[0]) * kEps);
    return *this;
}

TaylorModel TaylorModel::scaled(const Interval& c) const
{
    const double m = c.mid();
    TaylorModel r = *this;
    r *= m;
    if (!c.is_point())
        r.rem_ = r.rem_ + (c - Interval(m)) * bound();
    return r;
}

TaylorModel TaylorModel::add_interval(const Interval& c) const
{
    const double m = c.mid();
    TaylorModel r = *this;
    r += m;
    if (!c.is_point())
        r.rem_ = r.rem_ + (c - Interval(m));
    return r;
}

TaylorModel operator-(const TaylorModel& a)
{
    TaylorModel r = a;
    for (double& x : r.coeffs_)
        x = -x;
    r.rem_ = -a.rem_;
    return r;
}

TaylorModel operator*(const TaylorModel& a, const TaylorModel& b)
{
    a.require_same(b);
    const MonomialBasis& basis = *a.basis_;
    const std::size_t m = basis.size();

    std::vector<std::size_t> ia, ib;
    for (std::size_t i = 0; i < m; ++i) {
        if (a.coeffs_[i] != 0.0)
            ia.push_back(i);
        if (b.coeffs_[i] != 0.0)
            ib.push_back(i);
    }

    TaylorModel r(a.basis_);
    // Exact per-operation rounding errors (fma residual and two-sum), summed.
    double exact_err = 0.0;
    std::size_t ops = 0;
    double tlo = 0.0, thi = 0.0, tabs = 0.0;
    std::size_t tcount = 0;
    for (std::size_t i : ia) {
        const double ai = a.coeffs_[i];
        for (std::size_t j : ib) {
            const double bj = b.coeffs_[j];
            const double t = ai * bj;
            const int k = basis.product(i, j);
            if (k >= 0) {
                exact_err += std::abs(std::fma(ai, bj, -t)) + two_sum_into(r.coeffs_[static_cast<std::size_t>(k)], t);
                ++ops;
            } else {
                ++tcount;
                tabs += std::abs(t);
                if (k == MonomialBasis::kTruncatedNonneg) {
                    if (t > 0.0)
                        thi += t;
                    else
                        tlo += t;
                } else {
                    tlo -= std::abs(t);
                    thi += std::abs(t);
                }
            }
        }
    }
    double err = exact_err * (1.0 + static_cast<double>(ops + 1) * kEps) + kTiny * static_cast<double>(ops);
    err += static_cast<double>(tcount + 2) * kEps * tabs + kTiny * static_cast<double>(tcount);
    if (ops == 0 && tcount == 0)
        err = 0.0;

    Interval rem = error_interval(err);
    if (tcount != 0)
        rem = rem + Interval(tlo, thi);
    if (b.rem_ != Interval())
        rem = rem + a.poly_bound() * b.rem_;
    if (a.rem_ != Interval())
        rem = rem + b.poly_bound() * a.rem_ + a.rem_ * b.rem_;
    r.rem_ = rem;
    return r;
}

TaylorModel operator+(TaylorModel a, const TaylorModel& b) { return a += b; }
TaylorModel operator-(TaylorModel a, const TaylorModel& b) { return a -= b; }
TaylorModel operator*(TaylorModel a, double c) { return a *= c; }
TaylorModel operator*(double c, TaylorModel a) { return a *= c; }
TaylorModel operator+(TaylorModel a, double c) { return a += c; }
TaylorModel operator-(TaylorModel a, double c) { return a += -c; }
TaylorModel operator+(double c, TaylorModel a) { return a += c; }
TaylorModel operator-(double c, const TaylorModel& a) { return -a + c; }
TaylorModel operator/(const TaylorModel& a, const TaylorModel& b) { return a * reciprocal(b); }

TaylorModel TaylorModel::integrate_time(double h) const
{
    const unsigned n = n_vars();
    if (n == 0 || !basis_->nonneg_var(n - 1))
        throw std::logic_error("integrate_time needs a trailing [0,1] time variable");
    TaylorModel r(basis_);
    r.coeffs_[0] = 0.0;
    std::vector<std::uint8_t> e(n);
    double err = 0.0, tlo = 0.0, thi = 0.0, tabs = 0.0;
    std::size_t tcount = 0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const double c = coeffs_[i];
        if (c == 0.0)
            continue;
        auto src = basis_->exponents(i);
        std::copy(src.begin(), src.end(), e.begin());
        const unsigned k = e[n - 1];
        const double v = c * h / static_cast<double>(k + 1);
        if (basis_->degree(i) + 1 <= order()) {
            ++e[n - 1];
            r.coeffs_[static_cast<std::size_t>(basis_->index_of(e))] = v;
            err += 3.0 * kEps * std::abs(v) + kTiny;
        } else {
            ++tcount;
            tabs += std::abs(v);
            if (basis_->nonneg_term(i)) {
                if (v > 0.0)
                    thi += v;
                else
                    tlo += v;
            } else {
                tlo -= std::abs(v);
                thi += std::abs(v);
            }
        }
    }
    err += static_cast<double>(tcount + 4) * kEps * tabs;
    Interval rem = error_interval(err);
    if (tcount != 0)
        rem = rem + Interval(tlo, thi);
    if (rem_ != Interval())
        rem = rem + hull(rem_, 0.0) * Interval(h);
    r.rem_ = rem;
    return r;
}

TaylorModel TaylorModel::derivative(unsigned var) const
{
    TaylorModel r(basis_);
    r.coeffs_[0] = 0.0;
    std::vector<std::uint8_t> e(n_vars());
    double err = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        auto src = basis_->exponents(i);
        if (coeffs_[i] == 0.0 || src[var] == 0)
            continue;
        std::copy(src.begin(), src.end(), e.begin());
        const double v = coeffs_[i] * e[var];
        --e[var];
        r.coeffs_[static_cast<std::size_t>(basis_->index_of(e))] = v;
        err += kEps * std::abs(v);
    }
    r.rem_ = error_interval(err);
    return r;
}

TaylorModel TaylorModel::substitute(unsigned var, double value) const
{
    TaylorModel r(basis_);
    r.coeffs_[0] = 0.0;
    const std::size_t m = coeffs_.size();
    std::vector<double> abs_sum(m, 0.0);
    std::vector<unsigned> count(m, 0);
    std::vector<std::uint8_t> e(n_vars());
    for (std::size_t i = 0; i < m; ++i) {
        if (coeffs_[i] == 0.0)
            continue;
        auto src = basis_->exponents(i);
        std::copy(src.begin(), src.end(), e.begin());
        const unsigned p = e[var];
        e[var] = 0;
        const double t = coeffs_[i] * pow_int(value, p);
        const auto k = static_cast<std::size_t>(basis_->index_of(e));
        r.coeffs_[k] += t;
        abs_sum[k] += std::abs(t) * (p + 2);
        ++count[k];
    }
    double err = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        if (count[k] != 0)
            err += static_cast<double>(count[k] + 1) * kEps * abs_sum[k] + kTiny * count[k];
    r.rem_ = rem_ + error_interval(err);
    return r;
}

TaylorModel TaylorModel::rebase(const BasisPtr& target, std::span<const int> var_map) const
{
    TaylorModel r(target);
    r.coeffs_[0] = 0.0;
    std::vector<std::uint8_t> e(target->n_vars());
    double tlo = 0.0, thi = 0.0, tabs = 0.0;
    std::size_t tcount = 0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const double c = coeffs_[i];
        if (c == 0.0)
            continue;
        auto src = basis_->exponents(i);
        std::fill(e.begin(), e.end(), 0);
        bool keep = basis_->degree(i) <= target->order();
        for (unsigned v = 0; v < n_vars() && keep; ++v) {
            if (src[v] == 0)
                continue;
            if (var_map[v] < 0)
                keep = false;
            else
                e[static_cast<std::size_t>(var_map[v])] = src[v];
        }
        if (keep) {
            r.coeffs_[static_cast<std::size_t>(target->index_of(e))] = c;
            continue;
        }
        ++tcount;
        tabs += std::abs(c);
        if (basis_->nonneg_term(i)) {
            if (c > 0.0)
                thi += c;
            else
                tlo += c;
        } else {
            tlo -= std::abs(c);
            thi += std::abs(c);
        }
    }
    Interval rem = rem_;
    if (tcount != 0)
        rem = rem + Interval(tlo, thi) + error_interval(static_cast<double>(tcount + 2) * kEps * tabs);
    r.rem_ = rem;
    return r;
}

TaylorModel TaylorModel::truncated(unsigned order) const
{
    if (order >= this->order())
        return *this;
    TaylorModel r = *this;
    double tlo = 0.0, thi = 0.0, tabs = 0.0;
    std::size_t tcount = 0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const double c = coeffs_[i];
        if (c == 0.0 || basis_->degree(i) <= order)
            continue;
        r.coeffs_[i] = 0.0;
        ++tcount;
        tabs += std::abs(c);
        if (basis_->nonneg_term(i)) {
            if (c > 0.0)
                thi += c;
            else
                tlo += c;
        } else {
            tlo -= std::abs(c);
            thi += std::abs(c);
        }
    }
    if (tcount != 0)
        r.rem_ = rem_ + Interval(tlo, thi) + error_interval(static_cast<double>(tcount + 2) * kEps * tabs);
    return r;
}

// ------------------------------------------------------------------ elementary

namespace {

using Poly = std::vector<double>;  // ascending powers

Poly poly_derivative(const Poly& p)
{
    Poly d(p.size() > 1 ? p.size() - 1 : 1, 0.0);
    for (std::size_t j = 1; j < p.size(); ++j)
        d[j - 1] = p[j] * static_cast<double>(j);
    return d;
}

// (a + b w^2) * p
Poly poly_mul_quadratic(const Poly& p, double a, double b)
{
    Poly r(p.size() + 2, 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) {
        r[j] += a * p[j];
        r[j + 2] += b * p[j];
    }
    return r;
}

// Derivative polynomials: sigmoid^(k) = S_k(sigmoid - 1/2), tanh^(k) = T_k(tanh).
// All coefficients are dyadic and exactly representable for k <= 10.
const std::vector<Poly>& derivative_polys(Func f)
{
    static const auto build = [](Poly p0, double a, double b) {
        std::vector<Poly> v{p0};
        for (unsigned k = 1; k <= kMaxTaylorOrder + 2; ++k)
            v.push_back(poly_mul_quadratic(poly_derivative(v.back()), a, b));
        return v;
    };
    static const std::vector<Poly> sig = build({0.5, 1.0}, 0.25, -1.0);
    static const std::vector<Poly> th = build({0.0, 1.0}, 1.0, -1.0);
    return f == Func::sigmoid ? sig : th;
}

Interval horner(const Poly& p, const Interval& w)
{
    Interval r(p.back());
    for (std::size_t j = p.size() - 1; j-- > 0;)
        r = r * w + Interval(p[j]);
    return r;
}

// p over w with a mean-value refinement.
Interval poly_range(const Poly& p, const Interval& w)
{
    const Interval naive = horner(p, w);
    if (w.is_point() || p.size() < 2)
        return naive;
    const Interval wm(w.mid());
    const Interval mv = horner(p, wm) + horner(poly_derivative(p), w) * (w - wm);
    auto both = intersect(naive, mv);
    return both ? *both : naive;
}

Interval activation_derivative(Func f, unsigned k, const Interval& x)
{
    const Poly& p = derivative_polys(f)[k];
    auto inner = [f](const Interval& piece) {
        return f == Func::sigmoid ? sigmoid(piece) - Interval(0.5) : tanh(piece);
    };
    if (x.is_point())
        return horner(p, inner(x));
    constexpr int kPieces = 16;
    std::optional<Interval> acc;
    for (int j = 0; j < kPieces; ++j) {
        const double a = j == 0 ? x.lo() : x.lo() + x.width() * j / kPieces;
        const double b = j == kPieces - 1 ? x.hi() : x.lo() + x.width() * (j + 1) / kPieces;
        const Interval piece(std::min(a, b), std::max(a, b));
        const Interval r = poly_range(p, inner(piece));
        acc = acc ? hull(*acc, r) : r;
    }
    return *acc;
}

double factorial(unsigned k)
{
    double r = 1.0;
    for (unsigned i = 2; i <= k; ++i)
        r *= i;
    return r;
}

// Generic composition. deriv(k, X) encloses the k-th derivative over X.
template <class Deriv>
TaylorModel compose_with(const TaylorModel& a, const Interval& range, Deriv&& deriv)
{
    const unsigned n = a.order();
    const double c = range.mid();
    const Interval C(c);
    TaylorModel d = a - c;
    const Interval dr = range - C;

    TaylorModel r = TaylorModel::constant(a.basis(), deriv(n, C) / Interval(factorial(n)));
    for (unsigned k = n; k-- > 0;) {
        r = r * d;
        r = r.add_interval(deriv(k, C) / Interval(factorial(k)));
    }
    const Interval lagrange = deriv(n + 1, range) / Interval(factorial(n + 1)) * pow(dr, n + 1);
    r.set_remainder(r.remainder() + lagrange);
    return r;
}

} // namespace

Interval elem_derivative(Func f, unsigned k, const Interval& x)
{
    switch (f) {
    case Func::exp: return exp(x);
    case Func::sin:
        switch (k % 4) {
        case 0: return sin(x);
        case 1: return cos(x);
        case 2: return -sin(x);
        default: return -cos(x);
        }
    case Func::cos:
        switch (k % 4) {
        case 0: return cos(x);
        case 1: return -sin(x);
        case 2: return -cos(x);
        default: return sin(x);
        }
    case Func::sigmoid:
    case Func::tanh:
        if (k == 0)
            return apply_func(f, x);
        return activation_derivative(f, k, x);
    case Func::tan:
        if (k == 0)
            return tan(x);
        break;
    }
    throw std::invalid_argument("no derivative enclosure for tan");
}

TaylorModel compose_elem(const TaylorModel& a, Func f)
{
    const Interval range = a.bound();
    if (f == Func::tan)
        return TaylorModel::constant(a.basis(), tan(range));
    if (range.is_point() || a.order() == 0)
        return TaylorModel::constant(a.basis(), apply_func(f, range));
    return compose_with(a, range, [f](unsigned k, const Interval& x) { return elem_derivative(f, k, x); });
}

TaylorModel reciprocal(const TaylorModel& a)
{
    const Interval range = a.bound();
    if (range.contains_zero())
        throw DivisionByZeroInterval();
    if (range.is_point() || a.order() == 0)
        return TaylorModel::constant(a.basis(), recip(range));
    return compose_with(a, range, [](unsigned k, const Interval& x) {
        Interval r = pow(recip(x), k + 1) * Interval(factorial(k));
        return k % 2 ? -r : r;
    });
}

TaylorModel apply_func(Func f, const TaylorModel& a) { return compose_elem(a, f); }

TaylorModel pow_int(const TaylorModel& a, unsigned n)
{
    TaylorModel result(a.basis(), 1.0);
    TaylorModel base = a;
    bool first = true;
    while (n != 0) {
        if (n & 1u) {
            result = first ? base : result * base;
            first = false;
        }
        n >>= 1u;
        if (n != 0)
            base = base * base;
    }
    return result;
}

std::string to_string(const TaylorModel& a)
{
    std::ostringstream os;
    os.precision(17);
    bool any = false;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
        if (a.coeff(i) == 0.0)
            continue;
        if (any)
            os << " + ";
        any = true;
        os << a.coeff(i);
        auto e = a.basis()->exponents(i);
        for (unsigned v = 0; v < a.n_vars(); ++v) {
            if (e[v] == 0)
                continue;
            os << "*x" << v;
            if (e[v] > 1)
                os << '^' << unsigned(e[v]);
        }
    }
    if (!any)
        os << 0;
    os << " + " << to_string(a.remainder());
    return os.str();
}

} // namespace nnreach

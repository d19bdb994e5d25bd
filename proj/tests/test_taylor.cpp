#include "doctest.h"
#include "nnreach/taylor.hpp"

#include <cmath>
#include <random>

using namespace nnreach;

namespace {

// Exact-double oracles carry their own rounding noise; allow that much.
bool encloses(const Interval& r, double v)
{
    const double tol = 1e-13 * (1.0 + std::abs(v));
    return r.lo() - tol <= v && v <= r.hi() + tol;
}

double eval_double(const TaylorModel& t, std::span<const double> pt)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < t.coeffs().size(); ++i) {
        double term = t.coeff(i);
        auto e = t.basis()->exponents(i);
        for (unsigned v = 0; v < t.n_vars(); ++v)
            term *= std::pow(pt[v], e[v]);
        acc += term;
    }
    return acc;
}

TaylorModel random_poly(std::mt19937_64& rng, const BasisPtr& b, unsigned max_deg, double scale)
{
    std::uniform_real_distribution<double> c(-scale, scale);
    TaylorModel t(b);
    for (std::size_t i = 0; i < b->size(); ++i)
        if (b->degree(i) <= max_deg)
            t.set_coeff(i, c(rng));
    return t;
}

} // namespace

TEST_CASE("basis layout")
{
    auto b = MonomialBasis::get(2, 3);
    CHECK(b->size() == 10);
    CHECK(b->degree(0) == 0);
    CHECK(MonomialBasis::get(2, 3) == b);
    std::uint8_t e[2] = {1, 2};
    long i = b->index_of(e);
    REQUIRE(i >= 0);
    CHECK(b->exponents(static_cast<std::size_t>(i))[0] == 1);
    CHECK(b->degree(static_cast<std::size_t>(i)) == 3);
    CHECK(MonomialBasis::get(3, 4)->size() == 35);
    CHECK(MonomialBasis::get(0, 4)->size() == 1);
}

TEST_CASE("arithmetic examples")
{
    auto b2 = MonomialBasis::get(1, 2);
    TaylorModel x = TaylorModel::variable(b2, 0);
    TaylorModel sq = x * x;
    std::uint8_t e2[1] = {2};
    CHECK(sq.coeff(static_cast<std::size_t>(b2->index_of(e2))) == 1.0);
    CHECK(sq.remainder().width() < 1e-300);

    TaylorModel five = TaylorModel(b2, 2.0) + TaylorModel(b2, 3.0);
    CHECK(five.is_constant());
    CHECK(five.constant_term() == 5.0);

    auto b1 = MonomialBasis::get(1, 1);
    TaylorModel y = TaylorModel::variable(b1, 0);
    TaylorModel t = y * y;
    CHECK(t.is_constant());
    CHECK(t.constant_term() == 0.0);
    CHECK(t.remainder().contains(Interval(0, 1)));

    CHECK_THROWS_AS(x + y, DomainMismatch);
}

TEST_CASE("elementary composition examples")
{
    auto b = MonomialBasis::get(1, 1);
    TaylorModel s0 = compose_elem(TaylorModel(b, 0.0), Func::sigmoid);
    CHECK(s0.is_constant());
    CHECK(s0.bound().contains(0.5));
    CHECK(s0.bound().width() < 1e-14);

    TaylorModel s = compose_elem(TaylorModel::variable(b, 0), Func::sigmoid);
    CHECK(s.constant_term() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.coeff(1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.remainder().width() <= 0.1);

    TaylorModel c = compose_elem(TaylorModel(b, -1.5), Func::cos);
    CHECK(c.bound().contains(0.0707372016677029));
    CHECK(c.bound().width() < 1e-14);
}

TEST_CASE("bound examples")
{
    auto b = MonomialBasis::get(1, 1);
    TaylorModel t(b, 0.5);
    t.set_coeff(1, 0.25);
    t.set_remainder(Interval(-0.1, 0.1));
    Interval r = t.bound();
    CHECK(r.contains(Interval(0.15, 0.85)));
    CHECK(r.width() < 0.7 + 1e-12);

    Interval seven = TaylorModel(b, 7.0).bound();
    CHECK(seven.contains(7.0));
    CHECK(seven.width() < 1e-14);

    auto b2 = MonomialBasis::get(2, 2);
    TaylorModel xy = TaylorModel::variable(b2, 0) * TaylorModel::variable(b2, 1);
    Interval rb = xy.bound();
    CHECK(rb.lo() >= -1 - 1e-12);
    CHECK(rb.hi() <= 1 + 1e-12);
}

TEST_CASE("time integration")
{
    auto b = MonomialBasis::get(1, 3, 0b1);
    TaylorModel one(b, 1.0);
    TaylorModel t = one.integrate_time(1.0);
    CHECK(t.coeff(1) == 1.0);
    CHECK(t.constant_term() == 0.0);

    TaylorModel tt = TaylorModel::variable(b, 0).integrate_time(1.0);
    std::uint8_t e2[1] = {2};
    CHECK(tt.coeff(static_cast<std::size_t>(b->index_of(e2))) == 0.5);

    TaylorModel g(b, 0.5);
    TaylorModel flow = 0.9 * (g * (1.0 - g));
    TaylorModel step = flow.integrate_time(1.0);
    CHECK(step.coeff(1) == doctest::Approx(0.225).epsilon(1e-15));

    // real time scaling
    CHECK(one.integrate_time(0.1).coeff(1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK_THROWS(TaylorModel(MonomialBasis::get(1, 2), 1.0).integrate_time(1.0));
}

TEST_CASE("substitute and rebase")
{
    auto b = MonomialBasis::get(2, 2, 0b10);
    TaylorModel x = TaylorModel::variable(b, 0);
    TaylorModel t = TaylorModel::variable(b, 1);
    TaylorModel f = x + x * t + 2.0 * t * t;
    TaylorModel at1 = f.substitute(1, 1.0);
    CHECK(at1.coeff(0) == 2.0);
    double pt[2] = {0.3, 0.0};
    CHECK(encloses(at1.eval(pt), 0.3 + 0.3 + 2.0));

    auto small = MonomialBasis::get(1, 2);
    int map[2] = {0, -1};
    TaylorModel p = f.rebase(small, map);
    // x survives, x*t and t^2 go to the remainder: x*t in [-1,1], 2t^2 in [0,2]
    CHECK(p.coeff(1) == 1.0);
    CHECK(p.remainder().contains(Interval(-1, 3)));

    auto big = MonomialBasis::get(3, 2, 0b100);
    int up[2] = {0, 2};
    TaylorModel q = f.rebase(big, up);
    double ptq[3] = {0.3, -0.7, 0.5};
    double ptf[2] = {0.3, 0.5};
    CHECK(encloses(q.eval(ptq), eval_double(f, ptf)));
}

TEST_CASE("composition encloses sampled values")
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Func fs[] = {Func::sigmoid, Func::tanh, Func::cos, Func::sin, Func::exp};
    for (int trial = 0; trial < 1000; ++trial) {
        const unsigned n = 1 + trial % 2;
        auto b = MonomialBasis::get(n, 4);
        TaylorModel p = random_poly(rng, b, 3, 1.0);
        Func f = fs[trial % 5];
        TaylorModel r = compose_elem(p, f);
        for (int s = 0; s < 1000; ++s) {
            double pt[2] = {u(rng), u(rng)};
            double v = apply_func(f, eval_double(p, pt));
            REQUIRE(encloses(r.eval(std::span<const double>(pt, n)), v));
        }
    }
}

TEST_CASE("bound encloses grid range")
{
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const unsigned n = 1 + trial % 2;
        auto b = MonomialBasis::get(n, 4, trial % 3 == 0 ? 0b1 : 0);
        TaylorModel p = random_poly(rng, b, 4, 2.0);
        Interval r = p.bound();
        const int g = 41;
        for (int i = 0; i < g; ++i) {
            for (int j = 0; j < (n == 2 ? g : 1); ++j) {
                double lo0 = b->nonneg_var(0) ? 0.0 : -1.0;
                double pt[2] = {lo0 + (1.0 - lo0) * i / (g - 1), -1.0 + 2.0 * j / (g - 1)};
                REQUIRE(encloses(r, eval_double(p, pt)));
            }
        }
    }
}

TEST_CASE("arithmetic encloses sampled values")
{
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto b = MonomialBasis::get(2, 3);
    for (int trial = 0; trial < 500; ++trial) {
        TaylorModel p = random_poly(rng, b, 3, 1.0);
        TaylorModel q = random_poly(rng, b, 3, 1.0);
        p.set_remainder(Interval(-0.01, 0.02));
        TaylorModel s = p + q, d = p - q, m = p * q, c = p * 2.5;
        TaylorModel cube = pow_int(q, 3);
        for (int k = 0; k < 100; ++k) {
            double pt[2] = {u(rng), u(rng)};
            double pv = eval_double(p, pt), qv = eval_double(q, pt);
            for (double rp : {-0.01, 0.02}) {
                REQUIRE(encloses(s.eval(pt), pv + rp + qv));
                REQUIRE(encloses(d.eval(pt), pv + rp - qv));
                REQUIRE(encloses(m.eval(pt), (pv + rp) * qv));
                REQUIRE(encloses(c.eval(pt), (pv + rp) * 2.5));
            }
            REQUIRE(encloses(cube.eval(pt), qv * qv * qv));
        }
    }
}

TEST_CASE("derivative enclosures")
{
    // sigmoid'' = s(1-s)(1-2s); max magnitude about 0.0962 at +-1.317
    Interval d2 = elem_derivative(Func::sigmoid, 2, Interval(-1, 1));
    CHECK(d2.contains(Interval(-0.0908, 0.0908)));
    CHECK(d2.width() < 0.2);
    for (double x : {-3.0, -0.4, 0.0, 1.2, 5.0}) {
        double s = sigmoid(x);
        CHECK(encloses(elem_derivative(Func::sigmoid, 1, Interval(x)), s * (1 - s)));
        CHECK(encloses(elem_derivative(Func::sigmoid, 3, Interval(x)), s * (1 - s) * (1 - 6 * s + 6 * s * s)));
        double t = std::tanh(x);
        CHECK(encloses(elem_derivative(Func::tanh, 2, Interval(x)), -2 * t * (1 - t * t)));
    }
}

TEST_CASE("reciprocal and division")
{
    auto b = MonomialBasis::get(1, 4);
    TaylorModel x = TaylorModel::variable(b, 0);
    TaylorModel d = 3.0 + x * 0.5;
    TaylorModel q = TaylorModel(b, 1.0) / d;
    for (double v : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
        double pt[1] = {v};
        CHECK(encloses(q.eval(pt), 1.0 / (3.0 + 0.5 * v)));
    }
    CHECK_THROWS_AS(reciprocal(x), DivisionByZeroInterval);
}

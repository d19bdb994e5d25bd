#include "doctest.h"
#include "nnreach/encode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace nnreach;

namespace {

const char* kToy = "nnet 2 1 2\n"
                   "layer 2 2 sigmoid\n"
                   "0.3 0.2\n"
                   "0.1 0.5\n"
                   "0.1 0.2\n"
                   "layer 1 2 linear\n"
                   "3 5\n"
                   "0\n";

constexpr double kToyMin = 5.68759602100003;
constexpr double kToyMax = 6.49442404664396;

Layer dense(std::size_t rows, std::size_t cols, Activation a, std::mt19937_64& rng, int decimals = 2)
{
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const double scale = std::pow(10.0, decimals);
    auto pick = [&] { return std::round(u(rng) * scale) / scale; };
    Layer l;
    l.rows = rows;
    l.cols = cols;
    l.activation = a;
    for (std::size_t k = 0; k < rows * cols; ++k)
        l.weights.push_back(pick());
    for (std::size_t k = 0; k < rows; ++k)
        l.bias.push_back(pick());
    return l;
}

NeuralNetwork single_hidden(std::size_t in, std::size_t hidden, Activation a, std::mt19937_64& rng, int decimals = 2)
{
    NeuralNetwork nn;
    nn.inputs = in;
    nn.outputs = 1;
    nn.layers.push_back(dense(hidden, in, a, rng, decimals));
    nn.layers.push_back(dense(1, hidden, Activation::linear, rng, decimals));
    return nn;
}

std::size_t count_prefix(const LpProblem& p, const std::string& prefix)
{
    return static_cast<std::size_t>(std::count_if(p.rows.begin(), p.rows.end(),
                                                  [&](const LpRow& r) { return r.name.rfind(prefix, 0) == 0; }));
}

std::vector<double> sample(const std::vector<Interval>& box, std::mt19937_64& rng)
{
    std::vector<double> x;
    for (const auto& iv : box)
        x.push_back(std::uniform_real_distribution<double>(iv.lo(), iv.hi())(rng));
    return x;
}

} // namespace

TEST_CASE("sandwich encloses the activation")
{
    for (Activation a : {Activation::sigmoid, Activation::tanh}) {
        for (unsigned n : {1u, 3u, 100u}) {
            const auto s = pwl_sandwich(a, Interval(-8.0, 8.0), n);
            CHECK(s.pieces() == n);
            CHECK(s.breakpoints.front() == -8.0);
            CHECK(s.breakpoints.back() == 8.0);
            for (int k = 0; k <= 10000; ++k) {
                const double x = -8.0 + 16.0 * k / 10000;
                const double f = a == Activation::sigmoid ? sigmoid(x) : std::tanh(x);
                REQUIRE(s.lower_at(x) <= f);
                REQUIRE(f <= s.upper_at(x));
            }
        }
    }
}

TEST_CASE("sandwich gap")
{
    CHECK(pwl_sandwich(Activation::sigmoid, Interval(-8.0, 8.0), 1).max_gap <= 1.0);
    const auto s = pwl_sandwich(Activation::sigmoid, Interval(-8.0, 8.0), 100);
    CHECK(s.max_gap <= 0.01);
    CHECK(s.lower_at(0.0) <= 0.5);
    CHECK(s.upper_at(0.0) >= 0.5);
    double prev = 2.0;
    for (unsigned n : {1u, 2u, 4u, 8u, 16u, 32u, 64u, 100u, 128u}) {
        const auto t = pwl_sandwich(Activation::sigmoid, Interval(-8.0, 8.0), n);
        double grid_gap = 0.0;
        for (int k = 0; k <= 10000; ++k) {
            const double x = -8.0 + 16.0 * k / 10000;
            grid_gap = std::max(grid_gap, t.upper_at(x) - t.lower_at(x));
        }
        CHECK(grid_gap <= t.max_gap + 1e-15);
        CHECK(grid_gap < prev);
        prev = grid_gap;
    }
    CHECK_THROWS_AS(pwl_sandwich(Activation::sigmoid, Interval(-1.0, 1.0), 0), std::invalid_argument);
}

TEST_CASE("one neuron, two pieces")
{
    const auto nn = load_network("nnet 1 1 1\nlayer 1 1 sigmoid\n1\n0\n");
    const auto text = export_milp(nn, {Interval(-2.0, 2.0)}, MilpSettings{2}, 0, true);
    const auto p = parse_lp(text);
    CHECK(p.binaries.size() == 2);
    CHECK(count_prefix(p, "one") == 1);
    CHECK(count_prefix(p, "xlo") + count_prefix(p, "xhi") + count_prefix(p, "ylo") + count_prefix(p, "yhi") == 8);
    const auto best = brute_force_milp(p);
    REQUIRE(best.feasible);
    CHECK(best.objective >= sigmoid(2.0));
    CHECK(best.objective <= sigmoid(2.0) + pwl_sandwich(Activation::sigmoid, Interval(-2.0, 2.0), 2).max_gap);
}

TEST_CASE("toy network MILP")
{
    const auto nn = load_network(kToy);
    const std::vector<Interval> box{Interval(2.0, 3.0), Interval(1.0, 2.0)};
    const auto pre = preactivation_bounds(nn, box);
    CHECK(pre[0][0].contains(Interval(0.9, 1.4)));
    CHECK(pre[0][1].contains(Interval(0.9, 1.5)));
    const unsigned pieces = 20;
    double gap = 0.0;
    for (const auto& iv : pre[0])
        gap = std::max(gap, pwl_sandwich(Activation::sigmoid, iv, pieces).max_gap);
    const auto hi = brute_force_milp(parse_lp(export_milp(nn, box, MilpSettings{pieces}, 0, true)));
    const auto lo = brute_force_milp(parse_lp(export_milp(nn, box, MilpSettings{pieces}, 0, false)));
    REQUIRE(hi.feasible);
    REQUIRE(lo.feasible);
    CHECK(hi.objective >= kToyMax - 1e-9);
    CHECK(hi.objective <= kToyMax + 8 * gap);
    CHECK(lo.objective <= kToyMin + 1e-9);
    CHECK(lo.objective >= kToyMin - 8 * gap);
}

TEST_CASE("toy network LP text round-trips")
{
    const auto nn = load_network(kToy);
    const std::vector<Interval> box{Interval(2.0, 3.0), Interval(1.0, 2.0)};
    const auto text = export_milp(nn, box, MilpSettings{100}, 0, true);
    const auto p = parse_lp(text);
    CHECK(p.maximize);
    CHECK(p.binaries.size() == 200);
    CHECK(count_prefix(p, "one") == 2);
    CHECK(p.objective.at("z2_1") == 1.0);
    CHECK(p.bounds.at("x1") == std::pair<double, double>{2.0, 3.0});
}

TEST_CASE("linear network gives an LP without binaries")
{
    const auto nn = load_network("nnet 2 1 1\nlayer 1 2 linear\n2 -3\n0.5\n");
    const std::vector<Interval> box{Interval(-1.0, 1.0), Interval(0.0, 2.0)};
    const auto p = parse_lp(export_milp(nn, box, MilpSettings{}, 0, true));
    CHECK(p.binaries.empty());
    CHECK(solve_lp(p).objective == doctest::Approx(2.5).epsilon(1e-12));
    auto q = parse_lp(export_milp(nn, box, MilpSettings{}, 0, false));
    CHECK(solve_lp(q).objective == doctest::Approx(-7.5).epsilon(1e-12));
}

TEST_CASE("brute force contains sampled outputs of small random networks")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t hidden = 1 + trial % 2;
        const Activation a = trial % 3 == 0 ? Activation::tanh : Activation::sigmoid;
        const auto nn = single_hidden(2, hidden, a, rng);
        const std::vector<Interval> box{Interval(-1.0, 0.5), Interval(0.0, 1.0)};
        const unsigned pieces = 1 + trial % 3;
        const auto hi = brute_force_milp(parse_lp(export_milp(nn, box, MilpSettings{pieces}, 0, true)));
        const auto lo = brute_force_milp(parse_lp(export_milp(nn, box, MilpSettings{pieces}, 0, false)));
        REQUIRE(hi.feasible);
        REQUIRE(lo.feasible);
        std::vector<std::vector<double>> points;
        for (int c = 0; c < 4; ++c)
            points.push_back({c & 1 ? 0.5 : -1.0, c & 2 ? 1.0 : 0.0});
        for (int k = 0; k < 200; ++k)
            points.push_back(sample(box, rng));
        for (const auto& x : points) {
            const double u = eval_network(nn, x)[0];
            REQUIRE(u <= hi.objective + 1e-9);
            REQUIRE(u >= lo.objective - 1e-9);
        }
    }
}

TEST_CASE("simplex basics")
{
    const auto p = parse_lp("Maximize\n obj: x + y\nSubject To\n c1: x + 2 y <= 4\n c2: 3 x + y <= 6\nEnd\n");
    const auto s = solve_lp(p);
    REQUIRE(s.feasible);
    CHECK(s.objective == doctest::Approx(2.8));
    CHECK(s.values.at("x") == doctest::Approx(1.6));
    const auto inf = parse_lp("Maximize\n obj: x\nSubject To\n c1: x >= 3\nBounds\n 0 <= x <= 2\nEnd\n");
    CHECK_FALSE(solve_lp(inf).feasible);
    const auto unb = parse_lp("Maximize\n obj: x - y\nSubject To\n c1: x - y >= 1\nBounds\n x free\nEnd\n");
    const auto u = solve_lp(unb);
    CHECK(u.feasible);
    CHECK_FALSE(u.bounded);
    const auto eq = parse_lp("Minimize\n obj: x + y\nSubject To\n c1: x - y = 1\n c2: x + y >= -3\n"
                             "Bounds\n -5 <= x <= 5\n y free\nEnd\n");
    CHECK(solve_lp(eq).objective == doctest::Approx(-3.0));
}

TEST_CASE("LP reader errors")
{
    CHECK_THROWS_AS(parse_lp("Subject To\n c: x <= 1\nEnd\n"), LpParseError);
    CHECK_THROWS_AS(parse_lp("Maximize\n obj: x\nSubject To\n c: x 1\nEnd\n"), LpParseError);
    CHECK_THROWS_AS(parse_lp("Maximize\n obj: x\nSubject To\n c: x <= 1\n"), LpParseError);
    CHECK_THROWS_AS(parse_lp("Maximize\n obj: x\nBounds\n x between 1\nEnd\n"), LpParseError);
}

TEST_CASE("non-sigmoid activations are rejected")
{
    CHECK_THROWS_AS(pwl_sandwich(Activation::linear, Interval(0.0, 1.0), 2), UnsupportedActivation);
}

TEST_CASE("phi0 formula of the toy network")
{
    const auto nn = load_network(kToy);
    const std::vector<Interval> box{Interval(2.0, 3.0), Interval(1.0, 2.0)};
    const auto text = export_formula(nn, box, "u1 >= 6.5", FormulaForm::phi0);
    CHECK(text.find("(declare-fun exp (Real) Real)") != std::string::npos);
    CHECK(text.find(":named property") != std::string::npos);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const auto x = sample(box, rng);
        const auto r = evaluate_smt(text, formula_witness(nn, x, FormulaForm::phi0));
        for (const auto& c : r) {
            if (c.name == "property")
                CHECK_FALSE(c.holds);
            else
                REQUIRE_MESSAGE(c.holds, c.name << " violated by " << c.violation);
        }
    }
}

TEST_CASE("single neuron formula at zero")
{
    const auto nn = load_network("nnet 1 1 1\nlayer 1 1 sigmoid\n1\n0\n");
    const auto text = export_formula(nn, {Interval(0.0, 0.0)}, "u1 = 0.5", FormulaForm::phi0);
    const double x[] = {0.0};
    const auto env = formula_witness(nn, x, FormulaForm::phi0);
    CHECK(env.at("u1") == 0.5);
    for (const auto& c : evaluate_smt(text, env))
        CHECK(c.holds);
}

TEST_CASE("exp-free rewrite with w = 1/2")
{
    const auto nn = load_network("nnet 1 1 2\nlayer 1 1 sigmoid\n0.5\n0\nlayer 1 1 linear\n1\n0\n");
    const auto fr = formula_rewrite(nn, {Interval(-1.0, 3.0)});
    CHECK(fr.d0 == "2");
    CHECK(fr.r[0][0] == "1");
    CHECK(fr.reciprocal.empty());
    CHECK(fr.y_domain[0].lo() == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
    CHECK(fr.y_domain[0].hi() == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
    const auto text = export_formula(nn, {Interval(-1.0, 3.0)}, "u1 <= 1", FormulaForm::exp_free);
    CHECK(text.find("; d0 = 2") != std::string::npos);
    CHECK(text.find("exp") != std::string::npos);  // only in comments
    CHECK(text.find("(exp") == std::string::npos);
}

TEST_CASE("exp-free formula is faithful on random networks")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Activation a = trial % 2 ? Activation::tanh : Activation::sigmoid;
        const auto nn = single_hidden(2, 3, a, rng, 1 + trial % 3);
        const std::vector<Interval> box{Interval(-1.0, 1.0), Interval(-0.5, 0.75)};
        const auto text = export_formula(nn, box, "u1 <= 100", FormulaForm::exp_free);
        const auto phi0 = export_formula(nn, box, "u1 <= 100", FormulaForm::phi0);
        const auto fr = formula_rewrite(nn, box);
        for (std::size_t j : fr.reciprocal)
            CHECK(text.find("reciprocal_" + std::to_string(j + 1)) != std::string::npos);
        for (int k = 0; k < 20; ++k) {
            const auto x = sample(box, rng);
            for (const auto& c : evaluate_smt(text, formula_witness(nn, x, FormulaForm::exp_free)))
                REQUIRE_MESSAGE(c.holds, c.name << " violated by " << c.violation);
            for (const auto& c : evaluate_smt(phi0, formula_witness(nn, x, FormulaForm::phi0)))
                REQUIRE_MESSAGE(c.holds, c.name << " violated by " << c.violation);
        }
    }
}

TEST_CASE("exp-free form needs one hidden layer")
{
    std::mt19937_64 rng(5);
    NeuralNetwork nn;
    nn.inputs = 2;
    nn.outputs = 1;
    nn.layers.push_back(dense(2, 2, Activation::sigmoid, rng));
    nn.layers.push_back(dense(2, 2, Activation::sigmoid, rng));
    nn.layers.push_back(dense(1, 2, Activation::linear, rng));
    const std::vector<Interval> box{Interval(0.0, 1.0), Interval(0.0, 1.0)};
    CHECK_THROWS_AS(export_formula(nn, box, "u1 <= 1", FormulaForm::exp_free), ExpFreeNeedsSingleHiddenLayer);
    CHECK_NOTHROW(export_formula(nn, box, "u1 <= 1", FormulaForm::phi0));
}

TEST_CASE("formula export guards")
{
    auto nn = load_network(kToy);
    const std::vector<Interval> box{Interval(2.0, 3.0), Interval(1.0, 2.0)};
    CHECK_THROWS_AS(export_formula(nn, box, "x1 <= 1", FormulaForm::phi0), std::invalid_argument);
    nn.layers[0].weights[1] = std::nan("");
    CHECK_THROWS_AS(export_formula(nn, box, "u1 <= 1", FormulaForm::phi0), NonRationalWeightGuard);
}

TEST_CASE("SMT evaluator")
{
    const std::map<std::string, double> env{{"a", 2.0}, {"b", 0.5}};
    const auto r = evaluate_smt("; comment\n(declare-fun a () Real)\n"
                                "(assert (! (= (* a b) 1.0) :named prod))\n"
                                "(assert (<= (- a) (/ 1.0 b) (^ a 3)))\n"
                                "(assert (! (>= (exp b) 2.0) :named big))\n",
                                env);
    REQUIRE(r.size() == 3);
    CHECK(r[0].name == "prod");
    CHECK(r[0].holds);
    CHECK(r[1].name == "assert_2");
    CHECK(r[1].holds);
    CHECK_FALSE(r[2].holds);
    CHECK(r[2].violation == doctest::Approx(2.0 - std::exp(0.5)));
    CHECK_THROWS_AS(evaluate_smt("(assert (= c 1.0))", env), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_smt("(assert (= a 1.0)", env), std::invalid_argument);
}

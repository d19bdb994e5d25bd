#include "doctest.h"
#include "nnreach/neural.hpp"
#include "nnreach/reach.hpp"

#include <chrono>
#include <cmath>
#include <random>

using namespace nnreach;

namespace {

constexpr double kSigmoid09 = 0.7109495026250039634;
constexpr double kToyLow = 5.68759602100003;
constexpr double kToyHigh = 6.49442404664396;

BasisPtr point_basis(unsigned order = 4) { return MonomialBasis::get(0, order); }

Interval integrate_scalar(const std::string& flow, double start, double duration, const ReachSettings& s,
                          std::vector<TaylorModel> params = {}, std::vector<std::string> names = {"g"})
{
    const BasisPtr b = params.empty() ? point_basis(s.tm_order) : params.front().basis();
    auto r = integrate_ode({parse_expr(flow)}, names, {TaylorModel(b, start)}, params, duration, s);
    return r.end[0].bound();
}

NeuralNetwork toy_network()
{
    return load_network("nnet 2 1 2\n"
                        "layer 2 2 sigmoid\n"
                        "0.3 0.2\n"
                        "0.1 0.5\n"
                        "0.1 0.2\n"
                        "layer 1 2 linear\n"
                        "3 5\n"
                        "0\n");
}

std::vector<TaylorModel> box_inputs(const std::vector<Interval>& box, unsigned order)
{
    unsigned n = 0;
    for (const auto& iv : box)
        n += iv.is_point() ? 0 : 1;
    const BasisPtr b = MonomialBasis::get(n, order);
    std::vector<TaylorModel> out;
    unsigned d = 0;
    for (const auto& iv : box) {
        if (iv.is_point()) {
            out.emplace_back(b, iv.lo());
        } else {
            auto t = TaylorModel::variable(b, d++) * iv.rad();
            t += iv.mid();
            out.push_back(t);
        }
    }
    return out;
}

} // namespace

TEST_CASE("zero flow keeps the state")
{
    ReachSettings s;
    const auto r = integrate_scalar("0", 0.25, 1.0, s);
    CHECK(r.lo() == 0.25);
    CHECK(r.hi() == 0.25);
}

TEST_CASE("exponential growth over one step")
{
    ReachSettings s;
    auto r = ode_flowpipe_step({parse_expr("x")}, {"x"}, {TaylorModel(point_basis(8), 1.0)}, {}, 0.1, s);
    REQUIRE(r);
    const Interval b = r->end[0].bound();
    CHECK(b.contains(std::exp(0.1)));
    CHECK(b.width() <= 1e-6);
}

TEST_CASE("sigmoid proxy at 0.9 in ten steps")
{
    ReachSettings s;
    s.ode_step = 0.1;
    const Interval b = integrate_scalar("0.9*g*(1 - g)", 0.5, 1.0, s);
    CHECK(b.contains(kSigmoid09));
    CHECK(b.width() <= 1e-4);
}

TEST_CASE("symbolic series agrees with the Picard series")
{
    ReachSettings s;
    s.series = SeriesMethod::lie;
    const Interval lie = integrate_scalar("0.9*g*(1 - g)", 0.5, 1.0, s);
    s.series = SeriesMethod::picard;
    const Interval pic = integrate_scalar("0.9*g*(1 - g)", 0.5, 1.0, s);
    CHECK(lie.contains(kSigmoid09));
    CHECK(intersect(lie, pic).has_value());
}

TEST_CASE("proxy identity over the grid")
{
    ReachSettings s;
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double x = -10.0 + 0.1 * i;
        const TaylorModel a(point_basis(), x);
        const Interval sg = integrate_scalar("a*g*(1 - g)", 0.5, 1.0, s, {a}, {"g", "a"});
        const Interval th = integrate_scalar("a*(1 - g^2)", 0.0, 1.0, s, {a}, {"g", "a"});
        CHECK(sg.contains(sigmoid(x)));
        CHECK(th.contains(std::tanh(x)));
        worst = std::max({worst, sg.width(), th.width()});
    }
    CHECK(worst <= 1e-6);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    MESSAGE("proxy grid: worst width " << worst << ", " << secs << " s");
}

TEST_CASE("hidden layer on a point input")
{
    const auto h = network_to_automaton(toy_network());
    ReachSettings s;
    const auto in = box_inputs({Interval(2.0), Interval(1.0)}, s.tm_order);
    std::vector<TaylorModel> state;
    for (const auto& iv : h.initial_set)
        state.push_back(TaylorModel::constant(in.front().basis(), iv));
    // Walk to the first activation mode by hand: the q0 -> q1 reset.
    const auto& t0 = *h.outgoing(h.initial_mode).front();
    std::vector<TaylorModel> vars = state;
    vars.insert(vars.end(), in.begin(), in.end());
    std::vector<std::string> names = h.variables;
    names.insert(names.end(), h.inputs.begin(), h.inputs.end());
    for (const auto& [var, e] : t0.reset) {
        const auto c = CompiledExpr::compile(e, names);
        state[*h.variable_index(var)] =
            c.run<TaylorModel>(std::span<const TaylorModel>(vars), [&](double v) { return TaylorModel(in.front().basis(), v); });
    }
    for (auto path : {LayerPath::ode, LayerPath::functional}) {
        auto st = state;
        layer_reach(h, *h.find_mode(t0.dst), st, in, 1.0, s, path);
        CHECK(st[*h.variable_index(pos_var(0))].bound().contains(kSigmoid09));
        CHECK(st[*h.variable_index(pos_var(1))].bound().contains(kSigmoid09));
    }
}

TEST_CASE("toy network box bound")
{
    const auto h = network_to_automaton(toy_network());
    for (auto path : {LayerPath::ode, LayerPath::functional}) {
        ReachSettings s;
        s.layer_path = path;
        const auto in = box_inputs({Interval(2.0, 3.0), Interval(1.0, 2.0)}, s.tm_order);
        const Interval u = run_controller(h, in, s).front().refined_bound();
        CHECK(u.lo() <= kToyLow);
        CHECK(u.hi() >= kToyHigh);
        CHECK(u.width() - (kToyHigh - kToyLow) <= 1e-3);
        MESSAGE("toy bound " << to_string(u));
    }
}

TEST_CASE("ode and functional paths agree")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> w(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        NeuralNetwork nn;
        nn.inputs = 2;
        nn.outputs = 1;
        Layer l1{3, 2, {}, {}, trial % 2 ? Activation::tanh : Activation::sigmoid};
        for (int i = 0; i < 6; ++i)
            l1.weights.push_back(w(rng));
        for (int i = 0; i < 3; ++i)
            l1.bias.push_back(w(rng));
        Layer l2{1, 3, {w(rng), w(rng), w(rng)}, {w(rng)}, Activation::linear};
        nn.layers = {l1, l2};
        const auto h = network_to_automaton(nn);
        ReachSettings s;
        const auto in = box_inputs({Interval(-0.1, 0.1), Interval(0.2, 0.3)}, s.tm_order);
        s.layer_path = LayerPath::ode;
        const Interval a = run_controller(h, in, s).front().bound();
        s.layer_path = LayerPath::functional;
        const Interval b = run_controller(h, in, s).front().bound();
        CHECK(intersect(a, b).has_value());
        const double mid[] = {0.0, 0.25};
        const double exact = eval_network(nn, mid).front();
        CHECK(a.contains(exact));
        CHECK(b.contains(exact));
    }
}

TEST_CASE("point execution matches the forward pass")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> w(-2.0, 2.0);
    NeuralNetwork nn;
    nn.inputs = 2;
    nn.outputs = 2;
    Layer l1{4, 2, {}, {}, Activation::sigmoid};
    Layer l2{3, 4, {}, {}, Activation::tanh};
    Layer l3{2, 3, {}, {}, Activation::tanh};
    for (Layer* l : {&l1, &l2, &l3}) {
        for (std::size_t i = 0; i < l->rows * l->cols; ++i)
            l->weights.push_back(w(rng));
        for (std::size_t i = 0; i < l->rows; ++i)
            l->bias.push_back(w(rng));
    }
    nn.layers = {l1, l2, l3};
    const auto h = network_to_automaton(nn);
    const double y[] = {0.4, -1.3};
    const auto exact = eval_network(nn, y);
    const auto point = execute_controller_point(h, y);
    ReachSettings s;
    const auto tm = run_controller(h, box_inputs({Interval(0.4), Interval(-1.3)}, s.tm_order), s);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(point[i] - exact[i]) <= 1e-12);
        CHECK(tm[i].bound().contains(exact[i]));
        CHECK(tm[i].bound().width() <= 1e-6);
    }
}

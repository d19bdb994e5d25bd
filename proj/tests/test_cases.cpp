#include "doctest.h"
#include "nnreach/cases.hpp"
#include "nnreach/config.hpp"

#include <cmath>

using namespace nnreach;

namespace {

// Controller with constant output u.
NeuralNetwork constant_car_controller(double u)
{
    return load_network("nnet 2 1 1\nlayer 1 2 linear\n0 0\n" + format_number(u) + "\n");
}

TraceRow car_step(double p, double v, double u)
{
    const auto loop = mountain_car_loop(constant_car_controller(u));
    const double x[] = {p, v, 0.0, 0.0};
    RunOptions o;
    o.steps = 1;
    const auto t = simulate_closed_loop(loop, x, o);
    REQUIRE(t.rows.size() == 2);
    return t.rows[1];
}

double eval_at(const Expr& e, std::map<std::string, double, std::less<>> env) { return evaluate(e, env); }

HybridAutomaton scalar_ode(const char* flow)
{
    HybridAutomaton h;
    h.name = "scalar";
    h.variables = {"x"};
    Mode m;
    m.name = "run";
    m.kind = ModeKind::ode;
    m.flow = {parse_expr(flow)};
    h.modes = {m};
    h.initial_mode = "run";
    h.initial_set = {Interval(1.0)};
    return h;
}

double rk4_solve(const HybridAutomaton& step, double x, int n)
{
    for (int i = 0; i < n; ++i)
        x = eval_at(step.modes[0].flow[0], {{"x", x}});
    return x;
}

std::string fixture(const char* name) { return std::string(NNREACH_SOURCE_DIR) + "/fixtures/v1/" + name; }

} // namespace

TEST_CASE("car update from rest")
{
    const auto r = car_step(-0.5, 0.0, 1.0);
    CHECK(r.values[0] == -0.5);  // position moves by the old velocity
    CHECK(r.values[1] == doctest::Approx(0.00132315699583074272).epsilon(1e-12));
    CHECK(r.values[2] == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(r.values[3] == 1.0);
    CHECK(r.values[4] == 1.0);  // control column
}

TEST_CASE("car gravity term at the goal")
{
    const auto r = car_step(0.45, 0.0, 0.0);
    CHECK(r.values[1] == doctest::Approx(-0.000547516717732604).epsilon(1e-10));
    CHECK(r.values[2] == 0.0);
}

TEST_CASE("car saturations")
{
    // cos(3p) vanishes at p = -pi/6, so v grows by 0.0015 and is clamped.
    const auto fast = car_step(-M_PI / 6, 0.0695, 1.0);
    CHECK(fast.values[1] == 0.07);
    const auto wall = car_step(-1.19, -0.07, -1.0);
    CHECK(wall.values[0] == -1.2);
    const auto back = car_step(-0.5, -0.0699, -1.0);
    CHECK(back.values[1] == -0.07);
}

TEST_CASE("car model structure")
{
    const auto h = mountain_car_model();
    CHECK(validate_automaton(h).empty());
    CHECK(h.variables == std::vector<std::string>{"p", "v", "r", "k"});
    CHECK(h.transitions.size() == 4);
    CHECK(to_string(mountain_car_goal()) == "p >= 0.45");
    const auto box = mountain_car_initial();
    CHECK(box[0].lo() == -0.6);
    CHECK(box[0].hi() == -0.4);
}

TEST_CASE("rk4 discretization")
{
    const auto grow = rk4_discretize(scalar_ode("x"), 0.1);
    CHECK(grow.modes[0].kind == ModeKind::discrete_map);
    CHECK(rk4_solve(grow, 1.0, 1) == doctest::Approx(1.10517083).epsilon(1e-7));
    const auto drift = rk4_discretize(scalar_ode("1"), 0.1);
    CHECK(rk4_solve(drift, 2.0, 1) == 2.1);

    CHECK(std::abs(rk4_solve(grow, 1.0, 1) - std::exp(0.1)) <= 1e-7);

    // One-step error shrinks with the fifth power of the step.
    const double e1 = std::abs(rk4_solve(rk4_discretize(scalar_ode("x"), 0.1), 1.0, 1) - std::exp(0.1));
    const double e2 = std::abs(rk4_solve(rk4_discretize(scalar_ode("x"), 0.05), 1.0, 1) - std::exp(0.05));
    const double ratio = e1 / e2;
    CHECK(ratio >= 24.0);
    CHECK(ratio <= 40.0);
}

TEST_CASE("quadrotor actions")
{
    const auto a0 = quadrotor_action(0);
    const auto a7 = quadrotor_action(7);
    CHECK(a0.theta == -0.1);
    CHECK(a0.phi == -0.1);
    CHECK(a0.tau == 7.81);
    CHECK(a7.theta == 0.1);
    CHECK(a7.phi == 0.1);
    CHECK(a7.tau == 11.81);
    CHECK(quadrotor_action_table().values.size() == kQuadActions);
    CHECK_THROWS_AS(quadrotor_action(8), BadAction);
}

TEST_CASE("quadrotor accelerations")
{
    const auto h = quadrotor_plant();
    CHECK(validate_automaton(h).empty());
    const auto& f = h.modes[0].flow;
    const std::map<std::string, double, std::less<>> env{
        {"px", 0.0}, {"py", 0.0},  {"pz", 0.0},  {"vx", 0.5},    {"vy", 0.0}, {"vz", 0.0},
        {"bx", 0.25}, {"by", 0.25}, {"bz", 0.25}, {"theta", 0.1}, {"phi", 0.1}, {"tau", 11.81}};
    CHECK(evaluate(f[0], env) == doctest::Approx(0.25));
    CHECK(evaluate(f[3], env) == doctest::Approx(0.98428).epsilon(1e-5));
    CHECK(evaluate(f[4], env) == doctest::Approx(-0.98428).epsilon(1e-5));
    CHECK(evaluate(f[5], env) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(evaluate(f[6], env) == 0.0);

    const auto low = quadrotor_model(0, {0.25, 0.25, 0.25});
    CHECK(low.variables.size() == 6);
    CHECK(evaluate(low.modes[0].flow[5], env) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("quadrotor loop shape")
{
    const auto nn = load_network_file(fixture("quadrotor.nnet"));
    const auto loop = quadrotor_loop(nn);
    CHECK(loop.actions.has_value());
    CHECK(loop.scheduling.sample_time == 0.1);
    const auto box = quadrotor_initial(Interval(0.025, 0.05), Interval(0.0, 0.025));
    CHECK(box.size() == 9);
    CHECK(box[6] == Interval(0.25));
}

TEST_CASE("scenario names")
{
    CHECK(parse_scenario("mountain_car") == Scenario::mountain_car);
    CHECK(std::string(scenario_name(Scenario::quadrotor)) == "quadrotor");
    CHECK_THROWS(parse_scenario("pendulum"));
}

TEST_CASE("shipped fixtures pass their quality checks")
{
    const auto car = load_network_file(fixture("mountain_car.nnet"));
    CHECK(car.inputs == 2);
    CHECK(car.outputs == 1);
    CHECK(fixture_quality(Scenario::mountain_car, car).empty());
    const auto quad = load_network_file(fixture("quadrotor.nnet"));
    CHECK(quad.inputs == 6);
    CHECK(quad.outputs == 8);
    CHECK(fixture_quality(Scenario::quadrotor, quad).empty());
}

TEST_CASE("fixture synthesis is deterministic")
{
    const auto fx = synth_reference_controller(Scenario::mountain_car, 1);
    CHECK(dump_network(fx.network) == read_file(fixture("mountain_car.nnet")));
    CHECK(fx.provenance.find("seeded with 1") != std::string::npos);
    const auto q = synth_reference_controller(Scenario::quadrotor, 1);
    CHECK(dump_network(q.network) == read_file(fixture("quadrotor.nnet")));
}

TEST_CASE("degraded controller fails from a corner")
{
    const auto car = load_network_file(fixture("mountain_car.nnet"));
    const auto box = mountain_car_initial(Interval(-0.55, -0.45));
    const auto bad = degrade_car_controller(car, box, 110, 90.0);
    RunOptions o;
    o.steps = 110;
    o.goal = mountain_car_goal();
    bool failed = false;
    for (double p : {-0.55, -0.45}) {
        const double x[] = {p, 0.0, 0.0, 0.0};
        const auto t = simulate_closed_loop(mountain_car_loop(bad), x, o);
        failed = failed || !t.goal_reached || car_trace_reward(t) < 90.0;
    }
    CHECK(failed);
}

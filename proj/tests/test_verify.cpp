#include "doctest.h"
#include "nnreach/cases.hpp"
#include "nnreach/verify.hpp"

using namespace nnreach;

namespace {

std::string fixture(const char* name) { return std::string(NNREACH_SOURCE_DIR) + "/fixtures/v1/" + name; }

Property car_property(double min_reward = 90.0, unsigned steps = 110)
{
    Property p;
    p.goal = mountain_car_goal();
    p.min_reward = min_reward;
    p.goal_bonus = kCarGoalBonus;
    p.max_steps = steps;
    return p;
}

ReachSettings functional()
{
    ReachSettings s;
    s.layer_path = LayerPath::functional;
    return s;
}

Property quad_property()
{
    Property p;
    for (const char* v : {"px", "py", "pz"}) {
        p.safety.push_back(parse_constraint(std::string(v) + " <= 0.32"));
        p.safety.push_back(parse_constraint(std::string(v) + " >= -0.32"));
    }
    p.max_steps = 30;
    return p;
}

} // namespace

TEST_CASE("car slice verifies with reward and step bounds")
{
    const auto loop = mountain_car_loop(load_network_file(fixture("mountain_car.nnet")));
    const auto box = mountain_car_initial(Interval(-0.5, -0.49));
    const auto prop = car_property();
    const auto result = run_closed_loop(loop, box, run_options(prop), functional());
    const auto v = check_property(result, prop);
    CHECK(v.kind == VerdictKind::verified);
    REQUIRE(v.reward_bound);
    CHECK(*v.reward_bound >= 90.0);
    CHECK(v.steps_bound <= 110);

    const auto report = check_containment(loop, result, box, run_options(prop), 200, 3);
    CHECK(report.samples == 200);
    CHECK(report.violations == 0);
    CHECK(report.contained > 0);
    MESSAGE("verdict\n" << format_verdict(v));
}

TEST_CASE("unreachable reward threshold is falsified by simulation")
{
    const auto loop = mountain_car_loop(load_network_file(fixture("mountain_car.nnet")));
    const auto box = mountain_car_initial(Interval(-0.5, -0.49));
    const auto prop = car_property(101.0);
    const auto result = run_closed_loop(loop, box, run_options(prop), functional());
    const auto v = check_property(result, prop);
    CHECK(v.kind == VerdictKind::unknown);
    const auto cex = falsify_by_simulation(loop, box, prop, 10, true);
    REQUIRE(cex);
    CHECK(cex->violated.find("reward") != std::string::npos);
    CHECK(cex->reward < 101.0);
    CHECK(cex->initial[0] == -0.5);  // first corner
    CHECK(replays(loop, *cex, prop));
    auto tampered = *cex;
    tampered.trace.rows.back().values[0] += 1e-3;
    CHECK_FALSE(replays(loop, tampered, prop));
}

TEST_CASE("too short a horizon leaves the goal undecided")
{
    const auto loop = mountain_car_loop(load_network_file(fixture("mountain_car.nnet")));
    const auto box = mountain_car_initial(Interval(-0.5, -0.49));
    const auto prop = car_property(90.0, 60);
    const auto v = check_property(run_closed_loop(loop, box, run_options(prop), functional()), prop);
    CHECK(v.kind == VerdictKind::unknown);
    CHECK(v.reason.find("goal") != std::string::npos);
}

TEST_CASE("safety violation along a trace")
{
    const auto loop = mountain_car_loop(load_network_file(fixture("mountain_car.nnet")));
    Property prop;
    prop.safety = {parse_constraint("p >= -0.9")};
    prop.max_steps = 60;
    const double x[] = {-0.5, 0.0, 0.0, 0.0};
    const auto t = simulate_closed_loop(loop, x, run_options(prop));
    unsigned step = 0;
    const auto why = trace_violation(t, prop, &step);
    REQUIRE(why);
    CHECK(t.rows[step].values[0] < -0.9);
    for (unsigned s = 0; s < step; ++s)
        CHECK(t.rows[s].values[0] >= -0.9);
    const auto cex = falsify_by_simulation(loop, mountain_car_initial(Interval(-0.5, -0.49)), prop, 5, true);
    REQUIRE(cex);
    CHECK(replays(loop, *cex, prop));
}

TEST_CASE("terminal constraint")
{
    const auto loop = mountain_car_loop(load_network_file(fixture("mountain_car.nnet")));
    Property prop;
    prop.terminal = {parse_constraint("k <= 5")};
    prop.max_steps = 5;
    const auto box = mountain_car_initial(Interval(-0.5, -0.49));
    CHECK(check_property(run_closed_loop(loop, box, run_options(prop), functional()), prop).kind ==
          VerdictKind::verified);
    prop.terminal = {parse_constraint("k <= 4")};
    CHECK(check_property(run_closed_loop(loop, box, run_options(prop), functional()), prop).kind ==
          VerdictKind::unknown);
}

TEST_CASE("property names are checked against the loop")
{
    const auto loop = mountain_car_loop(load_network_file(fixture("mountain_car.nnet")));
    Property prop;
    prop.safety = {parse_constraint("altitude <= 3")};
    CHECK_THROWS_AS(check_property_names(loop, prop), ModelError);
    prop.safety = {parse_constraint("u <= 3")};
    CHECK_NOTHROW(check_property_names(loop, prop));
}

TEST_CASE("quadrotor tile stays near the planner")
{
    const auto loop = quadrotor_loop(load_network_file(fixture("quadrotor.nnet")));
    const auto box = quadrotor_initial(Interval(0.025, 0.05), Interval(0.0, 0.025));
    auto settings = functional();
    settings.merge_branches = true;
    const auto prop = quad_property();
    const auto result = run_closed_loop(loop, box, run_options(prop), settings);
    CHECK(result.branches.size() <= 256);
    const auto v = check_property(result, prop);
    CHECK(v.kind == VerdictKind::verified);
    CHECK(v.steps_bound == 30);
    const auto report = check_containment(loop, result, box, run_options(prop), 100, 5);
    CHECK(report.violations == 0);
    CHECK(report.uncovered == 0);
}

TEST_CASE("corners and formatting")
{
    const std::vector<Interval> box{Interval(0.0, 1.0), Interval(2.0), Interval(-1.0, 1.0)};
    const auto corners = box_corners(box);
    CHECK(corners.size() == 4);
    CHECK(corners[3] == std::vector<double>{1.0, 2.0, 1.0});
    Verdict v;
    v.kind = VerdictKind::unknown;
    v.reason = "remainder_blowup";
    v.subset = {Interval(0.0, 1.0)};
    const auto text = format_verdict(v);
    CHECK(text.find("status = Unknown") != std::string::npos);
    CHECK(text.find("reason = remainder_blowup") != std::string::npos);
    Trace t;
    t.columns = {"p", "u"};
    t.rows.push_back({0, 0.0, {1.0, 0.5}, std::nullopt});
    t.rows.push_back({1, 1.0, {1.5, 0.25}, 3});
    CHECK(trace_csv(t) == "step,time,p,u,action\n0,0,1,0.5,\n1,1,1.5,0.25,3\n");
}

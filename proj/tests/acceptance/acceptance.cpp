// One line per acceptance criterion: number, PASS/FAIL, measurements, time.
#include "nnreach/cases.hpp"
#include "nnreach/cli.hpp"
#include "nnreach/encode.hpp"
#include "nnreach/neural.hpp"
#include "nnreach/reach.hpp"
#include "nnreach/verify.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace nnreach;
namespace fs = std::filesystem;

namespace {

constexpr double kToyLow = 5.68759602100003;
constexpr double kToyHigh = 6.49442404664396;

const fs::path kSource = NNREACH_SOURCE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

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

NeuralNetwork toy_network() { return load_network_file((kSource / "fixtures/v1/toy.nnet").string()); }
NeuralNetwork car_network() { return load_network_file((kSource / "fixtures/v1/mountain_car.nnet").string()); }
NeuralNetwork quad_network() { return load_network_file((kSource / "fixtures/v1/quadrotor.nnet").string()); }

Property car_property()
{
    Property p;
    p.goal = mountain_car_goal();
    p.min_reward = 90.0;
    p.goal_bonus = kCarGoalBonus;
    p.max_steps = 110;
    return p;
}

std::vector<std::vector<Interval>> car_slices()
{
    return subdivide_initial_set(mountain_car_initial(Interval(-0.55, -0.45)), SubdivideStrategy::adaptive, 0.01,
                                 {0});
}

std::string fmt(double v, int digits = 3)
{
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

Layer random_layer(std::size_t rows, std::size_t cols, Activation a, std::mt19937_64& rng, double scale,
                   int decimals = -1)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    auto pick = [&] {
        const double v = u(rng);
        if (decimals < 0)
            return v;
        const double m = std::pow(10.0, decimals);
        return std::round(v * m) / m;
    };
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

// 1. Proxy identity over x in [-10, 10].
Outcome proxy_identity()
{
    ReachSettings s;
    const BasisPtr b = MonomialBasis::get(0, s.tm_order);
    double worst = 0.0;
    bool contained = true;
    for (int i = 0; i <= 200; ++i) {
        const double x = -10.0 + 0.1 * i;
        const std::vector<TaylorModel> a{TaylorModel(b, x)};
        const auto sg = integrate_ode({parse_expr("a*g*(1 - g)")}, {"g", "a"}, {TaylorModel(b, 0.5)}, a, 1.0, s);
        const auto th = integrate_ode({parse_expr("a*(1 - g^2)")}, {"g", "a"}, {TaylorModel(b, 0.0)}, a, 1.0, s);
        const Interval is = sg.end[0].bound(), it = th.end[0].bound();
        contained = contained && is.contains(sigmoid(x)) && it.contains(std::tanh(x));
        worst = std::max({worst, is.width(), it.width()});
    }
    return {contained && worst <= 1e-6,
            "201 grid points, both activations bracketed: " + std::string(contained ? "yes" : "no") +
                ", widest enclosure " + fmt(worst) + " (limit 1e-6)"};
}

// 2. Automaton reach on point inputs equals the forward pass.
Outcome transform_fidelity()
{
    std::mt19937_64 rng(2);
    ReachSettings s;
    double worst = 0.0;
    int failures = 0;
    for (int n = 0; n < 200; ++n) {
        std::uniform_int_distribution<int> depth(1, 3), width(1, 8), inputs(1, 3);
        NeuralNetwork nn;
        nn.inputs = static_cast<std::size_t>(inputs(rng));
        std::size_t cols = nn.inputs;
        const int hidden = depth(rng);
        for (int l = 0; l < hidden; ++l) {
            const auto rows = static_cast<std::size_t>(width(rng));
            const Activation a = rng() % 2 ? Activation::sigmoid : Activation::tanh;
            nn.layers.push_back(random_layer(rows, cols, a, rng, 1.5));
            cols = rows;
        }
        nn.outputs = 1 + rng() % 2;
        nn.layers.push_back(random_layer(nn.outputs, cols, Activation::linear, rng, 1.5));
        std::vector<Interval> box;
        std::vector<double> x;
        std::uniform_real_distribution<double> in(-1.0, 1.0);
        for (std::size_t j = 0; j < nn.inputs; ++j) {
            x.push_back(in(rng));
            box.emplace_back(x.back());
        }
        const auto h = network_to_automaton(nn);
        const auto out = run_controller(h, box_inputs(box, s.tm_order), s);
        const auto exact = eval_network(nn, x);
        for (std::size_t k = 0; k < exact.size(); ++k) {
            const Interval u = out[k].bound();
            const double dist = std::max(std::abs(u.lo() - exact[k]), std::abs(u.hi() - exact[k]));
            worst = std::max(worst, dist);
            if (!u.contains(exact[k]) || dist > 1e-6)
                ++failures;
        }
    }
    return {failures == 0,
            "200 networks, " + std::to_string(failures) + " outputs off, largest distance " + fmt(worst) +
                " (limit 1e-6)"};
}

// 3. Toy network output over [2, 3] x [1, 2].
Outcome toy_bounds()
{
    ReachSettings s;
    s.tm_order = 4;
    const auto h = network_to_automaton(toy_network());
    const Interval u =
        run_controller(h, box_inputs({Interval(2.0, 3.0), Interval(1.0, 2.0)}, s.tm_order), s).front().refined_bound();
    const double excess = u.width() - (kToyHigh - kToyLow);
    const bool ok = u.lo() <= kToyLow && u.hi() >= kToyHigh && excess <= 1e-3;
    return {ok, "u in " + format_interval(u) + ", excess width " + fmt(excess) + " (limit 1e-3)"};
}

// 4. Sampled car trajectories stay inside the per-step flowpipe records.
Outcome flowpipe_soundness()
{
    const auto loop = mountain_car_loop(car_network());
    const auto prop = car_property();
    std::size_t samples = 0, violations = 0, uncovered = 0, subsets = 0;
    std::string first;
    auto check = [&](const std::vector<Interval>& box, const ReachSettings& s, std::uint64_t seed) {
        const auto result = run_closed_loop(loop, box, run_options(prop), s);
        if (check_property(result, prop).kind != VerdictKind::verified)
            return;
        ++subsets;
        const auto r = check_containment(loop, result, box, run_options(prop), 1000, seed);
        samples += r.samples;
        violations += r.violations;
        uncovered += r.uncovered;
        if (first.empty())
            first = r.first_violation;
    };
    ReachSettings functional;
    functional.layer_path = LayerPath::functional;
    std::uint64_t seed = 1;
    for (const auto& box : car_slices())
        check(box, functional, seed++);
    check(mountain_car_initial(Interval(-0.5, -0.49)), ReachSettings{}, seed);
    return {violations == 0 && uncovered == 0 && subsets == 11,
            std::to_string(subsets) + " verified subsets (10 functional, 1 ode), " + std::to_string(samples) +
                " trajectories, " + std::to_string(violations) + " steps outside, " + std::to_string(uncovered) +
                " uncovered" + (first.empty() ? "" : "; first: " + first)};
}

// 5. Car slices over [-0.55, -0.45] verify on the ode layer path.
Outcome car_verification()
{
    const auto loop = mountain_car_loop(car_network());
    const auto prop = car_property();
    ReachSettings s;
    s.layer_path = LayerPath::ode;
    int verified = 0;
    double reward = 1e9;
    unsigned steps = 0;
    std::string bad;
    const auto slices = car_slices();
    for (const auto& box : slices) {
        const auto v = check_property(run_closed_loop(loop, box, run_options(prop), s), prop);
        if (v.kind == VerdictKind::verified && v.reward_bound && *v.reward_bound >= 90.0 && v.steps_bound <= 110) {
            ++verified;
            reward = std::min(reward, *v.reward_bound);
            steps = std::max(steps, v.steps_bound);
        } else if (bad.empty()) {
            bad = "; " + format_interval(box[0]) + ": " + verdict_name(v.kind) + " " + v.reason;
        }
    }
    return {verified == static_cast<int>(slices.size()),
            std::to_string(verified) + "/" + std::to_string(slices.size()) + " slices of width 0.01 verified, reward >= " +
                fmt(reward, 5) + ", steps <= " + std::to_string(steps) + bad};
}

// 6. Degraded controller: replayable counterexample and exit code 1.
Outcome falsification()
{
    const auto box = mountain_car_initial(Interval(-0.55, -0.45));
    const auto bad = degrade_car_controller(car_network(), box, 110, 90.0);
    const auto loop = mountain_car_loop(bad);
    const auto prop = car_property();
    const auto cex = falsify_by_simulation(loop, box, prop, 100, true);
    const bool replay = cex && replays(loop, *cex, prop);

    const auto dir = fs::temp_directory_path() / "nnreach_acceptance_falsify";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file_atomic(dir / "degraded.nnet", dump_network(bad));
    write_file_atomic(dir / "run.cfg", "run.network = degraded.nnet\nrun.plant = mountain_car\n"
                                       "run.initial = [-0.55, -0.45], [0, 0], [0, 0], [0, 0]\nrun.steps = 110\n"
                                       "run.samples = 100\nreach.layer_path = functional\n"
                                       "property.goal = p >= 0.45\nproperty.min_reward = 90\n"
                                       "property.goal_bonus = 100\n");
    const std::string cfg = (dir / "run.cfg").string(), out = (dir / "out").string();
    const char* argv[] = {"nnreach", "verify", "--config", cfg.c_str(), "--out", out.c_str()};
    std::ostringstream sink, err;
    const int code = run_cli(6, argv, sink, err);
    return {replay && code == kExitFalsified,
            std::string("counterexample ") + (cex ? "found (" + cex->violated + ", start p = " +
                                                        fmt(cex->initial[0], 6) + ")"
                                                  : "missing") +
                ", replays: " + (replay ? "yes" : "no") + ", verify exit code " + std::to_string(code)};
}

// 7. 100-piece sandwich over [-8, 8].
Outcome sandwich()
{
    const auto s = pwl_sandwich(Activation::sigmoid, Interval(-8.0, 8.0), 100);
    bool ok = true;
    double grid_gap = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double x = -8.0 + 16.0 * k / 9999;
        const double lo = s.lower_at(x), hi = s.upper_at(x), f = sigmoid(x);
        ok = ok && lo <= f && f <= hi;
        grid_gap = std::max(grid_gap, hi - lo);
    }
    return {ok && s.max_gap <= 0.01 && grid_gap <= 0.01,
            std::string("grid of 10^4 enclosed: ") + (ok ? "yes" : "no") + ", max_gap " + fmt(s.max_gap) +
                ", grid gap " + fmt(grid_gap) + " (limit 0.01)"};
}

// 8. Brute force over the emitted LP contains the exact output range.
Outcome milp_oracle()
{
    std::mt19937_64 rng(8);
    int nets = 0, misses = 0;
    auto run = [&](const NeuralNetwork& nn, const std::vector<Interval>& box, unsigned pieces,
                   const std::vector<std::vector<double>>& points) {
        ++nets;
        const auto hi = brute_force_milp(parse_lp(export_milp(nn, box, MilpSettings{pieces}, 0, true)));
        const auto lo = brute_force_milp(parse_lp(export_milp(nn, box, MilpSettings{pieces}, 0, false)));
        if (!hi.feasible || !lo.feasible) {
            ++misses;
            return;
        }
        for (const auto& x : points) {
            const double u = eval_network(nn, x)[0];
            if (u > hi.objective + 1e-9 || u < lo.objective - 1e-9) {
                ++misses;
                return;
            }
        }
    };
    const std::vector<Interval> toy_box{Interval(2.0, 3.0), Interval(1.0, 2.0)};
    for (unsigned pieces = 1; pieces <= 3; ++pieces)
        run(toy_network(), toy_box, pieces, box_corners(toy_box));
    for (int n = 0; n < 60; ++n) {
        const std::size_t hidden = 1 + n % 2;
        NeuralNetwork nn;
        nn.inputs = 2;
        nn.outputs = 1;
        nn.layers.push_back(
            random_layer(hidden, 2, n % 3 ? Activation::sigmoid : Activation::tanh, rng, 2.0, 3));
        nn.layers.push_back(random_layer(1, hidden, Activation::linear, rng, 2.0, 3));
        const std::vector<Interval> box{Interval(-1.0, 1.0), Interval(-0.5, 1.5)};
        auto points = box_corners(box);
        std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(-0.5, 1.5);
        for (int k = 0; k < 500; ++k)
            points.push_back({ux(rng), uy(rng)});
        run(nn, box, 1 + n % 3, points);
    }
    return {misses == 0, std::to_string(nets) + " networks (1-2 neurons, 1-3 pieces), " + std::to_string(misses) +
                             " with an exact output outside the brute-force bounds"};
}

// 9. Every emitted conjunct holds at exact evaluations of sampled points.
Outcome formula_faithfulness()
{
    std::mt19937_64 rng(9);
    std::size_t checked = 0, failed = 0;
    double worst = 0.0;
    auto run = [&](const NeuralNetwork& nn, const std::vector<Interval>& box) {
        for (FormulaForm form : {FormulaForm::phi0, FormulaForm::exp_free}) {
            const auto text = export_formula(nn, box, "u1 >= -1000", form);
            for (int k = 0; k < 100; ++k) {
                std::vector<double> x;
                for (const auto& iv : box)
                    x.push_back(std::uniform_real_distribution<double>(iv.lo(), iv.hi())(rng));
                for (const auto& c : evaluate_smt(text, formula_witness(nn, x, form), 1e-9)) {
                    ++checked;
                    worst = std::max(worst, c.violation);
                    if (!c.holds)
                        ++failed;
                }
            }
        }
    };
    run(toy_network(), {Interval(2.0, 3.0), Interval(1.0, 2.0)});
    for (int n = 0; n < 8; ++n) {
        NeuralNetwork nn;
        nn.inputs = 2;
        nn.outputs = 1;
        nn.layers.push_back(random_layer(3, 2, n % 2 ? Activation::tanh : Activation::sigmoid, rng, 1.5, 1 + n % 3));
        nn.layers.push_back(random_layer(1, 3, Activation::linear, rng, 1.5, 2));
        run(nn, {Interval(-1.0, 1.0), Interval(-0.5, 0.5)});
    }
    return {failed == 0, std::to_string(checked) + " conjunct evaluations over 9 networks x 2 forms x 100 points, " +
                             std::to_string(failed) + " violated, largest residual " + fmt(worst) + " (limit 1e-9)"};
}

// 10. Quadrotor tile [0.025, 0.05] x [0, 0.025] for 30 steps.
Outcome quadrotor()
{
    const auto loop = quadrotor_loop(quad_network());
    const auto box = quadrotor_initial(Interval(0.025, 0.05), Interval(0.0, 0.025));
    Property prop;
    for (const char* v : {"px", "py", "pz"}) {
        prop.safety.push_back(parse_constraint(std::string(v) + " <= 0.32"));
        prop.safety.push_back(parse_constraint(std::string(v) + " >= -0.32"));
    }
    prop.max_steps = 30;
    ReachSettings s;
    s.layer_path = LayerPath::ode;
    s.merge_branches = true;
    const auto result = run_closed_loop(loop, box, run_options(prop), s);
    const auto v = check_property(result, prop);
    const auto c = check_containment(loop, result, box, run_options(prop), 1000, 10);
    const bool verdict_ok = v.kind == VerdictKind::verified || (v.kind == VerdictKind::unknown && !v.reason.empty());
    const bool ok = result.branches.size() <= 256 && verdict_ok && c.violations == 0 && c.uncovered == 0;
    return {ok, std::to_string(result.branches.size()) + " branches (limit 256), " +
                    std::to_string(result.leaf_count()) + " leaves, " + verdict_name(v.kind) +
                    (v.reason.empty() ? "" : " (" + v.reason + ")") + ", " + std::to_string(c.samples) +
                    " samples: " + std::to_string(c.violations) + " outside, " + std::to_string(c.uncovered) +
                    " uncovered"};
}

} // namespace

int main(int argc, char** argv)
{
    struct Criterion {
        int id;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, 10, proxy_identity},      {2, 120, transform_fidelity}, {3, 5, toy_bounds},
        {4, 300, flowpipe_soundness}, {5, 1800, car_verification},  {6, 120, falsification},
        {7, 5, sandwich},             {8, 60, milp_oracle},         {9, 30, formula_faithfulness},
        {10, 2700, quadrotor},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i)
        only.push_back(std::atoi(argv[i]));
    // ctest hides the output of passing tests, so the lines also go to a file.
    std::ofstream log("acceptance_results.txt");
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && secs <= c.limit_s;
        failed += pass ? 0 : 1;
        std::ostringstream line;
        line << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << " - " << o.detail << " [" << fmt(secs, 4)
             << " s, limit " << c.limit_s << " s]\n";
        std::cout << line.str() << std::flush;
        log << line.str() << std::flush;
    }
    return failed == 0 ? 0 : 1;
}

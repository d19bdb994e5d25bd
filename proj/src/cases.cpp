#include "nnreach/cases.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace nnreach {

// ---------------------------------------------------------------- Mountain Car

namespace {

Transition saturation(const std::string& mode, const std::string& var, Rel rel, double bound)
{
    Transition t;
    t.src = mode;
    t.dst = mode;
    t.guard = {Constraint{Expr::var(var), rel, bound}};
    t.reset.emplace(var, Expr::constant(bound));
    return t;
}

} // namespace

HybridAutomaton mountain_car_model()
{
    HybridAutomaton h;
    h.name = "mountain_car";
    h.variables = {"p", "v", "r", "k"};
    h.inputs = {"u"};
    h.initial_mode = "drive";
    h.initial_set = {Interval(-0.6, -0.4), Interval(0.0), Interval(0.0), Interval(0.0)};
    Mode m;
    m.name = "drive";
    m.kind = ModeKind::discrete_map;
    m.flow = {parse_expr("p + v"), parse_expr("v + 0.0015*u - 0.0025*cos(3*p)"), parse_expr("r - 0.1*u^2"),
              parse_expr("k + 1")};
    m.invariant = {parse_constraint("v <= 0.07"), parse_constraint("v >= -0.07"), parse_constraint("p <= 0.6"),
                   parse_constraint("p >= -1.2")};
    h.modes = {m};
    h.transitions = {saturation("drive", "v", Rel::ge, 0.07), saturation("drive", "v", Rel::le, -0.07),
                     saturation("drive", "p", Rel::ge, 0.6), saturation("drive", "p", Rel::le, -1.2)};
    h.observation = {Expr::var("p"), Expr::var("v")};
    return h;
}

Constraint mountain_car_goal(double threshold) { return Constraint{Expr::var("p"), Rel::ge, threshold}; }

ClosedLoop mountain_car_loop(const NeuralNetwork& nn)
{
    if (nn.inputs != 2 || nn.outputs != 1)
        throw DimensionMismatch("car controller must map (p, v) to one output");
    return compose_closed_loop(network_to_automaton(nn), mountain_car_model(), {Expr::var("p"), Expr::var("v")},
                               {"u"});
}

std::vector<Interval> mountain_car_initial(Interval p) { return {p, Interval(0.0), Interval(0.0), Interval(0.0)}; }

double car_trace_reward(const Trace& t)
{
    const auto it = std::find(t.columns.begin(), t.columns.end(), "r");
    if (it == t.columns.end() || t.rows.empty())
        throw std::invalid_argument("trace has no reward column");
    const double r = t.rows.back().values[static_cast<std::size_t>(it - t.columns.begin())];
    return t.goal_reached ? r + kCarGoalBonus : r;
}

// ------------------------------------------------------------------- quadrotor

QuadAction quadrotor_action(std::size_t index)
{
    if (index >= kQuadActions)
        throw BadAction("action index " + std::to_string(index) + " outside 0..7");
    return {index & 1 ? 0.1 : -0.1, index & 2 ? 0.1 : -0.1, index & 4 ? 11.81 : 7.81};
}

ActionTable quadrotor_action_table()
{
    ActionTable t;
    for (std::size_t a = 0; a < kQuadActions; ++a) {
        const auto q = quadrotor_action(a);
        t.values.push_back({q.theta, q.phi, q.tau});
    }
    return t;
}

namespace {

const char* const kPos[] = {"px", "py", "pz"};
const char* const kVel[] = {"vx", "vy", "vz"};
const char* const kPlan[] = {"bx", "by", "bz"};

HybridAutomaton relative_plant(const std::vector<Expr>& accel, const std::array<std::optional<Expr>, 3>& planner)
{
    HybridAutomaton h;
    h.name = "quadrotor";
    h.initial_mode = "fly";
    Mode m;
    m.name = "fly";
    m.kind = ModeKind::ode;
    for (int i = 0; i < 3; ++i)
        h.variables.push_back(kPos[i]);
    for (int i = 0; i < 3; ++i)
        h.variables.push_back(kVel[i]);
    for (int i = 0; i < 3; ++i)
        m.flow.push_back(Expr::var(kVel[i]) - (planner[i] ? *planner[i] : Expr::var(kPlan[i])));
    for (int i = 0; i < 3; ++i)
        m.flow.push_back(accel[i]);
    if (!planner[0]) {
        for (int i = 0; i < 3; ++i) {
            h.variables.push_back(kPlan[i]);
            m.flow.push_back(Expr::constant(0.0));
        }
    }
    h.modes = {m};
    h.initial_set.assign(h.variables.size(), Interval(0.0));
    for (int i = 0; i < 3; ++i)
        h.observation.push_back(Expr::var(kPos[i]));
    return h;
}

} // namespace

HybridAutomaton quadrotor_plant()
{
    auto h = relative_plant({parse_expr("9.81*tan(theta)"), parse_expr("-9.81*tan(phi)"), parse_expr("tau - 9.81")},
                            {});
    h.inputs = {"theta", "phi", "tau"};
    return h;
}

HybridAutomaton quadrotor_model(std::size_t action, const std::array<double, 3>& b)
{
    const auto q = quadrotor_action(action);
    for (double c : b)
        if (!(std::abs(c) <= kPlannerSpeed))
            throw std::invalid_argument("planner velocity outside [-0.25, 0.25]");
    const std::map<std::string, Expr, std::less<>> consts = {
        {"theta", Expr::constant(q.theta)}, {"phi", Expr::constant(q.phi)}, {"tau", Expr::constant(q.tau)}};
    const auto plant = quadrotor_plant();
    std::vector<Expr> accel;
    for (int i = 0; i < 3; ++i)
        accel.push_back(simplify(substitute(plant.modes[0].flow[3 + i], consts)));
    return relative_plant(accel, {Expr::constant(b[0]), Expr::constant(b[1]), Expr::constant(b[2])});
}

ClosedLoop quadrotor_loop(const NeuralNetwork& nn, double dt, const std::array<double, 3>& b)
{
    if (nn.inputs != 6 || nn.outputs != kQuadActions)
        throw DimensionMismatch("quadrotor controller must map 6 relative states to 8 action scores");
    auto plant = rk4_discretize(quadrotor_plant(), dt);
    for (int i = 0; i < 3; ++i)
        plant.initial_set[6 + static_cast<std::size_t>(i)] = Interval(b[static_cast<std::size_t>(i)]);
    std::vector<Expr> wiring;
    for (int i = 0; i < 6; ++i)
        wiring.push_back(Expr::var(plant.variables[static_cast<std::size_t>(i)]));
    Scheduling sched;
    sched.sample_time = dt;
    return compose_closed_loop(network_to_automaton(nn), std::move(plant), std::move(wiring),
                               {"theta", "phi", "tau"}, sched, quadrotor_action_table());
}

std::vector<Interval> quadrotor_initial(Interval px, Interval py, const std::array<double, 3>& b)
{
    std::vector<Interval> box(9, Interval(0.0));
    box[0] = px;
    box[1] = py;
    for (std::size_t i = 0; i < 3; ++i)
        box[6 + i] = Interval(b[i]);
    return box;
}

// ------------------------------------------------------------- discretization

HybridAutomaton rk4_discretize(const HybridAutomaton& h, double dt)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("time step must be positive");
    HybridAutomaton out = h;
    const Expr step = Expr::constant(dt);
    const Expr half = Expr::constant(dt / 2);
    for (auto& m : out.modes) {
        if (m.kind != ModeKind::ode)
            continue;
        const std::size_t n = h.variables.size();
        auto stage = [&](const std::vector<Expr>& k, const Expr& scale) {
            std::map<std::string, Expr, std::less<>> at;
            for (std::size_t i = 0; i < n; ++i)
                at.emplace(h.variables[i], simplify(Expr::var(h.variables[i]) + scale * k[i]));
            std::vector<Expr> r;
            for (const auto& f : m.flow)
                r.push_back(simplify(substitute(f, at)));
            return r;
        };
        const std::vector<Expr> k1 = m.flow;
        const auto k2 = stage(k1, half);
        const auto k3 = stage(k2, half);
        const auto k4 = stage(k3, step);
        const Expr two = Expr::constant(2.0);
        std::vector<Expr> next;
        for (std::size_t i = 0; i < n; ++i) {
            const Expr incr = (k1[i] + two * k2[i] + two * k3[i] + k4[i]) / Expr::constant(6.0);
            next.push_back(simplify(Expr::var(h.variables[i]) + step * incr));
        }
        m.flow = std::move(next);
        m.kind = ModeKind::discrete_map;
    }
    return out;
}

// ------------------------------------------------------------------- fixtures

const char* scenario_name(Scenario s) { return s == Scenario::mountain_car ? "mountain_car" : "quadrotor"; }

Scenario parse_scenario(std::string_view name)
{
    if (name == "mountain_car")
        return Scenario::mountain_car;
    if (name == "quadrotor")
        return Scenario::quadrotor;
    throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

namespace {

constexpr unsigned kCarSteps = 100;
constexpr double kCarReward = 90.0;
constexpr unsigned kCarStarts = 100;
constexpr unsigned kCarRequired = 95;
constexpr unsigned kQuadSteps = 30;
constexpr double kQuadBound = 0.32;
constexpr unsigned kSeedAttempts = 20;

double round6(double x) { return std::round(x * 1e6) / 1e6; }

Layer random_layer(std::size_t rows, std::size_t cols, Activation act, std::mt19937_64& rng,
                   const std::vector<double>& col_scale, double bias_scale)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Layer l{rows, cols, {}, {}, act};
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            l.weights.push_back(round6(u(rng) * col_scale[c]));
    for (std::size_t r = 0; r < rows; ++r)
        l.bias.push_back(round6(u(rng) * bias_scale));
    return l;
}

std::vector<double> forward_hidden(const NeuralNetwork& nn, std::span<const double> y)
{
    NeuralNetwork hidden = nn;
    hidden.layers.pop_back();
    hidden.outputs = hidden.layers.back().rows;
    return eval_network(hidden, y);
}

// Ridge fit of the output layer to pre-activation targets.
Layer fit_output(const NeuralNetwork& body, const std::vector<std::vector<double>>& inputs,
                 const std::vector<std::vector<double>>& targets, Activation act, double lambda)
{
    const std::size_t n = inputs.size();
    const std::size_t width = body.layers[body.layers.size() - 2].rows;
    const std::size_t outs = targets.front().size();
    Eigen::MatrixXd features(n, width + 1);
    Eigen::MatrixXd t(n, outs);
    for (std::size_t i = 0; i < n; ++i) {
        const auto h = forward_hidden(body, inputs[i]);
        for (std::size_t j = 0; j < width; ++j)
            features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h[j];
        features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(width)) = 1.0;
        for (std::size_t j = 0; j < outs; ++j)
            t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = targets[i][j];
    }
    Eigen::MatrixXd gram = features.transpose() * features;
    gram.diagonal().array() += lambda;
    const Eigen::MatrixXd w = gram.ldlt().solve(features.transpose() * t);
    Layer l{outs, width, {}, {}, act};
    for (std::size_t r = 0; r < outs; ++r)
        for (std::size_t c = 0; c < width; ++c)
            l.weights.push_back(round6(w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r))));
    for (std::size_t r = 0; r < outs; ++r)
        l.bias.push_back(round6(w(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(r))));
    return l;
}

// Teacher for the car: push along the velocity with a slight bias to the
// left so that a standing start first swings back.
double car_teacher_preactivation(double v) { return std::clamp(100.0 * v - 0.6, -4.0, 4.0); }

NeuralNetwork fit_car(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    NeuralNetwork nn;
    nn.inputs = 2;
    nn.outputs = 1;
    nn.layers.push_back(random_layer(16, 2, Activation::sigmoid, rng, {2.0, 50.0}, 2.0));
    nn.layers.push_back(random_layer(16, 16, Activation::sigmoid, rng, std::vector<double>(16, 1.0), 1.0));
    nn.layers.push_back(Layer{1, 16, std::vector<double>(16, 0.0), {0.0}, Activation::tanh});
    std::vector<std::vector<double>> in, target;
    constexpr int kGrid = 61;
    for (int i = 0; i < kGrid; ++i)
        for (int j = 0; j < kGrid; ++j) {
            const double p = -1.2 + 1.8 * i / (kGrid - 1);
            const double v = -0.07 + 0.14 * j / (kGrid - 1);
            in.push_back({p, v});
            target.push_back({car_teacher_preactivation(v)});
        }
    nn.layers.back() = fit_output(nn, in, target, Activation::tanh, 0.1);
    return nn;
}

// Score of action a: agreement of its acceleration signs with the bang-bang
// teacher, which accelerates each axis against p + 0.5*v.
std::vector<double> quad_teacher_scores(std::span<const double> r)
{
    std::vector<double> s(kQuadActions, 0.0);
    for (std::size_t a = 0; a < kQuadActions; ++a) {
        const auto q = quadrotor_action(a);
        const double sign[3] = {q.theta > 0 ? 1.0 : -1.0, q.phi > 0 ? -1.0 : 1.0, q.tau > kGravity ? 1.0 : -1.0};
        for (std::size_t i = 0; i < 3; ++i)
            s[a] -= sign[i] * (r[i] + 0.5 * r[3 + i]);
    }
    return s;
}

NeuralNetwork fit_quad(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    NeuralNetwork nn;
    nn.inputs = 6;
    nn.outputs = kQuadActions;
    nn.layers.push_back(random_layer(20, 6, Activation::tanh, rng, {1.0, 1.0, 1.0, 0.5, 0.5, 0.5}, 0.2));
    nn.layers.push_back(random_layer(20, 20, Activation::tanh, rng, std::vector<double>(20, 0.3), 0.2));
    nn.layers.push_back(Layer{kQuadActions, 20, std::vector<double>(20 * kQuadActions, 0.0),
                              std::vector<double>(kQuadActions, 0.0), Activation::linear});
    std::uniform_real_distribution<double> pos(-0.4, 0.4), vel(-1.0, 1.0);
    std::vector<std::vector<double>> in, target;
    for (int i = 0; i < 4000; ++i) {
        std::vector<double> r = {pos(rng), pos(rng), pos(rng), vel(rng), vel(rng), vel(rng)};
        target.push_back(quad_teacher_scores(r));
        in.push_back(std::move(r));
    }
    nn.layers.back() = fit_output(nn, in, target, Activation::linear, 1e-6);
    return nn;
}

std::string car_quality(const NeuralNetwork& nn)
{
    const auto loop = mountain_car_loop(nn);
    RunOptions opts;
    opts.steps = kCarSteps;
    opts.goal = mountain_car_goal();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> start(-0.6, -0.4);
    unsigned solved = 0;
    for (unsigned i = 0; i < kCarStarts; ++i) {
        const double x0[] = {start(rng), 0.0, 0.0, 0.0};
        const auto tr = simulate_closed_loop(loop, x0, opts);
        if (tr.goal_reached && car_trace_reward(tr) >= kCarReward)
            ++solved;
    }
    if (solved < kCarRequired)
        return "solved " + std::to_string(solved) + " of " + std::to_string(kCarStarts) + " random starts";
    for (double p : {-1.0, -0.5, 0.0, 0.4}) {
        const double y[] = {p, 0.05};
        if (!(eval_network(nn, y)[0] > 0.0))
            return "output not positive at v = 0.05";
    }
    return {};
}

std::string quad_quality(const NeuralNetwork& nn)
{
    const auto loop = quadrotor_loop(nn);
    RunOptions opts;
    opts.steps = kQuadSteps;
    for (double px : {-0.05, 0.0, 0.05})
        for (double py : {-0.05, 0.0, 0.05}) {
            const auto box = quadrotor_initial(Interval(px), Interval(py));
            std::vector<double> x0;
            for (const auto& iv : box)
                x0.push_back(iv.lo());
            const auto tr = simulate_closed_loop(loop, x0, opts);
            for (const auto& row : tr.rows)
                for (std::size_t i = 0; i < 3; ++i)
                    if (std::abs(row.values[i]) > kQuadBound)
                        return "deviation " + std::to_string(row.values[i]) + " at step " +
                               std::to_string(row.step) + " from (" + std::to_string(px) + ", " +
                               std::to_string(py) + ")";
        }
    return {};
}

} // namespace

std::string fixture_quality(Scenario s, const NeuralNetwork& nn)
{
    return s == Scenario::mountain_car ? car_quality(nn) : quad_quality(nn);
}

ControllerFixture synth_reference_controller(Scenario s, std::uint64_t seed)
{
    std::string last;
    for (unsigned attempt = 0; attempt < kSeedAttempts; ++attempt) {
        const std::uint64_t sd = seed + attempt;
        NeuralNetwork nn = s == Scenario::mountain_car ? fit_car(sd) : fit_quad(sd);
        last = fixture_quality(s, nn);
        if (!last.empty())
            continue;
        ControllerFixture f;
        f.scenario = s;
        f.network = std::move(nn);
        f.seed = sd;
        std::ostringstream prov;
        if (s == Scenario::mountain_car) {
            prov << "2-16-16-1 sigmoid/sigmoid/tanh network; hidden layers drawn uniformly from a mt19937_64 stream "
                    "seeded with "
                 << sd
                 << "; output layer fitted by ridge regression (lambda 0.1) to the pre-activation target "
                    "clamp(100*v - 0.6, -4, 4) on a 61x61 grid over [-1.2, 0.6] x [-0.07, 0.07]; weights rounded to "
                    "6 decimals.";
            f.known_good = "reaches p >= 0.45 with reward >= 90 within 100 steps from at least 95 of 100 random "
                           "starts p0 in [-0.6, -0.4], v0 = 0";
        } else {
            prov << "6-20-20-8 tanh/tanh/linear network; hidden layers drawn uniformly from a mt19937_64 stream "
                    "seeded with "
                 << sd
                 << "; output layer fitted by ridge regression (lambda 1e-6) to bang-bang action scores that "
                    "accelerate each axis against p + 0.5*v, on 4000 samples; weights rounded to 6 decimals.";
            const double zero[6] = {};
            const auto scores = eval_network(f.network, zero);
            const auto a = std::max_element(scores.begin(), scores.end()) - scores.begin();
            prov << " Action chosen at the zero relative state: " << a << ".";
            f.known_good = "keeps |px|, |py|, |pz| <= 0.32 for 30 steps of 0.1 s against planner velocity "
                           "(0.25, 0.25, 0.25) from the corners and center of [-0.05, 0.05]^2";
        }
        f.provenance = prov.str();
        return f;
    }
    throw FixtureQualityFailure(std::string(scenario_name(s)) + " fixture failed its simulation check for " +
                                std::to_string(kSeedAttempts) + " seeds from " + std::to_string(seed) +
                                "; last: " + last);
}

NeuralNetwork degrade_car_controller(const NeuralNetwork& nn, const std::vector<Interval>& box, unsigned steps,
                                     double min_reward, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    RunOptions opts;
    opts.steps = steps;
    opts.goal = mountain_car_goal();
    std::vector<std::vector<double>> corners(1);
    for (const auto& iv : box) {
        std::vector<std::vector<double>> next;
        for (const auto& c : corners) {
            for (double e : iv.is_point() ? std::vector<double>{iv.lo()} : std::vector<double>{iv.lo(), iv.hi()}) {
                auto d = c;
                d.push_back(e);
                next.push_back(std::move(d));
            }
        }
        corners = std::move(next);
    }
    for (double scale = 0.05; scale <= 5.0; scale *= 1.5) {
        for (int trial = 0; trial < 4; ++trial) {
            NeuralNetwork d = nn;
            for (auto& l : d.layers) {
                for (auto& w : l.weights)
                    w = round6(w + scale * (std::abs(w) + 0.1) * noise(rng));
                for (auto& b : l.bias)
                    b = round6(b + scale * (std::abs(b) + 0.1) * noise(rng));
            }
            const auto loop = mountain_car_loop(d);
            for (const auto& c : corners) {
                const auto tr = simulate_closed_loop(loop, c, opts);
                if (!tr.goal_reached || car_trace_reward(tr) < min_reward)
                    return d;
            }
        }
    }
    throw FixtureQualityFailure("no perturbation made a corner start fail");
}

} // namespace nnreach

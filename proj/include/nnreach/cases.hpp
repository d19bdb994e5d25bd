#pragma once

#include "nnreach/automaton.hpp"
#include "nnreach/neural.hpp"
#include "nnreach/reach.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnreach {

// ---------------------------------------------------------------- Mountain Car

inline constexpr double kCarGoal = 0.45;
inline constexpr double kCarGoalBonus = 100.0;

/// Discrete-map car over (p, v, r, k) driven by input u, with saturating
/// self-loops for the velocity and position limits.
HybridAutomaton mountain_car_model();

/// `p >= threshold`.
Constraint mountain_car_goal(double threshold = kCarGoal);

/// Closed loop of a 2-input, 1-output controller with the car.
ClosedLoop mountain_car_loop(const NeuralNetwork& nn);

/// Standard start box p in [-0.6, -0.4], v = 0, r = 0, k = 0.
std::vector<Interval> mountain_car_initial(Interval p = Interval(-0.6, -0.4));

// ------------------------------------------------------------------- quadrotor

inline constexpr double kGravity = 9.81;
inline constexpr std::size_t kQuadActions = 8;
inline constexpr double kPlannerSpeed = 0.25;

class BadAction : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct QuadAction {
    double theta = 0.0;
    double phi = 0.0;
    double tau = 0.0;
};

/// Bit 0 picks theta, bit 1 phi, bit 2 thrust (0 = low, 1 = high).
QuadAction quadrotor_action(std::size_t index);
ActionTable quadrotor_action_table();

/// Relative-state plant: positions px..pz, velocities vx..vz and the
/// planner velocities bx..bz (held constant by the flow), inputs theta, phi,
/// tau.
HybridAutomaton quadrotor_plant();

/// Relative dynamics under one fixed action and planner velocity b; the
/// automaton has the six relative states only.
HybridAutomaton quadrotor_model(std::size_t action, const std::array<double, 3>& b);

/// RK4-discretized closed loop of an 8-output classifier with the plant,
/// sample time dt, planner velocity b held for the whole run.
ClosedLoop quadrotor_loop(const NeuralNetwork& nn, double dt = 0.1,
                          const std::array<double, 3>& b = {kPlannerSpeed, kPlannerSpeed, kPlannerSpeed});

/// Box over the plant variables: px, py as given, other relative states 0,
/// planner velocities from `b`.
std::vector<Interval> quadrotor_initial(Interval px, Interval py,
                                        const std::array<double, 3>& b = {kPlannerSpeed, kPlannerSpeed,
                                                                          kPlannerSpeed});

// ------------------------------------------------------------- discretization

/// Classical four-stage Runge-Kutta update of every ODE mode, as one
/// discrete_map mode per ODE mode. Other modes and transitions are copied.
HybridAutomaton rk4_discretize(const HybridAutomaton& h, double dt);

// ------------------------------------------------------------------- fixtures

enum class Scenario { mountain_car, quadrotor };

const char* scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);

struct ControllerFixture {
    Scenario scenario = Scenario::mountain_car;
    NeuralNetwork network;
    std::uint64_t seed = 0;
    /// Free text: how the weights were produced and what was checked.
    std::string provenance;
    /// Property the fixture is known to satisfy in simulation.
    std::string known_good;
};

class FixtureQualityFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Supervised fit of a reference controller: random hidden layers and a
/// ridge-regressed output layer, accepted only after a simulation check.
/// Tries successive seeds from `seed`; throws when none passes.
ControllerFixture synth_reference_controller(Scenario s, std::uint64_t seed = 1);

/// Re-runs the quality check of a fixture network; empty when it passes,
/// otherwise the reason.
std::string fixture_quality(Scenario s, const NeuralNetwork& nn);

/// Perturbs every weight with growing seeded noise until the simulation
/// from some corner of `box` misses the goal or ends with reward < min_reward
/// within `steps`. Throws FixtureQualityFailure if no perturbation does.
NeuralNetwork degrade_car_controller(const NeuralNetwork& nn, const std::vector<Interval>& box, unsigned steps,
                                     double min_reward, std::uint64_t seed = 1);

/// Final reward of a car trace: r at the last row, plus the goal bonus when
/// the goal was reached.
double car_trace_reward(const Trace& t);

} // namespace nnreach

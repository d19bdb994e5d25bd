#pragma once

#include "nnreach/automaton.hpp"
#include "nnreach/taylor.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnreach {

enum class LayerPath { ode, functional };
enum class SeriesMethod { picard, lie };

struct ReachSettings {
    unsigned tm_order = 4;
    /// Largest integration step (the layer modes run over unit time).
    double ode_step = 0.1;
    unsigned picard_max_iter = 30;
    double remainder_inflation = 1.3;
    std::size_t max_branches = 256;
    double max_remainder_width = 1e2;
    /// Bisection depth used when splitting saturation straddles (0 = hull).
    unsigned subdivision_depth = 0;
    /// Accept a step when its last Taylor term is at most ode_tol * step.
    double ode_tol = 1e-9;
    double min_step = 1e-7;
    /// Initial-condition remainders wider than this become fresh domain
    /// variables during an integration, at most max_symbolic per component.
    double symbolize_threshold = 1e-12;
    unsigned max_symbolic = 3;
    LayerPath layer_path = LayerPath::ode;
    /// After every step, replace live branches whose bounds differ by at most
    /// merge_tolerance per variable (beyond the widest member) by one
    /// enclosing branch.
    bool merge_branches = false;
    double merge_tolerance = 0.01;
    SeriesMethod series = SeriesMethod::picard;
};

void check_settings(const ReachSettings& s);

class RemainderBlowup : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Named state over a shared domain basis.
struct TmState {
    std::vector<std::string> names;
    std::vector<TaylorModel> values;

    const TaylorModel& at(std::string_view name) const;
    std::vector<Interval> bounds() const;
};

struct OdeResult {
    std::vector<TaylorModel> end;     // on the input basis
    std::vector<Interval> hull;       // enclosure over the whole duration
    std::size_t steps = 0;
};

/// Validated integration of x' = flows(x, params) over `duration`. `names`
/// covers the integrated variables first, then `params.size()` constant
/// parameters. All models share one basis without a time variable.
OdeResult integrate_ode(const std::vector<Expr>& flows, const std::vector<std::string>& names,
                        const std::vector<TaylorModel>& state, const std::vector<TaylorModel>& params,
                        double duration, const ReachSettings& settings);

/// One validated step of length h exactly (no adaptivity). Returns the
/// end state, or nullopt when the remainder fails to validate.
std::optional<OdeResult> ode_flowpipe_step(const std::vector<Expr>& flows, const std::vector<std::string>& names,
                                           const std::vector<TaylorModel>& state,
                                           const std::vector<TaylorModel>& params, double h,
                                           const ReachSettings& settings);

/// Run one mode of a pipeline automaton for `duration` time units. `state`
/// holds the automaton variables, `inputs` its inputs.
void layer_reach(const HybridAutomaton& h, const Mode& mode, std::vector<TaylorModel>& state,
                 const std::vector<TaylorModel>& inputs, double duration, const ReachSettings& settings,
                 LayerPath path);

/// Run the timed pipeline from the initial mode to the final mode and return
/// the observation.
std::vector<TaylorModel> run_controller(const HybridAutomaton& controller, const std::vector<TaylorModel>& inputs,
                                        const ReachSettings& settings);

/// Point execution of the pipeline: activation modes in closed form, other
/// ODE modes by fine RK4.
std::vector<double> execute_controller_point(const HybridAutomaton& controller, std::span<const double> inputs);

struct SaturationEvent {
    std::string var;
    double bound = 0.0;
    bool straddle = false;
};

/// A clamp `var <= c` (upper) or `var >= c` read off a saturating self-loop.
struct Clamp {
    std::size_t var = 0;
    double value = 0.0;
    bool upper = true;
};
std::vector<Clamp> saturation_clamps(const HybridAutomaton& plant, const Mode& mode);

/// Simultaneous update of every variable, then the mode's clamps.
std::vector<TaylorModel> discrete_map_step(const HybridAutomaton& plant, const Mode& mode,
                                           const std::vector<TaylorModel>& state,
                                           const std::vector<TaylorModel>& inputs,
                                           std::vector<SaturationEvent>* events = nullptr);

enum class BranchStatus { completed, goal_reached, remainder_blowup, branch_limit };
const char* status_name(BranchStatus s);

struct StepRecord {
    unsigned step = 0;
    Interval time;
    /// Plant variables followed by control variables.
    std::vector<Interval> bounds;
    std::optional<std::size_t> action;
    std::vector<SaturationEvent> saturations;
    /// Goal predicate status after this step: 0 = not reached, 1 = straddles,
    /// 2 = reached on the whole set.
    int goal = 0;
};

struct Branch {
    int parent = -1;
    unsigned start_step = 0;
    std::optional<std::size_t> action;  // action chosen when this branch split off
    std::vector<StepRecord> steps;      // full history from step 0
    BranchStatus status = BranchStatus::completed;
    std::string reason;
    bool leaf = true;
    /// Branches enclosed by this one when it was formed by a merge.
    std::vector<int> merged_from;
};

struct ReachResult {
    std::vector<std::string> columns;  // names matching StepRecord::bounds
    std::vector<Interval> initial;
    std::vector<Branch> branches;

    std::vector<const Branch*> leaves() const;
    std::size_t leaf_count() const;
};

struct RunOptions {
    unsigned steps = 1;
    /// Stop a branch once this holds for the whole reachable set.
    std::optional<Constraint> goal;
};

ReachResult run_closed_loop(const ClosedLoop& loop, const std::vector<Interval>& initial, const RunOptions& opts,
                            const ReachSettings& settings);

struct TraceRow {
    unsigned step = 0;
    double time = 0.0;
    std::vector<double> values;  // plant variables then control variables
    std::optional<std::size_t> action;
};

struct Trace {
    std::vector<std::string> columns;
    std::vector<TraceRow> rows;  // row 0 is the initial state
    bool goal_reached = false;
};

/// Exact point simulation of the closed loop.
Trace simulate_closed_loop(const ClosedLoop& loop, std::span<const double> initial, const RunOptions& opts);

enum class SubdivideStrategy { uniform, adaptive };

/// Uniform: k pieces along each axis listed in `axes` (all non-degenerate
/// axes when empty). Adaptive: split every axis into pieces of width <= w.
std::vector<std::vector<Interval>> subdivide_initial_set(const std::vector<Interval>& box, SubdivideStrategy s,
                                                         double param, const std::vector<std::size_t>& axes = {});

std::string flowpipe_csv(const ReachResult& r);

} // namespace nnreach

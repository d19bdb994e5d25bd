#pragma once

#include "nnreach/automaton.hpp"
#include "nnreach/reach.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nnreach {

/// Constraints read plant variables and control variables by name.
struct Property {
    /// Must hold at every recorded step, including the initial one.
    std::vector<Constraint> safety;
    /// Must hold at the last step of every execution.
    std::vector<Constraint> terminal;
    /// Final reward (reward_var at goal entry or at the horizon, plus
    /// goal_bonus when the goal was reached) must be at least this.
    std::optional<double> min_reward;
    std::string reward_var = "r";
    double goal_bonus = 0.0;
    unsigned max_steps = 100;
    /// When set, every execution must satisfy it within max_steps.
    std::optional<Constraint> goal;
};

/// Throws ModelError when a constraint names something the loop lacks.
void check_property_names(const ClosedLoop& loop, const Property& prop);

RunOptions run_options(const Property& prop);

enum class VerdictKind { verified, falsified, unknown };
const char* verdict_name(VerdictKind k);

struct Counterexample {
    std::vector<double> initial;
    Trace trace;
    std::string violated;
    unsigned step = 0;
    double reward = 0.0;
};

struct Verdict {
    VerdictKind kind = VerdictKind::unknown;
    /// Verified: largest step count over the branches.
    unsigned steps_bound = 0;
    /// Lower bound of the final reward over all branches, when tracked.
    std::optional<double> reward_bound;
    std::optional<Counterexample> counterexample;
    std::string reason;
    std::vector<Interval> subset;
    /// Step at which an Unknown verdict was decided.
    unsigned step = 0;
};

Verdict check_property(const ReachResult& result, const Property& prop);

/// First violation of `prop` along a point trace, or nullopt. Sets `step`
/// to the offending row and `reward` to the achieved reward.
std::optional<std::string> trace_violation(const Trace& t, const Property& prop, unsigned* step = nullptr,
                                           double* reward = nullptr);

/// Simulates the corners of `box` first (when asked), then uniform samples
/// from a stream seeded with `seed`; returns the first violating trace.
std::optional<Counterexample> falsify_by_simulation(const ClosedLoop& loop, const std::vector<Interval>& box,
                                                    const Property& prop, std::size_t n_samples, bool corner_first,
                                                    std::uint64_t seed = 1);

/// True when re-simulating the counterexample reproduces its trace exactly.
bool replays(const ClosedLoop& loop, const Counterexample& c, const Property& prop);

struct ContainmentReport {
    std::size_t samples = 0;
    /// Sample steps inside some branch record of the same step.
    std::size_t contained = 0;
    /// Sample steps outside every record: soundness failures.
    std::size_t violations = 0;
    /// Sample steps with no record because the covering branch stopped early.
    std::size_t uncovered = 0;
    std::string first_violation;
};

/// Monte-Carlo check that simulated trajectories from `box` stay inside the
/// per-step records of `result`.
ContainmentReport check_containment(const ClosedLoop& loop, const ReachResult& result,
                                    const std::vector<Interval>& box, const RunOptions& opts, std::size_t n_samples,
                                    std::uint64_t seed = 1);

std::vector<std::vector<double>> box_corners(const std::vector<Interval>& box);

/// `key = value` lines; `counterexample_path` is referenced when non-empty.
std::string format_verdict(const Verdict& v, const std::string& counterexample_path = {});

/// Columns step, time, then the trace columns.
std::string trace_csv(const Trace& t);

} // namespace nnreach

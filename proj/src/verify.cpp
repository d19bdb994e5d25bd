#include "nnreach/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace nnreach {

namespace {

std::vector<std::string> loop_columns(const ClosedLoop& loop)
{
    auto cols = loop.plant.variables;
    cols.insert(cols.end(), loop.control_vars.begin(), loop.control_vars.end());
    return cols;
}

std::size_t column(const std::vector<std::string>& cols, const std::string& name)
{
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end())
        throw ModelError("property references unknown variable '" + name + "'");
    return static_cast<std::size_t>(it - cols.begin());
}

struct CompiledConstraint {
    Constraint c;
    CompiledExpr lhs;
};

std::vector<CompiledConstraint> compile_all(const std::vector<Constraint>& cs, const std::vector<std::string>& cols)
{
    std::vector<CompiledConstraint> out;
    for (const auto& c : cs)
        out.push_back({c, CompiledExpr::compile(c.lhs, cols)});
    return out;
}

// 1 = holds on the whole interval, 0 = straddles, -1 = violated everywhere.
int status_on(const Constraint& c, const Interval& v)
{
    switch (c.rel) {
    case Rel::le: return v.hi() <= c.rhs ? 1 : v.lo() > c.rhs ? -1 : 0;
    case Rel::ge: return v.lo() >= c.rhs ? 1 : v.hi() < c.rhs ? -1 : 0;
    case Rel::eq: return v.is_point() && v.lo() == c.rhs ? 1 : v.contains(c.rhs) ? 0 : -1;
    }
    return 0;
}

bool holds_at(const Constraint& c, double v)
{
    switch (c.rel) {
    case Rel::le: return v <= c.rhs;
    case Rel::ge: return v >= c.rhs;
    case Rel::eq: return v == c.rhs;
    }
    return false;
}

Interval eval_on(const CompiledExpr& e, const std::vector<Interval>& bounds)
{
    return e.run<Interval>(std::span<const Interval>(bounds), [](double v) { return Interval(v); });
}

double eval_at(const CompiledExpr& e, const std::vector<double>& values)
{
    return e.run<double>(std::span<const double>(values), [](double v) { return v; });
}

Verdict unknown(const ReachResult& r, std::string why, unsigned step)
{
    Verdict v;
    v.kind = VerdictKind::unknown;
    v.reason = std::move(why);
    v.subset = r.initial;
    v.step = step;
    return v;
}

} // namespace

void check_property_names(const ClosedLoop& loop, const Property& prop)
{
    const auto cols = loop_columns(loop);
    for (const auto* list : {&prop.safety, &prop.terminal})
        for (const auto& c : *list)
            for (const auto& n : free_variables(c.lhs))
                column(cols, n);
    if (prop.goal)
        for (const auto& n : free_variables(prop.goal->lhs))
            if (!loop.plant.variable_index(n))
                throw ModelError("goal references '" + n + "', which is not a plant variable");
    if (prop.min_reward)
        column(cols, prop.reward_var);
}

RunOptions run_options(const Property& prop)
{
    RunOptions o;
    o.steps = prop.max_steps;
    o.goal = prop.goal;
    return o;
}

const char* verdict_name(VerdictKind k)
{
    switch (k) {
    case VerdictKind::verified: return "Verified";
    case VerdictKind::falsified: return "Falsified";
    case VerdictKind::unknown: return "Unknown";
    }
    return "?";
}

Verdict check_property(const ReachResult& result, const Property& prop)
{
    const auto& cols = result.columns;
    const auto safety = compile_all(prop.safety, cols);
    const auto terminal = compile_all(prop.terminal, cols);
    const std::size_t reward_col = prop.min_reward ? column(cols, prop.reward_var) : 0;

    unsigned steps_bound = 0;
    double reward_lo = std::numeric_limits<double>::infinity();
    for (const Branch* b : result.leaves()) {
        const unsigned last_step = b->steps.back().step;
        if (b->status == BranchStatus::remainder_blowup || b->status == BranchStatus::branch_limit)
            return unknown(result, std::string(status_name(b->status)) + ": " + b->reason, last_step);
        for (const auto& rec : b->steps) {
            for (const auto& c : safety) {
                const int st = status_on(c.c, eval_on(c.lhs, rec.bounds));
                if (st < 1)
                    return unknown(result,
                                   "safety constraint '" + to_string(c.c) + "' " +
                                       (st == 0 ? "straddled" : "violated by the enclosure") + " at step " +
                                       std::to_string(rec.step),
                                   rec.step);
            }
        }
        const StepRecord& last = b->steps.back();
        for (const auto& c : terminal)
            if (status_on(c.c, eval_on(c.lhs, last.bounds)) < 1)
                return unknown(result, "terminal constraint '" + to_string(c.c) + "' not established", last.step);
        const bool reached = prop.goal && b->status == BranchStatus::goal_reached && last.goal == 2;
        if (prop.goal && !reached)
            return unknown(result,
                           last.goal == 1 ? "goal '" + to_string(*prop.goal) + "' straddled at step " +
                                                std::to_string(last.step)
                                          : "goal '" + to_string(*prop.goal) + "' not reached within " +
                                                std::to_string(prop.max_steps) + " steps",
                           last.step);
        if (prop.min_reward)
            reward_lo = std::min(reward_lo, last.bounds[reward_col].lo() + (reached ? prop.goal_bonus : 0.0));
        steps_bound = std::max(steps_bound, last_step);
    }
    Verdict v;
    v.subset = result.initial;
    v.steps_bound = steps_bound;
    if (prop.min_reward) {
        v.reward_bound = reward_lo;
        if (reward_lo < *prop.min_reward) {
            v.kind = VerdictKind::unknown;
            v.reason = "reward lower bound " + format_number(reward_lo) + " below " + format_number(*prop.min_reward);
            v.step = steps_bound;
            return v;
        }
    }
    v.kind = VerdictKind::verified;
    return v;
}

std::optional<std::string> trace_violation(const Trace& t, const Property& prop, unsigned* step, double* reward)
{
    const auto safety = compile_all(prop.safety, t.columns);
    const auto terminal = compile_all(prop.terminal, t.columns);
    auto report = [&](unsigned s, std::string why) -> std::optional<std::string> {
        if (step)
            *step = s;
        return why;
    };
    double achieved = 0.0;
    if (prop.min_reward) {
        achieved = t.rows.back().values[column(t.columns, prop.reward_var)] + (t.goal_reached ? prop.goal_bonus : 0.0);
        if (reward)
            *reward = achieved;
    }
    for (const auto& row : t.rows)
        for (const auto& c : safety)
            if (!holds_at(c.c, eval_at(c.lhs, row.values)))
                return report(row.step, "safety constraint '" + to_string(c.c) + "' violated at step " +
                                            std::to_string(row.step));
    const TraceRow& last = t.rows.back();
    if (prop.goal && !t.goal_reached)
        return report(last.step, "goal '" + to_string(*prop.goal) + "' not reached within " +
                                     std::to_string(prop.max_steps) + " steps");
    for (const auto& c : terminal)
        if (!holds_at(c.c, eval_at(c.lhs, last.values)))
            return report(last.step, "terminal constraint '" + to_string(c.c) + "' violated");
    if (prop.min_reward && achieved < *prop.min_reward)
        return report(last.step, "reward " + format_number(achieved) + " below " + format_number(*prop.min_reward));
    return std::nullopt;
}

std::vector<std::vector<double>> box_corners(const std::vector<Interval>& box)
{
    std::vector<std::vector<double>> out(1);
    for (const auto& iv : box) {
        std::vector<std::vector<double>> next;
        for (const auto& c : out) {
            auto a = c;
            a.push_back(iv.lo());
            next.push_back(std::move(a));
            if (!iv.is_point()) {
                auto b = c;
                b.push_back(iv.hi());
                next.push_back(std::move(b));
            }
        }
        out = std::move(next);
    }
    return out;
}

namespace {

std::vector<double> sample_point(const std::vector<Interval>& box, std::mt19937_64& rng)
{
    std::vector<double> x;
    for (const auto& iv : box) {
        if (iv.is_point()) {
            x.push_back(iv.lo());
        } else {
            std::uniform_real_distribution<double> d(iv.lo(), iv.hi());
            x.push_back(d(rng));
        }
    }
    return x;
}

} // namespace

std::optional<Counterexample> falsify_by_simulation(const ClosedLoop& loop, const std::vector<Interval>& box,
                                                    const Property& prop, std::size_t n_samples, bool corner_first,
                                                    std::uint64_t seed)
{
    if (n_samples == 0)
        throw std::invalid_argument("falsification needs at least one sample");
    const RunOptions opts = run_options(prop);
    auto attempt = [&](const std::vector<double>& x0) -> std::optional<Counterexample> {
        Counterexample c;
        c.initial = x0;
        c.trace = simulate_closed_loop(loop, x0, opts);
        auto why = trace_violation(c.trace, prop, &c.step, &c.reward);
        if (!why)
            return std::nullopt;
        c.violated = *why;
        return c;
    };
    if (corner_first)
        for (const auto& x0 : box_corners(box))
            if (auto c = attempt(x0))
                return c;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n_samples; ++i)
        if (auto c = attempt(sample_point(box, rng)))
            return c;
    return std::nullopt;
}

bool replays(const ClosedLoop& loop, const Counterexample& c, const Property& prop)
{
    const Trace again = simulate_closed_loop(loop, c.initial, run_options(prop));
    if (again.rows.size() != c.trace.rows.size() || again.goal_reached != c.trace.goal_reached)
        return false;
    for (std::size_t i = 0; i < again.rows.size(); ++i)
        if (again.rows[i].values != c.trace.rows[i].values || again.rows[i].action != c.trace.rows[i].action)
            return false;
    unsigned step = 0;
    const auto why = trace_violation(again, prop, &step);
    return why && *why == c.violated && step == c.step;
}

ContainmentReport check_containment(const ClosedLoop& loop, const ReachResult& result,
                                    const std::vector<Interval>& box, const RunOptions& opts, std::size_t n_samples,
                                    std::uint64_t seed)
{
    // Records per step over every branch.
    std::vector<std::vector<const StepRecord*>> by_step;
    for (const auto& b : result.branches)
        for (const auto& rec : b.steps) {
            if (by_step.size() <= rec.step)
                by_step.resize(rec.step + 1);
            by_step[rec.step].push_back(&rec);
        }
    ContainmentReport rep;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const auto x0 = sample_point(box, rng);
        const Trace t = simulate_closed_loop(loop, x0, opts);
        ++rep.samples;
        for (const auto& row : t.rows) {
            if (row.step >= by_step.size() || by_step[row.step].empty()) {
                ++rep.uncovered;
                continue;
            }
            bool inside = false;
            for (const StepRecord* rec : by_step[row.step]) {
                bool all = true;
                for (std::size_t v = 0; v < row.values.size() && all; ++v)
                    all = rec->bounds[v].contains(row.values[v]);
                if (all) {
                    inside = true;
                    break;
                }
            }
            if (inside) {
                ++rep.contained;
            } else {
                if (rep.violations == 0) {
                    std::ostringstream os;
                    os.precision(17);
                    os << "sample " << i << " leaves every enclosure at step " << row.step << " (";
                    for (std::size_t v = 0; v < row.values.size(); ++v)
                        os << (v ? ", " : "") << t.columns[v] << "=" << row.values[v];
                    os << ")";
                    rep.first_violation = os.str();
                }
                ++rep.violations;
            }
        }
    }
    return rep;
}

std::string format_verdict(const Verdict& v, const std::string& counterexample_path)
{
    std::ostringstream os;
    os << "status = " << verdict_name(v.kind) << "\n";
    os << "subset = ";
    for (std::size_t i = 0; i < v.subset.size(); ++i)
        os << (i ? "; " : "") << format_interval(v.subset[i]);
    os << "\n";
    if (v.kind == VerdictKind::verified)
        os << "steps_bound = " << v.steps_bound << "\n";
    if (v.reward_bound)
        os << "reward_bound = " << format_number(*v.reward_bound) << "\n";
    if (v.kind != VerdictKind::verified) {
        os << "step = " << v.step << "\n";
        os << "reason = " << v.reason << "\n";
    }
    if (v.counterexample) {
        os << "counterexample_initial = ";
        for (std::size_t i = 0; i < v.counterexample->initial.size(); ++i)
            os << (i ? "; " : "") << format_number(v.counterexample->initial[i]);
        os << "\n";
        os << "counterexample_reward = " << format_number(v.counterexample->reward) << "\n";
        if (!counterexample_path.empty())
            os << "counterexample = " << counterexample_path << "\n";
    }
    return os.str();
}

std::string trace_csv(const Trace& t)
{
    std::ostringstream os;
    os << "step,time";
    for (const auto& c : t.columns)
        os << "," << c;
    os << ",action\n";
    for (const auto& r : t.rows) {
        os << r.step << "," << format_number(r.time);
        for (double v : r.values)
            os << "," << format_number(v);
        os << ",";
        if (r.action)
            os << *r.action;
        os << "\n";
    }
    return os.str();
}

} // namespace nnreach

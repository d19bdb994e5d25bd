#include "nnreach/reach.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

namespace nnreach {

void check_settings(const ReachSettings& s)
{
    if (s.tm_order < 1 || s.tm_order > kMaxTaylorOrder)
        throw std::invalid_argument("tm_order must be in 1.." + std::to_string(kMaxTaylorOrder));
    if (!(s.ode_step > 0.0) || !(s.remainder_inflation > 1.0) || s.picard_max_iter == 0 || s.max_branches == 0 ||
        !(s.max_remainder_width > 0.0) || !(s.ode_tol > 0.0) || !(s.min_step > 0.0))
        throw std::invalid_argument("reach settings must be positive (inflation above 1)");
}

const TaylorModel& TmState::at(std::string_view name) const
{
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return values[i];
    throw std::out_of_range("no state variable '" + std::string(name) + "'");
}

std::vector<Interval> TmState::bounds() const
{
    std::vector<Interval> out;
    for (const auto& v : values)
        out.push_back(v.bound());
    return out;
}

namespace {

BasisPtr with_time(const BasisPtr& b)
{
    const unsigned n = b->n_vars();
    return MonomialBasis::get(n + 1, b->order(), b->nonneg_mask() | (std::uint64_t{1} << n));
}

std::vector<int> identity_map(unsigned n)
{
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    return m;
}

TaylorModel without_remainder(TaylorModel t)
{
    t.set_remainder(Interval());
    return t;
}

TaylorModel run_tm(const CompiledExpr& c, const std::vector<TaylorModel>& vars, const BasisPtr& basis)
{
    return c.run<TaylorModel>(std::span<const TaylorModel>(vars), [&](double v) { return TaylorModel(basis, v); });
}

double run_point(const CompiledExpr& c, const std::vector<double>& vars)
{
    return c.run<double>(std::span<const double>(vars), [](double v) { return v; });
}

Interval widen_about_mid(const Interval& j, double factor)
{
    const double m = j.mid();
    const double r = j.rad() * factor + 1e-300;
    return Interval::widened(m - r, m + r, 1);
}

// Sum of |coefficients| of the highest time power, the classic error proxy.
double last_term_size(const std::vector<TaylorModel>& p)
{
    double e = 0.0;
    for (const auto& t : p) {
        const auto& b = *t.basis();
        const unsigned tau = b.n_vars() - 1;
        for (std::size_t i = 0; i < b.size(); ++i)
            if (b.exponents(i)[tau] == b.order())
                e = std::max(e, std::abs(t.coeff(i)));
    }
    return e;
}

struct StepContext {
    const std::vector<CompiledExpr>& flows;
    const std::vector<Expr>& flow_exprs;
    const std::vector<std::string>& names;
    const ReachSettings& settings;
    /// jacobian[i][j] = d flow_i / d x_j over the integrated variables.
    std::vector<std::vector<CompiledExpr>> jacobian;
};

std::vector<std::vector<CompiledExpr>> flow_jacobian(const std::vector<Expr>& flows,
                                                     const std::vector<std::string>& names)
{
    std::vector<std::vector<CompiledExpr>> out(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i)
        for (std::size_t j = 0; j < flows.size(); ++j)
            out[i].push_back(CompiledExpr::compile(simplify(differentiate(flows[i], names[j])), names));
    return out;
}

std::vector<TaylorModel> picard_operator(const StepContext& ctx, const std::vector<TaylorModel>& x0,
                                         const std::vector<TaylorModel>& y, const std::vector<TaylorModel>& params,
                                         double h)
{
    std::vector<TaylorModel> vars = y;
    vars.insert(vars.end(), params.begin(), params.end());
    std::vector<TaylorModel> out;
    out.reserve(x0.size());
    const BasisPtr& basis = x0.front().basis();
    for (std::size_t i = 0; i < x0.size(); ++i)
        out.push_back(x0[i] + run_tm(ctx.flows[i], vars, basis).integrate_time(h));
    return out;
}

std::vector<TaylorModel> picard_polynomial(const StepContext& ctx, const std::vector<TaylorModel>& x0,
                                           const std::vector<TaylorModel>& params, double h)
{
    std::vector<TaylorModel> base;
    for (const auto& x : x0)
        base.push_back(without_remainder(x));
    std::vector<TaylorModel> pars;
    for (const auto& p : params)
        pars.push_back(without_remainder(p));
    std::vector<TaylorModel> p = base;
    const unsigned order = x0.front().order();
    for (unsigned it = 0; it <= order; ++it) {
        auto next = picard_operator(ctx, base, p, pars, h);
        for (auto& t : next)
            t.set_remainder(Interval());
        p = std::move(next);
    }
    return p;
}

// Taylor series in time from symbolic Lie derivatives.
std::vector<TaylorModel> lie_polynomial(const StepContext& ctx, const std::vector<TaylorModel>& x0,
                                        const std::vector<TaylorModel>& params, double h)
{
    const std::size_t k = x0.size();
    const BasisPtr& basis = x0.front().basis();
    const unsigned order = basis->order();
    const unsigned tau = basis->n_vars() - 1;
    std::vector<TaylorModel> vars;
    for (const auto& x : x0)
        vars.push_back(without_remainder(x));
    for (const auto& p : params)
        vars.push_back(without_remainder(p));

    std::vector<TaylorModel> out;
    for (std::size_t i = 0; i < k; ++i) {
        Expr lie = Expr::var(ctx.names[i]);
        TaylorModel acc(basis);
        TaylorModel tau_pow(basis, 1.0);
        double scale = 1.0;
        for (unsigned d = 0; d <= order; ++d) {
            const CompiledExpr c = CompiledExpr::compile(lie, ctx.names);
            acc += (run_tm(c, vars, basis) * tau_pow) * scale;
            if (d == order)
                break;
            Expr next = Expr::constant(0.0);
            for (std::size_t j = 0; j < k; ++j)
                next = next + differentiate(lie, ctx.names[j]) * ctx.flow_exprs[j];
            lie = simplify(next);
            tau_pow = tau_pow * TaylorModel::variable(basis, tau);
            scale = scale * h / static_cast<double>(d + 1);
        }
        acc.set_remainder(Interval());
        out.push_back(std::move(acc));
    }
    return out;
}

struct ValidatedStep {
    std::vector<TaylorModel> over_step;  // on the time-extended basis
    std::vector<TaylorModel> end;        // on the original basis
    double local_width = 0.0;            // remainder created by this step alone
};

std::optional<ValidatedStep> validate_step(const StepContext& ctx, const std::vector<TaylorModel>& x0t,
                                           const std::vector<TaylorModel>& params_t,
                                           const std::vector<TaylorModel>& poly, double h, const BasisPtr& base)
{
    const std::size_t k = poly.size();
    const ReachSettings& s = ctx.settings;

    auto gap = [&](const std::vector<TaylorModel>& img, std::size_t i) { return (img[i] - poly[i]).bound(); };

    std::vector<Interval> j(k);
    {
        auto img = picard_operator(ctx, x0t, poly, params_t, h);
        for (std::size_t i = 0; i < k; ++i)
            j[i] = widen_about_mid(gap(img, i), s.remainder_inflation);
    }
    std::vector<TaylorModel> y = poly;
    bool ok = false;
    for (unsigned it = 0; it < s.picard_max_iter; ++it) {
        for (std::size_t i = 0; i < k; ++i)
            y[i].set_remainder(j[i]);
        auto img = picard_operator(ctx, x0t, y, params_t, h);
        bool inside = true;
        std::vector<Interval> next(k);
        for (std::size_t i = 0; i < k; ++i) {
            next[i] = gap(img, i);
            if (!j[i].contains(next[i]))
                inside = false;
        }
        if (inside) {
            ok = true;
            // a few contraction sweeps tighten the enclosure
            for (int r = 0; r < 2; ++r) {
                for (std::size_t i = 0; i < k; ++i)
                    y[i].set_remainder(next[i]);
                img = picard_operator(ctx, x0t, y, params_t, h);
                for (std::size_t i = 0; i < k; ++i) {
                    auto refined = intersect(gap(img, i), next[i]);
                    if (refined)
                        next[i] = *refined;
                }
            }
            for (std::size_t i = 0; i < k; ++i)
                y[i].set_remainder(next[i]);
            break;
        }
        for (std::size_t i = 0; i < k; ++i)
            j[i] = widen_about_mid(hull(j[i], next[i]), s.remainder_inflation);
        for (std::size_t i = 0; i < k; ++i)
            if (!std::isfinite(j[i].width()) || j[i].width() > s.max_remainder_width)
                return std::nullopt;
    }
    if (!ok)
        return std::nullopt;

    ValidatedStep out;
    for (std::size_t i = 0; i < k; ++i)
        out.local_width = std::max(out.local_width, y[i].remainder().width());
    const unsigned tau = y.front().n_vars() - 1;
    std::vector<int> drop_tau = identity_map(tau + 1);
    drop_tau[tau] = -1;
    for (std::size_t i = 0; i < k; ++i) {
        out.end.push_back(y[i].substitute(tau, 1.0).rebase(base, drop_tau));
        out.over_step.push_back(std::move(y[i]));
    }
    return out;
}

std::optional<ValidatedStep> raw_step(const StepContext& ctx, const std::vector<TaylorModel>& x0,
                                      const std::vector<TaylorModel>& params, double h, double* err_out)
{
    const BasisPtr base = x0.front().basis();
    const BasisPtr bt = with_time(base);
    const auto map = identity_map(base->n_vars());
    std::vector<TaylorModel> x0t, pt;
    for (const auto& x : x0)
        x0t.push_back(x.rebase(bt, map));
    for (const auto& p : params)
        pt.push_back(p.rebase(bt, map));
    auto poly = ctx.settings.series == SeriesMethod::lie ? lie_polynomial(ctx, x0t, pt, h)
                                                         : picard_polynomial(ctx, x0t, pt, h);
    const double err = last_term_size(poly);
    if (err_out) {
        *err_out = err;
        // hopeless steps skip the costly validation
        if (err > 100.0 * ctx.settings.ode_tol * h)
            return std::nullopt;
    }
    return validate_step(ctx, x0t, pt, poly, h, base);
}

// Incoming remainders would be amplified by interval evaluation of the flow.
// Integrate the polynomial part alone and push the remainder box through the
// step with a logarithmic-norm growth bound instead.
std::optional<ValidatedStep> one_step(const StepContext& ctx, const std::vector<TaylorModel>& x0,
                                      const std::vector<TaylorModel>& params, double h, double* err_out)
{
    const std::size_t k = x0.size();
    double r = 0.0;
    std::vector<TaylorModel> centered;
    for (const auto& x : x0) {
        TaylorModel t = without_remainder(x);
        t += x.remainder().mid();
        r = std::max(r, x.remainder().rad() + t.remainder().mag());
        t.set_remainder(Interval());
        centered.push_back(std::move(t));
    }
    if (r == 0.0)
        return raw_step(ctx, x0, params, h, err_out);

    auto step = raw_step(ctx, centered, params, h, err_out);
    if (!step)
        return std::nullopt;
    // Every perturbed trajectory stays within 2r of the nominal one as long
    // as the growth factor over the step is below 2.
    std::vector<Interval> vars;
    for (const auto& t : step->over_step)
        vars.push_back(t.bound() + Interval::symmetric(2.0 * r));
    for (const auto& p : params)
        vars.push_back(p.bound());
    double mu = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const Interval d = ctx.jacobian[i][j].run<Interval>(std::span<const Interval>(vars),
                                                                 [](double v) { return Interval(v); });
            row += i == j ? d.hi() : d.mag();
        }
        mu = std::max(mu, row);
    }
    const double growth = nudge(std::exp(nudge(h * mu, false)), false);
    const double reach_growth = std::max(growth, 1.0);
    if (!(reach_growth < 2.0))
        return raw_step(ctx, x0, params, h, err_out);
    const Interval spread = Interval::symmetric(r * growth);
    const Interval spread_hull = Interval::symmetric(r * reach_growth);
    for (std::size_t i = 0; i < k; ++i) {
        step->end[i].set_remainder(step->end[i].remainder() + spread);
        step->over_step[i].set_remainder(step->over_step[i].remainder() + spread_hull);
    }
    return step;
}

bool is_zero_flow(const Expr& e) { return e.is_constant(0.0); }

struct Component {
    std::vector<std::size_t> vars;  // integrated indices
    std::vector<std::size_t> refs;  // indices into names (state or param) read but not integrated here
};

std::vector<Component> components(const std::vector<Expr>& flows, const std::vector<std::string>& names)
{
    const std::size_t k = flows.size();
    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<std::vector<std::size_t>> reads(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (is_zero_flow(flows[i]))
            continue;
        for (const auto& v : free_variables(flows[i])) {
            auto it = std::find(names.begin(), names.end(), v);
            if (it == names.end())
                throw UnboundVariable(v);
            const auto j = static_cast<std::size_t>(it - names.begin());
            reads[i].push_back(j);
            if (j < k && !is_zero_flow(flows[j]))
                parent[find(i)] = find(j);
        }
    }
    std::vector<Component> out;
    std::vector<long> slot(k, -1);
    for (std::size_t i = 0; i < k; ++i) {
        if (is_zero_flow(flows[i]))
            continue;
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(out.size());
            out.emplace_back();
        }
        out[static_cast<std::size_t>(slot[r])].vars.push_back(i);
    }
    for (auto& c : out) {
        std::vector<std::size_t> refs;
        for (std::size_t i : c.vars)
            for (std::size_t j : reads[i])
                if (std::find(c.vars.begin(), c.vars.end(), j) == c.vars.end())
                    refs.push_back(j);
        std::sort(refs.begin(), refs.end());
        refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
        c.refs = std::move(refs);
    }
    return out;
}

// Integrate one coupled component over `duration` with dyadic adaptive steps.
std::vector<TaylorModel> integrate_component(const std::vector<Expr>& flows, const std::vector<std::string>& names,
                                             std::vector<TaylorModel> state, std::vector<TaylorModel> params,
                                             double duration, const ReachSettings& s, std::vector<Interval>& hull_out,
                                             std::size_t& steps_out)
{
    const BasisPtr base = state.front().basis();
    const unsigned n = base->n_vars();

    // Wide initial remainders become fresh domain variables.
    struct Cand {
        bool is_param;
        std::size_t idx;
        double width;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < state.size(); ++i)
        if (state[i].remainder().width() > s.symbolize_threshold)
            cands.push_back({false, i, state[i].remainder().width()});
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].remainder().width() > s.symbolize_threshold)
            cands.push_back({true, i, params[i].remainder().width()});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.width > b.width; });
    if (cands.size() > s.max_symbolic)
        cands.resize(s.max_symbolic);
    const auto extra = static_cast<unsigned>(cands.size());
    const BasisPtr work = extra ? MonomialBasis::get(n + extra, base->order(), base->nonneg_mask()) : base;
    if (extra) {
        const auto map = identity_map(n);
        for (auto& x : state)
            x = x.rebase(work, map);
        for (auto& p : params)
            p = p.rebase(work, map);
        for (unsigned k = 0; k < extra; ++k) {
            TaylorModel& t = cands[k].is_param ? params[cands[k].idx] : state[cands[k].idx];
            const Interval r = t.remainder();
            t.set_remainder(Interval());
            t += r.mid();
            t += TaylorModel::variable(work, n + k) * r.rad();
        }
    }

    std::vector<CompiledExpr> compiled;
    for (const auto& f : flows)
        compiled.push_back(CompiledExpr::compile(f, names));
    const StepContext ctx{compiled, flows, names, s, flow_jacobian(flows, names)};

    hull_out.clear();
    for (const auto& x : state)
        hull_out.push_back(x.bound());

    // Positions in units of duration * 2^-kMaxLevel keep the step sum exact.
    constexpr int kMaxLevel = 48;
    const std::uint64_t total = std::uint64_t{1} << kMaxLevel;
    int min_level = 0;
    while (std::ldexp(duration, -min_level) > s.ode_step && min_level < kMaxLevel)
        ++min_level;
    int level = min_level;
    std::uint64_t pos = 0;
    const unsigned order = base->order();
    while (pos < total) {
        // largest aligned step not exceeding the requested level
        while (level > 0 && (pos & ((std::uint64_t{1} << (kMaxLevel - level)) - 1)) != 0)
            ++level;
        const double h = std::ldexp(duration, -level);
        if (h < s.min_step * duration || level >= kMaxLevel)
            throw RemainderBlowup("integration step fell below the minimum");
        double err = 0.0;
        auto step = one_step(ctx, state, params, h, &err);
        if (!step) {
            ++level;
            continue;
        }
        bool at_floor = false;
        if (step->local_width > s.ode_tol * h) {
            // Truncated domain terms set an error floor per unit time that
            // smaller steps cannot remove; refine only while it pays off.
            const double half_h = 0.5 * h;
            if (half_h < s.min_step * duration || level + 1 >= kMaxLevel)
                throw RemainderBlowup("integration step fell below the minimum");
            auto half = one_step(ctx, state, params, half_h, &err);
            if (!half || half->local_width / half_h < 0.7 * step->local_width / h) {
                ++level;
                if (!half)
                    continue;
                step = std::move(half);
            } else {
                at_floor = true;
            }
        }
        for (std::size_t i = 0; i < state.size(); ++i) {
            hull_out[i] = hull(hull_out[i], step->over_step[i].bound());
            if (hull_out[i].width() > s.max_remainder_width)
                throw RemainderBlowup("flowpipe wider than the configured limit");
        }
        state = std::move(step->end);
        const double taken = std::ldexp(duration, -level);
        pos += std::uint64_t{1} << (kMaxLevel - level);
        ++steps_out;
        // grow when doubling would still meet the tolerance; at the floor,
        // probe a longer step since refinement no longer helps
        const double scale = std::ldexp(1.0, static_cast<int>(order) + 1);
        if (level > min_level && (at_floor || step->local_width * scale <= s.ode_tol * taken))
            --level;
    }

    if (extra) {
        std::vector<int> back = identity_map(n + extra);
        for (unsigned k = 0; k < extra; ++k)
            back[n + k] = -1;
        for (auto& x : state)
            x = x.rebase(base, back);
    }
    return state;
}

bool is_idle_flow(const Mode& m) { return m.kind == ModeKind::idle; }

} // namespace

std::optional<OdeResult> ode_flowpipe_step(const std::vector<Expr>& flows, const std::vector<std::string>& names,
                                           const std::vector<TaylorModel>& state,
                                           const std::vector<TaylorModel>& params, double h,
                                           const ReachSettings& settings)
{
    std::vector<CompiledExpr> compiled;
    for (const auto& f : flows)
        compiled.push_back(CompiledExpr::compile(f, names));
    const StepContext ctx{compiled, flows, names, settings, flow_jacobian(flows, names)};
    auto step = one_step(ctx, state, params, h, nullptr);
    if (!step)
        return std::nullopt;
    OdeResult r;
    for (const auto& t : step->over_step)
        r.hull.push_back(t.bound());
    r.end = std::move(step->end);
    r.steps = 1;
    return r;
}

OdeResult integrate_ode(const std::vector<Expr>& flows, const std::vector<std::string>& names,
                        const std::vector<TaylorModel>& state, const std::vector<TaylorModel>& params,
                        double duration, const ReachSettings& settings)
{
    const std::size_t k = state.size();
    if (flows.size() != k || names.size() != k + params.size())
        throw std::invalid_argument("integrate_ode: flows, names and state disagree in size");
    OdeResult r;
    r.end = state;
    for (const auto& x : state)
        r.hull.push_back(x.bound());
    if (duration == 0.0 || k == 0)
        return r;
    if (!(duration > 0.0))
        throw std::invalid_argument("integration duration must be non-negative");

    for (const auto& comp : components(flows, names)) {
        std::vector<std::string> cnames;
        std::vector<Expr> cflows;
        std::vector<TaylorModel> cstate, cparams;
        for (std::size_t i : comp.vars) {
            cnames.push_back(names[i]);
            cflows.push_back(flows[i]);
            cstate.push_back(state[i]);
        }
        for (std::size_t j : comp.refs) {
            cnames.push_back(names[j]);
            cparams.push_back(j < k ? state[j] : params[j - k]);
        }
        std::vector<Interval> hull_c;
        auto end = integrate_component(cflows, cnames, cstate, cparams, duration, settings, hull_c, r.steps);
        for (std::size_t a = 0; a < comp.vars.size(); ++a) {
            r.end[comp.vars[a]] = std::move(end[a]);
            r.hull[comp.vars[a]] = hull_c[a];
        }
    }
    return r;
}

// ------------------------------------------------------------------ controller

namespace {

enum class Proxy { none, sigmoid, tanh };

// a*g*(1 - g) or a*(1 - g^2) with g the variable itself.
Proxy proxy_form(const Expr& f, const std::string& self, std::string& param)
{
    const Expr g = Expr::var(self);
    const Expr one = Expr::constant(1.0);
    if (f.kind() != Expr::Kind::binary || f.op() != BinaryOp::mul)
        return Proxy::none;
    const Expr& l = f.lhs();
    const Expr& r = f.rhs();
    if (l.kind() == Expr::Kind::binary && l.op() == BinaryOp::mul && l.lhs().kind() == Expr::Kind::var &&
        l.rhs() == g && r == one - g) {
        param = l.lhs().name();
        return Proxy::sigmoid;
    }
    if (l.kind() == Expr::Kind::var && r == one - Expr::pow(g, 2)) {
        param = l.name();
        return Proxy::tanh;
    }
    return Proxy::none;
}

struct GuardTime {
    std::size_t clock;
    double at;
};

GuardTime pipeline_guard(const HybridAutomaton& h, const Transition& t)
{
    if (t.guard.size() != 1 || t.guard[0].rel != Rel::eq || t.guard[0].lhs.kind() != Expr::Kind::var)
        throw ModelError("transition " + t.src + "->" + t.dst + " is not a clock guard 'clock = c'");
    auto idx = h.variable_index(t.guard[0].lhs.name());
    if (!idx)
        throw ModelError("guard clock '" + t.guard[0].lhs.name() + "' is not a variable");
    return {*idx, t.guard[0].rhs};
}

const Transition& single_outgoing(const HybridAutomaton& h, const std::string& mode)
{
    auto outs = h.outgoing(mode);
    if (outs.size() != 1)
        throw ModelError("mode '" + mode + "' has " + std::to_string(outs.size()) +
                         " outgoing transitions; controllers must be timed pipelines");
    return *outs.front();
}

std::vector<std::string> all_names(const HybridAutomaton& h)
{
    std::vector<std::string> names = h.variables;
    names.insert(names.end(), h.inputs.begin(), h.inputs.end());
    return names;
}

bool functional_mode(const HybridAutomaton& h, const Mode& mode, const std::vector<TaylorModel>& state,
                     double duration)
{
    if (mode.kind != ModeKind::ode || duration != 1.0)
        return false;
    for (std::size_t i = 0; i < h.variables.size(); ++i) {
        const Expr& f = mode.flow[i];
        if (is_zero_flow(f) || f.is_constant(1.0))
            continue;
        std::string param;
        const Proxy p = proxy_form(f, h.variables[i], param);
        if (p == Proxy::none)
            return false;
        auto pi = h.variable_index(param);
        if (pi && !is_zero_flow(mode.flow[*pi]))
            return false;
        const TaylorModel& g = state[i];
        const double start = p == Proxy::sigmoid ? 0.5 : 0.0;
        if (!g.is_constant() || g.remainder() != Interval() || g.constant_term() != start)
            return false;
    }
    return true;
}

} // namespace

void layer_reach(const HybridAutomaton& h, const Mode& mode, std::vector<TaylorModel>& state,
                 const std::vector<TaylorModel>& inputs, double duration, const ReachSettings& settings,
                 LayerPath path)
{
    if (duration == 0.0 || is_idle_flow(mode)) {
        if (mode.kind == ModeKind::idle)
            return;
    }
    if (mode.kind == ModeKind::discrete_map)
        throw ModelError("mode '" + mode.name + "' is a discrete map, not a timed mode");
    if (mode.kind == ModeKind::idle)
        return;

    if (path == LayerPath::functional && functional_mode(h, mode, state, duration)) {
        std::vector<TaylorModel> next = state;
        const std::vector<std::string> names = all_names(h);
        for (std::size_t i = 0; i < h.variables.size(); ++i) {
            const Expr& f = mode.flow[i];
            if (is_zero_flow(f))
                continue;
            if (f.is_constant(1.0)) {
                next[i] += duration;
                continue;
            }
            std::string param;
            const Proxy p = proxy_form(f, h.variables[i], param);
            auto it = std::find(names.begin(), names.end(), param);
            const auto j = static_cast<std::size_t>(it - names.begin());
            const TaylorModel& a = j < state.size() ? state[j] : inputs[j - state.size()];
            next[i] = compose_elem(a, p == Proxy::sigmoid ? Func::sigmoid : Func::tanh);
        }
        state = std::move(next);
        return;
    }

    auto r = integrate_ode(mode.flow, all_names(h), state, inputs, duration, settings);
    state = std::move(r.end);
}

std::vector<TaylorModel> run_controller(const HybridAutomaton& c, const std::vector<TaylorModel>& inputs,
                                        const ReachSettings& settings)
{
    if (inputs.size() != c.inputs.size())
        throw std::invalid_argument("controller input count mismatch");
    const BasisPtr basis = inputs.empty() ? MonomialBasis::get(0, settings.tm_order) : inputs.front().basis();
    std::vector<TaylorModel> state;
    for (const auto& iv : c.initial_set)
        state.push_back(TaylorModel::constant(basis, iv));
    const std::vector<std::string> names = all_names(c);

    std::string mode = c.initial_mode;
    for (std::size_t hop = 0; hop <= c.modes.size(); ++hop) {
        if (c.outgoing(mode).empty())
            break;
        const Transition& t = single_outgoing(c, mode);
        const GuardTime g = pipeline_guard(c, t);
        const TaylorModel& clock = state[g.clock];
        if (!clock.is_constant() || clock.remainder() != Interval())
            throw ModelError("controller clock is not a point value");
        const double duration = g.at - clock.constant_term();
        if (duration < 0.0)
            throw ModelError("guard time lies in the past for mode '" + mode + "'");
        const Mode* m = c.find_mode(mode);
        if (duration > 0.0) {
            if (m->kind == ModeKind::idle)
                state[g.clock] += duration;
            else
                layer_reach(c, *m, state, inputs, duration, settings, settings.layer_path);
        }
        std::vector<TaylorModel> vars = state;
        vars.insert(vars.end(), inputs.begin(), inputs.end());
        std::vector<std::pair<std::size_t, TaylorModel>> updates;
        for (const auto& [var, e] : t.reset)
            updates.emplace_back(*c.variable_index(var), run_tm(CompiledExpr::compile(e, names), vars, basis));
        for (auto& [i, v] : updates)
            state[i] = std::move(v);
        mode = t.dst;
    }
    if (!c.outgoing(mode).empty())
        throw ModelError("controller pipeline does not terminate");

    std::vector<TaylorModel> vars = state;
    vars.insert(vars.end(), inputs.begin(), inputs.end());
    std::vector<TaylorModel> out;
    for (const auto& e : c.observation)
        out.push_back(run_tm(CompiledExpr::compile(e, names), vars, basis));
    return out;
}

std::vector<double> execute_controller_point(const HybridAutomaton& c, std::span<const double> inputs)
{
    if (inputs.size() != c.inputs.size())
        throw std::invalid_argument("controller input count mismatch");
    std::vector<double> state;
    for (const auto& iv : c.initial_set)
        state.push_back(iv.mid());
    const std::vector<std::string> names = all_names(c);
    auto vars_of = [&](const std::vector<double>& s) {
        std::vector<double> v = s;
        v.insert(v.end(), inputs.begin(), inputs.end());
        return v;
    };

    std::string mode = c.initial_mode;
    for (std::size_t hop = 0; hop <= c.modes.size() && !c.outgoing(mode).empty(); ++hop) {
        const Transition& t = single_outgoing(c, mode);
        const GuardTime g = pipeline_guard(c, t);
        const double duration = g.at - state[g.clock];
        const Mode* m = c.find_mode(mode);
        if (duration > 0.0 && m->kind == ModeKind::idle) {
            state[g.clock] += duration;
        } else if (duration > 0.0 && m->kind == ModeKind::ode) {
            const auto vars = vars_of(state);
            std::vector<double> next = state;
            bool closed_form = true;
            for (std::size_t i = 0; i < state.size() && closed_form; ++i) {
                const Expr& f = m->flow[i];
                if (is_zero_flow(f))
                    continue;
                if (f.is_constant(1.0)) {
                    next[i] += duration;
                    continue;
                }
                std::string param;
                const Proxy p = proxy_form(f, c.variables[i], param);
                auto it = std::find(names.begin(), names.end(), param);
                if (p == Proxy::none || it == names.end()) {
                    closed_form = false;
                    break;
                }
                const auto j = static_cast<std::size_t>(it - names.begin());
                if (j < state.size() && !is_zero_flow(m->flow[j])) {
                    closed_form = false;
                    break;
                }
                const double a = vars[j];
                const double g0 = state[i];
                if (p == Proxy::sigmoid)
                    next[i] = g0 == 0.5 ? sigmoid(a * duration) : sigmoid(a * duration + std::log(g0 / (1 - g0)));
                else
                    next[i] = g0 == 0.0 ? std::tanh(a * duration) : std::tanh(a * duration + std::atanh(g0));
            }
            if (!closed_form) {
                std::vector<CompiledExpr> fs;
                for (const auto& f : m->flow)
                    fs.push_back(CompiledExpr::compile(f, names));
                constexpr int kSub = 2000;
                const double hh = duration / kSub;
                next = state;
                auto deriv = [&](const std::vector<double>& s) {
                    auto v = vars_of(s);
                    std::vector<double> d(s.size());
                    for (std::size_t i = 0; i < s.size(); ++i)
                        d[i] = run_point(fs[i], v);
                    return d;
                };
                for (int k = 0; k < kSub; ++k) {
                    auto k1 = deriv(next);
                    std::vector<double> tmp(next.size());
                    for (std::size_t i = 0; i < next.size(); ++i)
                        tmp[i] = next[i] + 0.5 * hh * k1[i];
                    auto k2 = deriv(tmp);
                    for (std::size_t i = 0; i < next.size(); ++i)
                        tmp[i] = next[i] + 0.5 * hh * k2[i];
                    auto k3 = deriv(tmp);
                    for (std::size_t i = 0; i < next.size(); ++i)
                        tmp[i] = next[i] + hh * k3[i];
                    auto k4 = deriv(tmp);
                    for (std::size_t i = 0; i < next.size(); ++i)
                        next[i] += hh / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
                }
            }
            state = std::move(next);
        }
        const auto vars = vars_of(state);
        std::vector<std::pair<std::size_t, double>> updates;
        for (const auto& [var, e] : t.reset)
            updates.emplace_back(*c.variable_index(var), run_point(CompiledExpr::compile(e, names), vars));
        for (auto [i, v] : updates)
            state[i] = v;
        mode = t.dst;
    }
    const auto vars = vars_of(state);
    std::vector<double> out;
    for (const auto& e : c.observation)
        out.push_back(run_point(CompiledExpr::compile(e, names), vars));
    return out;
}

// ------------------------------------------------------------------ plant

std::vector<Clamp> saturation_clamps(const HybridAutomaton& plant, const Mode& mode)
{
    std::vector<Clamp> out;
    for (const auto& t : plant.transitions) {
        if (t.src != mode.name || t.dst != mode.name)
            continue;
        if (t.guard.size() != 1 || t.guard[0].lhs.kind() != Expr::Kind::var || t.guard[0].rel == Rel::eq ||
            t.reset.size() != 1)
            throw ModelError("self-transition on '" + mode.name + "' is not a saturation 'x >= c' / 'x := c'");
        const std::string& var = t.guard[0].lhs.name();
        auto it = t.reset.find(var);
        if (it == t.reset.end() || !it->second.is_constant(t.guard[0].rhs))
            throw ModelError("saturation on '" + var + "' must reset the variable to its guard bound");
        auto idx = plant.variable_index(var);
        if (!idx)
            throw ModelError("saturation of unknown variable '" + var + "'");
        out.push_back({*idx, t.guard[0].rhs, t.guard[0].rel == Rel::ge});
    }
    return out;
}

namespace {

void apply_clamps(const HybridAutomaton& plant, const std::vector<Clamp>& clamps, std::vector<TaylorModel>& x,
                  std::vector<SaturationEvent>* events)
{
    for (const auto& c : clamps) {
        TaylorModel& t = x[c.var];
        const Interval b = t.bound();
        const BasisPtr basis = t.basis();
        if (c.upper) {
            if (b.hi() <= c.value)
                continue;
            const bool straddle = b.lo() < c.value;
            t = straddle ? TaylorModel::constant(basis, Interval(b.lo(), c.value)) : TaylorModel(basis, c.value);
            if (events)
                events->push_back({plant.variables[c.var], c.value, straddle});
        } else {
            if (b.lo() >= c.value)
                continue;
            const bool straddle = b.hi() > c.value;
            t = straddle ? TaylorModel::constant(basis, Interval(c.value, b.hi())) : TaylorModel(basis, c.value);
            if (events)
                events->push_back({plant.variables[c.var], c.value, straddle});
        }
    }
}

void apply_clamps_point(const std::vector<Clamp>& clamps, std::vector<double>& x)
{
    for (const auto& c : clamps) {
        if (c.upper && x[c.var] > c.value)
            x[c.var] = c.value;
        if (!c.upper && x[c.var] < c.value)
            x[c.var] = c.value;
    }
}

} // namespace

std::vector<TaylorModel> discrete_map_step(const HybridAutomaton& plant, const Mode& mode,
                                           const std::vector<TaylorModel>& state,
                                           const std::vector<TaylorModel>& inputs,
                                           std::vector<SaturationEvent>* events)
{
    if (mode.kind != ModeKind::discrete_map)
        throw ModelError("mode '" + mode.name + "' is not a discrete map");
    const auto names = all_names(plant);
    std::vector<TaylorModel> vars = state;
    vars.insert(vars.end(), inputs.begin(), inputs.end());
    const BasisPtr basis = state.front().basis();
    std::vector<TaylorModel> next;
    for (const auto& f : mode.flow)
        next.push_back(run_tm(CompiledExpr::compile(f, names), vars, basis));
    apply_clamps(plant, saturation_clamps(plant, mode), next, events);
    return next;
}

const char* status_name(BranchStatus s)
{
    switch (s) {
    case BranchStatus::completed: return "completed";
    case BranchStatus::goal_reached: return "goal_reached";
    case BranchStatus::remainder_blowup: return "remainder_blowup";
    case BranchStatus::branch_limit: return "branch_limit";
    }
    return "?";
}

std::vector<const Branch*> ReachResult::leaves() const
{
    std::vector<const Branch*> out;
    for (const auto& b : branches)
        if (b.leaf)
            out.push_back(&b);
    return out;
}

std::size_t ReachResult::leaf_count() const
{
    return static_cast<std::size_t>(std::count_if(branches.begin(), branches.end(), [](const Branch& b) { return b.leaf; }));
}

// ------------------------------------------------------------------ closed loop

namespace {

const Mode& plant_mode(const ClosedLoop& loop)
{
    const Mode* m = loop.plant.find_mode(loop.plant.initial_mode);
    if (!m)
        throw ModelError("plant initial mode missing");
    return *m;
}

// Inputs of the plant in declaration order, taken from the control values.
template <class T>
std::vector<T> plant_inputs(const ClosedLoop& loop, const std::vector<T>& controls)
{
    std::vector<T> out;
    for (const auto& in : loop.plant.inputs) {
        auto it = std::find(loop.control_vars.begin(), loop.control_vars.end(), in);
        if (it == loop.control_vars.end())
            throw ModelError("plant input '" + in + "' is not driven by the controller");
        out.push_back(controls[static_cast<std::size_t>(it - loop.control_vars.begin())]);
    }
    return out;
}

double period_length(const ClosedLoop& loop)
{
    const Mode& m = plant_mode(loop);
    if (m.kind == ModeKind::ode) {
        if (!loop.scheduling.sample_time)
            throw ModelError("continuous plant needs a sample time");
        return *loop.scheduling.sample_time;
    }
    return loop.scheduling.sample_time.value_or(1.0) * loop.scheduling.discrete_period;
}

int goal_status(const Constraint& goal, const Interval& v)
{
    switch (goal.rel) {
    case Rel::ge: return v.lo() >= goal.rhs ? 2 : v.hi() >= goal.rhs ? 1 : 0;
    case Rel::le: return v.hi() <= goal.rhs ? 2 : v.lo() <= goal.rhs ? 1 : 0;
    case Rel::eq: return v.is_point() && v.lo() == goal.rhs ? 2 : v.contains(goal.rhs) ? 1 : 0;
    }
    return 0;
}

// Actions that may attain the maximum score somewhere on the set: upper
// bound at least the best lower bound, and no other score provably larger
// (checked on the difference, where shared dependencies cancel).
std::vector<std::size_t> feasible_actions(const std::vector<TaylorModel>& scores)
{
    std::vector<Interval> b;
    double max_lo = -std::numeric_limits<double>::infinity();
    for (const auto& s : scores) {
        b.push_back(s.bound());
        max_lo = std::max(max_lo, b.back().lo());
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (b[j].hi() < max_lo)
            continue;
        bool dominated = false;
        for (std::size_t i = 0; i < scores.size() && !dominated; ++i)
            dominated = i != j && (scores[i] - scores[j]).refined_bound().lo() > 0.0;
        if (!dominated)
            out.push_back(j);
    }
    return out;
}

struct Pending {
    std::size_t branch;
    unsigned step;
    std::vector<TaylorModel> state;
    std::optional<std::size_t> forced;
};

// Encloses two models on the same domain: the midpoint polynomial with the
// half difference and both remainders folded into the remainder.
TaylorModel enclose_pair(const TaylorModel& a, const TaylorModel& b)
{
    TaylorModel pa = a, pb = b;
    pa.set_remainder(Interval(0.0));
    pb.set_remainder(Interval(0.0));
    TaylorModel mid = pa;
    mid += pb;
    mid *= 0.5;
    TaylorModel half = pa;
    half -= pb;
    half *= 0.5;
    const Interval d = half.bound();
    const double m = std::max(std::abs(d.lo()), std::abs(d.hi()));
    const Interval mr = mid.remainder();
    mid.set_remainder(mr + hull(a.remainder(), b.remainder()) + Interval(-m, m));
    return mid;
}

// Greedy clustering of live branches: a branch joins a cluster when, in every
// variable, the hull of their bounds is at most `tol` wider than the widest
// member. Each cluster of two or more becomes one enclosing branch.
std::vector<Pending> merge_close(ReachResult& result, std::vector<Pending> live, std::size_t n_state, double tol)
{
    struct Cluster {
        std::vector<std::size_t> members;
        std::vector<Interval> hull;
        std::vector<double> widest;
    };
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < live.size(); ++i) {
        const auto& bounds = result.branches[live[i].branch].steps.back().bounds;
        bool placed = false;
        for (auto& c : clusters) {
            bool ok = true;
            for (std::size_t v = 0; v < n_state && ok; ++v)
                ok = hull(c.hull[v], bounds[v]).width() <= std::max(c.widest[v], bounds[v].width()) + tol;
            if (!ok)
                continue;
            c.members.push_back(i);
            for (std::size_t v = 0; v < n_state; ++v) {
                c.hull[v] = hull(c.hull[v], bounds[v]);
                c.widest[v] = std::max(c.widest[v], bounds[v].width());
            }
            placed = true;
            break;
        }
        if (!placed) {
            Cluster c;
            c.members = {i};
            for (std::size_t v = 0; v < n_state; ++v) {
                c.hull.push_back(bounds[v]);
                c.widest.push_back(bounds[v].width());
            }
            clusters.push_back(std::move(c));
        }
    }
    std::vector<Pending> out;
    for (const auto& c : clusters) {
        const Pending& head = live[c.members.front()];
        if (c.members.size() == 1) {
            out.push_back(std::move(live[c.members.front()]));
            continue;
        }
        Branch merged;
        merged.parent = static_cast<int>(head.branch);
        merged.start_step = head.step;
        merged.steps = result.branches[head.branch].steps;
        std::vector<TaylorModel> state = head.state;
        for (std::size_t m = 0; m < c.members.size(); ++m) {
            const Pending& p = live[c.members[m]];
            Branch& src = result.branches[p.branch];
            src.leaf = false;
            merged.merged_from.push_back(static_cast<int>(p.branch));
            if (m == 0)
                continue;
            for (std::size_t i = 0; i < state.size(); ++i)
                state[i] = enclose_pair(state[i], p.state[i]);
            for (std::size_t s = 0; s < merged.steps.size(); ++s) {
                StepRecord& r = merged.steps[s];
                const StepRecord& o = src.steps[s];
                for (std::size_t i = 0; i < r.bounds.size(); ++i)
                    r.bounds[i] = hull(r.bounds[i], o.bounds[i]);
                if (r.action != o.action)
                    r.action.reset();
                r.goal = std::max(r.goal, o.goal);
                r.saturations.insert(r.saturations.end(), o.saturations.begin(), o.saturations.end());
            }
        }
        // Tighten the last record to the merged state.
        auto& last = merged.steps.back().bounds;
        for (std::size_t i = 0; i < state.size(); ++i)
            if (auto t = intersect(last[i], state[i].bound()))
                last[i] = *t;
        result.branches.push_back(std::move(merged));
        out.push_back({result.branches.size() - 1, head.step, std::move(state), std::nullopt});
    }
    return out;
}

} // namespace

ReachResult run_closed_loop(const ClosedLoop& loop, const std::vector<Interval>& initial, const RunOptions& opts,
                            const ReachSettings& settings)
{
    check_settings(settings);
    const HybridAutomaton& plant = loop.plant;
    if (initial.size() != plant.variables.size())
        throw std::invalid_argument("initial box has " + std::to_string(initial.size()) + " intervals for " +
                                    std::to_string(plant.variables.size()) + " plant variables");
    const Mode& mode = plant_mode(loop);
    const double dt = period_length(loop);
    const auto names = all_names(plant);
    const std::size_t nc = loop.control_vars.size();

    ReachResult result;
    result.columns = plant.variables;
    result.columns.insert(result.columns.end(), loop.control_vars.begin(), loop.control_vars.end());
    result.initial = initial;

    unsigned n_dom = 0;
    for (const auto& iv : initial)
        if (!iv.is_point())
            ++n_dom;
    const BasisPtr basis = MonomialBasis::get(n_dom, settings.tm_order);
    std::vector<TaylorModel> x0;
    unsigned d = 0;
    for (const auto& iv : initial) {
        if (iv.is_point()) {
            x0.emplace_back(basis, iv.lo());
        } else {
            TaylorModel t = TaylorModel::variable(basis, d++) * iv.rad();
            t += iv.mid();
            x0.push_back(std::move(t));
        }
    }

    std::vector<CompiledExpr> wiring;
    for (const auto& w : loop.wiring)
        wiring.push_back(CompiledExpr::compile(w, plant.variables));
    std::optional<CompiledExpr> goal_expr;
    if (opts.goal)
        goal_expr = CompiledExpr::compile(opts.goal->lhs, plant.variables);

    Branch root;
    StepRecord first;
    first.time = Interval(0.0);
    for (const auto& t : x0)
        first.bounds.push_back(t.bound());
    for (std::size_t i = 0; i < nc; ++i)
        first.bounds.push_back(Interval());
    root.steps.push_back(first);
    result.branches.push_back(root);

    std::vector<Pending> live = {{0, 0, x0, std::nullopt}};
    for (unsigned k = 0; k < opts.steps && !live.empty(); ++k) {
        std::deque<Pending> work(live.begin(), live.end());
        std::vector<Pending> next;
        while (!work.empty()) {
            Pending job = std::move(work.front());
            work.pop_front();
            std::vector<TaylorModel> x = std::move(job.state);
            const std::size_t bi = job.branch;
            auto fail = [&](BranchStatus st, std::string why) {
                result.branches[bi].status = st;
                result.branches[bi].reason = std::move(why);
            };
            for (const auto& r : loop.schedule) {
                if (r.step != k)
                    continue;
                auto idx = plant.variable_index(r.var);
                if (!idx)
                    throw ModelError("scheduled reset of unknown variable '" + r.var + "'");
                x[*idx] = TaylorModel::constant(basis, r.value);
            }
            StepRecord rec;
            rec.step = k + 1;
            rec.time = Interval(k * dt, (k + 1) * dt);
            bool split = false;
            try {
                std::vector<TaylorModel> y;
                for (const auto& w : wiring)
                    y.push_back(run_tm(w, x, basis));
                std::vector<TaylorModel> controls;
                if (loop.actions) {
                    std::size_t a;
                    if (job.forced) {
                        a = *job.forced;
                    } else {
                        auto feas = feasible_actions(run_controller(loop.controller, y, settings));
                        if (feas.size() > 1) {
                            if (result.leaf_count() - 1 + feas.size() > settings.max_branches) {
                                fail(BranchStatus::branch_limit,
                                     "step " + std::to_string(k + 1) + " needs " + std::to_string(feas.size()) +
                                         " branches beyond the limit of " + std::to_string(settings.max_branches));
                                continue;
                            }
                            result.branches[bi].leaf = false;
                            for (std::size_t a2 : feas) {
                                Branch child;
                                child.parent = static_cast<int>(bi);
                                child.start_step = k;
                                child.action = a2;
                                child.steps = result.branches[bi].steps;
                                result.branches.push_back(std::move(child));
                                work.push_back({result.branches.size() - 1, k, x, a2});
                            }
                            split = true;
                        } else {
                            a = feas.front();
                        }
                    }
                    if (!split) {
                        rec.action = a;
                        for (double v : loop.actions->values[a])
                            controls.emplace_back(basis, v);
                    }
                } else {
                    controls = run_controller(loop.controller, y, settings);
                }
                if (split)
                    continue;
                const auto inputs = plant_inputs(loop, controls);
                std::vector<Interval> hulls;
                if (mode.kind == ModeKind::discrete_map) {
                    for (unsigned p = 0; p < loop.scheduling.discrete_period; ++p)
                        x = discrete_map_step(plant, mode, x, inputs, &rec.saturations);
                    for (const auto& t : x)
                        hulls.push_back(t.bound());
                } else {
                    auto r = integrate_ode(mode.flow, names, x, inputs, dt, settings);
                    x = std::move(r.end);
                    apply_clamps(plant, saturation_clamps(plant, mode), x, &rec.saturations);
                    hulls = std::move(r.hull);
                    for (std::size_t i = 0; i < x.size(); ++i)
                        hulls[i] = hull(hulls[i], x[i].bound());
                }
                rec.bounds = hulls;
                for (const auto& c : controls)
                    rec.bounds.push_back(c.bound());
            } catch (const RemainderBlowup& e) {
                fail(BranchStatus::remainder_blowup, "step " + std::to_string(k + 1) + ": " + e.what());
                continue;
            } catch (const std::domain_error& e) {
                fail(BranchStatus::remainder_blowup, "step " + std::to_string(k + 1) + ": " + e.what());
                continue;
            }

            bool blown = false;
            for (const auto& b : rec.bounds)
                blown = blown || b.width() > settings.max_remainder_width;
            if (goal_expr)
                rec.goal = goal_status(*opts.goal, run_tm(*goal_expr, x, basis).bound());
            result.branches[bi].steps.push_back(std::move(rec));
            if (blown) {
                fail(BranchStatus::remainder_blowup,
                     "step " + std::to_string(k + 1) + ": enclosure wider than " +
                         format_number(settings.max_remainder_width));
                continue;
            }
            if (goal_expr && result.branches[bi].steps.back().goal == 2) {
                result.branches[bi].status = BranchStatus::goal_reached;
                continue;
            }
            next.push_back({bi, k + 1, std::move(x), std::nullopt});
        }
        if (settings.merge_branches && next.size() > 1)
            next = merge_close(result, std::move(next), plant.variables.size(), settings.merge_tolerance);
        live = std::move(next);
    }
    return result;
}

Trace simulate_closed_loop(const ClosedLoop& loop, std::span<const double> initial, const RunOptions& opts)
{
    const HybridAutomaton& plant = loop.plant;
    if (initial.size() != plant.variables.size())
        throw std::invalid_argument("initial point dimension mismatch");
    const Mode& mode = plant_mode(loop);
    const double dt = period_length(loop);
    const auto names = all_names(plant);
    const auto clamps = saturation_clamps(plant, mode);
    std::vector<CompiledExpr> flows;
    for (const auto& f : mode.flow)
        flows.push_back(CompiledExpr::compile(f, names));
    std::vector<CompiledExpr> wiring;
    for (const auto& w : loop.wiring)
        wiring.push_back(CompiledExpr::compile(w, plant.variables));
    std::optional<CompiledExpr> goal_expr;
    if (opts.goal)
        goal_expr = CompiledExpr::compile(opts.goal->lhs, plant.variables);

    Trace tr;
    tr.columns = plant.variables;
    tr.columns.insert(tr.columns.end(), loop.control_vars.begin(), loop.control_vars.end());
    std::vector<double> x(initial.begin(), initial.end());
    TraceRow row0;
    row0.values = x;
    row0.values.resize(tr.columns.size(), 0.0);
    tr.rows.push_back(row0);

    for (unsigned k = 0; k < opts.steps; ++k) {
        for (const auto& r : loop.schedule)
            if (r.step == k)
                x[*plant.variable_index(r.var)] = r.value.mid();
        std::vector<double> y;
        for (const auto& w : wiring)
            y.push_back(run_point(w, x));
        auto outs = execute_controller_point(loop.controller, y);
        std::vector<double> controls;
        TraceRow row;
        row.step = k + 1;
        row.time = (k + 1) * dt;
        if (loop.actions) {
            const auto a = static_cast<std::size_t>(std::max_element(outs.begin(), outs.end()) - outs.begin());
            row.action = a;
            controls = loop.actions->values[a];
        } else {
            controls = outs;
        }
        const auto inputs = plant_inputs(loop, controls);
        auto vars_of = [&](const std::vector<double>& s) {
            std::vector<double> v = s;
            v.insert(v.end(), inputs.begin(), inputs.end());
            return v;
        };
        if (mode.kind == ModeKind::discrete_map) {
            for (unsigned p = 0; p < loop.scheduling.discrete_period; ++p) {
                const auto v = vars_of(x);
                std::vector<double> next(x.size());
                for (std::size_t i = 0; i < x.size(); ++i)
                    next[i] = run_point(flows[i], v);
                apply_clamps_point(clamps, next);
                x = std::move(next);
            }
        } else {
            constexpr int kSub = 64;
            const double hh = dt / kSub;
            auto deriv = [&](const std::vector<double>& s) {
                const auto v = vars_of(s);
                std::vector<double> out(s.size());
                for (std::size_t i = 0; i < s.size(); ++i)
                    out[i] = run_point(flows[i], v);
                return out;
            };
            for (int s = 0; s < kSub; ++s) {
                auto k1 = deriv(x);
                std::vector<double> tmp(x.size());
                for (std::size_t i = 0; i < x.size(); ++i)
                    tmp[i] = x[i] + 0.5 * hh * k1[i];
                auto k2 = deriv(tmp);
                for (std::size_t i = 0; i < x.size(); ++i)
                    tmp[i] = x[i] + 0.5 * hh * k2[i];
                auto k3 = deriv(tmp);
                for (std::size_t i = 0; i < x.size(); ++i)
                    tmp[i] = x[i] + hh * k3[i];
                auto k4 = deriv(tmp);
                for (std::size_t i = 0; i < x.size(); ++i)
                    x[i] += hh / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            }
            apply_clamps_point(clamps, x);
        }
        row.values = x;
        row.values.insert(row.values.end(), controls.begin(), controls.end());
        tr.rows.push_back(std::move(row));
        if (goal_expr) {
            const double g = run_point(*goal_expr, x);
            const Constraint& c = *opts.goal;
            const bool hit = c.rel == Rel::ge ? g >= c.rhs : c.rel == Rel::le ? g <= c.rhs : g == c.rhs;
            if (hit) {
                tr.goal_reached = true;
                break;
            }
        }
    }
    return tr;
}

std::vector<std::vector<Interval>> subdivide_initial_set(const std::vector<Interval>& box, SubdivideStrategy s,
                                                         double param, const std::vector<std::size_t>& axes)
{
    std::vector<std::size_t> ax = axes;
    if (ax.empty())
        for (std::size_t i = 0; i < box.size(); ++i)
            if (!box[i].is_point())
                ax.push_back(i);
    std::vector<std::size_t> pieces(box.size(), 1);
    for (std::size_t i : ax) {
        if (i >= box.size())
            throw std::out_of_range("subdivision axis out of range");
        if (s == SubdivideStrategy::uniform) {
            if (param < 1.0)
                throw std::invalid_argument("uniform subdivision needs k >= 1");
            pieces[i] = static_cast<std::size_t>(param);
        } else {
            if (!(param > 0.0))
                throw std::invalid_argument("adaptive subdivision needs a positive width");
            const double ratio = box[i].width() / param;
            auto k = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
            pieces[i] = std::max<std::size_t>(1, k);
        }
    }
    std::vector<std::vector<Interval>> out{{}};
    for (std::size_t i = 0; i < box.size(); ++i) {
        std::vector<std::vector<Interval>> next;
        for (const auto& prefix : out) {
            for (std::size_t j = 0; j < pieces[i]; ++j) {
                const double lo = j == 0 ? box[i].lo() : box[i].lo() + box[i].width() * j / pieces[i];
                const double hi =
                    j + 1 == pieces[i] ? box[i].hi() : box[i].lo() + box[i].width() * (j + 1) / pieces[i];
                auto p = prefix;
                p.push_back(Interval(lo, hi));
                next.push_back(std::move(p));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::string flowpipe_csv(const ReachResult& r)
{
    std::ostringstream os;
    os.precision(17);
    os << "step,time_lo,time_hi,var,lo,hi\n";
    std::size_t max_steps = 0;
    for (const auto* b : r.leaves())
        max_steps = std::max(max_steps, b->steps.size());
    for (std::size_t s = 0; s < max_steps; ++s) {
        std::optional<StepRecord> acc;
        for (const auto* b : r.leaves()) {
            if (s >= b->steps.size())
                continue;
            const StepRecord& rec = b->steps[s];
            if (!acc) {
                acc = rec;
                continue;
            }
            acc->time = hull(acc->time, rec.time);
            for (std::size_t i = 0; i < acc->bounds.size(); ++i)
                acc->bounds[i] = hull(acc->bounds[i], rec.bounds[i]);
        }
        for (std::size_t i = 0; i < acc->bounds.size(); ++i)
            os << acc->step << ',' << acc->time.lo() << ',' << acc->time.hi() << ',' << r.columns[i] << ','
               << acc->bounds[i].lo() << ',' << acc->bounds[i].hi() << '\n';
    }
    return os.str();
}

} // namespace nnreach

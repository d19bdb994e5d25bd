#include "nnreach/automaton.hpp"

#include <algorithm>
#include <set>

namespace nnreach {

const Mode* HybridAutomaton::find_mode(std::string_view n) const
{
    for (const auto& m : modes)
        if (m.name == n)
            return &m;
    return nullptr;
}

std::optional<std::size_t> HybridAutomaton::variable_index(std::string_view n) const
{
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variables[i] == n)
            return i;
    return std::nullopt;
}

std::vector<const Transition*> HybridAutomaton::outgoing(std::string_view mode) const
{
    std::vector<const Transition*> out;
    for (const auto& t : transitions)
        if (t.src == mode)
            out.push_back(&t);
    return out;
}

const char* diagnostic_name(DiagnosticKind k)
{
    switch (k) {
    case DiagnosticKind::UnknownMode: return "UnknownMode";
    case DiagnosticKind::DuplicateMode: return "DuplicateMode";
    case DiagnosticKind::DuplicateVariable: return "DuplicateVariable";
    case DiagnosticKind::MissingInitialMode: return "MissingInitialMode";
    case DiagnosticKind::FlowArity: return "FlowArity";
    case DiagnosticKind::InitialSetArity: return "InitialSetArity";
    case DiagnosticKind::UndeclaredVariable: return "UndeclaredVariable";
    case DiagnosticKind::NonConstantTan: return "NonConstantTan";
    case DiagnosticKind::DivisionMayVanish: return "DivisionMayVanish";
    }
    return "?";
}

namespace {

class Validator {
public:
    explicit Validator(const HybridAutomaton& h) : h_(h)
    {
        for (const auto& v : h.variables)
            declared_.insert(v);
        for (const auto& v : h.inputs)
            declared_.insert(v);
    }

    std::vector<Diagnostic> run()
    {
        std::set<std::string> seen;
        for (const auto& v : h_.variables)
            if (!seen.insert(v).second)
                add(DiagnosticKind::DuplicateVariable, "variable '" + v + "' declared twice");
        for (const auto& v : h_.inputs)
            if (!seen.insert(v).second)
                add(DiagnosticKind::DuplicateVariable, "input '" + v + "' clashes with another name");

        std::set<std::string> modes;
        for (const auto& m : h_.modes)
            if (!modes.insert(m.name).second)
                add(DiagnosticKind::DuplicateMode, "mode '" + m.name + "' defined twice");
        if (!h_.find_mode(h_.initial_mode))
            add(DiagnosticKind::MissingInitialMode, "initial mode '" + h_.initial_mode + "' does not exist");
        if (h_.initial_set.size() != h_.variables.size())
            add(DiagnosticKind::InitialSetArity, "initial set has " + std::to_string(h_.initial_set.size()) +
                                                     " intervals for " + std::to_string(h_.variables.size()) +
                                                     " variables");

        for (const auto& m : h_.modes)
            check_mode(m);
        for (const auto& t : h_.transitions)
            check_transition(t);
        for (const auto& e : h_.observation)
            check_names(e, "observation");
        return std::move(out_);
    }

private:
    void add(DiagnosticKind k, std::string msg) { out_.push_back({k, std::move(msg)}); }

    void check_names(const Expr& e, const std::string& where)
    {
        for (const auto& v : free_variables(e))
            if (!declared_.count(v))
                add(DiagnosticKind::UndeclaredVariable, where + ": undeclared variable '" + v + "'");
    }

    void check_mode(const Mode& m)
    {
        if (m.kind != ModeKind::idle && m.flow.size() != h_.variables.size())
            add(DiagnosticKind::FlowArity, "mode '" + m.name + "' defines " + std::to_string(m.flow.size()) +
                                               " flows for " + std::to_string(h_.variables.size()) + " variables");
        for (std::size_t i = 0; i < m.flow.size(); ++i) {
            const Expr& f = m.flow[i];
            const std::string where = "mode '" + m.name + "' flow " + std::to_string(i);
            check_names(f, where);
            if (!tan_arguments_constant(f, h_.variables))
                add(DiagnosticKind::NonConstantTan, where + ": tan argument depends on a state variable");
            if (m.kind == ModeKind::ode)
                check_denominators(f, where);
        }
        for (const auto& c : m.invariant)
            check_names(c.lhs, "mode '" + m.name + "' invariant");
    }

    void check_denominators(const Expr& f, const std::string& where)
    {
        if (h_.initial_set.size() != h_.variables.size())
            return;
        for (const auto& d : denominators(f)) {
            std::map<std::string, Interval, std::less<>> env;
            bool bound = true;
            for (const auto& v : free_variables(d)) {
                auto idx = h_.variable_index(v);
                if (!idx) {
                    bound = false;
                    break;
                }
                env[v] = h_.initial_set[*idx];
            }
            if (!bound)
                continue;
            bool vanishes = false;
            try {
                vanishes = evaluate<Interval>(d, env).contains_zero();
            } catch (const std::exception&) {
                vanishes = true;
            }
            if (vanishes)
                add(DiagnosticKind::DivisionMayVanish, where + ": denominator " + to_string(d) + " can be zero");
        }
    }

    void check_transition(const Transition& t)
    {
        for (const auto* end : {&t.src, &t.dst})
            if (!h_.find_mode(*end))
                add(DiagnosticKind::UnknownMode, "transition references unknown mode '" + *end + "'");
        for (const auto& c : t.guard)
            check_names(c.lhs, "guard " + t.src + "->" + t.dst);
        for (const auto& [var, e] : t.reset) {
            if (!h_.variable_index(var))
                add(DiagnosticKind::UndeclaredVariable, "reset of undeclared variable '" + var + "'");
            check_names(e, "reset " + t.src + "->" + t.dst);
        }
    }

    const HybridAutomaton& h_;
    std::set<std::string, std::less<>> declared_;
    std::vector<Diagnostic> out_;
};

void require_valid(const HybridAutomaton& h, const char* role)
{
    auto diags = validate_automaton(h);
    if (diags.empty())
        return;
    std::string msg = std::string(role) + " automaton is invalid:";
    for (const auto& d : diags)
        msg += std::string(" ") + diagnostic_name(d.kind) + " (" + d.message + ");";
    throw ModelError(msg);
}

const char* kind_name(ModeKind k)
{
    switch (k) {
    case ModeKind::ode: return "ode";
    case ModeKind::discrete_map: return "discrete_map";
    case ModeKind::idle: return "idle";
    }
    return "?";
}

ModeKind parse_kind(const std::string& s)
{
    if (s == "ode")
        return ModeKind::ode;
    if (s == "discrete_map")
        return ModeKind::discrete_map;
    if (s == "idle")
        return ModeKind::idle;
    throw ModelError("unknown mode kind '" + s + "'");
}

std::string join(const std::vector<std::string>& v, const char* sep)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += sep;
        out += v[i];
    }
    return out;
}

std::string constraints_text(const std::vector<Constraint>& cs)
{
    std::vector<std::string> parts;
    for (const auto& c : cs)
        parts.push_back(to_string(c));
    return join(parts, "; ");
}

std::vector<Constraint> parse_constraints(const std::string& s)
{
    std::vector<Constraint> out;
    for (const auto& part : split_list(s, ';'))
        out.push_back(parse_constraint(part));
    return out;
}

} // namespace

std::vector<Diagnostic> validate_automaton(const HybridAutomaton& h) { return Validator(h).run(); }

ClosedLoop compose_closed_loop(HybridAutomaton controller, HybridAutomaton plant, std::vector<Expr> wiring,
                               std::vector<std::string> control_vars, Scheduling scheduling,
                               std::optional<ActionTable> actions)
{
    require_valid(controller, "controller");
    require_valid(plant, "plant");
    if (wiring.size() != controller.inputs.size())
        throw WiringArityMismatch("controller expects " + std::to_string(controller.inputs.size()) +
                                  " inputs but wiring provides " + std::to_string(wiring.size()));
    const std::size_t outputs = controller.observation.size();
    if (actions) {
        if (actions->values.size() != outputs)
            throw WiringArityMismatch("action table has " + std::to_string(actions->values.size()) +
                                      " actions for " + std::to_string(outputs) + " controller outputs");
        for (const auto& row : actions->values)
            if (row.size() != control_vars.size())
                throw WiringArityMismatch("action row width differs from the number of control variables");
    } else if (outputs != control_vars.size()) {
        throw WiringArityMismatch("controller has " + std::to_string(outputs) + " outputs for " +
                                  std::to_string(control_vars.size()) + " control variables");
    }

    std::set<std::string> ctrl_names(controller.variables.begin(), controller.variables.end());
    ctrl_names.insert(controller.inputs.begin(), controller.inputs.end());
    for (const auto& names : {plant.variables, plant.inputs})
        for (const auto& n : names)
            if (ctrl_names.count(n))
                throw NamespaceCollision("name '" + n + "' used by both controller and plant");

    for (const auto& w : wiring)
        for (const auto& v : free_variables(w))
            if (!plant.variable_index(v))
                throw ModelError("wiring reads '" + v + "', which is not a plant variable");
    for (const auto& c : control_vars)
        if (std::find(plant.inputs.begin(), plant.inputs.end(), c) == plant.inputs.end())
            throw ModelError("control variable '" + c + "' is not a plant input");
    if (scheduling.discrete_period == 0)
        throw ModelError("discrete period must be positive");
    if (scheduling.sample_time && !(*scheduling.sample_time > 0.0))
        throw ModelError("sample time must be positive");

    ClosedLoop loop;
    loop.controller = std::move(controller);
    loop.plant = std::move(plant);
    loop.wiring = std::move(wiring);
    loop.control_vars = std::move(control_vars);
    loop.scheduling = scheduling;
    loop.actions = std::move(actions);
    return loop;
}

std::size_t closed_loop_dimension(const ClosedLoop& loop)
{
    return loop.plant.variables.size() + loop.controller.variables.size();
}

std::string to_string(const Constraint& c)
{
    const char* op = c.rel == Rel::le ? " <= " : c.rel == Rel::ge ? " >= " : " = ";
    return to_string(c.lhs) + op + format_number(c.rhs);
}

Constraint parse_constraint(std::string_view text)
{
    std::size_t pos = text.find("<=");
    Rel rel = Rel::le;
    std::size_t len = 2;
    if (pos == std::string_view::npos) {
        pos = text.find(">=");
        rel = Rel::ge;
    }
    if (pos == std::string_view::npos) {
        pos = text.find('=');
        rel = Rel::eq;
        len = 1;
    }
    if (pos == std::string_view::npos)
        throw ModelError("constraint '" + std::string(text) + "' lacks <=, >= or =");
    Constraint c;
    c.lhs = parse_expr(text.substr(0, pos));
    c.rel = rel;
    try {
        c.rhs = parse_double(text.substr(pos + len));
    } catch (const std::invalid_argument&) {
        throw ModelError("constraint '" + std::string(text) + "' needs a constant right-hand side");
    }
    return c;
}

std::string format_interval(const Interval& i)
{
    return "[" + format_number(i.lo()) + ", " + format_number(i.hi()) + "]";
}

Interval parse_interval(std::string_view text)
{
    const std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
        const double v = parse_double(t);
        return Interval(v);
    }
    auto parts = split_list(std::string_view(t).substr(1, t.size() - 2), ',');
    if (parts.size() != 2)
        throw ModelError("interval '" + t + "' needs two endpoints");
    return Interval(parse_double(parts[0]), parse_double(parts[1]));
}

std::string dump_automaton(const HybridAutomaton& h)
{
    KeyValueFile f;
    f.set("automaton.name", h.name);
    f.set("automaton.variables", join(h.variables, ", "));
    f.set("automaton.inputs", join(h.inputs, ", "));
    f.set("automaton.initial_mode", h.initial_mode);
    std::vector<std::string> init;
    for (const auto& i : h.initial_set)
        init.push_back(format_interval(i));
    f.set("automaton.initial_set", join(init, "; "));
    std::vector<std::string> obs;
    for (const auto& e : h.observation)
        obs.push_back(to_string(e));
    f.set("automaton.observation", join(obs, "; "));
    for (const auto& m : h.modes) {
        const std::string p = "mode." + m.name + ".";
        f.set(p + "kind", kind_name(m.kind));
        for (std::size_t i = 0; i < m.flow.size() && i < h.variables.size(); ++i)
            f.set(p + "flow." + h.variables[i], to_string(m.flow[i]));
        f.set(p + "invariant", constraints_text(m.invariant));
    }
    for (std::size_t k = 0; k < h.transitions.size(); ++k) {
        const auto& t = h.transitions[k];
        const std::string p = "transition." + std::to_string(k) + ".";
        f.set(p + "src", t.src);
        f.set(p + "dst", t.dst);
        f.set(p + "guard", constraints_text(t.guard));
        for (const auto& [var, e] : t.reset)
            f.set(p + "reset." + var, to_string(e));
    }
    return f.dump();
}

HybridAutomaton load_automaton(std::string_view text) { return load_automaton(KeyValueFile::parse(text)); }

HybridAutomaton load_automaton(const KeyValueFile& f)
{
    HybridAutomaton h;
    h.name = f.get("automaton.name").value_or("");
    h.variables = split_list(f.require("automaton.variables"));
    h.inputs = split_list(f.get("automaton.inputs").value_or(""));
    h.initial_mode = f.require("automaton.initial_mode");
    for (const auto& s : split_list(f.get("automaton.initial_set").value_or(""), ';'))
        h.initial_set.push_back(parse_interval(s));
    for (const auto& s : split_list(f.get("automaton.observation").value_or(""), ';'))
        h.observation.push_back(parse_expr(s));

    std::vector<std::string> mode_order;
    std::map<std::string, std::size_t> transition_slot;
    std::vector<Transition> transitions;
    for (const auto& e : f.entries()) {
        if (e.key.rfind("mode.", 0) == 0) {
            const auto rest = e.key.substr(5);
            const auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw ConfigError(e.line, "malformed mode key '" + e.key + "'");
            const std::string name = rest.substr(0, dot);
            if (std::find(mode_order.begin(), mode_order.end(), name) == mode_order.end())
                mode_order.push_back(name);
        } else if (e.key.rfind("transition.", 0) == 0) {
            const auto rest = e.key.substr(11);
            const auto dot = rest.find('.');
            if (dot == std::string::npos)
                throw ConfigError(e.line, "malformed transition key '" + e.key + "'");
            const std::string id = rest.substr(0, dot);
            if (!transition_slot.count(id)) {
                transition_slot[id] = transitions.size();
                transitions.emplace_back();
            }
            Transition& t = transitions[transition_slot[id]];
            const std::string field = rest.substr(dot + 1);
            try {
                if (field == "src")
                    t.src = e.value;
                else if (field == "dst")
                    t.dst = e.value;
                else if (field == "guard")
                    t.guard = parse_constraints(e.value);
                else if (field.rfind("reset.", 0) == 0)
                    t.reset[field.substr(6)] = parse_expr(e.value);
                else
                    throw ConfigError(e.line, "unknown transition field '" + field + "'");
            } catch (const ParseError& err) {
                throw ConfigError(e.line, err.what());
            }
        }
    }

    for (const auto& name : mode_order) {
        Mode m;
        m.name = name;
        const std::string p = "mode." + name + ".";
        m.kind = parse_kind(f.get(p + "kind").value_or("idle"));
        if (m.kind != ModeKind::idle) {
            for (const auto& v : h.variables) {
                auto text = f.get(p + "flow." + v);
                if (text)
                    m.flow.push_back(parse_expr(*text));
                else
                    m.flow.push_back(m.kind == ModeKind::ode ? Expr::constant(0.0) : Expr::var(v));
            }
        }
        m.invariant = parse_constraints(f.get(p + "invariant").value_or(""));
        for (const auto& e : f.with_prefix(p + "flow.")) {
            const std::string var = e.key.substr(p.size() + 5);
            if (!h.variable_index(var))
                throw ConfigError(e.line, "flow for undeclared variable '" + var + "'");
        }
        h.modes.push_back(std::move(m));
    }
    h.transitions = std::move(transitions);
    return h;
}

} // namespace nnreach

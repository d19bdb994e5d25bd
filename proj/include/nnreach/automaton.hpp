#pragma once

#include "nnreach/config.hpp"
#include "nnreach/expr.hpp"
#include "nnreach/interval.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnreach {

enum class Rel { le, ge, eq };

/// `lhs rel rhs` with a constant right-hand side.
struct Constraint {
    Expr lhs;
    Rel rel = Rel::le;
    double rhs = 0.0;

    friend bool operator==(const Constraint&, const Constraint&) = default;
};

enum class ModeKind { ode, discrete_map, idle };

struct Mode {
    std::string name;
    ModeKind kind = ModeKind::idle;
    /// One entry per automaton variable: derivative (ode) or next value
    /// (discrete_map). Empty for idle modes.
    std::vector<Expr> flow;
    std::vector<Constraint> invariant;

    friend bool operator==(const Mode&, const Mode&) = default;
};

struct Transition {
    std::string src;
    std::string dst;
    std::vector<Constraint> guard;
    /// Variables not listed keep their value.
    std::map<std::string, Expr, std::less<>> reset;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct HybridAutomaton {
    std::string name;
    std::vector<std::string> variables;
    /// Names read by the flows but owned elsewhere (measurements, controls).
    std::vector<std::string> inputs;
    std::vector<Mode> modes;
    std::vector<Transition> transitions;
    std::string initial_mode;
    /// One interval per variable.
    std::vector<Interval> initial_set;
    std::vector<Expr> observation;

    const Mode* find_mode(std::string_view name) const;
    std::optional<std::size_t> variable_index(std::string_view name) const;
    std::vector<const Transition*> outgoing(std::string_view mode) const;

    friend bool operator==(const HybridAutomaton&, const HybridAutomaton&) = default;
};

enum class DiagnosticKind {
    UnknownMode,
    DuplicateMode,
    DuplicateVariable,
    MissingInitialMode,
    FlowArity,
    InitialSetArity,
    UndeclaredVariable,
    NonConstantTan,
    DivisionMayVanish,
};

struct Diagnostic {
    DiagnosticKind kind;
    std::string message;
};

const char* diagnostic_name(DiagnosticKind k);

/// Empty iff the automaton is well formed.
std::vector<Diagnostic> validate_automaton(const HybridAutomaton& h);

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class WiringArityMismatch : public ModelError {
public:
    using ModelError::ModelError;
};

class NamespaceCollision : public ModelError {
public:
    using ModelError::ModelError;
};

struct Scheduling {
    /// Plant steps per controller evaluation (discrete-time plants).
    unsigned discrete_period = 1;
    /// Zero-order-hold period for continuous-time plants.
    std::optional<double> sample_time;
};

/// Discrete-action controllers: output j scores action j, whose control
/// values are `values[j]` (one per control variable).
struct ActionTable {
    std::vector<std::vector<double>> values;
};

/// Assignment `var := value` applied before the given control step.
struct ScheduledReset {
    unsigned step = 0;
    std::string var;
    Interval value;
};

struct ClosedLoop {
    HybridAutomaton controller;
    HybridAutomaton plant;
    /// Controller input i is wiring[i] evaluated on the plant state.
    std::vector<Expr> wiring;
    /// Plant inputs driven by the controller.
    std::vector<std::string> control_vars;
    Scheduling scheduling;
    std::optional<ActionTable> actions;
    std::vector<ScheduledReset> schedule;
};

ClosedLoop compose_closed_loop(HybridAutomaton controller, HybridAutomaton plant, std::vector<Expr> wiring,
                               std::vector<std::string> control_vars, Scheduling scheduling = {},
                               std::optional<ActionTable> actions = std::nullopt);

/// Total continuous state count of the composed system.
std::size_t closed_loop_dimension(const ClosedLoop& loop);

std::string to_string(const Constraint& c);
Constraint parse_constraint(std::string_view text);
std::string format_interval(const Interval& i);
Interval parse_interval(std::string_view text);

/// Model config text (`section.key = value`), lossless for automata.
std::string dump_automaton(const HybridAutomaton& h);
HybridAutomaton load_automaton(const KeyValueFile& f);
HybridAutomaton load_automaton(std::string_view text);

} // namespace nnreach

#pragma once

#include "nnreach/interval.hpp"
#include "nnreach/neural.hpp"

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnreach {

// ------------------------------------------------------------ PWL sandwich

struct Line {
    double slope = 0.0;
    double intercept = 0.0;
    double at(double x) const { return slope * x + intercept; }
};

/// Piecewise-linear lower and upper bounds of an activation over a domain.
struct PwlSandwich {
    Activation activation = Activation::sigmoid;
    Interval domain;
    /// n_pieces + 1 sorted points; piece k is [breakpoints[k], breakpoints[k+1]].
    std::vector<double> breakpoints;
    std::vector<Line> lower;
    std::vector<Line> upper;
    double max_gap = 0.0;

    std::size_t pieces() const { return lower.size(); }
    std::size_t piece_of(double x) const;
    double lower_at(double x) const { return lower[piece_of(x)].at(x); }
    double upper_at(double x) const { return upper[piece_of(x)].at(x); }
};

/// Uniform pieces; tangent and chord lines on pieces where the activation is
/// convex (below 0) or concave (above 0), shifted chords on mixed pieces.
PwlSandwich pwl_sandwich(Activation act, const Interval& domain, unsigned n_pieces);

// -------------------------------------------------------------------- MILP

struct MilpSettings {
    unsigned pieces = 100;
};

/// Outward interval bounds of every layer's pre-activations over the box.
std::vector<std::vector<Interval>> preactivation_bounds(const NeuralNetwork& nn, const std::vector<Interval>& box);

/// CPLEX-LP text optimizing output `output` (maximize or minimize) of the
/// big-M encoding of the network over the input box.
std::string export_milp(const NeuralNetwork& nn, const std::vector<Interval>& box, const MilpSettings& s,
                        std::size_t output, bool maximize);

enum class RowSense { le, ge, eq };

struct LpRow {
    std::string name;
    std::map<std::string, double> coeffs;
    RowSense sense = RowSense::le;
    double rhs = 0.0;
};

struct LpProblem {
    bool maximize = true;
    std::map<std::string, double> objective;
    std::vector<LpRow> rows;
    /// Missing entries default to [0, +inf).
    std::map<std::string, std::pair<double, double>> bounds;
    std::vector<std::string> binaries;
    /// Every variable in order of first appearance.
    std::vector<std::string> variables;
};

class LpParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

LpProblem parse_lp(std::string_view text);

struct LpSolution {
    bool feasible = false;
    bool bounded = true;
    double objective = 0.0;
    std::map<std::string, double> values;
};

/// Continuous relaxation with some variables fixed. Dense two-phase simplex
/// with Bland's rule, meant for the small problems of the self-checks.
LpSolution solve_lp(const LpProblem& p, const std::map<std::string, double>& fixed = {});

/// Optimum over all binary assignments: one-hot groups (rows `sum = 1` over
/// binaries) are enumerated jointly, other binaries as 0/1.
LpSolution brute_force_milp(const LpProblem& p);

// ----------------------------------------------------------------- formulas

enum class FormulaForm { phi0, exp_free };

class ExpFreeNeedsSingleHiddenLayer : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonRationalWeightGuard : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Integer rewrite of the first layer: w = r / d0 exactly for the decimal
/// reading of every weight.
struct FormulaRewrite {
    std::string d0;                           // decimal digits
    std::vector<std::vector<std::string>> r;  // per neuron, per input
    /// y_j ranges [exp(-beta_j/d0), exp(-alpha_j/d0)] for x_j in [alpha_j, beta_j].
    std::vector<Interval> y_domain;
    /// Inputs whose substituted variable appears with a negative exponent,
    /// paired with a reciprocal variable z_j (y_j * z_j = 1).
    std::vector<std::size_t> reciprocal;
};

FormulaRewrite formula_rewrite(const NeuralNetwork& nn, const std::vector<Interval>& box);

/// SMT-LIB 2 text. The predicate reads outputs u1..um. Every assertion is
/// named; the predicate is named `property`.
std::string export_formula(const NeuralNetwork& nn, const std::vector<Interval>& box, const std::string& predicate,
                           FormulaForm form);

/// Values of every declared constant of the formula at input point x.
std::map<std::string, double> formula_witness(const NeuralNetwork& nn, std::span<const double> x, FormulaForm form);

struct ConjunctResult {
    std::string name;
    bool holds = false;
    /// Largest violation amount over the atoms (0 when satisfied).
    double violation = 0.0;
};

/// Evaluates every assertion of SMT-LIB text under an assignment, with
/// comparisons relaxed by `tol`.
std::vector<ConjunctResult> evaluate_smt(std::string_view text, const std::map<std::string, double>& env,
                                         double tol = 1e-9);

} // namespace nnreach

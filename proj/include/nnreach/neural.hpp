#pragma once

#include "nnreach/automaton.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nnreach {

enum class Activation { sigmoid, tanh, linear };

const char* activation_name(Activation a);

class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DimensionMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArityMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnsupportedActivation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Affine map followed by an elementwise activation. Weights row-major.
struct Layer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::linear;

    double w(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
};

struct NeuralNetwork {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<Layer> layers;

    std::size_t hidden_width() const;
};

/// Throws DimensionMismatch when the layer chain is inconsistent.
void check_network(const NeuralNetwork& nn);

NeuralNetwork load_network(std::string_view text);
NeuralNetwork load_network_file(const std::string& path);
std::string dump_network(const NeuralNetwork& nn);

std::vector<double> eval_network(const NeuralNetwork& nn, std::span<const double> y);

/// Names used by the controller automaton.
std::string pos_var(std::size_t i);   // xP<i+1>
std::string aux_var(std::size_t i);   // xJ<i+1>
std::string out_var(std::size_t i);   // u<i+1>
std::string in_var(std::size_t i);    // y<i+1>
inline constexpr const char* kClockVar = "t";

/// Timed-pipeline automaton whose activation modes integrate the quadratic
/// proxy ODEs: sigmoid g' = a*g*(1-g) from 1/2, tanh g' = a*(1-g^2) from 0.
HybridAutomaton network_to_automaton(const NeuralNetwork& nn);

} // namespace nnreach

#include "doctest.h"
#include "nnreach/neural.hpp"
#include "nnreach/reach.hpp"

#include <cmath>

using namespace nnreach;

namespace {

const char* kToy = "# toy network\n"
                   "nnet 2 1 2\n"
                   "layer 2 2 sigmoid\n"
                   "0.3 0.2\n"
                   "0.1 0.5\n"
                   "0.1 0.2\n"
                   "layer 1 2 linear\n"
                   "3 5\n"
                   "0\n";

std::string dense(std::size_t rows, std::size_t cols, const char* act, std::size_t biases)
{
    std::string s = "layer " + std::to_string(rows) + " " + std::to_string(cols) + " " + act + "\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c)
            s += "0.01 ";
        s += "\n";
    }
    for (std::size_t b = 0; b < biases; ++b)
        s += "0 ";
    return s + "\n";
}

} // namespace

TEST_CASE("toy network evaluation")
{
    const auto nn = load_network(kToy);
    const double a[] = {2.0, 1.0};
    const double b[] = {3.0, 2.0};
    CHECK(eval_network(nn, a)[0] == doctest::Approx(5.68759602100003).epsilon(1e-12));
    CHECK(eval_network(nn, b)[0] == doctest::Approx(6.49442404664396).epsilon(1e-12));
    const double one[] = {1.0};
    CHECK_THROWS_AS(eval_network(nn, one), ArityMismatch);
}

TEST_CASE("weight file format")
{
    const auto lin = load_network("nnet 1 1 1\nlayer 1 1 linear\n2\n0\n");
    const double y[] = {1.5};
    CHECK(eval_network(lin, y)[0] == 3.0);

    const std::string big = "nnet 2 1 3\n" + dense(16, 2, "sigmoid", 16) + dense(16, 16, "sigmoid", 16) +
                            dense(1, 16, "tanh", 1);
    CHECK(load_network(big).layers.size() == 3);

    const std::string short_bias = "nnet 2 1 3\n" + dense(16, 2, "sigmoid", 15) + dense(16, 16, "sigmoid", 16) +
                                   dense(1, 16, "tanh", 1);
    CHECK_THROWS_AS(load_network(short_bias), DimensionMismatch);

    CHECK_THROWS_AS(load_network("nnet 1 1 1\nlayer 1 1 relu\n2\n0\n"), UnsupportedActivation);
    CHECK_THROWS_AS(load_network("nnet 1 1\n"), FormatError);
    CHECK_THROWS_AS(load_network("nnet 1 1 1\nlayer 1 1 linear\nx\n0\n"), FormatError);
    try {
        load_network("nnet 1 1 1\nlayer 1 1 linear\n2 3\n0\n");
        FAIL("expected a dimension error");
    } catch (const DimensionMismatch& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("dump round trip")
{
    const auto nn = load_network(kToy);
    const auto again = load_network(dump_network(nn));
    CHECK(again.layers.size() == 2);
    CHECK(again.layers[0].weights == nn.layers[0].weights);
    CHECK(again.layers[1].bias == nn.layers[1].bias);
}

TEST_CASE("toy automaton structure")
{
    const auto h = network_to_automaton(load_network(kToy));
    CHECK(validate_automaton(h).empty());
    REQUIRE(h.modes.size() == 3);
    CHECK(h.modes[0].name == "q0");
    CHECK(h.modes[1].name == "q1");
    CHECK(h.modes[2].name == "q2");
    const auto& q1 = h.modes[1];
    CHECK(to_string(q1.flow[*h.variable_index("xP1")]) == "xJ1*xP1*(1 - xP1)");
    CHECK(to_string(q1.flow[*h.variable_index("t")]) == "1");
    CHECK(q1.flow[*h.variable_index("xJ1")].is_constant(0.0));
    for (const auto& t : h.transitions) {
        REQUIRE(t.guard.size() == 1);
        CHECK(t.guard[0].lhs == Expr::var("t"));
    }
    const auto& enter = *h.outgoing("q0").front();
    CHECK(to_string(enter.reset.at("xP1")) == "0.5");
    CHECK(to_string(enter.reset.at("xJ1")) == "0.3*y1 + 0.2*y2 + 0.1");
}

TEST_CASE("deep network automaton")
{
    const std::string big = "nnet 2 1 3\n" + dense(16, 2, "sigmoid", 16) + dense(16, 16, "sigmoid", 16) +
                            dense(1, 16, "tanh", 1);
    const auto h = network_to_automaton(load_network(big));
    CHECK(h.modes.size() == 5);
    CHECK(h.variables.size() == 2 * 16 + 2);
    const auto& tanh_mode = h.modes[3];
    CHECK(to_string(tanh_mode.flow[0]) == "xJ1*(1 - xP1^2)");
    CHECK(tanh_mode.flow[1].is_constant(0.0));
}

TEST_CASE("single neuron reaches one half")
{
    const auto h = network_to_automaton(load_network("nnet 1 1 1\nlayer 1 1 sigmoid\n1\n0\n"));
    const double y[] = {0.0};
    CHECK(execute_controller_point(h, y)[0] == 0.5);
    ReachSettings s;
    const auto u = run_controller(h, {TaylorModel(MonomialBasis::get(0, 4), 0.0)}, s);
    CHECK(u[0].bound().contains(0.5));
    CHECK(u[0].bound().width() <= 1e-12);
}

TEST_CASE("linear hidden layer is rejected")
{
    CHECK_THROWS_AS(network_to_automaton(load_network("nnet 1 1 2\nlayer 1 1 linear\n1\n0\nlayer 1 1 linear\n1\n0\n")),
                    UnsupportedActivation);
}

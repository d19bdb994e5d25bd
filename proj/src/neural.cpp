#include "nnreach/neural.hpp"

#include "nnreach/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nnreach {

const char* activation_name(Activation a)
{
    switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
    }
    return "?";
}

std::size_t NeuralNetwork::hidden_width() const
{
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        n = std::max(n, layers[i].rows);
    if (!layers.empty() && layers.back().activation != Activation::linear)
        n = std::max(n, layers.back().rows);
    return n;
}

void check_network(const NeuralNetwork& nn)
{
    if (nn.layers.empty())
        throw DimensionMismatch("network has no layers");
    std::size_t width = nn.inputs;
    for (std::size_t i = 0; i < nn.layers.size(); ++i) {
        const Layer& l = nn.layers[i];
        const std::string where = "layer " + std::to_string(i + 1);
        if (l.cols != width)
            throw DimensionMismatch(where + " has " + std::to_string(l.cols) + " columns, expected " +
                                    std::to_string(width));
        if (l.weights.size() != l.rows * l.cols)
            throw DimensionMismatch(where + " weight count differs from rows x cols");
        if (l.bias.size() != l.rows)
            throw DimensionMismatch(where + " has " + std::to_string(l.bias.size()) + " biases for " +
                                    std::to_string(l.rows) + " rows");
        width = l.rows;
    }
    if (width != nn.outputs)
        throw DimensionMismatch("last layer has " + std::to_string(width) + " rows, expected " +
                                std::to_string(nn.outputs) + " outputs");
}

namespace {

struct LineReader {
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::size_t pos = 0;

    explicit LineReader(std::string_view text)
    {
        std::size_t no = 0, start = 0;
        while (start <= text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string_view::npos)
                end = text.size();
            ++no;
            std::string line = trim(text.substr(start, end - start));
            start = end + 1;
            if (line.empty() || line[0] == '#')
                continue;
            lines.emplace_back(no, std::move(line));
        }
    }

    bool done() const { return pos >= lines.size(); }
    std::size_t last_line() const { return lines.empty() ? 1 : lines.back().first; }

    std::pair<std::size_t, std::vector<std::string>> next(const char* what)
    {
        if (done())
            throw FormatError(last_line(), std::string("unexpected end of file, expected ") + what);
        const auto& [no, text] = lines[pos++];
        std::istringstream is(text);
        std::vector<std::string> toks;
        for (std::string tok; is >> tok;)
            toks.push_back(tok);
        return {no, toks};
    }
};

double number(const std::string& tok, std::size_t line)
{
    try {
        double v = parse_double(tok);
        if (!std::isfinite(v))
            throw std::invalid_argument("non-finite");
        return v;
    } catch (const std::invalid_argument&) {
        throw FormatError(line, "bad number '" + tok + "'");
    }
}

std::size_t count(const std::string& tok, std::size_t line)
{
    try {
        long v = parse_long(tok);
        if (v < 0)
            throw std::invalid_argument("negative");
        return static_cast<std::size_t>(v);
    } catch (const std::invalid_argument&) {
        throw FormatError(line, "bad count '" + tok + "'");
    }
}

Activation activation_from(const std::string& s, std::size_t line)
{
    if (s == "sigmoid")
        return Activation::sigmoid;
    if (s == "tanh")
        return Activation::tanh;
    if (s == "linear")
        return Activation::linear;
    throw UnsupportedActivation("line " + std::to_string(line) + ": activation '" + s + "' is not supported");
}

} // namespace

NeuralNetwork load_network(std::string_view text)
{
    LineReader in(text);
    auto [hline, header] = in.next("header");
    if (header.size() != 4 || header[0] != "nnet")
        throw FormatError(hline, "expected 'nnet <inputs> <outputs> <layers>'");
    NeuralNetwork nn;
    nn.inputs = count(header[1], hline);
    nn.outputs = count(header[2], hline);
    const std::size_t n_layers = count(header[3], hline);
    if (n_layers == 0)
        throw FormatError(hline, "network needs at least one layer");

    for (std::size_t k = 0; k < n_layers; ++k) {
        auto [lline, lt] = in.next("layer header");
        if (lt.size() != 4 || lt[0] != "layer")
            throw FormatError(lline, "expected 'layer <rows> <cols> <activation>'");
        Layer l;
        l.rows = count(lt[1], lline);
        l.cols = count(lt[2], lline);
        l.activation = activation_from(lt[3], lline);
        for (std::size_t r = 0; r < l.rows; ++r) {
            auto [wline, wt] = in.next("weight row");
            if (wt.size() != l.cols)
                throw DimensionMismatch("layer " + std::to_string(k + 1) + " (line " + std::to_string(wline) +
                                        "): weight row has " + std::to_string(wt.size()) + " entries, expected " +
                                        std::to_string(l.cols));
            for (const auto& tok : wt)
                l.weights.push_back(number(tok, wline));
        }
        auto [bline, bt] = in.next("bias line");
        if (bt.size() != l.rows)
            throw DimensionMismatch("layer " + std::to_string(k + 1) + " (line " + std::to_string(bline) + "): " +
                                    std::to_string(bt.size()) + " biases for " + std::to_string(l.rows) + " rows");
        for (const auto& tok : bt)
            l.bias.push_back(number(tok, bline));
        nn.layers.push_back(std::move(l));
    }
    if (!in.done())
        throw FormatError(in.lines[in.pos].first, "trailing content after last layer");
    check_network(nn);
    return nn;
}

NeuralNetwork load_network_file(const std::string& path) { return load_network(read_file(path)); }

std::string dump_network(const NeuralNetwork& nn)
{
    std::string out = "nnet " + std::to_string(nn.inputs) + " " + std::to_string(nn.outputs) + " " +
                      std::to_string(nn.layers.size()) + "\n";
    for (const auto& l : nn.layers) {
        out += "layer " + std::to_string(l.rows) + " " + std::to_string(l.cols) + " " +
               activation_name(l.activation) + "\n";
        for (std::size_t r = 0; r < l.rows; ++r) {
            for (std::size_t c = 0; c < l.cols; ++c) {
                if (c)
                    out += ' ';
                out += format_number(l.w(r, c));
            }
            out += '\n';
        }
        for (std::size_t r = 0; r < l.rows; ++r) {
            if (r)
                out += ' ';
            out += format_number(l.bias[r]);
        }
        out += '\n';
    }
    return out;
}

std::vector<double> eval_network(const NeuralNetwork& nn, std::span<const double> y)
{
    if (y.size() != nn.inputs)
        throw ArityMismatch("network expects " + std::to_string(nn.inputs) + " inputs, got " +
                            std::to_string(y.size()));
    std::vector<double> x(y.begin(), y.end());
    for (const auto& l : nn.layers) {
        std::vector<double> z(l.rows);
        for (std::size_t r = 0; r < l.rows; ++r) {
            double acc = l.bias[r];
            for (std::size_t c = 0; c < l.cols; ++c)
                acc += l.w(r, c) * x[c];
            switch (l.activation) {
            case Activation::sigmoid: z[r] = sigmoid(acc); break;
            case Activation::tanh: z[r] = std::tanh(acc); break;
            case Activation::linear: z[r] = acc; break;
            }
        }
        x = std::move(z);
    }
    return x;
}

std::string pos_var(std::size_t i) { return "xP" + std::to_string(i + 1); }
std::string aux_var(std::size_t i) { return "xJ" + std::to_string(i + 1); }
std::string out_var(std::size_t i) { return "u" + std::to_string(i + 1); }
std::string in_var(std::size_t i) { return "y" + std::to_string(i + 1); }

namespace {

// b[r] + sum_c W[r][c] * src(c)
Expr affine_row(const Layer& l, std::size_t r, const std::vector<std::string>& src)
{
    Expr e;
    bool first = true;
    for (std::size_t c = 0; c < l.cols; ++c) {
        const double w = l.w(r, c);
        if (w == 0.0)
            continue;
        Expr term = Expr::constant(w) * Expr::var(src[c]);
        e = first ? term : e + term;
        first = false;
    }
    if (first)
        return Expr::constant(l.bias[r]);
    if (l.bias[r] != 0.0)
        e = e + Expr::constant(l.bias[r]);
    return e;
}

Constraint clock_is(double v) { return {Expr::var(kClockVar), Rel::eq, v}; }

} // namespace

HybridAutomaton network_to_automaton(const NeuralNetwork& nn)
{
    check_network(nn);
    for (std::size_t i = 0; i + 1 < nn.layers.size(); ++i)
        if (nn.layers[i].activation == Activation::linear)
            throw UnsupportedActivation("hidden layer " + std::to_string(i + 1) + " is linear");

    const std::size_t n = nn.hidden_width();
    const std::size_t q = nn.outputs;
    HybridAutomaton h;
    h.name = "controller";
    for (std::size_t i = 0; i < n; ++i)
        h.variables.push_back(pos_var(i));
    for (std::size_t i = 0; i < n; ++i)
        h.variables.push_back(aux_var(i));
    for (std::size_t i = 0; i < q; ++i)
        h.variables.push_back(out_var(i));
    h.variables.push_back(kClockVar);
    for (std::size_t i = 0; i < nn.inputs; ++i)
        h.inputs.push_back(in_var(i));
    h.initial_set.assign(h.variables.size(), Interval());
    for (std::size_t i = 0; i < q; ++i)
        h.observation.push_back(Expr::var(out_var(i)));

    std::vector<std::string> inputs = h.inputs;
    std::vector<std::string> positions;
    for (std::size_t i = 0; i < n; ++i)
        positions.push_back(pos_var(i));

    auto mode_name = [](std::size_t k) { return "q" + std::to_string(k); };
    h.modes.push_back({mode_name(0), ModeKind::idle, {}, {}});
    h.initial_mode = mode_name(0);

    auto activation_mode = [&](std::size_t k, const Layer& l) {
        Mode m{mode_name(k), ModeKind::ode, {}, {{Expr::var(kClockVar), Rel::le, 1.0}}};
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= l.rows) {
                m.flow.push_back(Expr::constant(0.0));
                continue;
            }
            Expr g = Expr::var(pos_var(i));
            Expr a = Expr::var(aux_var(i));
            if (l.activation == Activation::sigmoid)
                m.flow.push_back(a * g * (Expr::constant(1.0) - g));
            else
                m.flow.push_back(a * (Expr::constant(1.0) - Expr::pow(g, 2)));
        }
        for (std::size_t i = 0; i < n + q; ++i)
            m.flow.push_back(Expr::constant(0.0));
        m.flow.push_back(Expr::constant(1.0));
        return m;
    };

    // Reset entering the activation mode of layer l, reading `src`.
    auto layer_reset = [&](const Layer& l, const std::vector<std::string>& src) {
        std::map<std::string, Expr, std::less<>> reset;
        const double start = l.activation == Activation::sigmoid ? 0.5 : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i < l.rows) {
                reset[pos_var(i)] = Expr::constant(start);
                reset[aux_var(i)] = affine_row(l, i, src);
            } else {
                reset[pos_var(i)] = Expr::constant(0.0);
                reset[aux_var(i)] = Expr::constant(0.0);
            }
        }
        reset[kClockVar] = Expr::constant(0.0);
        return reset;
    };

    std::size_t k = 0;
    for (std::size_t li = 0; li < nn.layers.size(); ++li) {
        const Layer& l = nn.layers[li];
        const std::vector<std::string>& src = li == 0 ? inputs : positions;
        const double guard_time = li == 0 ? 0.0 : 1.0;
        if (l.activation == Activation::linear) {
            // final linear layer: straight to the output reset
            Transition t{mode_name(k), mode_name(k + 1), {clock_is(guard_time)}, {}};
            for (std::size_t i = 0; i < q; ++i)
                t.reset[out_var(i)] = affine_row(l, i, src);
            h.transitions.push_back(std::move(t));
            h.modes.push_back({mode_name(k + 1), ModeKind::idle, {}, {}});
            ++k;
            continue;
        }
        h.transitions.push_back({mode_name(k), mode_name(k + 1), {clock_is(guard_time)}, layer_reset(l, src)});
        h.modes.push_back(activation_mode(k + 1, l));
        ++k;
        if (li + 1 == nn.layers.size()) {
            Transition t{mode_name(k), mode_name(k + 1), {clock_is(1.0)}, {}};
            for (std::size_t i = 0; i < q; ++i)
                t.reset[out_var(i)] = Expr::var(pos_var(i));
            h.transitions.push_back(std::move(t));
            h.modes.push_back({mode_name(k + 1), ModeKind::idle, {}, {}});
            ++k;
        }
    }
    return h;
}

} // namespace nnreach

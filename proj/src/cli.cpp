#include "nnreach/cli.hpp"

#include "nnreach/cases.hpp"
#include "nnreach/encode.hpp"
#include "nnreach/neural.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace nnreach {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
        out += (i ? sep : "") + parts[i];
    return out;
}

// Splits on commas outside brackets.
std::vector<Interval> parse_interval_list(const std::string& text)
{
    std::vector<Interval> out;
    int depth = 0;
    std::string cur;
    for (char ch : text) {
        if (ch == '[')
            ++depth;
        if (ch == ']')
            --depth;
        if (ch == ',' && depth == 0) {
            out.push_back(parse_interval(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!trim(cur).empty())
        out.push_back(parse_interval(cur));
    return out;
}

std::string format_interval_list(const std::vector<Interval>& v)
{
    std::vector<std::string> parts;
    for (const auto& i : v)
        parts.push_back(format_interval(i));
    return join(parts, ", ");
}

std::vector<Constraint> parse_constraint_list(const std::string& text)
{
    std::vector<Constraint> out;
    for (const auto& part : split_list(text, ';'))
        if (!trim(part).empty())
            out.push_back(parse_constraint(part));
    return out;
}

std::string format_constraint_list(const std::vector<Constraint>& v)
{
    std::vector<std::string> parts;
    for (const auto& c : v)
        parts.push_back(to_string(c));
    return join(parts, "; ");
}

std::vector<std::string> parse_name_list(const std::string& text)
{
    std::vector<std::string> out;
    for (const auto& part : split_list(text))
        if (!trim(part).empty())
            out.push_back(trim(part));
    return out;
}

bool parse_bool(const std::string& v)
{
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    throw std::invalid_argument("expected true or false, got '" + v + "'");
}

unsigned parse_unsigned(const std::string& v, unsigned lo, unsigned hi)
{
    const long n = parse_long(v);
    if (n < static_cast<long>(lo) || n > static_cast<long>(hi))
        throw std::invalid_argument("value " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                    "]");
    return static_cast<unsigned>(n);
}

double parse_positive(const std::string& v)
{
    const double d = parse_double(v);
    if (!(d > 0.0))
        throw std::invalid_argument("value " + v + " must be positive");
    return d;
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string num(double v) { return format_number(v); }

const std::vector<Field>& fields()
{
    using C = RunConfig;
    using S = const std::string&;
    static const std::vector<Field> table = {
        {"run.network", [](C& c, S v) { c.network = v; }, [](const C& c) { return c.network; }},
        {"run.plant", [](C& c, S v) { c.plant = v; }, [](const C& c) { return c.plant; }},
        {"run.initial", [](C& c, S v) { c.initial = parse_interval_list(v); },
         [](const C& c) { return format_interval_list(c.initial); }},
        {"run.subdivide", [](C& c, S v) { c.subdivide = parse_subdivide(v); },
         [](const C& c) { return format_subdivide(c.subdivide); }},
        {"run.subdivide_axes", [](C& c, S v) { c.subdivide_axes = parse_name_list(v); },
         [](const C& c) { return join(c.subdivide_axes, ", "); }},
        {"run.steps", [](C& c, S v) { c.property.max_steps = parse_unsigned(v, 1, 100000); },
         [](const C& c) { return std::to_string(c.property.max_steps); }},
        {"run.seed", [](C& c, S v) { c.seed = static_cast<std::uint64_t>(parse_unsigned(v, 0, 4000000000u)); },
         [](const C& c) { return std::to_string(c.seed); }},
        {"run.samples", [](C& c, S v) { c.samples = parse_unsigned(v, 0, 100000000u); },
         [](const C& c) { return std::to_string(c.samples); }},
        {"run.out", [](C& c, S v) { c.out = v; }, [](const C& c) { return c.out; }},
        {"reach.order", [](C& c, S v) { c.reach.tm_order = parse_unsigned(v, 1, 8); },
         [](const C& c) { return std::to_string(c.reach.tm_order); }},
        {"reach.step", [](C& c, S v) { c.reach.ode_step = parse_positive(v); },
         [](const C& c) { return num(c.reach.ode_step); }},
        {"reach.picard_max_iter", [](C& c, S v) { c.reach.picard_max_iter = parse_unsigned(v, 1, 1000); },
         [](const C& c) { return std::to_string(c.reach.picard_max_iter); }},
        {"reach.remainder_inflation", [](C& c, S v) { c.reach.remainder_inflation = parse_positive(v); },
         [](const C& c) { return num(c.reach.remainder_inflation); }},
        {"reach.max_branches", [](C& c, S v) { c.reach.max_branches = parse_unsigned(v, 1, 1000000); },
         [](const C& c) { return std::to_string(c.reach.max_branches); }},
        {"reach.max_remainder_width", [](C& c, S v) { c.reach.max_remainder_width = parse_positive(v); },
         [](const C& c) { return num(c.reach.max_remainder_width); }},
        {"reach.subdivision_depth", [](C& c, S v) { c.reach.subdivision_depth = parse_unsigned(v, 0, 16); },
         [](const C& c) { return std::to_string(c.reach.subdivision_depth); }},
        {"reach.ode_tol", [](C& c, S v) { c.reach.ode_tol = parse_positive(v); },
         [](const C& c) { return num(c.reach.ode_tol); }},
        {"reach.min_step", [](C& c, S v) { c.reach.min_step = parse_positive(v); },
         [](const C& c) { return num(c.reach.min_step); }},
        {"reach.symbolize_threshold", [](C& c, S v) { c.reach.symbolize_threshold = parse_positive(v); },
         [](const C& c) { return num(c.reach.symbolize_threshold); }},
        {"reach.max_symbolic", [](C& c, S v) { c.reach.max_symbolic = parse_unsigned(v, 0, 64); },
         [](const C& c) { return std::to_string(c.reach.max_symbolic); }},
        {"reach.layer_path",
         [](C& c, S v) {
             if (v == "ode")
                 c.reach.layer_path = LayerPath::ode;
             else if (v == "functional")
                 c.reach.layer_path = LayerPath::functional;
             else
                 throw std::invalid_argument("layer path must be ode or functional");
         },
         [](const C& c) { return std::string(c.reach.layer_path == LayerPath::ode ? "ode" : "functional"); }},
        {"reach.series",
         [](C& c, S v) {
             if (v == "picard")
                 c.reach.series = SeriesMethod::picard;
             else if (v == "lie")
                 c.reach.series = SeriesMethod::lie;
             else
                 throw std::invalid_argument("series must be picard or lie");
         },
         [](const C& c) { return std::string(c.reach.series == SeriesMethod::picard ? "picard" : "lie"); }},
        {"reach.merge_branches", [](C& c, S v) { c.reach.merge_branches = parse_bool(v); },
         [](const C& c) { return std::string(c.reach.merge_branches ? "true" : "false"); }},
        {"reach.merge_tolerance", [](C& c, S v) { c.reach.merge_tolerance = parse_double(v); },
         [](const C& c) { return num(c.reach.merge_tolerance); }},
        {"property.safety", [](C& c, S v) { c.property.safety = parse_constraint_list(v); },
         [](const C& c) { return format_constraint_list(c.property.safety); }},
        {"property.terminal", [](C& c, S v) { c.property.terminal = parse_constraint_list(v); },
         [](const C& c) { return format_constraint_list(c.property.terminal); }},
        {"property.goal", [](C& c, S v) { c.property.goal = parse_constraint(v); },
         [](const C& c) { return c.property.goal ? to_string(*c.property.goal) : std::string(); }},
        {"property.min_reward", [](C& c, S v) { c.property.min_reward = parse_double(v); },
         [](const C& c) { return c.property.min_reward ? num(*c.property.min_reward) : std::string(); }},
        {"property.reward_var", [](C& c, S v) { c.property.reward_var = v; },
         [](const C& c) { return c.property.reward_var; }},
        {"property.goal_bonus", [](C& c, S v) { c.property.goal_bonus = parse_double(v); },
         [](const C& c) { return num(c.property.goal_bonus); }},
        {"plant.wiring", [](C& c, S v) { c.wiring = parse_name_list(v); },
         [](const C& c) { return join(c.wiring, ", "); }},
        {"plant.controls", [](C& c, S v) { c.controls = parse_name_list(v); },
         [](const C& c) { return join(c.controls, ", "); }},
        {"plant.period", [](C& c, S v) { c.period = parse_unsigned(v, 1, 100000); },
         [](const C& c) { return std::to_string(c.period); }},
        {"plant.sample_time", [](C& c, S v) { c.sample_time = parse_positive(v); },
         [](const C& c) { return c.sample_time ? num(*c.sample_time) : std::string(); }},
        {"plant.dt", [](C& c, S v) { c.plant_dt = parse_positive(v); }, [](const C& c) { return num(c.plant_dt); }},
        {"plant.planner",
         [](C& c, S v) {
             const auto parts = split_list(v);
             if (parts.size() != 3)
                 throw std::invalid_argument("planner velocity needs three components");
             for (std::size_t i = 0; i < 3; ++i)
                 c.planner[i] = parse_double(parts[i]);
         },
         [](const C& c) { return num(c.planner[0]) + ", " + num(c.planner[1]) + ", " + num(c.planner[2]); }},
        {"export.target",
         [](C& c, S v) {
             if (v != "milp" && v != "formula-phi0" && v != "formula-expfree" && v != "automaton")
                 throw std::invalid_argument("export target must be milp, formula-phi0, formula-expfree or automaton");
             c.export_target = v;
         },
         [](const C& c) { return c.export_target; }},
        {"export.box", [](C& c, S v) { c.export_box = parse_interval_list(v); },
         [](const C& c) { return format_interval_list(c.export_box); }},
        {"export.pieces", [](C& c, S v) { c.export_pieces = parse_unsigned(v, 1, 100000); },
         [](const C& c) { return std::to_string(c.export_pieces); }},
        {"export.output", [](C& c, S v) { c.export_output = parse_unsigned(v, 1, 100000); },
         [](const C& c) { return std::to_string(c.export_output); }},
        {"export.sense",
         [](C& c, S v) {
             if (v != "max" && v != "min")
                 throw std::invalid_argument("export sense must be max or min");
             c.export_maximize = v == "max";
         },
         [](const C& c) { return std::string(c.export_maximize ? "max" : "min"); }},
        {"export.predicate",
         [](C& c, S v) {
             parse_constraint(v);
             c.export_predicate = v;
         },
         [](const C& c) { return c.export_predicate; }},
    };
    return table;
}

const Field* find_field(const std::string& key)
{
    for (const auto& f : fields())
        if (key == f.key)
            return &f;
    return nullptr;
}

// ---------------------------------------------------------------- logging

int log_level()
{
    static const int level = [] {
        const char* v = std::getenv("NNREACH_LOG");
        const std::string s = v ? v : "";
        if (s == "quiet" || s == "error")
            return 0;
        if (s == "info")
            return 2;
        if (s == "debug")
            return 3;
        return 1;
    }();
    return level;
}

std::mutex g_log_mu;

void log(std::ostream& err, int level, const std::string& msg)
{
    if (level > log_level())
        return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(g_log_mu);
    err << "[" << names[level] << "] " << msg << "\n";
}

std::string fixed(double v, int digits)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

// Six significant digits, for tables read by people.
std::string short_interval(const Interval& i)
{
    std::ostringstream os;
    os.precision(6);
    os << "[" << i.lo() << ", " << i.hi() << "]";
    return os.str();
}

} // namespace

SubdivideSpec parse_subdivide(std::string_view text)
{
    const std::string t = trim(text);
    SubdivideSpec s;
    if (t == "none")
        return s;
    const auto colon = t.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("subdivision must be none, uniform:<pieces> or adaptive:<width>");
    const std::string kind = t.substr(0, colon);
    const double param = parse_double(t.substr(colon + 1));
    if (kind == "uniform") {
        if (param < 1 || param != std::floor(param))
            throw std::invalid_argument("uniform subdivision needs a positive whole number of pieces");
        s.kind = SubdivideSpec::Kind::uniform;
    } else if (kind == "adaptive") {
        if (!(param > 0))
            throw std::invalid_argument("adaptive subdivision needs a positive width");
        s.kind = SubdivideSpec::Kind::adaptive;
    } else {
        throw std::invalid_argument("unknown subdivision '" + kind + "'");
    }
    s.param = param;
    return s;
}

std::string format_subdivide(const SubdivideSpec& s)
{
    switch (s.kind) {
    case SubdivideSpec::Kind::none: return "none";
    case SubdivideSpec::Kind::uniform: return "uniform:" + format_number(s.param);
    case SubdivideSpec::Kind::adaptive: return "adaptive:" + format_number(s.param);
    }
    return "none";
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value, std::size_t line)
{
    const Field* f = find_field(key);
    if (!f)
        throw ConfigError(line, "unknown key '" + key + "'");
    try {
        f->set(c, trim(value));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(line, key + ": " + e.what());
    }
    if (std::find(c.keys.begin(), c.keys.end(), key) == c.keys.end())
        c.keys.push_back(key);
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir)
{
    const KeyValueFile kv = KeyValueFile::parse(text);
    RunConfig c;
    c.base_dir = base_dir;
    for (const auto& e : kv.entries())
        set_config_value(c, e.key, e.value, e.line);
    try {
        check_settings(c.reach);
    } catch (const std::exception& e) {
        throw ConfigError(0, e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    const std::string text = read_file(path);
    return parse_run_config(text, path.parent_path());
}

std::string dump_run_config(const RunConfig& c)
{
    std::string out;
    for (const auto& k : c.keys)
        out += k + " = " + find_field(k)->get(c) + "\n";
    return out;
}

std::filesystem::path resolve_path(const RunConfig& c, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() || c.base_dir.empty() ? path : c.base_dir / path;
}

namespace {

NeuralNetwork load_config_network(const RunConfig& c)
{
    if (c.network.empty())
        throw ConfigError(0, "run.network is not set");
    const auto path = resolve_path(c, c.network);
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception&) {
        throw std::runtime_error("cannot open network file " + path.string());
    }
    try {
        return load_network(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

} // namespace

ClosedLoop build_loop(const RunConfig& c)
{
    const NeuralNetwork nn = load_config_network(c);
    ClosedLoop loop;
    if (c.plant == "mountain_car") {
        loop = mountain_car_loop(nn);
    } else if (c.plant == "quadrotor") {
        loop = quadrotor_loop(nn, c.plant_dt, c.planner);
    } else if (c.plant.empty()) {
        throw ConfigError(0, "run.plant is not set");
    } else {
        const auto path = resolve_path(c, c.plant);
        std::string text;
        try {
            text = read_file(path);
        } catch (const std::exception&) {
            throw std::runtime_error("cannot open plant model " + path.string());
        }
        HybridAutomaton plant = load_automaton(text);
        std::vector<Expr> wiring;
        for (const auto& w : c.wiring)
            wiring.push_back(parse_expr(w));
        Scheduling sched;
        sched.discrete_period = c.period;
        sched.sample_time = c.sample_time;
        loop = compose_closed_loop(network_to_automaton(nn), std::move(plant), std::move(wiring), c.controls, sched);
    }
    check_property_names(loop, c.property);
    return loop;
}

std::vector<Interval> initial_box(const RunConfig& c, const ClosedLoop& loop)
{
    std::vector<Interval> box;
    if (!c.initial.empty())
        box = c.initial;
    else if (c.plant == "mountain_car")
        box = mountain_car_initial();
    else if (c.plant == "quadrotor")
        box = quadrotor_initial(Interval(-0.05, 0.05), Interval(-0.05, 0.05), c.planner);
    else
        box = loop.plant.initial_set;
    if (box.size() != loop.plant.variables.size())
        throw ConfigError(0, "run.initial has " + std::to_string(box.size()) + " intervals for " +
                                 std::to_string(loop.plant.variables.size()) + " plant variables");
    return box;
}

std::vector<std::vector<Interval>> config_subsets(const RunConfig& c, const ClosedLoop& loop)
{
    const auto box = initial_box(c, loop);
    if (c.subdivide.kind == SubdivideSpec::Kind::none)
        return {box};
    std::vector<std::size_t> axes;
    for (const auto& name : c.subdivide_axes) {
        const auto idx = loop.plant.variable_index(name);
        if (!idx)
            throw ConfigError(0, "run.subdivide_axes names unknown variable '" + name + "'");
        axes.push_back(*idx);
    }
    const auto kind = c.subdivide.kind == SubdivideSpec::Kind::uniform ? SubdivideStrategy::uniform
                                                                       : SubdivideStrategy::adaptive;
    return subdivide_initial_set(box, kind, c.subdivide.param, axes);
}

std::vector<SubsetOutcome> verify_subsets(const RunConfig& c, const ClosedLoop& loop,
                                          const std::vector<std::vector<Interval>>& subsets, unsigned jobs)
{
    std::vector<SubsetOutcome> out(subsets.size());
    std::atomic<std::size_t> next{0};
    const RunOptions opts = run_options(c.property);
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= subsets.size())
                return;
            SubsetOutcome& o = out[i];
            o.subset = subsets[i];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                o.result = run_closed_loop(loop, subsets[i], opts, c.reach);
                o.verdict = check_property(o.result, c.property);
                if (o.verdict.kind == VerdictKind::unknown && c.samples > 0) {
                    if (auto cex = falsify_by_simulation(loop, subsets[i], c.property, c.samples, true, c.seed + i)) {
                        o.verdict.kind = VerdictKind::falsified;
                        o.verdict.step = cex->step;
                        o.verdict.reason = cex->violated;
                        o.verdict.counterexample = std::move(*cex);
                    }
                }
            } catch (const std::exception& e) {
                o.verdict.kind = VerdictKind::unknown;
                o.verdict.reason = std::string("analysis error: ") + e.what();
            }
            o.verdict.subset = subsets[i];
            o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(subsets.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();
    return out;
}

std::string report_table(const std::vector<SubsetOutcome>& outcomes, const std::vector<std::string>& axis_names)
{
    std::ostringstream os;
    os << "subset | verdict | reward | steps | time_s\n";
    for (const auto& o : outcomes) {
        std::vector<std::string> parts;
        for (std::size_t i = 0; i < o.subset.size(); ++i)
            if (o.subset[i].width() > 0 || o.subset.size() == 1)
                parts.push_back((i < axis_names.size() ? axis_names[i] + " in " : "") + short_interval(o.subset[i]));
        os << (parts.empty() ? format_interval_list(o.subset) : join(parts, " x ")) << " | "
           << verdict_name(o.verdict.kind) << " | ";
        if (o.verdict.kind == VerdictKind::falsified && o.verdict.counterexample)
            os << "= " << fixed(o.verdict.counterexample->reward, 2);
        else if (o.verdict.reward_bound)
            os << ">= " << fixed(*o.verdict.reward_bound, 2);
        else
            os << "-";
        os << " | ";
        if (o.verdict.kind == VerdictKind::verified)
            os << "<= " << o.verdict.steps_bound;
        else if (o.verdict.kind == VerdictKind::falsified)
            os << "fails at " << o.verdict.step;
        else
            os << "-";
        os << " | " << fixed(o.seconds, 2) << "\n";
    }
    return os.str();
}

std::string plot_rows(const std::string& csv, const std::string& x, const std::string& y)
{
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::map<long, std::pair<std::optional<Interval>, std::optional<Interval>>> rows;
    std::vector<std::string> names;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        const auto f = split_list(line);
        if (f.size() != 6)
            throw std::runtime_error("malformed flowpipe row: " + line);
        const long step = parse_long(f[0]);
        const std::string var = trim(f[3]);
        if (std::find(names.begin(), names.end(), var) == names.end())
            names.push_back(var);
        const Interval iv(parse_double(f[4]), parse_double(f[5]));
        if (var == x)
            rows[step].first = iv;
        if (var == y)
            rows[step].second = iv;
    }
    for (const auto& v : {x, y})
        if (std::find(names.begin(), names.end(), v) == names.end())
            throw std::invalid_argument("unknown variable '" + v + "'; flowpipe has " + join(names, ", "));
    std::ostringstream os;
    os.precision(17);
    os << "step,x_lo,x_hi,y_lo,y_hi\n";
    // Step 0 is the initial set, before any control is applied.
    for (const auto& [step, r] : rows)
        if (step > 0 && r.first && r.second)
            os << step << ',' << r.first->lo() << ',' << r.first->hi() << ',' << r.second->lo() << ','
               << r.second->hi() << '\n';
    return os.str();
}

// -------------------------------------------------------------------- CLI

namespace {

struct Flags {
    std::string config;
    std::optional<unsigned> order;
    std::optional<double> step;
    std::optional<std::string> subdivide;
    std::optional<std::uint64_t> seed;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config, "run configuration file")->required();
    cmd->add_option("--order", f.order, "Taylor model order (1-8)");
    cmd->add_option("--step", f.step, "largest integration step");
    cmd->add_option("--subdivide", f.subdivide, "none, uniform:<pieces> or adaptive:<width>");
    cmd->add_option("--seed", f.seed, "seed of every random stream");
    cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "output directory");
}

RunConfig configure(const Flags& f)
{
    RunConfig c = load_run_config(f.config);
    if (f.order)
        set_config_value(c, "reach.order", std::to_string(*f.order));
    if (f.step)
        set_config_value(c, "reach.step", format_number(*f.step));
    if (f.subdivide)
        set_config_value(c, "run.subdivide", *f.subdivide);
    if (f.seed)
        set_config_value(c, "run.seed", std::to_string(*f.seed));
    if (f.out)
        set_config_value(c, "run.out", std::filesystem::absolute(*f.out).string());
    check_settings(c.reach);
    return c;
}

std::filesystem::path out_dir(const RunConfig& c)
{
    const auto dir = resolve_path(c, c.out);
    std::filesystem::create_directories(dir);
    return dir;
}

int cmd_verify(const Flags& f, std::ostream& out, std::ostream& err)
{
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig c = configure(f);
    const ClosedLoop loop = build_loop(c);
    const auto subsets = config_subsets(c, loop);
    log(err, 2, "verifying " + std::to_string(subsets.size()) + " subsets with " + std::to_string(f.jobs) + " jobs");
    const auto outcomes = verify_subsets(c, loop, subsets, f.jobs);
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto dir = out_dir(c);

    std::string verdicts;
    bool any_false = false, any_unknown = false;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        std::string cex_path;
        if (o.verdict.counterexample) {
            cex_path = "counterexample_" + std::to_string(i + 1) + ".csv";
            write_file_atomic(dir / cex_path, trace_csv(o.verdict.counterexample->trace));
        }
        write_file_atomic(dir / ("flowpipe_" + std::to_string(i + 1) + ".csv"), flowpipe_csv(o.result));
        verdicts += "[subset " + std::to_string(i + 1) + "]\n" + format_verdict(o.verdict, cex_path) + "\n";
        any_false = any_false || o.verdict.kind == VerdictKind::falsified;
        any_unknown = any_unknown || o.verdict.kind == VerdictKind::unknown;
        log(err, 2, "subset " + std::to_string(i + 1) + ": " + verdict_name(o.verdict.kind) + " " + o.verdict.reason);
    }
    std::string report = "# plant " + c.plant + ", network " + c.network + ", " +
                         std::to_string(c.property.max_steps) + " steps, order " + std::to_string(c.reach.tm_order) +
                         ", layer path " + (c.reach.layer_path == LayerPath::ode ? "ode" : "functional") + "\n";
    report += report_table(outcomes, loop.plant.variables);
    report += "# total wall time " + fixed(total, 2) + " s\n";
    write_file_atomic(dir / "report.txt", report);
    write_file_atomic(dir / "verdicts.txt", verdicts);
    write_file_atomic(dir / "config.used", dump_run_config(c));
    out << report;
    return any_false ? kExitFalsified : any_unknown ? kExitUnknown : kExitVerified;
}

int cmd_simulate(const Flags& f, const std::vector<double>& point, std::ostream& out, std::ostream&)
{
    const RunConfig c = configure(f);
    const ClosedLoop loop = build_loop(c);
    std::vector<double> x = point;
    if (x.empty())
        for (const auto& iv : initial_box(c, loop))
            x.push_back(iv.mid());
    if (x.size() != loop.plant.variables.size())
        throw ConfigError(0, "--point has " + std::to_string(x.size()) + " values for " +
                                 std::to_string(loop.plant.variables.size()) + " plant variables");
    const Trace t = simulate_closed_loop(loop, x, run_options(c.property));
    const auto dir = out_dir(c);
    write_file_atomic(dir / "trace.csv", trace_csv(t));
    unsigned step = 0;
    double reward = 0.0;
    const auto bad = trace_violation(t, c.property, &step, &reward);
    out << "steps = " << t.rows.back().step << "\n";
    out << "goal_reached = " << (t.goal_reached ? "true" : "false") << "\n";
    if (c.property.min_reward)
        out << "reward = " << format_number(reward) << "\n";
    out << "property = " << (bad ? "violated (" + *bad + ") at step " + std::to_string(step) : "holds") << "\n";
    out << "trace = " << (dir / "trace.csv").string() << "\n";
    return bad ? kExitFalsified : kExitVerified;
}

int cmd_export(const Flags& f, std::string target, std::ostream& out, std::ostream&)
{
    const RunConfig c = configure(f);
    if (target.empty())
        target = c.export_target;
    const NeuralNetwork nn = load_config_network(c);
    const auto dir = out_dir(c);
    std::filesystem::path path;
    std::string text;
    if (target == "automaton") {
        path = dir / "controller.model";
        text = dump_automaton(network_to_automaton(nn));
        load_automaton(text);
    } else {
        if (c.export_box.size() != nn.inputs)
            throw ConfigError(0, "export.box has " + std::to_string(c.export_box.size()) + " intervals for " +
                                     std::to_string(nn.inputs) + " network inputs");
        if (target == "milp") {
            if (c.export_output > nn.outputs)
                throw ConfigError(0, "export.output exceeds the network's " + std::to_string(nn.outputs) +
                                         " outputs");
            path = dir / "network.lp";
            text = export_milp(nn, c.export_box, MilpSettings{c.export_pieces}, c.export_output - 1,
                               c.export_maximize);
            parse_lp(text);
        } else if (target == "formula-phi0") {
            path = dir / "network_phi0.smt2";
            text = export_formula(nn, c.export_box, c.export_predicate, FormulaForm::phi0);
        } else if (target == "formula-expfree") {
            path = dir / "network_expfree.smt2";
            text = export_formula(nn, c.export_box, c.export_predicate, FormulaForm::exp_free);
        } else {
            throw ConfigError(0, "unknown export target '" + target + "'");
        }
    }
    write_file_atomic(path, text);
    out << path.string() << "\n";
    return kExitVerified;
}

int cmd_plot(const std::string& run, std::size_t subset, const std::string& x, const std::string& y,
             const std::string& dest, std::ostream& out)
{
    const auto src = std::filesystem::path(run) / ("flowpipe_" + std::to_string(subset) + ".csv");
    std::string csv;
    try {
        csv = read_file(src);
    } catch (const std::exception&) {
        throw std::runtime_error("cannot open run artifact " + src.string());
    }
    const std::string rows = plot_rows(csv, x, y);
    if (dest.empty())
        out << rows;
    else
        write_file_atomic(dest, rows);
    return kExitVerified;
}

int cmd_synth(const std::string& scenario, std::uint64_t seed, const std::string& dir, std::ostream& out)
{
    const Scenario s = parse_scenario(scenario);
    const ControllerFixture fx = synth_reference_controller(s, seed);
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir) / scenario_name(s);
    write_file_atomic(base.string() + ".nnet", dump_network(fx.network));
    write_file_atomic(base.string() + ".provenance.txt", fx.provenance + (fx.provenance.ends_with('\n') ? "" : "\n") + "known good: " + fx.known_good + "\n");
    out << base.string() << ".nnet (seed " << fx.seed << ")\n";
    return kExitVerified;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Reachability analysis and encodings of sigmoid/tanh network controllers"};
    app.require_subcommand(1);
    Flags f;

    auto* verify = app.add_subcommand("verify", "verify the configured property on every subset");
    add_common(verify, f);

    std::vector<double> point;
    auto* simulate = app.add_subcommand("simulate", "simulate one trajectory (default: box center)");
    add_common(simulate, f);
    simulate->add_option("--point", point, "initial state, one value per plant variable")->delimiter(',');

    std::string target;
    auto* exp = app.add_subcommand("export", "write an encoding of the network");
    add_common(exp, f);
    exp->add_option("--target", target, "milp, formula-phi0, formula-expfree or automaton")
        ->check(CLI::IsMember({"milp", "formula-phi0", "formula-expfree", "automaton"}));

    auto* transform = app.add_subcommand("transform", "write the controller automaton (export --target automaton)");
    add_common(transform, f);

    std::string run_dir, px, py, dest;
    std::size_t subset = 1;
    auto* plot = app.add_subcommand("plot-data", "project a run's flowpipe onto two variables");
    plot->add_option("--run", run_dir, "output directory of a verify run")->required();
    plot->add_option("--x", px, "variable on the x axis")->required();
    plot->add_option("--y", py, "variable on the y axis")->required();
    plot->add_option("--subset", subset, "1-based subset index");
    plot->add_option("--out", dest, "output CSV (default: standard output)");

    std::string scenario;
    std::uint64_t synth_seed = 1;
    std::string synth_out = "fixtures/v1";
    auto* synth = app.add_subcommand("synth", "fit and check a reference controller fixture");
    synth->add_option("--scenario", scenario, "mountain_car or quadrotor")->required();
    synth->add_option("--seed", synth_seed, "first seed tried");
    synth->add_option("--out", synth_out, "fixture directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : kExitError;
    }

    try {
        if (verify->parsed())
            return cmd_verify(f, out, err);
        if (simulate->parsed())
            return cmd_simulate(f, point, out, err);
        if (exp->parsed())
            return cmd_export(f, target, out, err);
        if (transform->parsed())
            return cmd_export(f, "automaton", out, err);
        if (plot->parsed())
            return cmd_plot(run_dir, subset, px, py, dest, out);
        if (synth->parsed())
            return cmd_synth(scenario, synth_seed, synth_out, out);
    } catch (const ExpFreeNeedsSingleHiddenLayer& e) {
        log(err, 0, std::string("ExpFreeNeedsSingleHiddenLayer: ") + e.what());
        return kExitError;
    } catch (const ConfigError& e) {
        log(err, 0, std::string("config error: ") + e.what());
        return kExitError;
    } catch (const std::exception& e) {
        log(err, 0, e.what());
        return kExitError;
    }
    return kExitError;
}

} // namespace nnreach

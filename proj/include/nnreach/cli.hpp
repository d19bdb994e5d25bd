#pragma once

#include "nnreach/config.hpp"
#include "nnreach/reach.hpp"
#include "nnreach/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nnreach {

inline constexpr int kExitVerified = 0;
inline constexpr int kExitFalsified = 1;
inline constexpr int kExitUnknown = 2;
inline constexpr int kExitError = 3;

struct SubdivideSpec {
    enum class Kind { none, uniform, adaptive } kind = Kind::none;
    /// Pieces per axis (uniform) or largest piece width (adaptive).
    double param = 1.0;
};

SubdivideSpec parse_subdivide(std::string_view text);
std::string format_subdivide(const SubdivideSpec& s);

/// A verification run described by `section.key = value` lines. Relative
/// paths are resolved against `base_dir` (the config file's directory).
struct RunConfig {
    std::filesystem::path base_dir;

    std::string network;
    /// `mountain_car`, `quadrotor`, or a model file path.
    std::string plant;
    /// One interval per plant variable; empty means the built-in default.
    std::vector<Interval> initial;
    SubdivideSpec subdivide;
    /// Variable names to split; empty means every non-degenerate axis.
    std::vector<std::string> subdivide_axes;
    std::uint64_t seed = 1;
    /// Simulation samples used to falsify Unknown subsets.
    std::size_t samples = 1000;
    std::string out = "out";

    ReachSettings reach;
    Property property;

    /// Model-file plants: controller input expressions and driven inputs.
    std::vector<std::string> wiring;
    std::vector<std::string> controls;
    unsigned period = 1;
    std::optional<double> sample_time;
    /// Quadrotor planner velocity and sample time.
    std::array<double, 3> planner{0.25, 0.25, 0.25};
    double plant_dt = 0.1;

    std::string export_target = "milp";
    std::vector<Interval> export_box;
    unsigned export_pieces = 100;
    std::size_t export_output = 1;
    bool export_maximize = true;
    std::string export_predicate = "u1 >= 0";

    /// Keys in the order they were given; dump_run_config writes these.
    std::vector<std::string> keys;
};

/// Applies one `key = value` setting; throws ConfigError on unknown keys or
/// malformed values.
void set_config_value(RunConfig& c, const std::string& key, const std::string& value, std::size_t line = 0);

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical text of the given keys, in order. For canonical input,
/// dump_run_config(parse_run_config(text)) equals the text without comments.
std::string dump_run_config(const RunConfig& c);

std::filesystem::path resolve_path(const RunConfig& c, const std::string& p);

/// Closed loop and initial box described by the config.
ClosedLoop build_loop(const RunConfig& c);
std::vector<Interval> initial_box(const RunConfig& c, const ClosedLoop& loop);
std::vector<std::vector<Interval>> config_subsets(const RunConfig& c, const ClosedLoop& loop);

struct SubsetOutcome {
    std::vector<Interval> subset;
    Verdict verdict;
    ReachResult result;
    double seconds = 0.0;
};

/// Verifies every subset with `jobs` workers; outcomes are in subset order.
std::vector<SubsetOutcome> verify_subsets(const RunConfig& c, const ClosedLoop& loop,
                                          const std::vector<std::vector<Interval>>& subsets, unsigned jobs);

/// Per-subset table: subset, verdict, reward bound, steps bound, wall time.
std::string report_table(const std::vector<SubsetOutcome>& outcomes, const std::vector<std::string>& axis_names);

/// Rows step,x_lo,x_hi,y_lo,y_hi from flowpipe CSV text.
std::string plot_rows(const std::string& flowpipe_csv_text, const std::string& x, const std::string& y);

/// Entry point of the command-line tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace nnreach

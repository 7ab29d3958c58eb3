#pragma once

// Experiment configuration, presets and run orchestration behind the
// command-line tool. The configuration format is documented in
// docs/formats.md.

#include "gradflow/dgm.hpp"
#include "gradflow/gradient_flow.hpp"
#include "gradflow/jko.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradflow::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { nitsche, jko, dgm };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct RunConfig {
  Method method = Method::nitsche;
  ProblemFlavor problem = ProblemFlavor::dirichlet_heat;
  std::vector<int> dimensions{2};
  std::uint64_t seed = 1;
  bool frozen_clouds = false;

  int blocks = 2;
  int width = 20;
  Activation activation = Activation::tanh;

  double final_time = 1.0;
  double tau = 0.05;

  /// Cloud sizes scale with the network input width n_in (d, or d + 1 for
  /// the space-time network): interior = interior_per_dim * n_in.
  Index interior_per_dim = 300;
  Index per_face = 150;
  /// Initial-condition points per spatial dimension.
  Index initial_per_dim = 300;

  TrainConfig train{.epochs = 300, .schedule = LrSchedule({{1, 1e-3}, {200, 1e-4}}), .optimizer = {}};
  TrainConfig initial{.epochs = 500, .schedule = LrSchedule(1e-2), .optimizer = {}};

  PenaltyConfig penalty{.mode = PenaltyMode::pointwise, .factor = 8.0};
  double l2_weight = 0.5;

  double epsilon = 0.0;
  bool debiased = false;
  double density_floor = 1e-8;
  double mass_weight = 1.0;
  double sinkhorn_tol = 1e-9;
  int sinkhorn_max_iterations = 20000;

  EvaluationConfig evaluation;

  /// Method-specific solver settings for dimension d.
  Architecture architecture(int d) const;
  Problem make_problem(int d) const;
  TimeGrid grid() const;
  NitscheConfig nitsche(int d) const;
  JkoConfig jko(int d) const;
  DgmConfig dgm(int d) const;
};

/// Parses INI text. Unknown sections or keys, malformed values and values
/// out of range raise ConfigError naming the key ("time.tau"). Warnings
/// (settings a method ignores) go to the diagnostics sink.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// INI text that parses back to the same configuration.
std::string format_config(const RunConfig& config);

struct Preset {
  std::string name;
  std::string description;
  std::string text;  // INI
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);

/// Per-dimension output directory: <root>/<method>-d<d>.
std::filesystem::path run_directory(const std::filesystem::path& root, Method method, int d);

struct RunOptions {
  std::filesystem::path out;
  bool resume = false;
  bool quiet = false;
};

/// Fits u_0 only and stores it as checkpoint 0 (time-stepping methods).
void fit_initial_condition(const RunConfig& config, const RunOptions& options);

/// Runs every configured dimension; writes checkpoints, logs, reports and
/// plots and returns one report per dimension.
std::vector<ErrorReport> run(const RunConfig& config, const RunOptions& options);

/// Re-evaluates stored checkpoints.
std::vector<ErrorReport> evaluate_run(const RunConfig& config, const RunOptions& options);

/// Published reference values (relative L2, max, mean) of a method at d.
struct Reference {
  double relative_l2, max_error, mean_error;
};
std::optional<Reference> published_reference(Method method, int d);

/// Reads <dir>/report.csv from every directory and writes the merged table.
/// Throws ConfigError listing the missing files.
void combined_report(const std::vector<std::filesystem::path>& dirs, std::ostream& csv, std::ostream* markdown);

}  // namespace gradflow::cli

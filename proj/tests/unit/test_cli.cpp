#include "doctest.h"

#include "gradflow/diagnostics.hpp"
#include "runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gradflow;
using namespace gradflow::cli;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

struct CapturedWarnings {
  std::vector<std::string> lines;
  diag::Sink previous;
  CapturedWarnings() {
    previous = diag::set_sink([this](const std::string& m) { lines.push_back(m); });
  }
  ~CapturedWarnings() { diag::set_sink(previous); }
};

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gradflow_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTinyJko = R"([run]
method = jko
frozen_clouds = true
[network]
blocks = 1
width = 4
[time]
tau = 0.25
final_time = 0.5
[sampling]
interior_per_dim = 10
initial_per_dim = 20
[train]
epochs = 3
schedule = 1e-3
optimizer = adam
[initial]
epochs = 5
schedule = 1e-2
optimizer = adam
[eval]
points = 64
)";

}  // namespace

TEST_CASE("configuration defaults and explicit values") {
  const RunConfig d = parse_config("");
  CHECK(d.method == Method::nitsche);
  CHECK(d.dimensions == std::vector<int>{2});

  const RunConfig c = parse_config(
      "[run]\nmethod = nitsche\ndimensions = 2, 3,5\nseed = 9\n[time]\ntau = 0.1\n"
      "[train]\nschedule = 1:1e-2,10:1e-3\noptimizer = adam\n[penalty]\nmode = max\nfactor = 500\n");
  CHECK(c.dimensions == std::vector<int>{2, 3, 5});
  CHECK(c.seed == 9);
  CHECK(c.tau == doctest::Approx(0.1));
  CHECK(c.train.schedule.rate(10) == doctest::Approx(1e-3));
  CHECK(c.train.optimizer.kind == OptimizerKind::adam);
  CHECK(c.penalty.mode == PenaltyMode::max);
  CHECK(c.nitsche(3).interior_points == 900);

  CHECK(parse_config("[run]\nmethod = jko\n").problem == ProblemFlavor::neumann_heat);
  CHECK(parse_config("[run]\nmethod = dgm\n").architecture(2).input_width == 3);
}

TEST_CASE("configuration errors name the offending key") {
  CHECK(error_of("[time]\ntau = -0.1\n").rfind("time.tau", 0) == 0);
  CHECK(error_of("[time]\ntau = 0.3\n").rfind("time.tau", 0) == 0);
  CHECK(error_of("[time]\ntau = abc\n").rfind("time.tau", 0) == 0);
  CHECK(error_of("[train]\nschedule = 1:1e-3,1:1e-4\n").rfind("train.schedule", 0) == 0);
  CHECK(error_of("[network]\nwdth = 3\n").rfind("network.wdth", 0) == 0);
  CHECK(error_of("[netwrk]\nwidth = 3\n").rfind("netwrk", 0) == 0);
  CHECK(error_of("[run]\nmethod = fem\n").rfind("run.method", 0) == 0);
  CHECK(error_of("[run]\nmethod = jko\nproblem = dirichlet-heat\n").rfind("run.problem", 0) == 0);
  CHECK(error_of("[run]\ndimensions = 2,0\n").rfind("run.dimensions", 0) == 0);
  CHECK(error_of("[jko]\ndebiased = maybe\n").rfind("jko.debiased", 0) == 0);
  CHECK(error_of("[run\n").find("malformed") != std::string::npos);
}

TEST_CASE("settings ignored by a method produce a warning") {
  CapturedWarnings w;
  parse_config("[run]\nmethod = jko\n[penalty]\nfactor = 3\n");
  REQUIRE(w.lines.size() == 1);
  CHECK(w.lines[0].find("[penalty]") != std::string::npos);
  w.lines.clear();
  parse_config("[run]\nmethod = nitsche\n[penalty]\nfactor = 3\n");
  CHECK(w.lines.empty());
}

TEST_CASE("formatted configurations and presets parse back unchanged") {
  CapturedWarnings quiet;
  for (const auto& p : presets()) {
    CAPTURE(p.name);
    const RunConfig c = parse_config(p.text);
    const std::string text = format_config(c);
    CHECK(format_config(parse_config(text)) == text);
    CHECK(quiet.lines.empty());
  }
  CHECK_THROWS_AS(find_preset("table9"), ConfigError);
  CHECK(find_preset("table1-desk").name == "table1-desk");
}

TEST_CASE("a run writes its artifacts and resumes to the same result") {
  const fs::path out = scratch_dir("run");
  const RunConfig c = parse_config(kTinyJko);
  const auto first = run(c, {out, false, true});
  REQUIRE(first.size() == 1);
  const fs::path dir = run_directory(out, Method::jko, 2);
  CHECK(dir == out / "jko-d2");
  for (const char* f : {"config.ini", "log.csv", "report.csv", "node_errors.csv", "error_vs_time.svg",
                        "loss_vs_epoch.svg", "checkpoints/u_0000.ckpt", "checkpoints/u_0002.ckpt"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / f));
  }
  CHECK(fs::exists(out / "report.csv"));
  CHECK(load_config(dir / "config.ini").tau == doctest::Approx(0.25));

  fs::remove(dir / "checkpoints" / "u_0002.ckpt");
  CHECK_THROWS_AS(evaluate_run(c, {out, false, true}), ConfigError);
  const auto resumed = run(c, {out, true, true});
  CHECK(resumed[0].relative_l2 == first[0].relative_l2);
  const auto again = evaluate_run(c, {out, false, true});
  CHECK(again[0].relative_l2 == first[0].relative_l2);

  // Header plus 5 initial-fit epochs and 3 epochs for each of the two steps,
  // with the resumed step appended once more.
  std::ifstream log(dir / "log.csv");
  int lines = 0;
  for (std::string s; std::getline(log, s);) ++lines;
  CHECK(lines == 1 + 5 + 3 + 3 + 3);

  CHECK_THROWS_AS(fit_initial_condition(parse_config("[run]\nmethod = dgm\n"), {out, false, true}), ConfigError);
}

TEST_CASE("fit-ic followed by a resumed solve matches a direct solve") {
  const RunConfig c = parse_config(kTinyJko);
  const fs::path a = scratch_dir("fit_a"), b = scratch_dir("fit_b");
  fit_initial_condition(c, {a, false, true});
  CHECK(fs::exists(run_directory(a, Method::jko, 2) / "checkpoints" / "u_0000.ckpt"));
  const auto staged = run(c, {a, true, true});
  const auto direct = run(c, {b, false, true});
  CHECK(staged[0].relative_l2 == direct[0].relative_l2);
}

TEST_CASE("combined report merges runs and attaches reference values") {
  const fs::path root = scratch_dir("report");
  const fs::path d2 = root / "nitsche-d2", d3 = root / "dgm-d2";
  fs::create_directories(d2);
  fs::create_directories(d3);
  ErrorReport r{.method = "nitsche", .dimension = 2, .relative_l2 = 0.02, .max_error = 0.01, .mean_error = 0.003};
  {
    std::ofstream f(d2 / "report.csv");
    write_report_csv({r}, f);
  }
  r.method = "dgm";
  r.relative_l2 = 0.1;
  {
    std::ofstream f(d3 / "report.csv");
    write_report_csv({r}, f);
  }
  std::ostringstream csv, md;
  combined_report({d2, d3}, csv, &md);
  const std::string s = csv.str();
  CHECK(s.find("2,dgm,0.1,0.01,0.003,0.099,0.087,0.034") != std::string::npos);
  CHECK(s.find("2,nitsche,0.02,0.01,0.003,0.016,0.0093,0.0029") != std::string::npos);
  CHECK(md.str().find("| 2 | nitsche |") != std::string::npos);

  CHECK_THROWS_AS(combined_report({}, csv, nullptr), ConfigError);
  try {
    combined_report({d2, root / "missing"}, csv, nullptr);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("missing/report.csv") != std::string::npos);
  }
  CHECK_FALSE(published_reference(Method::nitsche, 7).has_value());
  CHECK(published_reference(Method::jko, 50)->relative_l2 == doctest::Approx(2.5e-3));
}

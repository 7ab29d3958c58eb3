#include "runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace fs = std::filesystem;
using namespace gradflow::cli;

namespace {

struct Source {
  std::string config, preset;
  std::vector<int> dims;
  long long seed = -1;
};

RunConfig resolve(const Source& s) {
  if (!s.config.empty() && !s.preset.empty()) throw ConfigError("give either --config or --preset, not both");
  RunConfig c;
  if (!s.config.empty()) c = load_config(s.config);
  else if (!s.preset.empty()) c = parse_config(find_preset(s.preset).text);
  else throw ConfigError("no configuration: pass --config FILE or --preset NAME (see 'gradflow preset list')");
  if (!s.dims.empty()) c.dimensions = s.dims;
  if (s.seed >= 0) c.seed = static_cast<std::uint64_t>(s.seed);
  return c;
}

void add_source(CLI::App* app, Source& s) {
  app->add_option("-c,--config", s.config, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("-p,--preset", s.preset, "built-in configuration");
  app->add_option("-d,--dims", s.dims, "override run.dimensions")->delimiter(',');
  app->add_option("-s,--seed", s.seed, "override run.seed")->check(CLI::NonNegativeNumber);
}

void print(const std::vector<gradflow::ErrorReport>& reports) {
  gradflow::write_report_csv(reports, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Tape buffers are freed and reallocated every epoch.
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  CLI::App app{"Neural gradient-flow solvers for parabolic problems"};
  app.require_subcommand(1);

  const char* env_out = std::getenv("GRADFLOW_OUT");
  std::string out = env_out && *env_out ? env_out : "runs";
  bool quiet = false, resume = false;
  app.add_option("-o,--out", out, "output root (default $GRADFLOW_OUT or ./runs)");
  app.add_flag("-q,--quiet", quiet, "no progress output");

  Source src;
  auto* fit = app.add_subcommand("fit-ic", "fit the initial condition and store checkpoint 0");
  add_source(fit, src);
  auto* solve = app.add_subcommand("solve", "run a configuration");
  add_source(solve, src);
  solve->add_flag("-r,--resume", resume, "continue from stored checkpoints");
  auto* eval = app.add_subcommand("eval", "re-evaluate stored checkpoints");
  add_source(eval, src);

  std::vector<std::string> dirs;
  std::string markdown;
  auto* report = app.add_subcommand("report", "merge report.csv files of run directories");
  report->add_option("dirs", dirs, "run directories")->required();
  report->add_option("--markdown", markdown, "also write a markdown table here");

  auto* preset = app.add_subcommand("preset", "inspect built-in configurations");
  preset->require_subcommand(1);
  auto* list = preset->add_subcommand("list", "list presets");
  std::string show_name;
  auto* show = preset->add_subcommand("show", "print a preset as INI");
  show->add_option("name", show_name)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const RunOptions options{out, resume, quiet};
    if (*fit) {
      fit_initial_condition(resolve(src), options);
    } else if (*solve) {
      print(run(resolve(src), options));
    } else if (*eval) {
      print(evaluate_run(resolve(src), options));
    } else if (*report) {
      std::vector<fs::path> paths(dirs.begin(), dirs.end());
      if (markdown.empty()) {
        combined_report(paths, std::cout, nullptr);
      } else {
        std::ofstream md(markdown);
        if (!md) throw ConfigError("cannot write " + markdown);
        combined_report(paths, std::cout, &md);
      }
    } else if (*list) {
      for (const auto& p : presets()) std::cout << p.name << "\t" << p.description << "\n";
    } else if (*show) {
      std::cout << format_config(parse_config(find_preset(show_name).text));
    }
  } catch (const ConfigError& e) {
    std::cerr << "gradflow: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gradflow: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

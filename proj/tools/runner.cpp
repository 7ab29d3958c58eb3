#include "runner.hpp"

#include "svg_plot.hpp"

#include "gradflow/diagnostics.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace gradflow::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

using Clock = std::chrono::steady_clock;

// Every accepted key, by section.
const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"run", {"method", "problem", "dimensions", "seed", "frozen_clouds"}},
      {"network", {"blocks", "width", "activation"}},
      {"time", {"final_time", "tau"}},
      {"sampling", {"interior_per_dim", "per_face", "initial_per_dim"}},
      {"train", {"epochs", "schedule", "optimizer", "tol"}},
      {"initial", {"epochs", "schedule", "optimizer", "tol"}},
      {"penalty", {"mode", "factor", "floor", "matching"}},
      {"nitsche", {"l2_weight"}},
      {"jko", {"epsilon", "debiased", "density_floor", "mass_weight", "sinkhorn_tol", "sinkhorn_max_iterations"}},
      {"eval", {"points", "seed"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }
  bool has_section(const std::string& s) const { return tree_.get_child_optional(s).has_value(); }

  template <typename F>
  void read(const std::string& key, F&& apply) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return;
    try {
      apply(trim(*v));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what() + " (value '" + trim(*v) + "')");
    }
  }

 private:
  const pt::ptree& tree_;
};

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number");
  return v;
}

long long to_integer(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<int> to_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string cell;
  while (std::getline(in, cell, ',')) out.push_back(static_cast<int>(to_integer(trim(cell))));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

MatchPolicy parse_match_policy(const std::string& s) {
  if (s == "strict") return MatchPolicy::strict;
  if (s == "recycle") return MatchPolicy::recycle;
  throw std::invalid_argument("unknown matching policy");
}

std::string match_policy_name(MatchPolicy p) { return p == MatchPolicy::strict ? "strict" : "recycle"; }

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

void read_train(const Reader& r, const std::string& section, TrainConfig& t) {
  r.read(section + ".epochs", [&](const std::string& v) { t.epochs = static_cast<int>(to_integer(v)); });
  r.read(section + ".schedule", [&](const std::string& v) { t.schedule = LrSchedule::parse(v); });
  r.read(section + ".optimizer", [&](const std::string& v) { t.optimizer.kind = parse_optimizer(v); });
  r.read(section + ".tol", [&](const std::string& v) { t.tol = to_double(v); });
  require(t.epochs >= 1, section + ".epochs", "must be at least 1");
  require(t.tol >= 0.0, section + ".tol", "must be non-negative");
}

void validate(const RunConfig& c, const Reader& r) {
  require(!c.dimensions.empty(), "run.dimensions", "needs at least one dimension");
  for (int d : c.dimensions) require(d >= 1, "run.dimensions", "dimensions must be positive");
  require(c.blocks >= 0, "network.blocks", "must be non-negative");
  require(c.width >= 1, "network.width", "must be positive");
  require(c.final_time > 0.0, "time.final_time", "must be positive");
  require(c.tau > 0.0, "time.tau", "must be positive");
  require(c.tau <= c.final_time, "time.tau", "must not exceed time.final_time");
  require(std::abs(c.final_time / c.tau - std::round(c.final_time / c.tau)) < 1e-9, "time.tau",
          "must divide time.final_time");
  require(c.interior_per_dim >= 1, "sampling.interior_per_dim", "must be positive");
  require(c.per_face >= 0, "sampling.per_face", "must be non-negative");
  require(c.initial_per_dim >= 1, "sampling.initial_per_dim", "must be positive");
  require(c.penalty.factor > 0.0, "penalty.factor", "must be positive");
  require(c.penalty.floor >= 0.0, "penalty.floor", "must be non-negative");
  require(c.l2_weight > 0.0, "nitsche.l2_weight", "must be positive");
  require(c.epsilon >= 0.0, "jko.epsilon", "must be non-negative (0 selects the default)");
  require(c.density_floor > 0.0, "jko.density_floor", "must be positive");
  require(c.mass_weight >= 0.0, "jko.mass_weight", "must be non-negative");
  require(c.sinkhorn_tol > 0.0, "jko.sinkhorn_tol", "must be positive");
  require(c.sinkhorn_max_iterations >= 1, "jko.sinkhorn_max_iterations", "must be positive");
  require(c.evaluation.points_per_node >= 1, "eval.points", "must be positive");

  if (c.method == Method::jko) {
    require(c.problem == ProblemFlavor::neumann_heat, "run.problem", "the jko method needs the neumann-heat problem");
  }
  if (c.method == Method::dgm && r.has("run.frozen_clouds") && c.frozen_clouds) {
    // Accepted: frozen clouds make the space-time fit deterministic as well.
  }
  auto ignored = [&](const std::string& section) {
    if (r.has_section(section)) diag::warn("config: section [" + section + "] is ignored by the " + to_string(c.method) + " method");
  };
  if (c.method != Method::nitsche) {
    ignored("penalty");
    ignored("nitsche");
  }
  if (c.method != Method::jko) ignored("jko");
  if (c.method == Method::dgm) ignored("initial");
}

std::string checkpoint_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u_%04d.ckpt", k);
  return buf;
}

std::vector<Network> load_checkpoints(const fs::path& dir, int max_count) {
  std::vector<Network> out;
  for (int k = 0; k < max_count; ++k) {
    const fs::path p = dir / checkpoint_name(k);
    if (!fs::exists(p)) break;
    out.push_back(checkpoint_load(p));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_reports(const fs::path& path, const std::vector<ErrorReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_report_csv(reports, out);
}

void write_log(const fs::path& path, const std::vector<EpochRecord>& log, LogFormat format, bool append) {
  std::ostringstream text;
  write_log_csv(log, format, text);
  std::string s = text.str();
  const bool exists = fs::exists(path);
  if (append && exists) s = s.substr(s.find('\n') + 1);
  std::ofstream out(path, append && exists ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << s;
}

void write_plots(const fs::path& dir, const ErrorReport& report, const std::vector<EpochRecord>& log,
                 const std::string& title) {
  LinePlot err{title + ": relative L2 error per time node", "t", "relative L2 error", true, {}};
  err.series.push_back({"d = " + std::to_string(report.dimension), report.times, report.node_relative});
  std::ofstream e(dir / "error_vs_time.svg");
  write_svg(err, e);

  LinePlot loss{title + ": training loss", "epoch (cumulative)", "loss", true, {}};
  Series s{"loss", {}, {}};
  for (std::size_t i = 0; i < log.size(); ++i) {
    s.x.push_back(static_cast<double>(i + 1));
    s.y.push_back(std::abs(log[i].loss));
  }
  loss.series.push_back(std::move(s));
  std::ofstream l(dir / "loss_vs_epoch.svg");
  write_svg(loss, l);
}

// Drops an unchanged initial fit from the loss plot when resuming.
std::vector<EpochRecord> read_log_losses(const fs::path& path) {
  std::vector<EpochRecord> out;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return out;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string step, epoch, loss;
    std::getline(row, step, ',');
    std::getline(row, epoch, ',');
    std::getline(row, loss, ',');
    if (loss.empty()) continue;
    EpochRecord r;
    r.step = std::stoi(step);
    r.epoch = std::stoi(epoch);
    r.loss = std::stod(loss);
    out.push_back(r);
  }
  return out;
}

std::string method_title(Method m) {
  switch (m) {
    case Method::nitsche: return "time deep Nitsche";
    case Method::jko: return "deep Wasserstein";
    case Method::dgm: return "DGM";
  }
  return "";
}

RunConfig single_dimension(const RunConfig& c, int d) {
  RunConfig one = c;
  one.dimensions = {d};
  return one;
}

void progress(const RunOptions& o, const std::string& line) {
  if (!o.quiet) std::cerr << line << std::endl;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::nitsche: return "nitsche";
    case Method::jko: return "jko";
    case Method::dgm: return "dgm";
  }
  return "";
}

Method parse_method(const std::string& s) {
  if (s == "nitsche") return Method::nitsche;
  if (s == "jko") return Method::jko;
  if (s == "dgm") return Method::dgm;
  throw std::invalid_argument("unknown method '" + s + "' (nitsche, jko, dgm)");
}

Architecture RunConfig::architecture(int d) const {
  return Architecture{method == Method::dgm ? d + 1 : d, 1, blocks, width, activation};
}

Problem RunConfig::make_problem(int d) const {
  Problem p = gradflow::make_problem(problem, d);
  p.final_time = final_time;
  return p;
}

TimeGrid RunConfig::grid() const { return TimeGrid::uniform(final_time, tau); }

NitscheConfig RunConfig::nitsche(int d) const {
  NitscheConfig c;
  c.interior_points = interior_per_dim * d;
  c.per_face = per_face;
  c.penalty = penalty;
  c.l2_weight = l2_weight;
  c.train = train;
  c.initial.interior_points = initial_per_dim * d;
  c.initial.train = initial;
  c.initial.frozen_clouds = frozen_clouds;
  c.frozen_clouds = frozen_clouds;
  c.seed = seed;
  return c;
}

JkoConfig RunConfig::jko(int d) const {
  JkoConfig c;
  c.interior_points = interior_per_dim * d;
  c.epsilon = epsilon;
  c.sinkhorn.tol = sinkhorn_tol;
  c.sinkhorn.max_iterations = sinkhorn_max_iterations;
  c.density_floor = density_floor;
  c.debiased = debiased;
  c.mass_weight = mass_weight;
  c.train = train;
  c.initial.interior_points = initial_per_dim * d;
  c.initial.train = initial;
  c.initial.frozen_clouds = frozen_clouds;
  c.frozen_clouds = frozen_clouds;
  c.seed = seed;
  return c;
}

DgmConfig RunConfig::dgm(int d) const {
  DgmConfig c;
  c.interior_points = interior_per_dim * (d + 1);
  c.per_face = per_face;
  c.initial_points = initial_per_dim * d;
  c.train = train;
  c.frozen_clouds = frozen_clouds;
  c.seed = seed;
  return c;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed configuration: " + std::string(e.what()));
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError(section + ": keys must live in a section");
      throw ConfigError(section + ": unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError(section + "." + key + ": unknown key");
    }
  }

  const Reader r(tree);
  RunConfig c;
  r.read("run.method", [&](const std::string& v) { c.method = parse_method(v); });
  // Defaults that depend on the method.
  if (c.method == Method::jko) c.problem = ProblemFlavor::neumann_heat;
  r.read("run.problem", [&](const std::string& v) { c.problem = parse_problem_flavor(v); });
  r.read("run.dimensions", [&](const std::string& v) { c.dimensions = to_int_list(v); });
  r.read("run.seed", [&](const std::string& v) {
    const long long s = to_integer(v);
    if (s < 0) throw std::invalid_argument("must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  });
  r.read("run.frozen_clouds", [&](const std::string& v) { c.frozen_clouds = to_bool(v); });
  r.read("network.blocks", [&](const std::string& v) { c.blocks = static_cast<int>(to_integer(v)); });
  r.read("network.width", [&](const std::string& v) { c.width = static_cast<int>(to_integer(v)); });
  r.read("network.activation", [&](const std::string& v) { c.activation = parse_activation(v); });
  r.read("time.final_time", [&](const std::string& v) { c.final_time = to_double(v); });
  r.read("time.tau", [&](const std::string& v) { c.tau = to_double(v); });
  r.read("sampling.interior_per_dim", [&](const std::string& v) { c.interior_per_dim = to_integer(v); });
  r.read("sampling.per_face", [&](const std::string& v) { c.per_face = to_integer(v); });
  r.read("sampling.initial_per_dim", [&](const std::string& v) { c.initial_per_dim = to_integer(v); });
  read_train(r, "train", c.train);
  read_train(r, "initial", c.initial);
  r.read("penalty.mode", [&](const std::string& v) { c.penalty.mode = parse_penalty_mode(v); });
  r.read("penalty.factor", [&](const std::string& v) { c.penalty.factor = to_double(v); });
  r.read("penalty.floor", [&](const std::string& v) { c.penalty.floor = to_double(v); });
  r.read("penalty.matching", [&](const std::string& v) { c.penalty.matching = parse_match_policy(v); });
  r.read("nitsche.l2_weight", [&](const std::string& v) { c.l2_weight = to_double(v); });
  r.read("jko.epsilon", [&](const std::string& v) { c.epsilon = to_double(v); });
  r.read("jko.debiased", [&](const std::string& v) { c.debiased = to_bool(v); });
  r.read("jko.density_floor", [&](const std::string& v) { c.density_floor = to_double(v); });
  r.read("jko.mass_weight", [&](const std::string& v) { c.mass_weight = to_double(v); });
  r.read("jko.sinkhorn_tol", [&](const std::string& v) { c.sinkhorn_tol = to_double(v); });
  r.read("jko.sinkhorn_max_iterations",
         [&](const std::string& v) { c.sinkhorn_max_iterations = static_cast<int>(to_integer(v)); });
  r.read("eval.points", [&](const std::string& v) { c.evaluation.points_per_node = to_integer(v); });
  r.read("eval.seed", [&](const std::string& v) { c.evaluation.seed = static_cast<std::uint64_t>(to_integer(v)); });
  validate(c, r);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto list = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  auto train = [&](const char* name, const TrainConfig& t) {
    o << "\n[" << name << "]\nepochs = " << t.epochs << "\nschedule = " << t.schedule.str()
      << "\noptimizer = " << to_string(t.optimizer.kind) << "\ntol = " << t.tol << "\n";
  };
  o << "[run]\nmethod = " << to_string(c.method) << "\nproblem = " << to_string(c.problem)
    << "\ndimensions = " << list(c.dimensions) << "\nseed = " << c.seed
    << "\nfrozen_clouds = " << (c.frozen_clouds ? "true" : "false") << "\n";
  o << "\n[network]\nblocks = " << c.blocks << "\nwidth = " << c.width << "\nactivation = " << to_string(c.activation)
    << "\n";
  o << "\n[time]\nfinal_time = " << c.final_time << "\ntau = " << c.tau << "\n";
  o << "\n[sampling]\ninterior_per_dim = " << c.interior_per_dim << "\nper_face = " << c.per_face
    << "\ninitial_per_dim = " << c.initial_per_dim << "\n";
  train("train", c.train);
  if (c.method != Method::dgm) train("initial", c.initial);
  if (c.method == Method::nitsche) {
    o << "\n[penalty]\nmode = " << to_string(c.penalty.mode) << "\nfactor = " << c.penalty.factor
      << "\nfloor = " << c.penalty.floor << "\nmatching = " << match_policy_name(c.penalty.matching) << "\n";
    o << "\n[nitsche]\nl2_weight = " << c.l2_weight << "\n";
  }
  if (c.method == Method::jko) {
    o << "\n[jko]\nepsilon = " << c.epsilon << "\ndebiased = " << (c.debiased ? "true" : "false")
      << "\ndensity_floor = " << c.density_floor << "\nmass_weight = " << c.mass_weight
      << "\nsinkhorn_tol = " << c.sinkhorn_tol << "\nsinkhorn_max_iterations = " << c.sinkhorn_max_iterations << "\n";
  }
  o << "\n[eval]\npoints = " << c.evaluation.points_per_node << "\nseed = " << c.evaluation.seed << "\n";
  return o.str();
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> p = {
      {"table1-desk", "time deep Nitsche on the sine problem, d = 2, 3, reduced budget (CI scale)",
       R"([run]
method = nitsche
problem = dirichlet-heat
dimensions = 2,3
seed = 1

[network]
blocks = 2
width = 20
activation = tanh

[time]
final_time = 1
tau = 0.05

[sampling]
interior_per_dim = 300
per_face = 150
initial_per_dim = 300

[train]
epochs = 300
schedule = 1:1e-3,200:1e-4
optimizer = adam

[initial]
epochs = 500
schedule = 1e-2
optimizer = adam

[penalty]
mode = pointwise
factor = 8
)"},
      {"table2-desk", "DGM on the sine problem, d = 2, reduced budget (width 20, 10,000 epochs)",
       R"([run]
method = dgm
problem = dirichlet-heat
dimensions = 2
seed = 1

[network]
blocks = 2
width = 20
activation = tanh

[time]
final_time = 1
tau = 0.05

[sampling]
interior_per_dim = 600
per_face = 150
initial_per_dim = 300

[train]
epochs = 10000
schedule = 1:1e-3,6000:1e-4
optimizer = adam
tol = 0
)"},
      {"table3-desk", "deep Wasserstein on the cosine-product problem, d = 2, 10, reduced budget",
       R"([run]
method = jko
problem = neumann-heat
dimensions = 2,10
seed = 1
frozen_clouds = true

[network]
blocks = 2
width = 20
activation = tanh

[time]
final_time = 1
tau = 0.01

[sampling]
interior_per_dim = 40
initial_per_dim = 200

[train]
epochs = 50
schedule = 1e-4
optimizer = adam
tol = 0

[initial]
epochs = 2000
schedule = 1:1e-3,1000:1e-4
optimizer = adam

[jko]
debiased = true
)"},
      {"table1-full", "time deep Nitsche as published: d = 2..20, 3 x 50 ReLU, tau = 0.01, 50k + 100 x 2k epochs",
       R"([run]
method = nitsche
problem = dirichlet-heat
dimensions = 2,3,5,10,20

[network]
blocks = 3
width = 50
activation = relu

[time]
final_time = 1
tau = 0.01

[sampling]
interior_per_dim = 600
per_face = 600
initial_per_dim = 600

[train]
epochs = 2000
schedule = 1:1e-3,500:1e-4
optimizer = sgd

[initial]
epochs = 50000
schedule = 1:1e-2,10000:1e-3,40000:1e-4
optimizer = sgd

[penalty]
mode = max
factor = 500

[nitsche]
l2_weight = 1
)"},
      {"table2-full", "DGM as published: d = 2..20, 3 x 50 ReLU, 200k epochs",
       R"([run]
method = dgm
problem = dirichlet-heat
dimensions = 2,3,5,10,20

[network]
blocks = 3
width = 50
activation = relu

[time]
final_time = 1
tau = 0.01

[sampling]
interior_per_dim = 600
per_face = 600
initial_per_dim = 600

[train]
epochs = 200000
schedule = 1:1e-2,10000:1e-3,40000:1e-4
optimizer = sgd
tol = 0
)"},
      {"table3-full", "deep Wasserstein as published: d = 2..50, 3 x 50 ReLU, 100d points, 100 epochs per step",
       R"([run]
method = jko
problem = neumann-heat
dimensions = 2,3,5,10,20,40,50

[network]
blocks = 3
width = 50
activation = relu

[time]
final_time = 1
tau = 0.01

[sampling]
interior_per_dim = 100
initial_per_dim = 100

[train]
epochs = 100
schedule = 1e-5
optimizer = sgd

[initial]
epochs = 4000
schedule = 1:1e-3,2000:1e-4
optimizer = sgd
)"},
  };
  return p;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string names;
  for (const auto& p : presets()) names += " " + p.name;
  throw ConfigError("unknown preset '" + name + "'; available:" + names);
}

fs::path run_directory(const fs::path& root, Method method, int d) {
  return root / (to_string(method) + "-d" + std::to_string(d));
}

void fit_initial_condition(const RunConfig& config, const RunOptions& options) {
  if (config.method == Method::dgm) throw ConfigError("run.method: fit-ic applies to the time-stepping methods only");
  for (int d : config.dimensions) {
    const fs::path dir = run_directory(options.out, config.method, d);
    fs::create_directories(dir / "checkpoints");
    write_text(dir / "config.ini", format_config(single_dimension(config, d)));
    const FitConfig fit = config.method == Method::nitsche ? config.nitsche(d).initial : config.jko(d).initial;
    std::vector<EpochRecord> log;
    TrainResult r;
    const auto start = Clock::now();
    const Network u0 = fit_initial(config.make_problem(d), config.architecture(d), fit, config.seed, &log, &r);
    checkpoint_save(u0, dir / "checkpoints" / checkpoint_name(0));
    write_log(dir / "log.csv", log, config.method == Method::jko ? LogFormat::jko : LogFormat::nitsche, false);
    progress(options, "d=" + std::to_string(d) + " initial fit: loss " + std::to_string(r.initial_loss) + " -> " +
                          std::to_string(r.final_loss) + " in " + std::to_string(r.epochs) + " epochs, " +
                          std::to_string(std::chrono::duration<double>(Clock::now() - start).count()) + " s");
  }
}

std::vector<ErrorReport> run(const RunConfig& config, const RunOptions& options) {
  std::vector<ErrorReport> reports;
  for (int d : config.dimensions) {
    const fs::path dir = run_directory(options.out, config.method, d);
    const fs::path ckpt = dir / "checkpoints";
    fs::create_directories(ckpt);
    write_text(dir / "config.ini", format_config(single_dimension(config, d)));
    const Problem problem = config.make_problem(d);
    const Architecture arch = config.architecture(d);
    const TimeGrid grid = config.grid();
    const auto start = Clock::now();
    ErrorReport report;
    std::vector<EpochRecord> log;
    const std::string tag = to_string(config.method) + " d=" + std::to_string(d);

    if (config.method == Method::dgm) {
      Network net;
      const fs::path file = ckpt / "network.ckpt";
      if (options.resume && fs::exists(file)) {
        net = checkpoint_load(file);
        if (!(net.architecture() == arch)) throw ConfigError("checkpoint " + file.string() + " has another architecture");
        progress(options, tag + ": resumed from the finished checkpoint");
      } else {
        const auto on_progress = [&](int epoch, double loss) {
          std::ostringstream line;
          line << tag << " epoch " << epoch << "/" << config.train.epochs << ": loss " << loss << " ("
               << std::chrono::duration<double>(Clock::now() - start).count() << " s)";
          progress(options, line.str());
        };
        DgmResult r = solve_dgm(problem, arch, config.dgm(d), on_progress);
        checkpoint_save(r.network, file);
        write_log(dir / "log.csv", r.log, LogFormat::nitsche, false);
        net = std::move(r.network);
        progress(options, tag + ": loss " + std::to_string(r.train.final_loss) + " after " +
                              std::to_string(r.train.epochs) + " epochs");
      }
      report = evaluate(space_time_approximation(net), problem, grid, config.evaluation);
    } else {
      std::vector<Network> resume;
      if (options.resume) resume = load_checkpoints(ckpt, grid.steps() + 1);
      if (!resume.empty()) progress(options, tag + ": resuming after " + std::to_string(resume.size()) + " checkpoints");
      const bool appending = !resume.empty();
      const StepCallback on_step = [&](int k, const Network& net, const StepSummary& s) {
        checkpoint_save(net, ckpt / checkpoint_name(k));
        std::ostringstream line;
        line << tag << " step " << k << "/" << grid.steps() << ": loss " << s.initial_loss << " -> " << s.final_loss
             << " (" << s.epochs << " epochs, " << s.seconds << " s)" << (s.diverged ? " DIVERGED" : "");
        progress(options, line.str());
      };
      Trajectory traj = config.method == Method::nitsche
                            ? solve(problem, arch, grid, config.nitsche(d), on_step, std::move(resume))
                            : solve_jko(problem, arch, grid, config.jko(d), on_step, std::move(resume));
      write_log(dir / "log.csv", traj.log, config.method == Method::jko ? LogFormat::jko : LogFormat::nitsche,
                appending);
      log = std::move(traj.log);
      report = evaluate(trajectory_approximation(traj), problem, grid, config.evaluation);
    }
    report.method = to_string(config.method);
    report.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (fs::exists(dir / "log.csv")) log = read_log_losses(dir / "log.csv");
    write_reports(dir / "report.csv", {report});
    {
      std::ofstream nodes(dir / "node_errors.csv");
      write_node_errors_csv(report, nodes);
    }
    write_plots(dir, report, log, method_title(config.method) + ", d = " + std::to_string(d));
    progress(options, tag + ": relative L2 " + std::to_string(report.relative_l2) + ", max " +
                          std::to_string(report.max_error) + ", mean " + std::to_string(report.mean_error));
    reports.push_back(report);
  }
  write_reports(options.out / "report.csv", reports);
  return reports;
}

std::vector<ErrorReport> evaluate_run(const RunConfig& config, const RunOptions& options) {
  std::vector<ErrorReport> reports;
  for (int d : config.dimensions) {
    const fs::path dir = run_directory(options.out, config.method, d);
    const Problem problem = config.make_problem(d);
    const TimeGrid grid = config.grid();
    ErrorReport report;
    if (config.method == Method::dgm) {
      const fs::path file = dir / "checkpoints" / "network.ckpt";
      if (!fs::exists(file)) throw ConfigError("missing checkpoint " + file.string());
      report = evaluate(space_time_approximation(checkpoint_load(file)), problem, grid, config.evaluation);
    } else {
      Trajectory traj{grid, load_checkpoints(dir / "checkpoints", grid.steps() + 1), {}, {}};
      if (static_cast<int>(traj.networks.size()) != grid.steps() + 1) {
        throw ConfigError(dir.string() + ": found " + std::to_string(traj.networks.size()) + " of " +
                          std::to_string(grid.steps() + 1) + " checkpoints; finish the run with --resume");
      }
      report = evaluate(trajectory_approximation(traj), problem, grid, config.evaluation);
    }
    report.method = to_string(config.method);
    if (fs::exists(dir / "report.csv")) {
      std::ifstream in(dir / "report.csv");
      const auto old = read_report_csv(in);
      if (!old.empty()) report.runtime_seconds = old.front().runtime_seconds;
    }
    write_reports(dir / "report.csv", {report});
    std::ofstream nodes(dir / "node_errors.csv");
    write_node_errors_csv(report, nodes);
    reports.push_back(report);
  }
  write_reports(options.out / "report.csv", reports);
  return reports;
}

std::optional<Reference> published_reference(Method method, int d) {
  static const std::map<int, Reference> nitsche = {{2, {1.6e-2, 9.3e-3, 2.9e-3}},
                                                   {3, {4.7e-3, 7.2e-3, 1.3e-3}},
                                                   {5, {2.0e-3, 1.5e-3, 2.9e-4}},
                                                   {10, {3.5e-3, 1.9e-3, 2.4e-4}},
                                                   {20, {4.2e-3, 3.4e-3, 3.7e-4}}};
  static const std::map<int, Reference> dgm = {{2, {9.9e-2, 8.7e-2, 3.4e-2}},
                                               {3, {9.3e-2, 1.0e-1, 3.2e-2}},
                                               {5, {1.2e-1, 1.2e-1, 2.8e-2}},
                                               {10, {4.5e-1, 2.9e-1, 1.5e-1}},
                                               {20, {4.7e-1, 4.2e-1, 1.3e-1}}};
  static const std::map<int, Reference> jko = {{2, {8.7e-2, 1.0e-1, 8.5e-2}},  {3, {1.7e-1, 4.8e-1, 1.3e-1}},
                                               {5, {8.6e-2, 4.2e-1, 5.3e-2}},  {10, {8.2e-3, 3.9e-2, 6.8e-3}},
                                               {20, {4.0e-3, 6.8e-3, 4.0e-3}}, {40, {2.1e-3, 4.2e-3, 1.9e-3}},
                                               {50, {2.5e-3, 1.6e-2, 2.5e-3}}};
  const auto& table = method == Method::nitsche ? nitsche : method == Method::dgm ? dgm : jko;
  const auto it = table.find(d);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

void combined_report(const std::vector<fs::path>& dirs, std::ostream& csv, std::ostream* markdown) {
  if (dirs.empty()) throw ConfigError("report: no run directories given");
  std::vector<std::string> missing;
  std::vector<ErrorReport> rows;
  for (const auto& dir : dirs) {
    const fs::path file = dir / "report.csv";
    if (!fs::exists(file)) {
      missing.push_back(file.string());
      continue;
    }
    std::ifstream in(file);
    for (auto& r : read_report_csv(in)) rows.push_back(std::move(r));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw ConfigError("report: missing error reports (expected report.csv in every run directory):" + list);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorReport& a, const ErrorReport& b) {
    return a.dimension != b.dimension ? a.dimension < b.dimension : a.method < b.method;
  });
  auto cell = [](std::optional<double> v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", *v);
    return std::string(buf);
  };
  csv << "d,method,L2 relative error,max error,mean error,published L2 relative error,published max error,published mean error\n";
  if (markdown) {
    *markdown << "| d | method | L2 relative error | max error | mean error | published L2 relative error | published max error "
                 "| published mean error |\n|---|---|---|---|---|---|---|---|\n";
  }
  for (const auto& r : rows) {
    std::optional<Reference> ref;
    try {
      ref = published_reference(parse_method(r.method), r.dimension);
    } catch (const std::invalid_argument&) {
    }
    const std::string cells[] = {cell(r.relative_l2),
                                 cell(r.max_error),
                                 cell(r.mean_error),
                                 ref ? cell(ref->relative_l2) : "",
                                 ref ? cell(ref->max_error) : "",
                                 ref ? cell(ref->mean_error) : ""};
    csv << r.dimension << ',' << r.method;
    for (const auto& c : cells) csv << ',' << c;
    csv << '\n';
    if (markdown) {
      *markdown << "| " << r.dimension << " | " << r.method;
      for (const auto& c : cells) *markdown << " | " << (c.empty() ? "–" : c);
      *markdown << " |\n";
    }
  }
}

}  // namespace gradflow::cli

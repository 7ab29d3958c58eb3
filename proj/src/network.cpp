#include "gradflow/network.hpp"

#include "gradflow/diagnostics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <vector>

namespace gradflow {

Index Architecture::parameter_count() const {
  const Index m = width, din = input_width, dout = output_width;
  return m * din + m + static_cast<Index>(blocks) * (4 * (m * din + m * m + m)) + dout * m + dout;
}

void Architecture::validate() const {
  if (input_width < 1) throw std::invalid_argument("architecture input width must be positive");
  if (output_width < 1) throw std::invalid_argument("architecture output width must be positive");
  if (width < 1) throw std::invalid_argument("architecture block width must be positive");
  if (blocks < 0) throw std::invalid_argument("architecture block count must be non-negative");
}

ParameterLayout::ParameterLayout(const Architecture& arch)
    : din_(arch.input_width),
      dout_(arch.output_width),
      m_(arch.width),
      gate_size_(m_ * din_ + m_ * m_ + m_),
      output_(m_ * din_ + m_ + static_cast<Index>(arch.blocks) * 4 * gate_size_) {}

Network::Network(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  theta_ = Eigen::VectorXd::Zero(arch_.parameter_count());
}

Network::Network(const Architecture& arch, Eigen::VectorXd parameters) : arch_(arch), theta_(std::move(parameters)) {
  arch_.validate();
  if (theta_.size() != arch_.parameter_count()) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(theta_.size()) + ", architecture needs " +
                                std::to_string(arch_.parameter_count()));
  }
}

void Network::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) throw std::invalid_argument("parameter vector length mismatch");
  theta_ = theta;
}

Network init_xavier(const Architecture& arch, std::uint64_t seed) {
  Network net(arch);
  const ParameterLayout lay(arch);
  std::mt19937_64 rng(seed);
  Eigen::VectorXd& theta = net.parameters();
  auto fill = [&](Index offset, Index rows, Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < rows * cols; ++i) theta(offset + i) = dist(rng);
  };
  const Index m = arch.width, din = arch.input_width;
  fill(lay.input_weight(), m, din);
  for (int l = 0; l < arch.blocks; ++l) {
    for (Gate g : {Gate::z, Gate::g, Gate::r, Gate::h}) {
      fill(lay.gate_u(l, g), m, din);
      fill(lay.gate_w(l, g), m, m);
    }
  }
  fill(lay.output_weight(), arch.output_width, m);
  return net;
}

Eigen::VectorXd forward(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  return evaluate_jet<double>(net, x, 0).value.row(0).transpose();
}

double forward_point(const Network& net, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::MatrixXd col = x;
  return evaluate_jet<double>(net, col, 0).value(0, 0);
}

ad::SpatialJet record_jet(ad::Tape& tape, const Network& net, const Eigen::MatrixXd& x, int order, int lap_first) {
  const Architecture& arch = net.architecture();
  if (x.rows() != arch.input_width) {
    throw std::invalid_argument("network input has dimension " + std::to_string(x.rows()) + ", expected " +
                                std::to_string(arch.input_width));
  }
  if (tape.parameters().size() != net.parameters().size()) {
    throw std::invalid_argument("tape parameters do not match the network");
  }
  const ParameterLayout lay(arch);
  const Index m = arch.width, din = arch.input_width;
  const ad::SpatialJet input = ad::input_jet(tape, x, order, lap_first);

  auto act = [&](const ad::SpatialJet& z) { return ad::activation(z, arch.activation); };
  ad::SpatialJet s = act(ad::add_bias(ad::linear(tape.parameter(lay.input_weight(), m, din), input),
                                      tape.parameter(lay.input_bias(), m, 1)));
  for (int l = 0; l < arch.blocks; ++l) {
    auto gate = [&](Gate g, const ad::SpatialJet& state) {
      const ad::SpatialJet ux = ad::linear(tape.parameter(lay.gate_u(l, g), m, din), input);
      const ad::SpatialJet ws = ad::linear(tape.parameter(lay.gate_w(l, g), m, m), state);
      return act(ad::add_bias(ad::add(ux, ws), tape.parameter(lay.gate_b(l, g), m, 1)));
    };
    const ad::SpatialJet z = gate(Gate::z, s);
    const ad::SpatialJet g = gate(Gate::g, s);
    const ad::SpatialJet r = gate(Gate::r, s);
    const ad::SpatialJet h = gate(Gate::h, ad::hadamard(s, r));
    s = ad::add(ad::hadamard(ad::one_minus(g), h), ad::hadamard(z, s));
  }
  return ad::add_bias(ad::linear(tape.parameter(lay.output_weight(), arch.output_width, m), s),
                      tape.parameter(lay.output_bias(), arch.output_width, 1));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "gradflow-checkpoint";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

void checkpoint_save(const Network& net, const std::filesystem::path& path) {
  const Architecture& a = net.architecture();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out << kMagic << '\n'
      << "version " << kCheckpointVersion << '\n'
      << "input_width " << a.input_width << '\n'
      << "output_width " << a.output_width << '\n'
      << "blocks " << a.blocks << '\n'
      << "width " << a.width << '\n'
      << "activation " << to_string(a.activation) << '\n'
      << "parameters " << net.parameters().size() << '\n'
      << "byte_order little\n"
      << "data\n";
  for (Index i = 0; i < net.parameters().size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(net.parameters()(i)));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Network checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CheckpointError("not a gradflow checkpoint: " + path.string());

  std::map<std::string, std::string> header;
  bool saw_data = false;
  while (std::getline(in, line)) {
    if (line == "data") {
      saw_data = true;
      break;
    }
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key >> value)) throw CheckpointError("malformed checkpoint header line: '" + line + "'");
    header[key] = value;
  }
  if (!saw_data) throw CheckpointError("checkpoint header is not terminated by 'data': " + path.string());

  auto field = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw CheckpointError("checkpoint header is missing '" + key + "'");
    return it->second;
  };
  auto integer = [&](const std::string& key) {
    try {
      return std::stoll(field(key));
    } catch (const std::logic_error&) {
      throw CheckpointError("checkpoint header field '" + key + "' is not an integer");
    }
  };

  if (integer("version") != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + field("version") + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (field("byte_order") != "little") throw CheckpointError("unsupported byte order '" + field("byte_order") + "'");

  Architecture arch;
  arch.input_width = static_cast<int>(integer("input_width"));
  arch.output_width = static_cast<int>(integer("output_width"));
  arch.blocks = static_cast<int>(integer("blocks"));
  arch.width = static_cast<int>(integer("width"));
  try {
    arch.activation = parse_activation(field("activation"));
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint architecture: ") + e.what());
  }
  const long long count = integer("parameters");
  if (count != arch.parameter_count()) {
    throw CheckpointError("checkpoint declares " + std::to_string(count) + " parameters but its architecture has " +
                          std::to_string(arch.parameter_count()));
  }

  const auto data_start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto data_bytes = static_cast<long long>(in.tellg() - data_start);
  const long long expected = count * 8;
  if (data_bytes != expected) {
    throw CheckpointError("checkpoint data length mismatch: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(data_bytes));
  }
  in.seekg(data_start);
  Eigen::VectorXd theta(count);
  std::vector<char> buf(static_cast<std::size_t>(expected));
  in.read(buf.data(), expected);
  if (!in) throw CheckpointError("failed reading checkpoint data: " + path.string());
  for (long long i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf.data() + 8 * i, 8);
    theta(i) = std::bit_cast<double>(to_little(bits));
  }
  return Network(arch, std::move(theta));
}

}  // namespace gradflow

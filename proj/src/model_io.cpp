#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "augforge/error.hpp"
#include "augforge/nn.hpp"

namespace augforge {

namespace {

constexpr std::string_view kMagic = "AUGFORGE-MLP";
constexpr std::string_view kVersion = "v1";

void put_le(std::ostream& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_le(const char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(bytes[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string read_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedModelError("model file truncated before " + std::string(what));
  return line;
}

// Returns the remainder after "key: " or throws.
std::string field(const std::string& line, std::string_view key) {
  const std::string prefix = std::string(key) + ":";
  if (line.rfind(prefix, 0) != 0) throw MalformedModelError("expected '" + prefix + "' line, got '" + line + "'");
  return line.substr(prefix.size());
}

}  // namespace

void write_model(std::ostream& out, const MlpModel& model) {
  model.validate();
  out << kMagic << ' ' << kVersion << '\n';
  out << "dims:";
  for (int d : model.layer_dims) out << ' ' << d;
  out << '\n';
  out << "act: " << to_string(model.hidden_activation) << ' ' << to_string(model.output_activation) << '\n';
  out << "bytes: " << model.parameter_count() * 8 << '\n';
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Matrix& w = model.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) put_le(out, w(r, c));
    for (Eigen::Index r = 0; r < model.biases[i].size(); ++r) put_le(out, model.biases[i](r));
  }
  if (!out) throw ModelFileError("failed writing model");
}

MlpModel read_model(std::istream& in) {
  const std::string header = read_line(in, "header");
  {
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != kMagic) throw MalformedModelError("not a model file (bad magic)");
    if (version != kVersion) throw ModelVersionError("unsupported model version '" + version + "'");
  }

  MlpModel model;
  {
    std::istringstream ds(field(read_line(in, "dims"), "dims"));
    long d;
    while (ds >> d) {
      if (d < 1 || d > (1 << 24)) throw MalformedModelError("bad layer dim " + std::to_string(d));
      model.layer_dims.push_back(static_cast<int>(d));
    }
    if (!ds.eof()) throw MalformedModelError("non-numeric dims line");
    if (model.layer_dims.size() < 2) throw MalformedModelError("dims line needs at least two entries");
  }
  {
    std::istringstream as(field(read_line(in, "act"), "act"));
    std::string hidden, output;
    if (!(as >> hidden >> output)) throw MalformedModelError("act line needs two tags");
    try {
      model.hidden_activation = parse_activation(hidden);
      model.output_activation = parse_activation(output);
    } catch (const ConfigError& e) {
      throw MalformedModelError(e.what());
    }
  }
  std::size_t declared = 0;
  {
    std::istringstream bs(field(read_line(in, "bytes"), "bytes"));
    if (!(bs >> declared)) throw MalformedModelError("bad byte count");
  }
  if (declared != model.parameter_count() * 8)
    throw ModelShapeError("byte count " + std::to_string(declared) + " does not match dims (" +
                          std::to_string(model.parameter_count() * 8) + " expected)");

  std::string payload(declared, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(declared));
  if (static_cast<std::size_t>(in.gcount()) != declared)
    throw MalformedModelError("model payload truncated: " + std::to_string(in.gcount()) + " of " +
                              std::to_string(declared) + " bytes");
  if (in.peek() != std::char_traits<char>::eof())
    throw ModelShapeError("trailing bytes after declared payload");

  const char* p = payload.data();
  for (std::size_t i = 0; i + 1 < model.layer_dims.size(); ++i) {
    Matrix w(model.layer_dims[i + 1], model.layer_dims[i]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c, p += 8) w(r, c) = get_le(p);
    Vector b(model.layer_dims[i + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r, p += 8) b(r) = get_le(p);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw MalformedModelError(e.what());
  }
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelFileError("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open " + path.string());
  return read_model(in);
}

std::uint64_t model_hash(const MlpModel& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (int d : model.layer_dims) mix(static_cast<std::uint64_t>(d));
  mix(static_cast<std::uint64_t>(model.hidden_activation));
  mix(static_cast<std::uint64_t>(model.output_activation));
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Matrix& w = model.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) mix(std::bit_cast<std::uint64_t>(w(r, c)));
    for (Eigen::Index r = 0; r < model.biases[i].size(); ++r)
      mix(std::bit_cast<std::uint64_t>(model.biases[i](r)));
  }
  return h;
}

}  // namespace augforge

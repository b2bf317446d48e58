#include "fromage/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace fromage {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw CheckpointError("checkpoint " + path.string() + ": truncated header");
  return v;
}

}  // namespace

nlohmann::json to_json(const MlpConfig& config) {
  return {
      {"widths", config.widths},
      {"nonlinearity", config.nonlinearity.kind == Activation::leaky_relu
                           ? "leaky_relu"
                           : config.nonlinearity.name()},
      {"leaky_slope", config.nonlinearity.slope},
      {"final_nonlinearity", config.final_nonlinearity},
      {"init", to_string(config.init)},
      {"init_scale", config.init_scale},
      {"seed", config.seed},
  };
}

MlpConfig mlp_config_from_json(const nlohmann::json& j) {
  MlpConfig config;
  config.widths = j.at("widths").get<std::vector<std::size_t>>();
  config.nonlinearity = Nonlinearity::parse(j.at("nonlinearity").get<std::string>(),
                                            j.value("leaky_slope", 1.0));
  config.final_nonlinearity = j.at("final_nonlinearity").get<bool>();
  config.init = parse_init_kind(j.at("init").get<std::string>());
  config.init_scale = j.at("init_scale").get<double>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.validate();
  return config;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint " + path.string() + ": cannot open for writing");
    out.write("FRMG", 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(net.depth()));
    for (std::size_t w : net.config().widths) put_u32(out, static_cast<std::uint32_t>(w));
    for (const Matrix& w : net.weights())
      out.write(reinterpret_cast<const char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!out) throw CheckpointError("checkpoint " + path.string() + ": write failed");
  }
  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) throw CheckpointError("checkpoint sidecar for " + path.string() + ": cannot open");
  side << to_json(net.config()).dump(2) << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint " + path.string() + ": cannot open");
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "FRMG", 4) != 0)
    throw CheckpointError("checkpoint " + path.string() + ": bad magic");
  const std::uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint " + path.string() + ": unsupported version " +
                          std::to_string(version));
  const std::uint32_t depth = get_u32(in, path);
  std::vector<std::size_t> widths(depth + 1);
  for (auto& w : widths) w = get_u32(in, path);

  std::ifstream side(sidecar_path(path));
  if (!side) throw CheckpointError("checkpoint " + path.string() + ": missing JSON sidecar");
  MlpConfig config = mlp_config_from_json(nlohmann::json::parse(side));
  if (config.widths != widths)
    throw CheckpointError("checkpoint " + path.string() + ": sidecar widths disagree with header");

  std::vector<Matrix> weights;
  for (std::uint32_t k = 0; k < depth; ++k) {
    Matrix w(widths[k + 1], widths[k]);
    if (!in.read(reinterpret_cast<char*>(w.data()),
                 static_cast<std::streamsize>(w.size() * sizeof(double))))
      throw CheckpointError("checkpoint " + path.string() + ": truncated payload in layer " +
                            std::to_string(k + 1));
    weights.push_back(std::move(w));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw CheckpointError("checkpoint " + path.string() + ": trailing bytes");
  return Mlp(std::move(config), std::move(weights));
}

}  // namespace fromage

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "fromage/net.hpp"

namespace fromage {

// Checkpoint layout (all integers little-endian):
//
//   bytes 0..3   magic "FRMG"
//   u32          format version (1)
//   u32          depth L
//   u32 x (L+1)  widths n_0 .. n_L
//   f64 ...      W_1 .. W_L, each row-major n_l x n_{l-1}, IEEE-754 little-endian
//
// The MlpConfig travels in a JSON sidecar at `<path>.json`.

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const MlpConfig& config);
MlpConfig mlp_config_from_json(const nlohmann::json& j);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace fromage

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "dio/model.hpp"
#include "dio/tensor.hpp"

namespace dio {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string tag;  // "best" / "last" / free-form
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::map<std::string, double> metrics;
  std::string config_json;  // resolved training config, may be empty
};

struct Checkpoint {
  DioModel model;
  CheckpointMeta meta;
};

/// File layout: the 8 bytes "DIOCKPT\0", a little-endian uint64 manifest
/// length, the JSON manifest, then every parameter as little-endian float64
/// in manifest order (backbone layers, then W_i, b_i per head).
void save_checkpoint(const std::filesystem::path& path, const DioModel& model,
                     const CheckpointMeta& meta);
/// Throws CheckpointError on a bad magic/version, shape mismatch or a blob
/// whose length disagrees with the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Single tensor, same framing with magic "DIOTENS\0".
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace dio

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dio/attacks.hpp"
#include "dio/trainer.hpp"

namespace dio {

/// Invalid configuration; field() names the offending key (dotted path).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

std::vector<std::string> preset_names();
/// Preset as a JSON document.
std::string preset_json(const std::string& name);
TrainConfig preset(const std::string& name);

/// Resolves a config document. Its "preset" key (default
/// "dio-vanilla-synth") supplies defaults, the document's own fields
/// override them, and DIO_SEED (when apply_env) overrides the seed.
/// Unknown keys, bad types and "beta > 0 without tau" raise ConfigError.
TrainConfig parse_config(const std::string& json_text, bool apply_env = true);
/// As above, then merges `overrides_json` (command-line flags) on top. The
/// override document wins over DIO_SEED when it sets "seed".
TrainConfig parse_config(const std::string& json_text, const std::string& overrides_json,
                         bool apply_env = true);
TrainConfig load_config(const std::filesystem::path& path, bool apply_env = true);

/// Reads DIO_SEED; ConfigError if set but not an unsigned integer.
std::optional<std::uint64_t> seed_from_env();

/// Fully resolved config as JSON (round-trips through parse_config).
std::string config_to_json(const TrainConfig& config);
std::string attack_to_json(const AttackSpec& spec);
AttackSpec attack_from_json(const std::string& json_text);

}  // namespace dio

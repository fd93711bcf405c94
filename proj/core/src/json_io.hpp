// JSON conversions shared by config, serialization and evaluation. Kept out
// of the public headers so installed consumers do not need nlohmann/json.
#pragma once

#include "json.hpp"

#include "dio/attacks.hpp"
#include "dio/datasets.hpp"
#include "dio/model.hpp"
#include "dio/trainer.hpp"

namespace dio::detail {

using nlohmann::json;

json to_json(const AttackSpec& spec);
AttackSpec attack_from_json(const json& j, const std::string& where);

json to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const json& j, const std::string& where);

json to_json(const DataSpec& data);
json to_json(const TrainConfig& config);

/// Parses a fully merged config document. Unknown keys, wrong types and
/// dependency violations raise ConfigError naming the field.
TrainConfig config_from_json(const json& j);

/// Infinity and NaN as JSON-friendly values ("inf" strings / null).
json number(double v);

}  // namespace dio::detail

#pragma once

#include <filesystem>

#include <json.hpp>

#include "ssmred/deep_ssm.hpp"
#include "ssmred/linalg.hpp"
#include "ssmred/mor.hpp"
#include "ssmred/training.hpp"

namespace ssmred {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

// Complex entries are [re, im] pairs; matrices are arrays of rows.
json to_json(const StateSpaceModel& ss);
StateSpaceModel state_space_from_json(const json& j);

json to_json(const LruParams& p);
LruParams lru_from_json(const json& j);

json to_json(const DeepSsmConfig& c);
DeepSsmConfig model_config_from_json(const json& j);

json to_json(const DeepSsm& m);
DeepSsm model_from_json(const json& j);

json to_json(const ReductionReport& r);

json to_json(const AdamWState& s);
AdamWState optimizer_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

void save_model(const DeepSsm& m, const std::filesystem::path& path);
DeepSsm load_model(const std::filesystem::path& path);

}  // namespace ssmred

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssmred/data.hpp"
#include "ssmred/deep_ssm.hpp"
#include "ssmred/mor.hpp"
#include "ssmred/training.hpp"

namespace ssmred {

struct SweepConfig {
    std::vector<ReductionMethod> methods{ReductionMethod::MT, ReductionMethod::MSP, ReductionMethod::BT,
                                         ReductionMethod::BSP};
    double fit_drop = 1.0;  // percentage points of average fit
    std::size_t grid_size = 512;
};

struct GradCheckConfig {
    std::size_t length = 16;
    std::size_t batch = 2;
    std::size_t n_skip = 2;
    double reg_strength = 0.1;
    double eps = 1e-5;
    double tolerance = 1e-5;
};

struct ExperimentConfig {
    DeepSsmConfig model;
    TrainConfig train;
    GenConfig gen;
    SweepConfig sweep;
    GradCheckConfig gradcheck;
};

/// `key = value` lines; `#` starts a comment. Keys are the DeepSsmConfig and
/// TrainConfig field names plus the gen/sweep/gradcheck keys listed in the
/// README. Unknown keys and malformed values are ConfigError with the line.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Serializes back to the key-value format; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& c);

}  // namespace ssmred

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssmred/config.hpp"
#include "ssmred/data.hpp"
#include "ssmred/deep_ssm.hpp"
#include "ssmred/mor.hpp"

namespace ssmred {

struct ReducedModel {
    DeepSsm model;
    std::vector<ReductionReport> reports;  // one per layer
};

/// Reduces every layer to min(r, its order). The config keeps its original
/// n_x; layer sizes are read from the parameters.
ReducedModel reduce_model(const DeepSsm& m, std::size_t r, ReductionMethod method,
                          const ReductionOptions& opts = {});

struct SweepRow {
    ReductionMethod method = ReductionMethod::MT;
    std::size_t r = 0;
    RVector fit;
    double avg_fit = 0.0;
    std::optional<double> bound;  // summed over layers, balanced methods only
};

struct SweepSummary {
    ReductionMethod method = ReductionMethod::MT;
    double full_fit = 0.0;
    std::size_t max_removed_per_layer = 0;
    std::size_t max_removed_total = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepSummary> summary;
};

/// r runs from the largest layer order down to 0 for each method. A method's
/// summary counts the largest removal whose average fit stays within
/// fit_drop percentage points of the unreduced fit.
SweepResult sweep(const DeepSsm& m, const std::vector<Sequence>& test, const SweepConfig& cfg,
                  std::size_t n_skip);

std::string sweep_csv(const SweepResult& s);

/// Plain-text table followed by nothing; callers print JSON separately.
std::string metrics_table(const Metrics& m);
nlohmann::json to_json(const Metrics& m);

/// Trains a fresh model, or continues from `init` and its optimizer state.
struct FitOutcome {
    DeepSsm model;
    TrainResult result;
};
FitOutcome fit_model(const ExperimentConfig& cfg, const std::vector<Sequence>& train_data,
                     const std::optional<DeepSsm>& init = std::nullopt,
                     const std::function<void(const StepLog&)>& on_step = {},
                     const std::optional<AdamWState>& resume = std::nullopt);

/// Optimizer sidecar of a checkpoint: model.json -> model.opt.json.
std::filesystem::path optimizer_sidecar(const std::filesystem::path& checkpoint);

GradCheckReport run_gradcheck(const ExperimentConfig& cfg, RegKind kind, std::uint64_t seed);

// Command entry points. Each returns a process exit code and writes
// human-readable progress to `out`.
int cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                 std::ostream& out);
int cmd_fit(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
            const std::optional<std::filesystem::path>& checkpoint, const std::filesystem::path& out_dir,
            std::ostream& out);
int cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
             const std::filesystem::path& checkpoint, const std::optional<std::filesystem::path>& out_dir,
             std::ostream& out);
int cmd_reduce(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, ReductionMethod method,
               std::size_t order, const std::filesystem::path& out_dir, std::ostream& out);
int cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
              const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir, std::ostream& out);
int cmd_gradcheck(const ExperimentConfig& cfg, std::uint64_t seed, std::ostream& out);

}  // namespace ssmred

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssmred/deep_ssm.hpp"
#include "ssmred/training.hpp"

namespace ssmred {

struct NamedSequence {
    std::string name;
    Sequence data;
};

struct Dataset {
    std::vector<NamedSequence> sequences;
    std::optional<double> sample_rate;  // Hz
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;

    std::vector<Sequence> plain() const;
};

/// Header u1..u{n_in},y1..y{n_out}; one row per sample.
Sequence read_sequence_csv(const std::filesystem::path& path);
void write_sequence_csv(const std::filesystem::path& path, const Sequence& s);

/// All *.csv files in dir, sorted by name.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& d);

struct Metrics {
    RVector fit;    // percent
    RVector rmse;
    RVector nrmse;

    double average_fit() const { return fit.mean(); }
};

/// Per-channel fit = 100 (1 - ||y - y_hat|| / ||y - mean(y)||),
/// rmse = sqrt(mean (y - y_hat)^2), nrmse = rmse / std(y). Throws
/// ZeroVariance on a constant channel.
Metrics metrics(const RMatrix& y, const RMatrix& y_hat);

/// Simulates every sequence from a zero state and scores the samples after
/// the first n_skip of each sequence, concatenated.
Metrics evaluate(const DeepSsm& m, const std::vector<Sequence>& data, std::size_t n_skip);

enum class TeacherKind { Lti, DeepSsm };
enum class InputKind { WhiteNoise, Multisine };

struct GenConfig {
    TeacherKind teacher = TeacherKind::DeepSsm;
    std::size_t teacher_n_x = 4;
    std::size_t teacher_n_layers = 2;
    std::size_t teacher_d_model = 8;
    double teacher_r_min = 0.5;
    double teacher_r_max = 0.95;
    InputKind input = InputKind::WhiteNoise;
    std::size_t multisine_min_bin = 1;
    std::size_t multisine_max_bin = 0;  // 0: up to seq_len / 4
    double noise_std = 0.0;             // relative to each output channel's std
    std::size_t n_train_seqs = 4;
    std::size_t n_test_seqs = 1;
    std::size_t seq_len = 2000;
};

struct GeneratedData {
    Dataset train;
    Dataset test;  // always noise-free
    nlohmann::json teacher;
};

/// Unit-RMS multisine with random phases on bins [min_bin, max_bin] of a
/// period of length T.
RVector multisine(std::size_t T, std::size_t min_bin, std::size_t max_bin, std::mt19937_64& rng);

/// The deep-SSM teacher reuses the student architecture (n_in, n_out,
/// nonlinearity, norm, mlp_hidden) with the teacher_* sizes and ring.
GeneratedData gen_data(const GenConfig& gen, const DeepSsmConfig& model, std::uint64_t seed);

}  // namespace ssmred

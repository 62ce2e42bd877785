#include "ssmred/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "ssmred/serialize.hpp"

namespace ssmred {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

json vector_json(const RVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::size_t max_layer_order(const DeepSsm& m) {
    std::size_t n = 0;
    for (const auto& l : m.layers) n = std::max(n, static_cast<std::size_t>(l.lru.nu.size()));
    return n;
}

}  // namespace

ReducedModel reduce_model(const DeepSsm& m, std::size_t r, ReductionMethod method, const ReductionOptions& opts) {
    ReducedModel out{m, {}};
    for (auto& layer : out.model.layers) {
        const auto n = static_cast<std::size_t>(layer.lru.nu.size());
        auto red = reduce_lru(layer.lru, std::min(r, n), method, opts);
        layer.lru = std::move(red.params);
        out.reports.push_back(std::move(red.report));
    }
    return out;
}

SweepResult sweep(const DeepSsm& m, const std::vector<Sequence>& test, const SweepConfig& cfg, std::size_t n_skip) {
    SweepResult res;
    const std::size_t n = max_layer_order(m);
    ReductionOptions opts;
    opts.grid_size = cfg.grid_size;
    const double full = evaluate(m, test, n_skip).average_fit();
    for (auto method : cfg.methods) {
        SweepSummary summary{method, full, 0, 0};
        for (std::size_t step = 0; step <= n; ++step) {
            const std::size_t r = n - step;
            SweepRow row{method, r, {}, 0.0, std::nullopt};
            std::size_t removed_total = 0;
            if (r == n) {
                row.fit = evaluate(m, test, n_skip).fit;
                if (is_balanced(method)) row.bound = 0.0;
            } else {
                const auto red = reduce_model(m, r, method, opts);
                row.fit = evaluate(red.model, test, n_skip).fit;
                for (const auto& rep : red.reports) {
                    removed_total += rep.original_order - rep.retained_order;
                    if (rep.bound) row.bound = row.bound.value_or(0.0) + *rep.bound;
                }
            }
            row.avg_fit = row.fit.mean();
            if (row.avg_fit >= full - cfg.fit_drop && step > summary.max_removed_per_layer) {
                summary.max_removed_per_layer = step;
                summary.max_removed_total = removed_total;
            }
            res.rows.push_back(std::move(row));
        }
        res.summary.push_back(summary);
    }
    return res;
}

std::string sweep_csv(const SweepResult& s) {
    std::ostringstream out;
    const Eigen::Index n_out = s.rows.empty() ? 0 : s.rows.front().fit.size();
    out << "method,r";
    for (Eigen::Index c = 0; c < n_out; ++c) out << ",fit_" << c + 1;
    out << ",avg_fit,bound\n";
    for (const auto& row : s.rows) {
        out << to_string(row.method) << ',' << row.r;
        for (Eigen::Index c = 0; c < row.fit.size(); ++c) out << ',' << fmt("%.10g", row.fit(c));
        out << ',' << fmt("%.10g", row.avg_fit) << ',';
        if (row.bound) out << fmt("%.10g", *row.bound);
        out << '\n';
    }
    return out.str();
}

std::string metrics_table(const Metrics& m) {
    std::ostringstream out;
    out << "channel        fit       rmse      nrmse\n";
    for (Eigen::Index c = 0; c < m.fit.size(); ++c) {
        char line[96];
        std::snprintf(line, sizeof line, "y%-6td %10.4f %10.4g %10.4g\n", c + 1, m.fit(c), m.rmse(c), m.nrmse(c));
        out << line;
    }
    out << "average fit " << fmt("%.4f", m.average_fit()) << '\n';
    return out.str();
}

json to_json(const Metrics& m) {
    return {{"fit", vector_json(m.fit)},
            {"rmse", vector_json(m.rmse)},
            {"nrmse", vector_json(m.nrmse)},
            {"avg_fit", m.average_fit()}};
}

FitOutcome fit_model(const ExperimentConfig& cfg, const std::vector<Sequence>& train_data,
                     const std::optional<DeepSsm>& init, const std::function<void(const StepLog&)>& on_step,
                     const std::optional<AdamWState>& resume) {
    FitOutcome out;
    if (init) {
        out.model = *init;
    } else {
        std::mt19937_64 rng(cfg.train.seed);
        out.model = init_deep_ssm(cfg.model, rng);
    }
    out.result = train(out.model, train_data, cfg.train, on_step, resume.value_or(AdamWState{}));
    return out;
}

fs::path optimizer_sidecar(const fs::path& checkpoint) {
    return checkpoint.parent_path() / (checkpoint.stem().string() + ".opt.json");
}

GradCheckReport run_gradcheck(const ExperimentConfig& cfg, RegKind kind, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const DeepSsm m = init_deep_ssm(cfg.model, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto T = static_cast<Eigen::Index>(cfg.gradcheck.length);
    Batch batch(cfg.gradcheck.batch);
    for (auto& s : batch) {
        s.u = RMatrix::NullaryExpr(static_cast<Eigen::Index>(cfg.model.n_in), T, [&] { return normal(rng); });
        s.y = RMatrix::NullaryExpr(static_cast<Eigen::Index>(cfg.model.n_out), T, [&] { return normal(rng); });
    }
    TrainConfig tc = cfg.train;
    tc.reg_kind = kind;
    tc.reg_strength = kind == RegKind::None ? 0.0 : cfg.gradcheck.reg_strength;
    tc.n_skip = cfg.gradcheck.n_skip;
    return gradient_check(m, batch, tc, cfg.gradcheck.eps);
}

int cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    const auto data = gen_data(cfg.gen, cfg.model, seed);
    save_dataset(out_dir / "train", data.train);
    save_dataset(out_dir / "test", data.test);
    write_json_file(out_dir / "teacher.json", data.teacher);
    out << "wrote " << data.train.sequences.size() << " train and " << data.test.sequences.size()
        << " test sequences to " << out_dir.string() << '\n';
    return 0;
}

int cmd_fit(const ExperimentConfig& cfg, const fs::path& data_dir, const std::optional<fs::path>& checkpoint,
            const fs::path& out_dir, std::ostream& out) {
    const auto data = load_dataset(data_dir / "train").plain();
    std::optional<DeepSsm> init;
    std::optional<AdamWState> resume;
    if (checkpoint) {
        init = load_model(*checkpoint);
        if (fs::exists(optimizer_sidecar(*checkpoint)))
            resume = optimizer_from_json(read_json_file(optimizer_sidecar(*checkpoint)));
    }
    fs::create_directories(out_dir);
    std::ofstream log(out_dir / "train_log.jsonl");
    if (!log) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / "train_log.jsonl").string());
    const auto every = std::max<std::size_t>(1, cfg.train.max_steps / 20);
    auto fitted = fit_model(cfg, data, init, [&](const StepLog& s) {
        log << json{{"step", s.step},         {"epoch", s.epoch}, {"loss", s.loss},
                    {"mse", s.mse},           {"reg", s.reg},     {"grad_norm", s.grad_norm},
                    {"wall_ms", s.wall_ms}}
                   .dump()
            << '\n';
        if (s.step % every == 0)
            out << "step " << s.step << " epoch " << s.epoch << " loss " << fmt("%.6g", s.loss) << '\n';
    }, resume);
    save_model(fitted.model, out_dir / "model.json");
    write_json_file(optimizer_sidecar(out_dir / "model.json"), to_json(fitted.result.optimizer));
    out << "saved " << (out_dir / "model.json").string() << '\n';
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& checkpoint,
             const std::optional<fs::path>& out_dir, std::ostream& out) {
    const DeepSsm m = load_model(checkpoint);
    const auto data = load_dataset(data_dir / "test").plain();
    const Metrics met = evaluate(m, data, cfg.model.n_skip_loss);
    out << metrics_table(met) << to_json(met).dump() << '\n';
    if (out_dir) write_json_file(*out_dir / "metrics.json", to_json(met));
    return 0;
}

int cmd_reduce(const ExperimentConfig& cfg, const fs::path& checkpoint, ReductionMethod method, std::size_t order,
               const fs::path& out_dir, std::ostream& out) {
    const DeepSsm m = load_model(checkpoint);
    ReductionOptions opts;
    opts.grid_size = cfg.sweep.grid_size;
    const auto red = reduce_model(m, order, method, opts);
    save_model(red.model, out_dir / "model.json");
    json reports = json::array();
    for (const auto& r : red.reports) reports.push_back(to_json(r));
    write_json_file(out_dir / "reduction_report.json", reports);
    for (std::size_t l = 0; l < red.reports.size(); ++l) {
        const auto& r = red.reports[l];
        out << "layer " << l << ": " << r.original_order << " -> " << r.retained_order << " states, hinf error "
            << fmt("%.4g", r.hinf_error_estimate);
        if (r.bound) out << ", bound " << fmt("%.4g", *r.bound);
        out << '\n';
    }
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& checkpoint,
              const fs::path& out_dir, std::ostream& out) {
    const DeepSsm m = load_model(checkpoint);
    const auto data = load_dataset(data_dir / "test").plain();
    const auto res = sweep(m, data, cfg.sweep, cfg.model.n_skip_loss);
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir / "sweep.csv");
    if (!csv) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / "sweep.csv").string());
    csv << sweep_csv(res);
    json summary = json::array();
    for (const auto& s : res.summary) {
        summary.push_back({{"method", std::string(to_string(s.method))},
                           {"full_fit", s.full_fit},
                           {"fit_drop", cfg.sweep.fit_drop},
                           {"max_removed_per_layer", s.max_removed_per_layer},
                           {"max_removed_total", s.max_removed_total}});
        out << to_string(s.method) << ": up to " << s.max_removed_per_layer << " states per layer ("
            << s.max_removed_total << " total) removable within " << fmt("%g", cfg.sweep.fit_drop)
            << " points of fit " << fmt("%.3f", s.full_fit) << '\n';
    }
    write_json_file(out_dir / "sweep_summary.json", summary);
    return 0;
}

int cmd_gradcheck(const ExperimentConfig& cfg, std::uint64_t seed, std::ostream& out) {
    bool ok = true;
    for (auto kind : {RegKind::None, RegKind::ModalL1, RegKind::HankelNuclear, RegKind::HankelL2}) {
        const auto rep = run_gradcheck(cfg, kind, seed);
        const bool pass = rep.worst_rel_error <= cfg.gradcheck.tolerance;
        ok = ok && pass;
        out << (pass ? "ok   " : "FAIL ") << to_string(kind) << ": worst relative error "
            << fmt("%.3e", rep.worst_rel_error) << " (" << rep.worst_group << ")\n";
    }
    return ok ? 0 : 1;
}

}  // namespace ssmred

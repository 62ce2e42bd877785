// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <string>

#include "generators.hpp"
#include "ssmred/commands.hpp"
#include "ssmred/error.hpp"
#include "ssmred/serialize.hpp"

using namespace ssmred;
using namespace ssmred::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Random diagonal stable systems shared by criteria 3 and 4.
std::vector<StateSpaceModel> mor_corpus() {
    std::mt19937_64 rng(3003);
    std::vector<StateSpaceModel> out;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index n = pick(rng, 2, 8), nu = pick(rng, 1, 3), ny = pick(rng, 1, 3);
        out.push_back(random_diagonal(rng, n, nu, ny, 0.95));
    }
    return out;
}

Outcome lyapunov_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index n = pick(rng, 1, 8);
        const CVector lambda = stable_poles(rng, n, 0.95);
        const CMatrix G = crandom(rng, n, n);
        const CMatrix Y = G * G.adjoint();
        const CMatrix Xd = solve_dlyap_diag(lambda, Y);
        const CMatrix Xk = solve_dlyap_dense(lambda.asDiagonal().toDenseMatrix(), Y);
        worst = std::max(worst, rel_err(Xd, Xk));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-10 && t < 5.0, fmt("max rel err %.2e (<= 1e-10), %.2f s (< 5 s)", worst, t)};
}

Outcome hankel_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2002);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Eigen::Index n = pick(rng, 1, 6), nu = pick(rng, 1, 3), ny = pick(rng, 1, 3);
        const StateSpaceModel ss = random_dense(rng, n, nu, ny, uniform(rng, 0.3, 0.95));
        const RVector a = hankel_singular_values(ss).sigma;
        const RVector b = block_hankel_svd_oracle(ss, required_hankel_depth(ss)).sigma;
        const Eigen::Index k = std::min<Eigen::Index>(3, n);
        for (Eigen::Index j = 0; j < k; ++j) worst = std::max(worst, std::abs(a(j) - b(j)) / b(j));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-6 && t < 10.0, fmt("max rel err on sigma_1..3 %.2e (<= 1e-6), %.2f s (< 10 s)", worst, t)};
}

Outcome balanced_bound() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_margin = -1e300;
    std::size_t checks = 0, violations = 0;
    for (const auto& ss : mor_corpus()) {
        const auto hsv = hankel_singular_values(ss);
        const auto n = static_cast<std::size_t>(ss.A.rows());
        for (auto method : {ReductionMethod::BT, ReductionMethod::BSP})
            for (std::size_t r = 0; r <= n; ++r) {
                const auto red = reduce_block(ss, r, method);
                const double err = hinf_norm_estimate(difference(ss, red.system), 4096);
                const double bound = error_bound(hsv, r) + 1e-6;
                worst_margin = std::max(worst_margin, err - bound);
                ++checks;
                if (err > bound) ++violations;
            }
    }
    const double t = seconds_since(t0);
    return {violations == 0 && t < 60.0,
            fmt("%zu/%zu violations, max(err - bound) %.2e, %.2f s (< 60 s)", violations, checks, worst_margin, t)};
}

Outcome dc_gain_and_modal() {
    double worst = 0.0;
    std::size_t mt_mismatch = 0;
    for (const auto& ss : mor_corpus()) {
        const CMatrix g0 = frequency_response(ss, 0.0);
        const auto n = static_cast<std::size_t>(ss.A.rows());
        for (std::size_t r = 0; r <= n; ++r) {
            for (auto method : {ReductionMethod::MSP, ReductionMethod::BSP}) {
                const CMatrix gr = frequency_response(reduce_block(ss, r, method).system, 0.0);
                worst = std::max(worst, (gr - g0).cwiseAbs().maxCoeff() / std::max(1.0, g0.cwiseAbs().maxCoeff()));
            }
            // MT keeps r of the original eigenvalues bit for bit, none smaller than the r-th largest.
            const CMatrix A = reduce_block(ss, r, ReductionMethod::MT).system.A;
            const CVector full = ss.A.diagonal();
            std::vector<cplx> sorted(full.data(), full.data() + full.size());
            std::stable_sort(sorted.begin(), sorted.end(),
                             [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
            if (static_cast<std::size_t>(A.rows()) != r) ++mt_mismatch;
            for (Eigen::Index j = 0; j < A.rows(); ++j) {
                const cplx kept = A(j, j);
                const bool present = std::any_of(full.data(), full.data() + full.size(), [&](cplx l) {
                    return std::memcmp(&l, &kept, sizeof(cplx)) == 0;
                });
                if (!present || std::abs(kept) < std::abs(sorted[static_cast<std::size_t>(A.rows() - 1)])) ++mt_mismatch;
            }
        }
    }
    return {worst <= 1e-9 && mt_mismatch == 0,
            fmt("MSP/BSP max DC gain err %.2e (<= 1e-9), MT eigenvalue mismatches %zu", worst, mt_mismatch)};
}

Outcome gradient_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg;
    cfg.model.n_in = 2;
    cfg.model.n_out = 2;
    cfg.model.d_model = 4;
    cfg.model.n_x = 3;
    cfg.model.n_layers = 2;
    cfg.model.mlp_hidden = 8;
    cfg.gradcheck.length = 16;
    std::string detail;
    double worst = 0.0;
    for (auto kind : {RegKind::None, RegKind::ModalL1, RegKind::HankelNuclear, RegKind::HankelL2}) {
        const auto report = run_gradcheck(cfg, kind, 5005);
        worst = std::max(worst, report.worst_rel_error);
        detail += fmt("%s %.1e, ", std::string(to_string(kind)).c_str(), report.worst_rel_error);
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-5 && t < 60.0, detail + fmt("worst %.2e (<= 1e-5), %.2f s (< 60 s)", worst, t)};
}

Outcome scan_equivalence() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(6000 + seed);
        const LruParams p = random_lru(rng, 2, 2, 8, 0.3, 0.999);
        const RMatrix u = rrandom(rng, 2, 10000);
        worst = std::max(worst, (simulate_scan(p, u) - simulate_sequential(p, u)).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-10, fmt("max abs diff %.2e (<= 1e-10) over 20 seeds at T = 10000", worst)};
}

// End-to-end synthetic identification experiment shared by criteria 7 and 8.
struct RunStats {
    double fit = 0.0;
    std::map<ReductionMethod, std::size_t> removable;
    std::size_t small_poles = 0;
    std::size_t small_hsv = 0;
};

struct SeedResult {
    std::map<RegKind, RunStats> runs;
};

ExperimentConfig experiment_config(std::uint64_t seed) {
    ExperimentConfig c;
    c.model.n_in = 1;
    c.model.n_out = 1;
    c.model.d_model = 8;
    c.model.n_x = 12;
    c.model.n_layers = 2;
    c.model.mlp_hidden = 16;
    c.model.n_skip_loss = 50;
    c.gen.teacher = TeacherKind::DeepSsm;
    c.gen.teacher_n_x = 4;
    c.gen.teacher_n_layers = 2;
    c.gen.teacher_d_model = 8;
    c.gen.teacher_r_min = 0.5;
    c.gen.teacher_r_max = 0.8;
    c.gen.n_train_seqs = 4;
    c.gen.n_test_seqs = 1;
    c.gen.seq_len = 2000;
    c.train.learning_rate = 1e-2;
    c.train.epochs = 1000;
    c.train.max_steps = 2000;
    c.train.batch_size = 16;
    c.train.subseq_len = 256;
    c.train.n_skip = 50;
    c.train.seed = seed;
    c.sweep.methods = {ReductionMethod::MSP, ReductionMethod::BSP};
    c.sweep.fit_drop = 1.0;
    return c;
}

double reg_strength_for(RegKind k) {
    switch (k) {
        case RegKind::ModalL1: return 1e-2;
        case RegKind::HankelNuclear: return 3e-2;
        default: return 0.0;
    }
}

const std::vector<SeedResult>& experiment() {
    static std::vector<SeedResult> results = [] {
        std::vector<SeedResult> out;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            SeedResult sr;
            ExperimentConfig cfg = experiment_config(seed);
            const auto data = gen_data(cfg.gen, cfg.model, 100 + seed);
            const auto train = data.train.plain(), test = data.test.plain();
            for (auto kind : {RegKind::None, RegKind::ModalL1, RegKind::HankelNuclear}) {
                cfg.train.reg_kind = kind;
                cfg.train.reg_strength = reg_strength_for(kind);
                const auto fitted = fit_model(cfg, train);
                RunStats st;
                st.fit = evaluate(fitted.model, test, cfg.model.n_skip_loss).average_fit();
                for (const auto& s : sweep(fitted.model, test, cfg.sweep, cfg.model.n_skip_loss).summary)
                    st.removable[s.method] = s.max_removed_total;
                for (const auto& l : fitted.model.layers) {
                    const CVector lam = eigenvalues(l.lru);
                    for (Eigen::Index j = 0; j < lam.size(); ++j) st.small_poles += std::abs(lam(j)) < 0.1;
                    const RVector sigma = hankel_singular_values(to_state_space(l.lru)).sigma;
                    for (Eigen::Index j = 0; j < sigma.size(); ++j) st.small_hsv += sigma(j) < 1e-3 * sigma(0);
                }
                std::printf("  seed %llu %-14s fit %6.2f  removable msp %2zu bsp %2zu  |lambda|<0.1 %2zu  "
                            "sigma/sigma_1<1e-3 %2zu\n",
                            static_cast<unsigned long long>(seed), std::string(to_string(kind)).c_str(), st.fit,
                            st.removable[ReductionMethod::MSP], st.removable[ReductionMethod::BSP], st.small_poles,
                            st.small_hsv);
                std::fflush(stdout);
                sr.runs[kind] = st;
            }
            out.push_back(std::move(sr));
        }
        return out;
    }();
    return results;
}

Outcome synthetic_identification() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& res = experiment();
    double min_fit = 1e300;
    int modal_wins = 0, hankel_wins = 0;
    for (const auto& sr : res) {
        for (const auto& [k, st] : sr.runs) min_fit = std::min(min_fit, st.fit);
        const std::size_t base = sr.runs.at(RegKind::None).removable.at(ReductionMethod::BSP);
        modal_wins += sr.runs.at(RegKind::ModalL1).removable.at(ReductionMethod::MSP) >= base;
        hankel_wins += sr.runs.at(RegKind::HankelNuclear).removable.at(ReductionMethod::BSP) >= base;
    }
    const double t = seconds_since(t0);
    return {min_fit >= 90.0 && modal_wins >= 2 && hankel_wins >= 2 && t < 900.0,
            fmt("min fit %.2f (>= 90), ModalL1+MSP >= NoReg+BSP in %d/3, HankelNuclear+BSP >= NoReg+BSP in %d/3 "
                "(>= 2), %.0f s (< 900 s)",
                min_fit, modal_wins, hankel_wins, t)};
}

Outcome regularizer_signatures() {
    const auto& res = experiment();
    int modal = 0, hankel = 0;
    for (const auto& sr : res) {
        modal += sr.runs.at(RegKind::ModalL1).small_poles > sr.runs.at(RegKind::None).small_poles;
        hankel += sr.runs.at(RegKind::HankelNuclear).small_hsv > sr.runs.at(RegKind::None).small_hsv;
    }
    return {modal >= 2 && hankel >= 2,
            fmt("ModalL1 more |lambda| < 0.1 in %d/3, HankelNuclear more sigma/sigma_1 < 1e-3 in %d/3 (>= 2)", modal,
                hankel)};
}

Outcome serialization_round_trip() {
    std::mt19937_64 rng(9009);
    DeepSsmConfig c = experiment_config(0).model;
    c.nonlinearity = NonlinearityKind::GLU;
    DeepSsm m = init_deep_ssm(c, rng);
    auto flat = flatten(m);
    for (auto& v : flat) v += 0.05 * gauss(rng);
    unflatten(m, flat);
    const auto path = std::filesystem::temp_directory_path() / "ssmred_acceptance_model.json";
    save_model(m, path);
    const DeepSsm back = load_model(path);
    std::filesystem::remove(path);
    int exact = 0;
    for (int i = 0; i < 10; ++i) {
        const RMatrix u = rrandom(rng, 1, 500);
        exact += forward(back, u) == forward(m, u);
    }
    return {exact == 10, fmt("%d/10 inputs bit-exact", exact)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Lyapunov oracle equivalence", lyapunov_equivalence},
        {"Hankel spectrum oracle", hankel_oracle},
        {"balanced error bound", balanced_bound},
        {"DC gain and modal eigenvalues", dc_gain_and_modal},
        {"gradient exactness", gradient_exactness},
        {"scan equivalence", scan_equivalence},
        {"synthetic identification and reduction", synthetic_identification},
        {"regularizer signatures", regularizer_signatures},
        {"serialization round trip", serialization_round_trip},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %zu %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

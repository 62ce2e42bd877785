#include "ssmred/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <utility>

#include <Eigen/Eigenvalues>

namespace ssmred {

std::string_view to_string(RegKind k) {
    switch (k) {
        case RegKind::None: return "none";
        case RegKind::ModalL1: return "modal_l1";
        case RegKind::HankelNuclear: return "hankel_nuclear";
        case RegKind::HankelL2: return "hankel_l2";
    }
    return "?";
}

RegKind parse_reg_kind(std::string_view s) {
    if (s == "none" || s == "None") return RegKind::None;
    if (s == "modal_l1" || s == "ModalL1") return RegKind::ModalL1;
    if (s == "hankel_nuclear" || s == "HankelNuclear") return RegKind::HankelNuclear;
    if (s == "hankel_l2" || s == "HankelL2") return RegKind::HankelL2;
    throw Error(ErrorCode::ConfigError, "unknown reg_kind '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
    if (!(reg_strength >= 0.0)) throw Error(ErrorCode::ConfigError, "reg_strength must be >= 0");
    if (n_skip >= subseq_len) throw Error(ErrorCode::ConfigError, "n_skip must be < subseq_len");
    if (batch_size < 1 || subseq_len < 1) throw Error(ErrorCode::ConfigError, "batch_size and subseq_len must be >= 1");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(ErrorCode::ConfigError, "overlap must be in [0, 1)");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::ConfigError, "learning_rate must be > 0");
}

double mse_loss(const RMatrix& y, const RMatrix& y_hat, std::size_t n_skip) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
        throw Error(ErrorCode::LengthMismatch, "y and y_hat differ in shape");
    const auto skip = static_cast<Eigen::Index>(n_skip);
    if (y.cols() <= skip) throw Error(ErrorCode::LengthMismatch, "sequence not longer than n_skip");
    const auto T = y.cols() - skip;
    return (y.rightCols(T) - y_hat.rightCols(T)).squaredNorm() / static_cast<double>(T * y.rows());
}

double reg_modal_l1(const DeepSsm& m) {
    double r = 0.0;
    for (const auto& l : m.layers)
        for (Eigen::Index j = 0; j < l.lru.nu.size(); ++j) r += std::exp(-std::exp(l.lru.nu(j)));
    return r;
}

double reg_hankel_nuclear(const DeepSsm& m) {
    double r = 0.0;
    for (const auto& l : m.layers) r += hankel_singular_values(to_state_space(l.lru)).sigma.sum();
    return r;
}

double reg_hankel_l2(const DeepSsm& m) {
    double r = 0.0;
    for (const auto& l : m.layers) {
        const GrammianPair g = grammians(to_state_space(l.lru));
        r += (g.P * g.Q).trace().real();
    }
    return r;
}

double regularizer(const DeepSsm& m, RegKind kind) {
    switch (kind) {
        case RegKind::None: return 0.0;
        case RegKind::ModalL1: return reg_modal_l1(m);
        case RegKind::HankelNuclear: return reg_hankel_nuclear(m);
        case RegKind::HankelL2: return reg_hankel_l2(m);
    }
    return 0.0;
}

namespace {

struct ModalGrammians {
    CVector lambda;
    RVector gamma;
    CMatrix B;
    CMatrix P;
    CMatrix Q;
};

ModalGrammians modal_grammians(const LruParams& p) {
    ModalGrammians g;
    g.lambda = eigenvalues(p);
    g.gamma = gamma_norm(p);
    g.B = g.gamma.asDiagonal() * p.B_tilde;
    g.P = solve_dlyap_diag(g.lambda, g.B * g.B.adjoint());
    g.Q = solve_dlyap_diag(g.lambda.conjugate(), p.C.adjoint() * p.C);
    g.P = 0.5 * (g.P + g.P.adjoint());
    g.Q = 0.5 * (g.Q + g.Q.adjoint());
    return g;
}

// Pulls dS = Re sum(GP .* dP) + Re sum(GQ .* dQ) back to the LRU parameters,
// through P_ij = (BB^*)_ij / (1 - l_i conj(l_j)) and
// Q_ij = (C^*C)_ij / (1 - conj(l_i) l_j).
LruParams pull_back(const LruParams& p, const ModalGrammians& g, const CMatrix& GP, const CMatrix& GQ) {
    const auto n = p.n_states();
    const CVector& l = g.lambda;
    const CVector lc = l.conjugate();

    const CMatrix S = g.B * g.B.adjoint();
    const CMatrix T = p.C.adjoint() * p.C;
    CMatrix RP(n, n), EP(n, n), RQ(n, n), EQ(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const cplx dp = 1.0 - l(i) * lc(j);
            const cplx dq = 1.0 - lc(i) * l(j);
            RP(i, j) = GP(i, j) / dp;
            EP(i, j) = RP(i, j) * S(i, j) / dp;
            RQ(i, j) = GQ(i, j) / dq;
            EQ(i, j) = RQ(i, j) * T(i, j) / dq;
        }
    }
    // Coefficients g in dS = Re sum(g .* dz) for each complex quantity z.
    const CVector g_lambda = EP * lc + (EP.transpose() * l).conjugate() + EQ.transpose() * lc +
                             (EQ * l).conjugate();
    const CMatrix g_B = RP * g.B.conjugate() + (RP.transpose() * g.B).conjugate();
    const CMatrix g_C = p.C.conjugate() * RQ + (p.C * RQ.transpose()).conjugate();

    LruParams grad = LruParams::zeros(p.n_inputs(), p.n_outputs(), n);
    grad.B_tilde = (g.gamma.asDiagonal() * g_B).conjugate();
    grad.C = g_C.conjugate();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double en = std::exp(p.nu(i));
        const double ep = std::exp(p.phi(i));
        double gamma_bar = 0.0;
        for (Eigen::Index k = 0; k < p.B_tilde.cols(); ++k) gamma_bar += (g_B(i, k) * p.B_tilde(i, k)).real();
        const double dgamma = g.gamma(i) > 0.0 ? en * std::exp(-2.0 * en) / g.gamma(i) : 0.0;
        grad.nu(i) = (g_lambda(i) * (-en * l(i))).real() + gamma_bar * dgamma;
        grad.phi(i) = (g_lambda(i) * cplx(0.0, ep) * l(i)).real();
    }
    return grad;
}

double lru_hankel_sum(const LruParams& p) { return hankel_singular_values(to_state_space(p)).sigma.sum(); }

// Central differences of the Hankel nuclear norm of one block.
LruParams hankel_fd_gradient(const LruParams& p, double h = 1e-6) {
    LruParams work = p;
    LruParams grad = LruParams::zeros(p.n_inputs(), p.n_outputs(), p.n_states());
    auto diff = [&](double& slot) {
        const double keep = slot;
        slot = keep + h;
        const double fp = lru_hankel_sum(work);
        slot = keep - h;
        const double fm = lru_hankel_sum(work);
        slot = keep;
        return (fp - fm) / (2.0 * h);
    };
    for (Eigen::Index j = 0; j < p.n_states(); ++j) {
        grad.nu(j) = diff(work.nu(j));
        grad.phi(j) = diff(work.phi(j));
    }
    auto complex_diff = [&](CMatrix& M, CMatrix& out) {
        auto* raw = reinterpret_cast<double*>(M.data());
        auto* dst = reinterpret_cast<double*>(out.data());
        for (Eigen::Index k = 0; k < 2 * M.size(); ++k) dst[k] = diff(raw[k]);
    };
    complex_diff(work.B_tilde, grad.B_tilde);
    complex_diff(work.C, grad.C);
    return grad;
}

void add_lru(LruParams& dst, const LruParams& src, double w) {
    dst.nu += w * src.nu;
    dst.phi += w * src.phi;
    dst.B_tilde += w * src.B_tilde;
    dst.C += w * src.C;
    dst.D += w * src.D;
}

bool all_finite(DeepSsm& g) {
    for (const auto& grp : parameter_groups(g))
        for (double v : grp.values)
            if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

LruRegGradient hankel_sv_gradients(const LruParams& p) {
    const auto n = p.n_states();
    const ModalGrammians g = modal_grammians(p);

    // PQ = Lp (Lp^* Q Lp) Lp^{-1} on the range of Lp; the Hermitian middle
    // factor gives right/left eigenvectors v = Lp u, w = Q Lp u with w^* v = mu.
    Eigen::SelfAdjointEigenSolver<CMatrix> ep(g.P);
    const CMatrix Lp = ep.eigenvectors() * ep.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    CMatrix H = Lp.adjoint() * g.Q * Lp;
    H = 0.5 * (H + H.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eh(H);
    const RVector& mu = eh.eigenvalues();
    const double mu_max = n > 0 ? std::max(mu.maxCoeff(), 0.0) : 0.0;

    LruRegGradient out;
    RVector c = RVector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double s = std::sqrt(std::max(mu(j), 0.0));
        out.value += s;
        if (s < kSigmaFloor) continue;
        for (Eigen::Index k = 0; k < n; ++k)
            if (k != j && std::abs(mu(j) - mu(k)) < 1e-10 * mu_max)
                throw Error(ErrorCode::ClusteredSpectrum,
                            "eigenvalues of PQ not separated; perturbation formula invalid");
        c(j) = 0.5 / (mu(j) * s);
    }
    const CMatrix V = Lp * eh.eigenvectors();
    const CMatrix M = V * c.asDiagonal() * V.adjoint() * g.Q;  // dS = Re tr(M dPQ)
    out.grad = pull_back(p, g, (g.Q * M).transpose(), (M * g.P).transpose());
    return out;
}

LruRegGradient hankel_trace_gradients(const LruParams& p) {
    const ModalGrammians g = modal_grammians(p);
    LruRegGradient out;
    out.value = (g.P * g.Q).trace().real();
    out.grad = pull_back(p, g, g.Q.transpose(), g.P.transpose());
    return out;
}

double accumulate_regularizer_gradient(const DeepSsm& m, RegKind kind, double weight, DeepSsm& grad) {
    double value = 0.0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const LruParams& p = m.layers[l].lru;
        LruParams& gp = grad.layers[l].lru;
        switch (kind) {
            case RegKind::None: break;
            case RegKind::ModalL1:
                for (Eigen::Index j = 0; j < p.nu.size(); ++j) {
                    const double en = std::exp(p.nu(j));
                    const double mag = std::exp(-en);
                    value += mag;
                    gp.nu(j) += weight * (-en * mag);
                }
                break;
            case RegKind::HankelNuclear: {
                try {
                    const LruRegGradient r = hankel_sv_gradients(p);
                    add_lru(gp, r.grad, weight);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::ClusteredSpectrum) throw;
                    add_lru(gp, hankel_fd_gradient(p), weight);
                }
                value += lru_hankel_sum(p);
                break;
            }
            case RegKind::HankelL2: {
                const LruRegGradient r = hankel_trace_gradients(p);
                add_lru(gp, r.grad, weight);
                value += r.value;
                break;
            }
        }
    }
    return value;
}

LossBreakdown total_loss(const DeepSsm& m, const Batch& batch, const TrainConfig& cfg) {
    double sum = 0.0;
    double count = 0.0;
    for (const auto& seq : batch) {
        const RMatrix y_hat = forward(m, seq.u);
        const double mse = mse_loss(seq.y, y_hat, cfg.n_skip);
        const double c = static_cast<double>((seq.y.cols() - static_cast<Eigen::Index>(cfg.n_skip)) * seq.y.rows());
        sum += mse * c;
        count += c;
    }
    LossBreakdown out;
    out.mse = count > 0.0 ? sum / count : 0.0;
    out.reg = cfg.reg_strength > 0.0 ? regularizer(m, cfg.reg_kind) : 0.0;
    out.total = out.mse + cfg.reg_strength * out.reg;
    if (!std::isfinite(out.total)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
    return out;
}

LossBreakdown gradients(const DeepSsm& m, const Batch& batch, const TrainConfig& cfg, DeepSsm& grad) {
    grad = m.zeros_like();
    double count = 0.0;
    for (const auto& seq : batch) {
        if (seq.y.cols() <= static_cast<Eigen::Index>(cfg.n_skip))
            throw Error(ErrorCode::LengthMismatch, "sequence not longer than n_skip");
        count += static_cast<double>((seq.y.cols() - static_cast<Eigen::Index>(cfg.n_skip)) * seq.y.rows());
    }
    double sum = 0.0;
    ForwardTape tape;
    const auto skip = static_cast<Eigen::Index>(cfg.n_skip);
    for (const auto& seq : batch) {
        const RMatrix y_hat = forward(m, seq.u, tape);
        if (y_hat.rows() != seq.y.rows() || y_hat.cols() != seq.y.cols())
            throw Error(ErrorCode::LengthMismatch, "y and y_hat differ in shape");
        RMatrix y_bar = RMatrix::Zero(y_hat.rows(), y_hat.cols());
        const auto T = y_hat.cols() - skip;
        const RMatrix err = y_hat.rightCols(T) - seq.y.rightCols(T);
        sum += err.squaredNorm();
        y_bar.rightCols(T) = (2.0 / count) * err;
        backward(m, tape, y_bar, grad);
    }
    LossBreakdown out;
    out.mse = sum / count;
    if (cfg.reg_kind != RegKind::None && cfg.reg_strength > 0.0)
        out.reg = accumulate_regularizer_gradient(m, cfg.reg_kind, cfg.reg_strength, grad);
    out.total = out.mse + cfg.reg_strength * out.reg;
    if (!std::isfinite(out.total) || !all_finite(grad))
        throw Error(ErrorCode::NonFiniteLoss, "loss or gradient is not finite");
    return out;
}

void adamw_step(DeepSsm& params, const DeepSsm& grads, AdamWState& state, const AdamWHyper& hyper) {
    auto pg = parameter_groups(params);
    auto gg = parameter_groups(const_cast<DeepSsm&>(grads));
    std::size_t total = 0;
    for (const auto& g : pg) total += g.values.size();
    if (state.m.empty()) {
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    }
    if (state.m.size() != total || state.v.size() != total || gg.size() != pg.size())
        throw Error(ErrorCode::InvalidArgument, "optimizer state does not match the parameters");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < pg.size(); ++k) {
        auto& values = pg[k].values;
        const auto& g = gg[k].values;
        const double decay = pg[k].weight_decay ? hyper.learning_rate * hyper.weight_decay : 0.0;
        for (std::size_t i = 0; i < values.size(); ++i, ++offset) {
            double& m = state.m[offset];
            double& v = state.v[offset];
            m = hyper.beta1 * m + (1.0 - hyper.beta1) * g[i];
            v = hyper.beta2 * v + (1.0 - hyper.beta2) * g[i] * g[i];
            values[i] -= decay * values[i];
            values[i] -= hyper.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + hyper.eps);
        }
    }
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t N, double overlap) {
    if (N == 0) throw Error(ErrorCode::InvalidArgument, "window length must be >= 1");
    if (length < N) throw Error(ErrorCode::SequenceTooShort, "sequence shorter than the window length");
    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(N) * (1.0 - overlap))));
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + N <= length; s += stride) starts.push_back(s);
    return starts;
}

std::vector<Batch> make_subsequences(const std::vector<Sequence>& data, std::size_t N, double overlap,
                                     std::size_t batch_size, std::uint64_t seed) {
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    for (std::size_t s = 0; s < data.size(); ++s)
        for (std::size_t start : window_starts(static_cast<std::size_t>(data[s].u.cols()), N, overlap))
            windows.emplace_back(s, start);
    std::mt19937_64 rng(seed);
    std::shuffle(windows.begin(), windows.end(), rng);

    std::vector<Batch> batches;
    const auto n = static_cast<Eigen::Index>(N);
    for (std::size_t i = 0; i < windows.size(); i += batch_size) {
        Batch b;
        for (std::size_t k = i; k < std::min(windows.size(), i + batch_size); ++k) {
            const auto& src = data[windows[k].first];
            const auto start = static_cast<Eigen::Index>(windows[k].second);
            b.push_back({src.u.middleCols(start, n), src.y.middleCols(start, n)});
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

TrainResult train(DeepSsm& m, const std::vector<Sequence>& data, const TrainConfig& cfg,
                  const std::function<void(const StepLog&)>& on_step, AdamWState start) {
    cfg.validate();
    TrainResult result;
    result.optimizer = std::move(start);
    const AdamWHyper hyper{cfg.learning_rate, cfg.weight_decay};
    DeepSsm grad = m.zeros_like();
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = make_subsequences(data, cfg.subseq_len, cfg.overlap, cfg.batch_size,
                                               cfg.seed * 1000003ULL + epoch);
        for (const auto& batch : batches) {
            if (cfg.max_steps && step >= cfg.max_steps) return result;
            const auto t0 = std::chrono::steady_clock::now();
            const LossBreakdown loss = gradients(m, batch, cfg, grad);
            double gn = 0.0;
            for (const auto& g : parameter_groups(grad))
                for (double v : g.values) gn += v * v;
            adamw_step(m, grad, result.optimizer, hyper);
            const auto t1 = std::chrono::steady_clock::now();
            StepLog entry{step, epoch, loss.total, loss.mse, loss.reg, std::sqrt(gn),
                          std::chrono::duration<double, std::milli>(t1 - t0).count()};
            result.log.push_back(entry);
            if (on_step) on_step(entry);
            ++step;
        }
    }
    return result;
}

GradCheckReport gradient_check(const DeepSsm& m, const Batch& batch, const TrainConfig& cfg, double eps) {
    DeepSsm grad;
    gradients(m, batch, cfg, grad);
    DeepSsm work = m;
    auto wg = parameter_groups(work);
    auto ag = parameter_groups(grad);
    GradCheckReport report;
    for (std::size_t k = 0; k < wg.size(); ++k) {
        if (wg[k].values.empty()) continue;
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t i = 0; i < wg[k].values.size(); ++i) {
            double& slot = wg[k].values[i];
            const double keep = slot;
            slot = keep + eps;
            const double fp = total_loss(work, batch, cfg).total;
            slot = keep - eps;
            const double fm = total_loss(work, batch, cfg).total;
            slot = keep;
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = ag[k].values[i];
            diff2 += (fd - an) * (fd - an);
            a2 += an * an;
            n2 += fd * fd;
        }
        const double scale = std::max(std::sqrt(a2), std::sqrt(n2));
        const double rel = scale > 1e-10 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
        report.groups.push_back({wg[k].name, rel, std::sqrt(a2)});
        if (rel >= report.worst_rel_error) {
            report.worst_rel_error = rel;
            report.worst_group = wg[k].name;
        }
    }
    return report;
}

}  // namespace ssmred

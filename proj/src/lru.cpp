#include "ssmred/lru.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

namespace ssmred {

LruParams LruParams::zeros(Eigen::Index n_u, Eigen::Index n_y, Eigen::Index n_x) {
    return {RVector::Zero(n_x), RVector::Zero(n_x), CMatrix::Zero(n_x, n_u),
            CMatrix::Zero(n_y, n_x), RMatrix::Zero(n_y, n_u)};
}

LruParams init_lru(Eigen::Index n_u, Eigen::Index n_y, Eigen::Index n_x, const LruInit& init,
                   std::mt19937_64& rng) {
    if (!(0.0 < init.r_min && init.r_min <= init.r_max && init.r_max < 1.0))
        throw Error(ErrorCode::InvalidArgument, "LRU init ring must satisfy 0 < r_min <= r_max < 1");
    LruParams p = LruParams::zeros(n_u, n_y, n_x);
    std::uniform_real_distribution<double> radius(init.r_min, init.r_max);
    std::uniform_real_distribution<double> phase(0.0, init.max_phase);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5 / static_cast<double>(n_x)));
    for (Eigen::Index j = 0; j < n_x; ++j) {
        const double r = radius(rng);
        double theta = phase(rng);
        while (theta <= 0.0) theta = phase(rng);
        p.nu(j) = std::log(-std::log(r));
        p.phi(j) = std::log(theta);
    }
    for (Eigen::Index j = 0; j < p.B_tilde.size(); ++j) {
        const double re = normal(rng);
        p.B_tilde(j) = cplx(re, normal(rng));
    }
    for (Eigen::Index j = 0; j < p.C.size(); ++j) {
        const double re = normal(rng);
        p.C(j) = cplx(re, normal(rng));
    }
    return p;
}

CVector eigenvalues(const LruParams& p) {
    CVector lambda(p.n_states());
    for (Eigen::Index j = 0; j < lambda.size(); ++j)
        lambda(j) = std::exp(cplx(-std::exp(p.nu(j)), std::exp(p.phi(j))));
    return lambda;
}

RVector gamma_norm(const LruParams& p) {
    RVector g(p.n_states());
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        // 1 - |lambda|^2 = -expm1(-2 exp(nu)) keeps precision near |lambda| = 1.
        g(j) = std::sqrt(-std::expm1(-2.0 * std::exp(p.nu(j))));
    }
    return g;
}

CMatrix input_matrix(const LruParams& p) { return gamma_norm(p).asDiagonal() * p.B_tilde; }

StateSpaceModel to_state_space(const LruParams& p) {
    return StateSpaceModel::diagonal(eigenvalues(p), input_matrix(p), p.C, p.D.cast<cplx>(), true);
}

StateSpaceModel to_conjugate_real_form(const LruParams& p) {
    const auto n = p.n_states();
    const CVector lambda = eigenvalues(p);
    const CMatrix B = input_matrix(p);
    CVector ext(2 * n);
    ext << lambda, lambda.conjugate();
    CMatrix Bx(2 * n, p.n_inputs());
    Bx << B, B.conjugate();
    CMatrix Cx(p.n_outputs(), 2 * n);
    Cx << 0.5 * p.C, 0.5 * p.C.conjugate();
    return StateSpaceModel::diagonal(ext, std::move(Bx), std::move(Cx), p.D.cast<cplx>(), false);
}

LruParams from_modal(const CVector& lambda, const CMatrix& B, const CMatrix& C, const RMatrix& D) {
    const auto n = lambda.size();
    if (B.rows() != n || C.cols() != n || D.rows() != C.rows() || D.cols() != B.cols())
        throw Error(ErrorCode::InvalidArgument, "from_modal: inconsistent shapes");
    LruParams p;
    p.nu.resize(n);
    p.phi.resize(n);
    p.B_tilde.resize(n, B.cols());
    p.C = C;
    p.D = D;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double r = std::abs(lambda(j));
        if (!(r < 1.0 - 1e-9))
            throw Error(ErrorCode::UnstableEigenvalue,
                        "|lambda_" + std::to_string(j) + "| = " + std::to_string(r));
        double theta;
        if (lambda(j) == cplx(0.0)) {
            theta = std::numbers::pi;  // phase of an exact zero mode is arbitrary
        } else {
            theta = std::arg(lambda(j));
            if (theta == 0.0)
                throw Error(ErrorCode::PhaseDegenerate,
                            "lambda_" + std::to_string(j) + " is real positive");
            if (theta < 0.0) theta += 2.0 * std::numbers::pi;
        }
        const double modulus = std::max(r, kMinModulus);
        p.nu(j) = std::log(-std::log(modulus));
        p.phi(j) = std::log(theta);
        const double g = std::sqrt(1.0 - modulus * modulus);
        p.B_tilde.row(j) = B.row(j) / g;
    }
    return p;
}

RMatrix simulate_sequential(const LruParams& p, const RMatrix& u, const LruState* x0) {
    if (u.rows() != p.n_inputs())
        throw Error(ErrorCode::LengthMismatch, "input rows must equal n_u");
    const CVector lambda = eigenvalues(p);
    const CMatrix Bu = input_matrix(p) * u.cast<cplx>();
    CVector x = x0 ? x0->x : CVector::Zero(p.n_states());
    CMatrix X(p.n_states(), u.cols());
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
        x = lambda.cwiseProduct(x) + Bu.col(k);
        X.col(k) = x;
    }
    return (p.C * X).real() + p.D * u;
}

ScanElement combine(const ScanElement& first, const ScanElement& second) {
    return {first.a.cwiseProduct(second.a), second.a.cwiseProduct(first.b) + second.b};
}

RMatrix simulate_scan(const LruParams& p, const RMatrix& u, const LruState* x0, std::size_t chunk,
                      std::size_t threads) {
    if (u.rows() != p.n_inputs())
        throw Error(ErrorCode::LengthMismatch, "input rows must equal n_u");
    const auto n = p.n_states();
    const auto T = u.cols();
    const CVector lambda = eigenvalues(p);
    const CMatrix Bu = input_matrix(p) * u.cast<cplx>();
    chunk = std::max<std::size_t>(chunk, 1);
    const auto n_chunks = static_cast<std::size_t>((T + static_cast<Eigen::Index>(chunk) - 1) /
                                                   static_cast<Eigen::Index>(chunk));

    // Pass 1: local inclusive scans from a zero state, one chunk at a time.
    CMatrix X(n, T);
    std::vector<ScanElement> totals(n_chunks);
    auto local_scan = [&](std::size_t c) {
        const auto begin = static_cast<Eigen::Index>(c * chunk);
        const auto end = std::min<Eigen::Index>(begin + static_cast<Eigen::Index>(chunk), T);
        ScanElement acc{CVector::Ones(n), CVector::Zero(n)};
        for (Eigen::Index k = begin; k < end; ++k) {
            acc = combine(acc, ScanElement{lambda, Bu.col(k)});
            X.col(k) = acc.b;
        }
        totals[c] = std::move(acc);
    };
    auto run_parallel = [&](auto&& body) {
        const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n_chunks, 1));
        if (workers == 1) {
            for (std::size_t c = 0; c < n_chunks; ++c) body(c);
            return;
        }
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t c = w; c < n_chunks; c += workers) body(c);
            });
    };
    run_parallel(local_scan);

    // Pass 2: exclusive scan of chunk totals gives each chunk's incoming state.
    std::vector<CVector> carry(n_chunks);
    CVector state = x0 ? x0->x : CVector::Zero(n);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        carry[c] = state;
        state = totals[c].a.cwiseProduct(state) + totals[c].b;
    }

    // Pass 3: fold the incoming state into each chunk.
    run_parallel([&](std::size_t c) {
        const auto begin = static_cast<Eigen::Index>(c * chunk);
        const auto end = std::min<Eigen::Index>(begin + static_cast<Eigen::Index>(chunk), T);
        CVector power = lambda;
        for (Eigen::Index k = begin; k < end; ++k) {
            X.col(k) += power.cwiseProduct(carry[c]);
            power = power.cwiseProduct(lambda);
        }
    });
    return (p.C * X).real() + p.D * u;
}

}  // namespace ssmred

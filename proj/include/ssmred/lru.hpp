#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "ssmred/linalg.hpp"

namespace ssmred {

/// Learnable parameters of one Linear Recurrent Unit.
///
/// The eigenvalues are lambda_j = exp(-exp(nu_j) + i exp(phi_j)), so
/// |lambda_j| < 1 holds for every real nu_j. The effective input matrix is
/// B = diag(gamma_norm) B_tilde with gamma_norm_j = sqrt(1 - |lambda_j|^2).
struct LruParams {
    RVector nu;
    RVector phi;
    CMatrix B_tilde;  // n_x x n_u
    CMatrix C;        // n_y x n_x
    RMatrix D;        // n_y x n_u

    Eigen::Index n_states() const { return nu.size(); }
    Eigen::Index n_inputs() const { return B_tilde.cols(); }
    Eigen::Index n_outputs() const { return C.rows(); }

    static LruParams zeros(Eigen::Index n_u, Eigen::Index n_y, Eigen::Index n_x);
};

struct LruState {
    CVector x;
};

/// Stable-ring initialization: |lambda| uniform in [r_min, r_max], phase
/// uniform in (0, 2 pi), B_tilde and C entries zero-mean with variance 1/n_x
/// (split evenly over real and imaginary parts), D zero.
struct LruInit {
    double r_min = 0.5;
    double r_max = 0.99;
    double max_phase = 6.283185307179586;
};

LruParams init_lru(Eigen::Index n_u, Eigen::Index n_y, Eigen::Index n_x, const LruInit& init,
                   std::mt19937_64& rng);

CVector eigenvalues(const LruParams& p);
RVector gamma_norm(const LruParams& p);
CMatrix input_matrix(const LruParams& p);

/// Complex diagonal realization with real-part readout.
StateSpaceModel to_state_space(const LruParams& p);

/// The 2 n_x state conjugate-closed realization; its output is real for
/// real inputs, so take_real_output is false.
StateSpaceModel to_conjugate_real_form(const LruParams& p);

/// Inverse of the eigenvalue/normalization parameterization.
///
/// Throws UnstableEigenvalue when |lambda_j| >= 1 - 1e-9 and PhaseDegenerate
/// when arg(lambda_j) == 0 exactly. Exact zero eigenvalues are represented by
/// the largest finite nu with |lambda| = kMinModulus.
LruParams from_modal(const CVector& lambda, const CMatrix& B, const CMatrix& C, const RMatrix& D);

inline constexpr double kMinModulus = 1e-300;

/// Step-by-step recurrence. u is n_u x T; returns y as n_y x T.
RMatrix simulate_sequential(const LruParams& p, const RMatrix& u, const LruState* x0 = nullptr);

/// Element of the associative scan: the affine map x -> a .* x + b.
struct ScanElement {
    CVector a;
    CVector b;
};

/// (a1, b1) o (a2, b2) = (a1 .* a2, a2 .* b1 + b2): apply the first map, then the second.
ScanElement combine(const ScanElement& first, const ScanElement& second);

/// Same contract as simulate_sequential, evaluated as a chunked associative
/// scan. Chunks are processed on `threads` worker threads.
RMatrix simulate_scan(const LruParams& p, const RMatrix& u, const LruState* x0 = nullptr,
                      std::size_t chunk = 256, std::size_t threads = 1);

}  // namespace ssmred

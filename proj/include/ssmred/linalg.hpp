#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ssmred/error.hpp"

namespace ssmred {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Discrete-time LTI system x_k = A x_{k-1} + B u_k, y_k = C x_k + D u_k.
///
/// With take_real_output set the I/O map is y_k = Re[C x_k] + Re[D] u_k for
/// real inputs, which is the readout of a Linear Recurrent Unit.
struct StateSpaceModel {
    CMatrix A;
    CMatrix B;
    CMatrix C;
    CMatrix D;
    bool is_diagonal = false;
    bool take_real_output = false;

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index n_inputs() const { return B.cols(); }
    Eigen::Index n_outputs() const { return C.rows(); }

    /// Diagonal of A; only meaningful when is_diagonal.
    CVector poles() const { return A.diagonal(); }

    /// Throws InvalidArgument on inconsistent shapes, non-finite entries, or
    /// a non-zero off-diagonal entry in a system flagged diagonal.
    void validate() const;

    static StateSpaceModel diagonal(const CVector& lambda, CMatrix B, CMatrix C, CMatrix D,
                                    bool take_real_output);
};

struct GrammianPair {
    CMatrix P;  // controllability
    CMatrix Q;  // observability
};

/// Hankel singular values, sorted non-increasing.
struct HankelSpectrum {
    RVector sigma;

    Eigen::Index size() const { return sigma.size(); }
    double operator[](Eigen::Index j) const { return sigma(j); }
};

struct EigenDecomposition {
    CVector values;
    CMatrix right;                 // M V = V diag(values), unit-norm columns
    std::optional<CMatrix> left;   // W^* M = diag(values) W^*, W^* V = I
};

struct BalancedRealization {
    StateSpaceModel system;
    CMatrix T;      // x = T x_bal
    CMatrix T_inv;
    HankelSpectrum spectrum;
};

double spectral_radius(const CMatrix& A);

/// Solves A X A^* - X + Y = 0 for A = diag(lambda) with n^2 scalar divisions.
CMatrix solve_dlyap_diag(const CVector& lambda, const CMatrix& Y);

/// Solves A X A^* - X + Y = 0 through the Kronecker system
/// (I - conj(A) (x) A) vec(X) = vec(Y). O(n^6); intended for n up to ~100.
CMatrix solve_dlyap_dense(const CMatrix& A, const CMatrix& Y);

/// Controllability and observability Grammians, Hermitian-symmetrized.
/// Throws UnstableSystem when the spectral radius of A is >= 1.
GrammianPair grammians(const StateSpaceModel& ss);

/// sigma_j = sqrt(eig_j(PQ)) of the complex realization.
HankelSpectrum hankel_singular_values(const StateSpaceModel& ss);

/// Smallest depth with rho(A)^depth < 1e-12.
std::size_t required_hankel_depth(const StateSpaceModel& ss);

/// Singular values of the depth x depth block Hankel matrix built from the
/// impulse response g_k = C A^{k-1} B of the complex realization.
HankelSpectrum block_hankel_svd_oracle(const StateSpaceModel& ss, std::size_t depth);

/// Square-root balancing. Both Grammians of the result equal diag(sigma).
BalancedRealization balance(const StateSpaceModel& ss);

EigenDecomposition eig_dense(const CMatrix& M, bool want_left = false);

/// G(e^{i omega}). For take_real_output systems this is the response of the
/// real-output map, 0.5 [G_c(e^{iw}) + conj(G_c(e^{-iw}))] + Re D.
CMatrix frequency_response(const StateSpaceModel& ss, double omega);

/// Largest singular value of G over a uniform grid on [0, pi] followed by a
/// golden-section refinement around the grid maximum. This is a lower bound
/// of the true H-infinity norm.
double hinf_norm_estimate(const StateSpaceModel& ss, std::size_t grid_size);

/// Simulates from x0 = 0. Input is n_u x T (one column per time step).
/// Returns the real part of the output; for take_real_output systems this is
/// exactly Re[C x] + Re[D] u.
RMatrix simulate(const StateSpaceModel& ss, const RMatrix& u);

/// Impulse response coefficients g_1..g_count, g_k = C A^{k-1} B.
std::vector<CMatrix> impulse_response(const StateSpaceModel& ss, std::size_t count);

}  // namespace ssmred

#include "ssmred/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ssmred {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::ComplexEigenResidual: return "ComplexEigenResidual";
        case ErrorCode::InsufficientDepth: return "InsufficientDepth";
        case ErrorCode::NearUnobservableState: return "NearUnobservableState";
        case ErrorCode::DefectiveMatrix: return "DefectiveMatrix";
        case ErrorCode::ResolventSingular: return "ResolventSingular";
        case ErrorCode::UnstableSystem: return "UnstableSystem";
        case ErrorCode::UnstableEigenvalue: return "UnstableEigenvalue";
        case ErrorCode::PhaseDegenerate: return "PhaseDegenerate";
        case ErrorCode::MatrixSingular: return "MatrixSingular";
        case ErrorCode::InvalidOrder: return "InvalidOrder";
        case ErrorCode::ClusteredSpectrum: return "ClusteredSpectrum";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::SequenceTooShort: return "SequenceTooShort";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
    if (!ok) throw Error(code, msg);
}

CMatrix hermitian_part(const CMatrix& X) { return 0.5 * (X + X.adjoint()); }

// Hermitian PSD factor L with X = L L^*. Negative eigenvalues from roundoff
// are clamped to zero.
CMatrix psd_factor(const CMatrix& X) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(X));
    RVector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal();
}

void require_stable(const StateSpaceModel& ss) {
    double rho = ss.is_diagonal ? (ss.order() ? ss.poles().cwiseAbs().maxCoeff() : 0.0)
                                : spectral_radius(ss.A);
    require(rho < 1.0, ErrorCode::UnstableSystem,
            "spectral radius " + std::to_string(rho) + " is not < 1");
}

}  // namespace

void StateSpaceModel::validate() const {
    const auto n = A.rows();
    require(A.cols() == n, ErrorCode::InvalidArgument, "A must be square");
    require(B.rows() == n, ErrorCode::InvalidArgument, "B rows must equal the order");
    require(C.cols() == n, ErrorCode::InvalidArgument, "C cols must equal the order");
    require(D.rows() == C.rows() && D.cols() == B.cols(), ErrorCode::InvalidArgument,
            "D must be n_y x n_u");
    require(A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite(),
            ErrorCode::InvalidArgument, "non-finite entry");
    if (is_diagonal) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                require(i == j || A(i, j) == cplx(0.0), ErrorCode::InvalidArgument,
                        "off-diagonal entry in a diagonal system");
    }
}

StateSpaceModel StateSpaceModel::diagonal(const CVector& lambda, CMatrix B, CMatrix C, CMatrix D,
                                          bool take_real_output) {
    StateSpaceModel ss{lambda.asDiagonal().toDenseMatrix(), std::move(B), std::move(C),
                       std::move(D), true, take_real_output};
    ss.validate();
    return ss;
}

double spectral_radius(const CMatrix& A) {
    if (A.rows() == 0) return 0.0;
    Eigen::ComplexEigenSolver<CMatrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

CMatrix solve_dlyap_diag(const CVector& lambda, const CMatrix& Y) {
    const auto n = lambda.size();
    require(Y.rows() == n && Y.cols() == n, ErrorCode::InvalidArgument,
            "Y must be n x n with n = len(lambda)");
    CMatrix X(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const cplx den = 1.0 - lambda(i) * std::conj(lambda(j));
            require(std::abs(den) >= 1e-14, ErrorCode::DegenerateDenominator,
                    "|1 - l_i conj(l_j)| < 1e-14 (marginally stable mode)");
            X(i, j) = Y(i, j) / den;
        }
    }
    return X;
}

CMatrix solve_dlyap_dense(const CMatrix& A, const CMatrix& Y) {
    const auto n = A.rows();
    require(A.cols() == n && Y.rows() == n && Y.cols() == n, ErrorCode::InvalidArgument,
            "A and Y must be square of equal size");
    if (n == 0) return CMatrix(0, 0);
    // vec(A X A^*) = (conj(A) kron A) vec(X), column-major vec.
    const auto nn = n * n;
    CMatrix K = CMatrix::Identity(nn, nn);
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q)
            K.block(p * n, q * n, n, n) -= std::conj(A(p, q)) * A;
    Eigen::PartialPivLU<CMatrix> lu(K);
    require(lu.rcond() > 1e-14, ErrorCode::SingularSystem, "Kronecker system is singular");
    CVector x = lu.solve(Eigen::Map<const CVector>(Y.data(), nn));
    return Eigen::Map<CMatrix>(x.data(), n, n);
}

GrammianPair grammians(const StateSpaceModel& ss) {
    require_stable(ss);
    const CMatrix BB = ss.B * ss.B.adjoint();
    const CMatrix CC = ss.C.adjoint() * ss.C;
    GrammianPair g;
    if (ss.is_diagonal) {
        const CVector lambda = ss.poles();
        g.P = solve_dlyap_diag(lambda, BB);
        // A^* Q A - Q + C^*C = 0 is the same equation with A -> A^*.
        g.Q = solve_dlyap_diag(lambda.conjugate(), CC);
    } else {
        g.P = solve_dlyap_dense(ss.A, BB);
        g.Q = solve_dlyap_dense(ss.A.adjoint(), CC);
    }
    g.P = hermitian_part(g.P);
    g.Q = hermitian_part(g.Q);
    return g;
}

HankelSpectrum hankel_singular_values(const StateSpaceModel& ss) {
    const auto n = ss.order();
    if (n == 0) return {RVector(0)};
    const GrammianPair g = grammians(ss);
    const CMatrix PQ = g.P * g.Q;
    Eigen::ComplexEigenSolver<CMatrix> es(PQ, false);
    const double scale = PQ.norm();
    RVector mu(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const cplx m = es.eigenvalues()(j);
        require(std::abs(m.imag()) <= 1e-8 * scale, ErrorCode::ComplexEigenResidual,
                "PQ has an eigenvalue with imaginary part " + std::to_string(m.imag()));
        mu(j) = std::max(m.real(), 0.0);
    }
    std::sort(mu.data(), mu.data() + n, std::greater<>());
    return {mu.cwiseSqrt()};
}

std::size_t required_hankel_depth(const StateSpaceModel& ss) {
    const double rho = ss.is_diagonal ? (ss.order() ? ss.poles().cwiseAbs().maxCoeff() : 0.0)
                                      : spectral_radius(ss.A);
    if (rho <= 1e-12) return 1;
    require(rho < 1.0, ErrorCode::UnstableSystem, "unstable system has no finite Hankel depth");
    auto depth = static_cast<std::size_t>(std::ceil(std::log(1e-12) / std::log(rho)));
    while (std::pow(rho, static_cast<double>(depth)) >= 1e-12) ++depth;
    return std::max<std::size_t>(depth, 1);
}

std::vector<CMatrix> impulse_response(const StateSpaceModel& ss, std::size_t count) {
    std::vector<CMatrix> g;
    g.reserve(count);
    CMatrix AkB = ss.B;
    for (std::size_t k = 0; k < count; ++k) {
        g.push_back(ss.C * AkB);
        AkB = ss.A * AkB;
    }
    return g;
}

HankelSpectrum block_hankel_svd_oracle(const StateSpaceModel& ss, std::size_t depth) {
    require(depth >= 1, ErrorCode::InvalidArgument, "depth must be >= 1");
    const double rho = ss.order() ? spectral_radius(ss.A) : 0.0;
    require(std::pow(rho, static_cast<double>(depth)) < 1e-12, ErrorCode::InsufficientDepth,
            "rho^depth >= 1e-12");
    const auto ny = ss.n_outputs();
    const auto nu = ss.n_inputs();
    const auto d = static_cast<Eigen::Index>(depth);
    const auto g = impulse_response(ss, 2 * depth - 1);
    CMatrix H(d * ny, d * nu);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            H.block(i * ny, j * nu, ny, nu) = g[static_cast<std::size_t>(i + j)];
    Eigen::BDCSVD<CMatrix> svd(H);
    const RVector& s = svd.singularValues();
    RVector sigma = RVector::Zero(ss.order());
    const auto m = std::min<Eigen::Index>(s.size(), sigma.size());
    sigma.head(m) = s.head(m);
    return {sigma};
}

BalancedRealization balance(const StateSpaceModel& ss) {
    const auto n = ss.order();
    const GrammianPair g = grammians(ss);
    const CMatrix Lp = psd_factor(g.P);
    const CMatrix Lq = psd_factor(g.Q);
    Eigen::JacobiSVD<CMatrix> svd(Lq.adjoint() * Lp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector sigma = svd.singularValues();
    if (n > 0) {
        require(sigma(n - 1) >= 1e-12 * sigma(0) && sigma(0) > 0.0,
                ErrorCode::NearUnobservableState,
                "Hankel singular value below 1e-12 sigma_1; balancing is ill-conditioned");
    }
    const RVector isqrt = sigma.cwiseSqrt().cwiseInverse();
    BalancedRealization out;
    out.T = Lp * svd.matrixV() * isqrt.asDiagonal();
    out.T_inv = isqrt.asDiagonal() * svd.matrixU().adjoint() * Lq.adjoint();
    out.system = StateSpaceModel{out.T_inv * ss.A * out.T, out.T_inv * ss.B, ss.C * out.T, ss.D,
                                 false, ss.take_real_output};
    out.spectrum = {sigma};
    return out;
}

EigenDecomposition eig_dense(const CMatrix& M, bool want_left) {
    require(M.rows() == M.cols(), ErrorCode::InvalidArgument, "matrix must be square");
    EigenDecomposition out;
    if (M.rows() == 0) {
        out.values = CVector(0);
        out.right = CMatrix(0, 0);
        if (want_left) out.left = CMatrix(0, 0);
        return out;
    }
    Eigen::ComplexEigenSolver<CMatrix> es(M, true);
    out.values = es.eigenvalues();
    out.right = es.eigenvectors();
    out.right.colwise().normalize();
    Eigen::JacobiSVD<CMatrix> svd(out.right);
    const RVector& s = svd.singularValues();
    const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : INFINITY;
    require(cond <= 1e10, ErrorCode::DefectiveMatrix,
            "eigenvector matrix condition number " + std::to_string(cond));
    if (want_left) out.left = out.right.inverse().adjoint();
    return out;
}

namespace {

// C (zI - A)^{-1} B of the complex realization, without D.
CMatrix strictly_proper_response(const StateSpaceModel& ss, cplx z) {
    const auto n = ss.order();
    if (n == 0) return CMatrix::Zero(ss.n_outputs(), ss.n_inputs());
    if (ss.is_diagonal) {
        CVector inv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const cplx den = z - ss.A(i, i);
            require(std::abs(den) > 1e-14, ErrorCode::ResolventSingular,
                    "e^{iw} is an eigenvalue of A");
            inv(i) = 1.0 / den;
        }
        return ss.C * inv.asDiagonal() * ss.B;
    }
    const CMatrix R = z * CMatrix::Identity(n, n) - ss.A;
    Eigen::PartialPivLU<CMatrix> lu(R);
    require(lu.rcond() > 1e-14, ErrorCode::ResolventSingular, "e^{iw} is an eigenvalue of A");
    return ss.C * lu.solve(ss.B);
}

double max_singular_value(const CMatrix& G) {
    if (G.size() == 0) return 0.0;
    if (G.size() == 1) return std::abs(G(0, 0));
    Eigen::JacobiSVD<CMatrix> svd(G);
    return svd.singularValues()(0);
}

}  // namespace

CMatrix frequency_response(const StateSpaceModel& ss, double omega) {
    const cplx z = std::polar(1.0, omega);
    if (!ss.take_real_output) return strictly_proper_response(ss, z) + ss.D;
    const CMatrix pos = strictly_proper_response(ss, z);
    const CMatrix neg = strictly_proper_response(ss, std::conj(z));
    return 0.5 * (pos + neg.conjugate()) + ss.D.real().cast<cplx>();
}

double hinf_norm_estimate(const StateSpaceModel& ss, std::size_t grid_size) {
    require(grid_size >= 2, ErrorCode::InvalidArgument, "grid_size must be >= 2");
    const double pi = std::numbers::pi;
    const double step = pi / static_cast<double>(grid_size - 1);
    auto gain = [&](double w) { return max_singular_value(frequency_response(ss, w)); };

    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double v = gain(static_cast<double>(k) * step);
        if (v > best) {
            best = v;
            arg = k;
        }
    }
    if (ss.order() == 0) return best;

    // Golden-section refinement on the bracket around the grid maximum.
    double lo = std::max(0.0, (static_cast<double>(arg) - 1.0) * step);
    double hi = std::min(pi, (static_cast<double>(arg) + 1.0) * step);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = gain(x1);
    double f2 = gain(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = gain(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = gain(x2);
        }
    }
    return std::max({best, f1, f2});
}

RMatrix simulate(const StateSpaceModel& ss, const RMatrix& u) {
    require(u.rows() == ss.n_inputs(), ErrorCode::LengthMismatch,
            "input rows must equal n_u");
    const auto T = u.cols();
    const CMatrix Bu = ss.B * u.cast<cplx>();
    const CMatrix Du = (ss.take_real_output ? ss.D.real().cast<cplx>() : ss.D) * u.cast<cplx>();
    CVector x = CVector::Zero(ss.order());
    RMatrix y(ss.n_outputs(), T);
    for (Eigen::Index k = 0; k < T; ++k) {
        if (ss.is_diagonal)
            x = ss.A.diagonal().cwiseProduct(x) + Bu.col(k);
        else
            x = ss.A * x + Bu.col(k);
        y.col(k) = (ss.C * x + Du.col(k)).real();
    }
    return y;
}

}  // namespace ssmred

#include "ssmred/mor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

namespace ssmred {

std::string_view to_string(ReductionMethod m) {
    switch (m) {
        case ReductionMethod::MT: return "mt";
        case ReductionMethod::MSP: return "msp";
        case ReductionMethod::BT: return "bt";
        case ReductionMethod::BSP: return "bsp";
    }
    return "?";
}

ReductionMethod parse_reduction_method(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "mt") return ReductionMethod::MT;
    if (lower == "msp") return ReductionMethod::MSP;
    if (lower == "bt") return ReductionMethod::BT;
    if (lower == "bsp") return ReductionMethod::BSP;
    throw Error(ErrorCode::InvalidArgument, "unknown reduction method '" + std::string(name) + "'");
}

namespace {

void check_order(const StateSpaceModel& ss, Eigen::Index r) {
    if (r < 0 || r > ss.order())
        throw Error(ErrorCode::InvalidOrder, "order " + std::to_string(r) + " outside [0, " +
                                                 std::to_string(ss.order()) + "]");
}

// Non-increasing |lambda|, ties by ||C col|| * ||B row||.
std::vector<Eigen::Index> modal_order(const CVector& lambda, const CMatrix& B, const CMatrix& C) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(lambda.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) {
        const double mi = std::abs(lambda(i));
        const double mj = std::abs(lambda(j));
        if (mi != mj) return mi > mj;
        return C.col(i).norm() * B.row(i).norm() > C.col(j).norm() * B.row(j).norm();
    });
    return idx;
}

StateSpaceModel to_diagonal_system(const StateSpaceModel& like, const CVector& lambda, CMatrix B,
                                   CMatrix C, CMatrix D) {
    return StateSpaceModel::diagonal(lambda, std::move(B), std::move(C), std::move(D),
                                     like.take_real_output);
}

CMatrix dc_gain(const StateSpaceModel& ss) { return frequency_response(ss, 0.0); }

}  // namespace

StateSpaceModel truncate(const StateSpaceModel& ss, Eigen::Index r) {
    check_order(ss, r);
    return StateSpaceModel{ss.A.topLeftCorner(r, r), ss.B.topRows(r), ss.C.leftCols(r), ss.D,
                           ss.is_diagonal, ss.take_real_output};
}

StateSpaceModel singular_perturbation(const StateSpaceModel& ss, Eigen::Index r) {
    check_order(ss, r);
    const auto n = ss.order();
    const auto m = n - r;
    if (m == 0) return ss;
    const CMatrix A11 = ss.A.topLeftCorner(r, r);
    const CMatrix A12 = ss.A.topRightCorner(r, m);
    const CMatrix A21 = ss.A.bottomLeftCorner(m, r);
    const CMatrix A22 = ss.A.bottomRightCorner(m, m);
    const CMatrix B1 = ss.B.topRows(r);
    const CMatrix B2 = ss.B.bottomRows(m);
    const CMatrix C1 = ss.C.leftCols(r);
    const CMatrix C2 = ss.C.rightCols(m);

    Eigen::PartialPivLU<CMatrix> lu(CMatrix::Identity(m, m) - A22);
    if (!(lu.rcond() > 1e-14))
        throw Error(ErrorCode::MatrixSingular, "I - A22 is numerically singular");
    const CMatrix XA = lu.solve(A21);  // (I - A22)^{-1} A21
    const CMatrix XB = lu.solve(B2);   // (I - A22)^{-1} B2

    StateSpaceModel out;
    out.A = A11 + A12 * XA;
    out.B = B1 + A12 * XB;
    out.C = C1 + C2 * XA;
    const CMatrix correction = C2 * XB;
    if (ss.take_real_output)
        out.D = (ss.D.real() + correction.real()).cast<cplx>();
    else
        out.D = ss.D + correction;
    // Diagonal blocks decouple, so A12 = A21 = 0 keeps the result diagonal.
    out.is_diagonal = ss.is_diagonal;
    out.take_real_output = ss.take_real_output;
    return out;
}

StateSpaceModel sort_modal(const StateSpaceModel& ss) {
    if (!ss.is_diagonal) throw Error(ErrorCode::InvalidArgument, "sort_modal needs a diagonal system");
    const CVector lambda = ss.poles();
    const auto idx = modal_order(lambda, ss.B, ss.C);
    const auto n = ss.order();
    CVector l(n);
    CMatrix B(n, ss.n_inputs());
    CMatrix C(ss.n_outputs(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto j = idx[static_cast<std::size_t>(k)];
        l(k) = lambda(j);
        B.row(k) = ss.B.row(j);
        C.col(k) = ss.C.col(j);
    }
    return to_diagonal_system(ss, l, std::move(B), std::move(C), ss.D);
}

StateSpaceModel difference(const StateSpaceModel& G, const StateSpaceModel& H) {
    if (G.n_inputs() != H.n_inputs() || G.n_outputs() != H.n_outputs() ||
        G.take_real_output != H.take_real_output)
        throw Error(ErrorCode::InvalidArgument, "difference: incompatible systems");
    const auto n1 = G.order();
    const auto n2 = H.order();
    StateSpaceModel out;
    out.A = CMatrix::Zero(n1 + n2, n1 + n2);
    out.A.topLeftCorner(n1, n1) = G.A;
    out.A.bottomRightCorner(n2, n2) = H.A;
    out.B.resize(n1 + n2, G.n_inputs());
    out.B << G.B, H.B;
    out.C.resize(G.n_outputs(), n1 + n2);
    out.C << G.C, -H.C;
    out.D = G.D - H.D;
    out.is_diagonal = G.is_diagonal && H.is_diagonal;
    out.take_real_output = G.take_real_output;
    return out;
}

double error_bound(const HankelSpectrum& spectrum, std::size_t r) {
    const auto n = static_cast<std::size_t>(spectrum.size());
    if (r > n) throw Error(ErrorCode::InvalidOrder, "r exceeds the spectrum length");
    double tail = 0.0;
    for (std::size_t j = r; j < n; ++j) tail += spectrum[static_cast<Eigen::Index>(j)];
    return 2.0 * tail;
}

BalancedRealization balanced_minimal_realization(const StateSpaceModel& ss, double rel_tol) {
    const GrammianPair g = grammians(ss);
    auto factor = [](const CMatrix& X) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (X + X.adjoint()));
        const RVector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return CMatrix(es.eigenvectors() * d.asDiagonal());
    };
    const CMatrix Lp = factor(g.P);
    const CMatrix Lq = factor(g.Q);
    Eigen::JacobiSVD<CMatrix> svd(Lq.adjoint() * Lp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVector sigma = svd.singularValues();
    Eigen::Index k = 0;
    if (sigma.size() > 0 && sigma(0) > 0.0)
        while (k < sigma.size() && sigma(k) >= rel_tol * sigma(0)) ++k;

    const RVector isqrt = sigma.head(k).cwiseSqrt().cwiseInverse();
    BalancedRealization out;
    out.T = Lp * svd.matrixV().leftCols(k) * isqrt.asDiagonal();
    out.T_inv = isqrt.asDiagonal() * svd.matrixU().leftCols(k).adjoint() * Lq.adjoint();
    out.system = StateSpaceModel{out.T_inv * ss.A * out.T, out.T_inv * ss.B, ss.C * out.T, ss.D,
                                 false, ss.take_real_output};
    out.spectrum = {sigma};
    return out;
}

StateSpaceModel diagonalize(const StateSpaceModel& ss) {
    if (ss.is_diagonal) return ss;
    const EigenDecomposition eig = eig_dense(ss.A, true);
    const CMatrix Vinv = eig.left->adjoint();
    return to_diagonal_system(ss, eig.values, Vinv * ss.B, ss.C * eig.right, ss.D);
}

BlockReduction reduce_block(const StateSpaceModel& ss, std::size_t r, ReductionMethod method,
                            const ReductionOptions& opts) {
    if (!ss.is_diagonal) throw Error(ErrorCode::InvalidArgument, "reduce_block needs a diagonal system");
    const auto n = static_cast<std::size_t>(ss.order());
    if (r > n)
        throw Error(ErrorCode::InvalidOrder,
                    "r = " + std::to_string(r) + " exceeds the order " + std::to_string(n));
    const auto ri = static_cast<Eigen::Index>(r);

    BlockReduction out;
    out.report.method = method;
    out.report.original_order = n;

    if (r == n) {
        out.system = ss;
        if (is_balanced(method)) out.report.bound = 0.0;
    } else if (!is_balanced(method)) {
        const StateSpaceModel sorted = sort_modal(ss);
        out.system = method == ReductionMethod::MT ? truncate(sorted, ri)
                                                   : singular_perturbation(sorted, ri);
        for (std::size_t j = r; j < n; ++j)
            out.report.removed_eigenvalues.push_back(sorted.A(static_cast<Eigen::Index>(j),
                                                              static_cast<Eigen::Index>(j)));
    } else {
        const HankelSpectrum spectrum = hankel_singular_values(ss);
        out.report.bound = error_bound(spectrum, r);
        const BalancedRealization bal = balanced_minimal_realization(ss, opts.negligible_hsv);
        const Eigen::Index k = bal.system.order();
        const Eigen::Index keep = std::min(ri, k);
        const StateSpaceModel cut = method == ReductionMethod::BT ? truncate(bal.system, keep)
                                                                  : singular_perturbation(bal.system, keep);
        if (keep < k) {
            Eigen::ComplexEigenSolver<CMatrix> es(bal.system.A.bottomRightCorner(k - keep, k - keep), false);
            for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j)
                out.report.removed_eigenvalues.push_back(es.eigenvalues()(j));
        }
        out.system = diagonalize(cut);
    }
    out.report.retained_order = static_cast<std::size_t>(out.system.order());

    const StateSpaceModel err = difference(ss, out.system);
    out.report.hinf_error_estimate = hinf_norm_estimate(err, opts.grid_size);
    out.report.dc_gain_error = (dc_gain(ss) - dc_gain(out.system)).norm();
    return out;
}

LruReduction reduce_lru(const LruParams& p, std::size_t r, ReductionMethod method,
                        const ReductionOptions& opts) {
    const StateSpaceModel ss = to_state_space(p);
    BlockReduction block = reduce_block(ss, r, method, opts);
    LruReduction out;
    out.report = block.report;
    if (r == static_cast<std::size_t>(p.n_states())) {
        out.params = p;
        return out;
    }

    if (!is_balanced(method)) {
        // Select parameter rows so the kept eigenvalues are reproduced bitwise.
        const auto idx = modal_order(ss.poles(), ss.B, ss.C);
        const auto ri = static_cast<Eigen::Index>(r);
        LruParams q = LruParams::zeros(p.n_inputs(), p.n_outputs(), ri);
        for (Eigen::Index k = 0; k < ri; ++k) {
            const auto j = idx[static_cast<std::size_t>(k)];
            q.nu(k) = p.nu(j);
            q.phi(k) = p.phi(j);
            q.B_tilde.row(k) = p.B_tilde.row(j);
            q.C.col(k) = p.C.col(j);
        }
        q.D = block.system.D.real();
        out.params = std::move(q);
        return out;
    }

    CVector lambda = block.system.poles();
    const cplx rotate = std::polar(1.0, 1e-12);
    for (Eigen::Index j = 0; j < lambda.size(); ++j)
        if (lambda(j).imag() == 0.0 && lambda(j).real() > 0.0) lambda(j) *= rotate;
    out.params = from_modal(lambda, block.system.B, block.system.C, block.system.D.real());
    return out;
}

}  // namespace ssmred

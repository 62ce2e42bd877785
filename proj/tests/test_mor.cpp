#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "ssmred/error.hpp"
#include "ssmred/mor.hpp"

using namespace ssmred;
using namespace ssmred::testing;

namespace {

CMatrix dc(const StateSpaceModel& ss) {
    // C (I - A)^{-1} B + D, with the real readout applied when requested.
    const auto n = ss.order();
    const CMatrix G = ss.C * (CMatrix::Identity(n, n) - ss.A).inverse() * ss.B;
    if (ss.take_real_output) return (G.real() + ss.D.real()).cast<cplx>();
    return G + ss.D;
}

double max_response_gap(const StateSpaceModel& a, const StateSpaceModel& b, int points) {
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
        const double w = std::numbers::pi * k / (points - 1.0);
        worst = std::max(worst, (frequency_response(a, w) - frequency_response(b, w)).norm());
    }
    return worst;
}

const ReductionMethod kAll[] = {ReductionMethod::MT, ReductionMethod::MSP, ReductionMethod::BT, ReductionMethod::BSP};

}  // namespace

TEST(Truncate, FullOrderIsIdentity) {
    std::mt19937_64 rng(51);
    const auto ss = random_dense(rng, 4, 2, 2, 0.8);
    const auto t = truncate(ss, 4);
    EXPECT_EQ(t.A, ss.A);
    EXPECT_EQ(t.B, ss.B);
    EXPECT_EQ(t.C, ss.C);
    EXPECT_EQ(t.D, ss.D);
}

TEST(Truncate, ZeroOrderIsStatic) {
    std::mt19937_64 rng(52);
    const auto ss = random_diagonal(rng, 4, 2, 3);
    const auto t = truncate(ss, 0);
    EXPECT_EQ(t.order(), 0);
    EXPECT_EQ(t.D, ss.D);
    EXPECT_LE((frequency_response(t, 0.7) - ss.D).norm(), 1e-15);
    const RMatrix u = rrandom(rng, 2, 10);
    EXPECT_LE((simulate(t, u) - (ss.D * u.cast<cplx>()).real()).norm(), 1e-14);
}

TEST(Truncate, DiagonalKeepsLeadingEntries) {
    std::mt19937_64 rng(53);
    const auto ss = random_diagonal(rng, 6, 1, 1);
    const auto t = truncate(ss, 3);
    EXPECT_TRUE(t.is_diagonal);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(t.A(j, j), ss.A(j, j));
}

TEST(Truncate, InvalidOrder) {
    std::mt19937_64 rng(54);
    try {
        truncate(random_diagonal(rng, 3, 1, 1), 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidOrder);
    }
}

TEST(SingularPerturbation, FullOrderIsIdentity) {
    std::mt19937_64 rng(55);
    const auto ss = random_dense(rng, 4, 2, 2, 0.8);
    const auto t = singular_perturbation(ss, 4);
    EXPECT_EQ(t.A, ss.A);
    EXPECT_EQ(t.D, ss.D);
}

TEST(SingularPerturbation, PreservesDcGain) {
    std::mt19937_64 rng(56);
    for (int trial = 0; trial < 30; ++trial) {
        const bool dense = trial % 2 == 0;
        const auto n = pick(rng, 2, 8);
        const auto ss = dense ? random_dense(rng, n, 2, 2, 0.9) : random_diagonal(rng, n, 2, 2, 0.95, trial % 3 == 0);
        const auto r = pick(rng, 0, n - 1);
        const auto red = singular_perturbation(ss, r);
        const CMatrix G = dc(ss);
        EXPECT_LE((G - dc(red)).norm(), 1e-9 * (1 + G.norm()));
    }
}

TEST(SingularPerturbation, DiagonalToStaticGain) {
    std::mt19937_64 rng(57);
    const auto ss = random_diagonal(rng, 5, 2, 2, 0.9, true);
    const auto red = singular_perturbation(ss, 0);
    EXPECT_EQ(red.order(), 0);
    EXPECT_TRUE(red.take_real_output);
    const CMatrix expected = dc(ss);
    EXPECT_LE((red.D - expected).norm(), 1e-12 * expected.norm());
    EXPECT_EQ(red.D.imag().norm(), 0.0);
}

TEST(SingularPerturbation, SingularResidualThrows) {
    CVector l(2);
    l << 0.5, 1.0;
    const auto ss = StateSpaceModel::diagonal(l, CMatrix::Ones(2, 1), CMatrix::Ones(1, 2), CMatrix::Zero(1, 1), false);
    try {
        singular_perturbation(ss, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MatrixSingular);
    }
}

TEST(SortModal, SortedIsUnchanged) {
    CVector l(3);
    l << 0.9, cplx(0, 0.5), -0.1;
    std::mt19937_64 rng(58);
    const auto ss = StateSpaceModel::diagonal(l, crandom(rng, 3, 1), crandom(rng, 1, 3), CMatrix::Zero(1, 1), false);
    const auto s = sort_modal(ss);
    EXPECT_EQ(s.A, ss.A);
    EXPECT_EQ(s.B, ss.B);
    EXPECT_EQ(s.C, ss.C);
}

TEST(SortModal, NonIncreasingAndTransferInvariant) {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ss = random_diagonal(rng, 7, 2, 2, 0.95, true);
        const auto s = sort_modal(ss);
        for (int j = 1; j < 7; ++j) EXPECT_LE(std::abs(s.A(j, j)), std::abs(s.A(j - 1, j - 1)));
        EXPECT_LE(max_response_gap(ss, s, 64), 1e-12);
    }
}

TEST(SortModal, TieBreakByCouplingNorm) {
    CVector l(3);
    l << std::polar(0.5, 1.0), std::polar(0.5, -2.0), std::polar(0.5, 0.3);
    CMatrix B(3, 1), C(1, 3);
    B << 1.0, 3.0, 2.0;
    C << 1.0, 1.0, 1.0;
    const auto s = sort_modal(StateSpaceModel::diagonal(l, B, C, CMatrix::Zero(1, 1), false));
    EXPECT_EQ(s.B(0, 0), cplx(3.0));
    EXPECT_EQ(s.B(1, 0), cplx(2.0));
    EXPECT_EQ(s.B(2, 0), cplx(1.0));
    EXPECT_EQ(s.A(0, 0), l(1));
}

TEST(ErrorBound, Arithmetic) {
    HankelSpectrum s;
    s.sigma.resize(3);
    s.sigma << 3.0, 1.0, 0.5;
    EXPECT_EQ(error_bound(s, 1), 3.0);
    EXPECT_EQ(error_bound(s, 3), 0.0);
    EXPECT_EQ(error_bound(s, 0), 9.0);
    EXPECT_THROW(error_bound(s, 4), Error);
}

TEST(Difference, IsParallelSubtraction) {
    std::mt19937_64 rng(60);
    const auto g = random_diagonal(rng, 3, 2, 2, 0.9, true);
    const auto h = random_diagonal(rng, 2, 2, 2, 0.9, true);
    const auto d = difference(g, h);
    EXPECT_TRUE(d.is_diagonal);
    const RMatrix u = rrandom(rng, 2, 50);
    EXPECT_LE((simulate(d, u) - (simulate(g, u) - simulate(h, u))).norm(), 1e-12);
}

TEST(Diagonalize, PreservesTransferFunction) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ss = random_dense(rng, 5, 2, 2, 0.9);
        const auto d = diagonalize(ss);
        EXPECT_TRUE(d.is_diagonal);
        EXPECT_LE(max_response_gap(ss, d, 64), 1e-8 * (1 + hinf_norm_estimate(ss, 64)));
    }
}

TEST(BalancedMinimal, DropsUnobservableDirections) {
    std::mt19937_64 rng(62);
    auto ss = random_diagonal(rng, 5, 1, 1, 0.9);
    ss.C(0, 3) = 0.0;
    ss.C(0, 4) = 0.0;
    const auto bal = balanced_minimal_realization(ss, 1e-12);
    EXPECT_EQ(bal.system.order(), 3);
    EXPECT_LE(max_response_gap(ss, bal.system, 64), 1e-9);
}

TEST(ReduceBlock, FullOrderHasNoError) {
    std::mt19937_64 rng(63);
    const auto ss = random_diagonal(rng, 6, 2, 2, 0.95, true);
    for (auto m : kAll) {
        const auto red = reduce_block(ss, 6, m);
        EXPECT_LE(red.report.hinf_error_estimate, 1e-9);
        EXPECT_EQ(red.report.retained_order, 6u);
        EXPECT_TRUE(red.report.removed_eigenvalues.empty());
        EXPECT_EQ(red.report.bound.has_value(), is_balanced(m));
    }
}

TEST(ReduceBlock, BalancedTruncationWithinBound) {
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ss = random_diagonal(rng, 8, 1, 1, 0.95, trial % 2 == 0);
        const auto sigma = hankel_singular_values(ss);
        const auto red = reduce_block(ss, 4, ReductionMethod::BT);
        const double tail = 2.0 * (sigma[4] + sigma[5] + sigma[6] + sigma[7]);
        EXPECT_NEAR(*red.report.bound, tail, 1e-12 * (1 + tail));
        EXPECT_LE(red.report.hinf_error_estimate, tail + 1e-6);
    }
}

TEST(ReduceBlock, BoundHoldsForAllOrders) {
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 15; ++trial) {
        const auto n = pick(rng, 1, 7);
        const auto ss = random_diagonal(rng, n, pick(rng, 1, 2), pick(rng, 1, 2), 0.95, trial % 2 == 1);
        for (Eigen::Index r = 0; r <= n; ++r)
            for (auto m : {ReductionMethod::BT, ReductionMethod::BSP}) {
                const auto red = reduce_block(ss, static_cast<std::size_t>(r), m, {256, 1e-12});
                EXPECT_LE(red.report.hinf_error_estimate, *red.report.bound + 1e-6);
            }
    }
}

TEST(ReduceBlock, ModalTruncationKeepsLargestPolesExactly) {
    std::mt19937_64 rng(66);
    const auto ss = random_diagonal(rng, 7, 1, 2, 0.95, true);
    const auto red = reduce_block(ss, 3, ReductionMethod::MT);
    const CVector diag = ss.A.diagonal();
    std::vector<cplx> poles(diag.data(), diag.data() + 7);
    std::stable_sort(poles.begin(), poles.end(), [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
    for (int j = 0; j < 3; ++j) EXPECT_EQ(red.system.A(j, j), poles[static_cast<std::size_t>(j)]);
    EXPECT_EQ(red.report.removed_eigenvalues.size(), 4u);
}

TEST(ReduceBlock, PerturbationMethodsPreserveDcGain) {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = pick(rng, 2, 8);
        const auto ss = random_diagonal(rng, n, 2, 2, 0.95, true);
        const auto r = static_cast<std::size_t>(pick(rng, 0, n - 1));
        for (auto m : {ReductionMethod::MSP, ReductionMethod::BSP}) {
            const auto red = reduce_block(ss, r, m);
            const CMatrix G = frequency_response(ss, 0.0);
            EXPECT_LE((G - frequency_response(red.system, 0.0)).norm(), 1e-9 * (1 + G.norm()));
            EXPECT_LE(red.report.dc_gain_error, 1e-9 * (1 + G.norm()));
        }
    }
}

TEST(ReduceBlock, ReducedSystemsStayStableAndDiagonal) {
    std::mt19937_64 rng(68);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ss = random_diagonal(rng, 6, 1, 1, 0.99, true);
        for (auto m : kAll)
            for (std::size_t r = 0; r <= 6; ++r) {
                const auto red = reduce_block(ss, r, m, {128, 1e-12});
                EXPECT_TRUE(red.system.is_diagonal);
                EXPECT_TRUE(red.system.take_real_output);
                if (red.system.order() > 0) {
                    EXPECT_LT(spectral_radius(red.system.A), 1.0);
                }
            }
    }
}

TEST(ReduceBlock, RejectsNonDiagonalAndOversizedOrder) {
    std::mt19937_64 rng(69);
    EXPECT_THROW(reduce_block(random_dense(rng, 3, 1, 1, 0.5), 1, ReductionMethod::MT), Error);
    EXPECT_THROW(reduce_block(random_diagonal(rng, 3, 1, 1), 4, ReductionMethod::MT), Error);
}

TEST(ReduceLru, FullOrderIsInputOutputEquivalent) {
    std::mt19937_64 rng(70);
    const LruParams p = random_lru(rng, 2, 2, 6);
    const RMatrix u = rrandom(rng, 2, 200);
    for (auto m : kAll) {
        const auto red = reduce_lru(p, 6, m);
        EXPECT_LE((simulate_sequential(red.params, u) - simulate_sequential(p, u)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(ReduceLru, ModalTruncationKeepsParametersBitwise) {
    std::mt19937_64 rng(71);
    const LruParams p = random_lru(rng, 1, 1, 8);
    const auto red = reduce_lru(p, 5, ReductionMethod::MT);
    const CVector kept = eigenvalues(red.params);
    const CVector all = eigenvalues(p);
    for (Eigen::Index k = 0; k < 5; ++k) {
        bool found = false;
        for (Eigen::Index j = 0; j < 8; ++j) found = found || all(j) == kept(k);
        EXPECT_TRUE(found);
    }
    EXPECT_EQ(red.params.D, p.D);
}

TEST(ReduceLru, ZeroModesArePureFeedthrough) {
    // A zero eigenvalue with the state reading u_k contributes Re[c b] u_k.
    // MSP folds that into D exactly; MT drops exactly that term.
    std::mt19937_64 rng(72);
    LruParams p = random_lru(rng, 1, 1, 5);
    p.nu(3) = 50.0;
    p.nu(4) = 50.0;
    const RMatrix u = rrandom(rng, 1, 300);
    const RMatrix y = simulate_sequential(p, u);
    const auto msp = reduce_lru(p, 3, ReductionMethod::MSP);
    EXPECT_LE((simulate_sequential(msp.params, u) - y).cwiseAbs().maxCoeff(), 1e-10);
    const auto mt = reduce_lru(p, 3, ReductionMethod::MT);
    const double feedthrough = (p.C.col(3) * p.B_tilde.row(3) + p.C.col(4) * p.B_tilde.row(4)).real()(0, 0);
    EXPECT_LE((y - simulate_sequential(mt.params, u) - feedthrough * u).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ReduceLru, BalancedOutputErrorWithinEnvelope) {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 10; ++trial) {
        const LruParams p = random_lru(rng, 1, 1, 6, 0.2, 0.95);
        const auto sigma = hankel_singular_values(to_state_space(p));
        // Cut at the largest gap of the spectrum.
        std::size_t r = 1;
        for (std::size_t j = 1; j + 1 < 6; ++j)
            if (sigma[static_cast<Eigen::Index>(j)] / sigma[static_cast<Eigen::Index>(j + 1)] >
                sigma[static_cast<Eigen::Index>(r - 1)] / sigma[static_cast<Eigen::Index>(r)])
                r = j + 1;
        const RMatrix u = rrandom(rng, 1, 2000);
        const RMatrix y = simulate_sequential(p, u);
        for (auto m : {ReductionMethod::BT, ReductionMethod::BSP}) {
            const auto red = reduce_lru(p, r, m);
            // The simulated map is z (G - D) + D, so the guaranteed envelope
            // is (bound + 2 |dD|) |u|; on white-noise inputs bound * |u| holds.
            const double dD = (red.params.D - p.D).norm();
            const double err = (simulate_sequential(red.params, u) - y).norm();
            EXPECT_LE(err, (*red.report.bound + 2.0 * dD) * u.norm() + 1e-9);
            EXPECT_LE(err, *red.report.bound * u.norm() + 1e-9);
            if (m == ReductionMethod::BT) EXPECT_EQ(dD, 0.0);
        }
    }
}

TEST(ReduceLru, BalancedHandlesRealPositivePoles) {
    LruParams p = LruParams::zeros(1, 1, 3);
    p.nu << std::log(-std::log(0.9)), std::log(-std::log(0.5)), std::log(-std::log(0.2));
    p.phi << -800.0, -800.0, -800.0;  // real positive eigenvalues
    p.B_tilde << 1.0, 0.5, 0.2;
    p.C << 1.0, -0.3, 0.1;
    for (auto m : {ReductionMethod::BT, ReductionMethod::BSP}) {
        const auto red = reduce_lru(p, 1, m);
        EXPECT_EQ(red.params.n_states(), 1);
        EXPECT_LT(std::abs(eigenvalues(red.params)(0)), 1.0);
    }
}

TEST(ReductionMethodNames, RoundTrip) {
    for (auto m : kAll) EXPECT_EQ(parse_reduction_method(to_string(m)), m);
    EXPECT_EQ(parse_reduction_method("BSP"), ReductionMethod::BSP);
    EXPECT_THROW(parse_reduction_method("hankel"), Error);
}

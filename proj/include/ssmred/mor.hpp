#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssmred/linalg.hpp"
#include "ssmred/lru.hpp"

namespace ssmred {

enum class ReductionMethod { MT, MSP, BT, BSP };

std::string_view to_string(ReductionMethod m);
ReductionMethod parse_reduction_method(std::string_view name);  // "mt", "msp", "bt", "bsp"

inline bool is_balanced(ReductionMethod m) {
    return m == ReductionMethod::BT || m == ReductionMethod::BSP;
}
inline bool is_perturbation(ReductionMethod m) {
    return m == ReductionMethod::MSP || m == ReductionMethod::BSP;
}

struct ReductionReport {
    ReductionMethod method = ReductionMethod::MT;
    std::size_t original_order = 0;
    std::size_t retained_order = 0;
    std::optional<double> bound;  // 2 sum_{j>r} sigma_j, balanced methods only
    double hinf_error_estimate = 0.0;
    double dc_gain_error = 0.0;
    std::vector<cplx> removed_eigenvalues;
};

struct ReductionOptions {
    std::size_t grid_size = 1024;  // H-infinity estimator grid for the report
    /// Balanced methods first discard directions with sigma_j below this
    /// fraction of sigma_1.
    double negligible_hsv = 1e-12;
};

/// Keep the leading r states: A11, B1, C1, D.
StateSpaceModel truncate(const StateSpaceModel& ss, Eigen::Index r);

/// Residualize the trailing states at equilibrium (DC gain preserving).
/// For take_real_output systems the feedthrough correction enters D through
/// its real part only.
StateSpaceModel singular_perturbation(const StateSpaceModel& ss, Eigen::Index r);

/// Permute a diagonal system so that |lambda| is non-increasing. Ties in
/// |lambda| are ordered by ||C col|| * ||B row||, largest first.
StateSpaceModel sort_modal(const StateSpaceModel& ss);

/// Parallel difference G - H (same inputs, subtracted outputs).
StateSpaceModel difference(const StateSpaceModel& G, const StateSpaceModel& H);

/// 2 * (sum of the sigma_j beyond the first r retained states).
double error_bound(const HankelSpectrum& spectrum, std::size_t r);

/// Balanced realization of the part of ss whose Hankel singular values are
/// at least rel_tol * sigma_1; the result may have fewer states than ss.
BalancedRealization balanced_minimal_realization(const StateSpaceModel& ss, double rel_tol);

/// Re-express a general system in diagonal (modal) form through the
/// eigendecomposition of A.
StateSpaceModel diagonalize(const StateSpaceModel& ss);

struct BlockReduction {
    StateSpaceModel system;  // diagonal, take_real_output preserved
    ReductionReport report;
};

/// Reduce a stable diagonal block to order r. Modal methods sort and cut;
/// balanced methods balance, cut, and re-diagonalize. r equal to the order
/// returns the input realization. Balanced methods may retain fewer than r
/// states when the block has fewer than r non-negligible Hankel singular values.
BlockReduction reduce_block(const StateSpaceModel& ss, std::size_t r, ReductionMethod method,
                            const ReductionOptions& opts = {});

struct LruReduction {
    LruParams params;
    ReductionReport report;
};

/// Reduce an LRU. Modal methods select parameter rows directly, so the kept
/// eigenvalues are bitwise unchanged; balanced methods go through from_modal
/// with real-positive eigenvalues rotated by 1e-12 rad.
LruReduction reduce_lru(const LruParams& p, std::size_t r, ReductionMethod method,
                        const ReductionOptions& opts = {});

}  // namespace ssmred

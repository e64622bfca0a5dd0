#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sparseloc/disorder.hpp"
#include "sparseloc/lattice.hpp"
#include "sparseloc/operators.hpp"

namespace sparseloc {

inline constexpr Eigen::Index kDenseCap = 4096;

struct EigenReport {
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::VectorXd ipr;
    Eigen::MatrixXd vectors;      // empty unless requested
    int side = 0;
    std::uint64_t realization = 0;
    double max_residual = 0.0;
};

/// Dense symmetric eigendecomposition; refuses volumes above `cap`. Every
/// state must satisfy ||A psi - E psi|| <= 1e-8.
EigenReport eigensystem(const AssembledOperator& a, Eigen::Index cap = kDenseCap, bool keep_vectors = false);

/// sum |psi(n)|^4 for ||psi|| = 1 (to 1e-10).
double ipr(const Eigen::Ref<const Eigen::VectorXd>& psi);

/// min(d_i, d_{i+1}) / max(d_i, d_{i+1}) for consecutive spacings of sorted
/// levels; entry i belongs to level i + 1. Pairs of zero spacings give NaN.
std::vector<double> spacing_ratios(std::span<const double> sorted_levels);
/// Mean of the finite spacing ratios.
double spacing_ratio_mean(std::span<const double> sorted_levels);

struct EdgeBin {
    double lo = 0.0, hi = 0.0;
    std::int64_t count = 0;
    double median_ipr = 0.0;  // NaN for an empty bin
    double r_stat = 0.0;      // NaN without spacing ratios
    std::int64_t ratio_count = 0;
};

struct EdgeScan {
    std::vector<EdgeBin> bins;
    double h0_norm_1 = 0.0;
    double h0_norm_s = 0.0;
    double s = 0.5;
    int realizations = 0;
    std::int64_t volume = 0;
};

/// Pools eigenvalues and IPRs over realizations into bins of `bin_width`
/// covering the observed spectrum, with markers +-||H0||_1 and +-||H0||_s.
EdgeScan mobility_edge_scan(const KernelOperator& k, const SiteSet& set, const DisorderModel& model,
                            const Cube& volume, int realizations, double s, double bin_width = 0.1);

/// Median of the per-bin median IPRs over non-empty bins lying in |E| >= threshold.
/// Uses only the emitted bin table, so the verdict can be recomputed from the CSV.
double median_ipr_outside(const EdgeScan& scan, double threshold);
/// Median IPR of the bin containing E = 0.
double median_ipr_center(const EdgeScan& scan);

}  // namespace sparseloc

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sparseloc/disorder.hpp"
#include "sparseloc/lattice.hpp"
#include "sparseloc/numerics.hpp"
#include "sparseloc/operators.hpp"

namespace sparseloc {

struct GreenQuery {
    double energy = 0.0;
    double epsilon = 1e-3;
    double s = 0.5;
    Site source;
    Cube volume;
    int realizations = 2;

    void validate() const;
};

/// Mergeable (count, mean, M2) accumulator. Merging is Chan's pairwise update,
/// so a fixed partition gives the same bits on any thread count.
struct RunningStats {
    std::int64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x);
    /// n identical observations of x.
    void add_repeated(double x, std::int64_t n);
    void merge(const RunningStats& other);
    double variance() const;
    double standard_error() const;
};

struct GreenRow {
    Cube cube;
    VectorX<cplx> values;  // indexed by cube.index_of
    double residual = 0.0;

    cplx at(const Site& m) const { return values[cube.index_of(m)]; }
};

/// Row n of (A - z)^{-1}: one solve against delta_n. Sparse LU up to 10^4
/// unknowns, BiCGSTAB above with an LU fallback. Residual <= 1e-10 or NumericalError.
GreenRow green_row(const AssembledOperator& a, cplx z, const Site& n);

struct MomentEstimate {
    GreenQuery query;
    double lambda = 0.0;
    /// Per site of the volume, mean of |G(E + i eps; source, m)|^s.
    std::vector<RunningStats> per_site;
    /// Per max-norm distance, realization-wise shell averages of |G|^s.
    std::vector<RunningStats> per_distance;

    const RunningStats& at(const Site& m) const { return per_site[query.volume.index_of(m)]; }
};

/// Monte Carlo E|G|^s with one solve per realization. Realizations are processed
/// in fixed blocks and merged in block order.
MomentEstimate fractional_moment_estimate(const GreenQuery& q, const KernelOperator& k, const SiteSet& s,
                                          const DisorderModel& model);

struct DecouplingSearch {
    double radius = 0.0;  // 0 selects 10 x law scale
    int real_points = 41;
    int imag_points = 3;
    bool polish = true;
};

struct DecouplingEstimate {
    double s = 0.5;
    double kappa_hat = 1.0;
    /// D with C = |lambda|^s (1-s)^s D.
    double d_eff = 1.0;
    /// D with kappa_hat = ((1-s)/D^s)^s.
    double d_proof = 1.0;
    cplx eta{0.0, 0.0};
    cplx beta{0.0, 0.0};
    double grid_min = 1.0;
    bool on_boundary = false;
    DecouplingSearch search;
};

/// Ratio int|x-eta|^s |x-beta|^s dmu / int|x-beta|^s dmu by adaptive quadrature.
double decoupling_ratio(const Law& law, double s, cplx eta, cplx beta);

/// kappa_hat = min of the ratio over a complex grid |Re|, Im <= R (Im >= 0 by
/// symmetry), optionally polished by Nelder-Mead from the grid minimizer.
DecouplingEstimate estimate_decoupling(const Law& law, double s, const DecouplingSearch& search = {});

/// Fixed kappa_hat, e.g. a hand override or a literature constant.
DecouplingEstimate decoupling_override(double s, double kappa_hat);
/// Pessimistic path: C = |lambda|^s (1-s)^s D for a user-supplied D.
DecouplingEstimate decoupling_from_constant(double s, double d);

/// |E|^s off S, |coupling|^s kappa_hat on S.
double coupling_constant_C(double energy, double coupling, double s, bool on_s, const DecouplingEstimate& dec);

struct SiteProfile {
    bool on_s = true;
    bool off_s = true;
};

/// ||K||_s^s / min C over the site kinds present.
double k_s_factor(const KernelOperator& k, double energy, double coupling, double s, SiteProfile profile,
                  const DecouplingEstimate& dec);

struct LocalizationCertificate {
    double k_s = 0.0;
    double geometric_sum = 0.0;  // sum_{j>=0} k^j
    double shell_sum = 0.0;      // sum_{l>=1} l^(nu-1) k^l
};

/// Only for k_s < 1; otherwise no certificate exists.
std::optional<LocalizationCertificate> localization_certificate(double k_s, int nu);

/// lambda_s = (||K||_s^s / kappa_hat)^(1/s).
double lambda_threshold(const KernelOperator& k, double s, const DecouplingEstimate& dec);

/// (2 sqrt 2)^s / (lambda^s (1-s)).
double am_uniform_bound(double lambda, double s);

struct DistanceBin {
    int distance = 0;
    double mean = 0.0;
    double standard_error = 0.0;
    std::int64_t count = 0;
};

struct DecayFit {
    double rate = 0.0;
    double intercept = 0.0;
    bool pass = false;
    std::vector<int> distances_used;
};

/// Shell bins of the estimate, truncated 2 hops before the volume boundary.
std::vector<DistanceBin> distance_bins(const MomentEstimate& est);

/// log(mean) = intercept + rate d over bins with mean > 10 stderr. Needs 6 such
/// bins (FitDegenerateError otherwise). pass iff rate <= log k_s + 0.05.
DecayFit decay_rate_fit(std::span<const DistanceBin> bins, double k_s);
DecayFit decay_rate_fit(const MomentEstimate& est, double k_s);

struct SimonWolffRow {
    double epsilon = 0.0;
    double mean_sum_g2 = 0.0;
    double standard_error = 0.0;
    double trend_ratio = 0.0;  // per halving of epsilon; NaN on the first row
};

/// E sum_m |G(E + i eps; n, m)|^2 down a strictly decreasing ladder. Each
/// realization reuses one potential for the whole ladder.
std::vector<SimonWolffRow> simon_wolff_proxy(const GreenQuery& q, const KernelOperator& k, const SiteSet& s,
                                             const DisorderModel& model, std::span<const double> eps_ladder);

struct Theorem2Cube {
    int radius = 0;
    /// inf over S-sites outside the cube of (1+|m|)^(gamma s) kappa_hat / ||K||_s^s.
    double b = 0.0;
    bool b_infinite = false;
};

/// Smallest cube around n outside which every site of S has (1+|m|)^(gamma s) kappa_hat > ||K||_s^s.
Theorem2Cube theorem2_cube(const Site& n, double s, double gamma, const KernelOperator& k,
                           const DecouplingEstimate& dec, const SiteSet& set);

}  // namespace sparseloc

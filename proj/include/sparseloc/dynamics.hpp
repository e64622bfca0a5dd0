#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sparseloc/disorder.hpp"
#include "sparseloc/lattice.hpp"
#include "sparseloc/numerics.hpp"
#include "sparseloc/operators.hpp"

namespace sparseloc {

/// Finitely supported vector on Z^nu.
using LatticeVector = std::map<Site, cplx>;

LatticeVector delta_vector(const Site& n);

struct PropagatorQuery {
    SymbolSpec spec;
    double t = 0.0;
    std::vector<Offset> offsets;
};

/// a(d) = (1/2pi) int exp(-i t h(theta) + i d theta) dtheta for |d| <= reach.
struct AxisFactor {
    int reach = 0;
    std::vector<cplx> values;  // values[d + reach]
    int nodes = 0;
    double error_estimate = 0.0;  // NaN when not verified

    cplx operator()(int d) const {
        return (d < -reach || d > reach) ? cplx{} : values[static_cast<std::size_t>(d + reach)];
    }
};

/// Periodic trapezoid rule through one FFT. With verify, the node count is
/// doubled until two successive results agree to 1e-10 (NumericalError past 2^26).
AxisFactor axis_factor(const std::vector<CosineTerm>& axis, double t, int reach, bool verify = true);

/// Product of axis factors at each offset. t = 0 returns the exact identity.
std::map<Offset, cplx> evolution_kernel(const PropagatorQuery& q);

/// (-i)^m J_m(2 c t) for d = m k, zero when k does not divide d.
cplx bessel_axis_factor(int k, double c, double t, int d);

/// Analytic bound on |a(d)| by shifting the contour to Im theta = +-y:
/// inf_y exp(-|d| y + |t| sum 2|c_k| sinh(k y)), capped at 1.
double contour_envelope(const std::vector<CosineTerm>& axis, double t, double d);

struct OffDiagonalRow {
    int distance = 0;
    double abs_kernel = 0.0;  // max over the max-norm shell
    double bound = 0.0;
    bool pass = true;
};

struct OffDiagonalReport {
    std::vector<OffDiagonalRow> rows;
    double c = 0.0;
    double h_prime_sup = 0.0;
    bool pass = true;
};

/// Shell maxima of |kernel| at the admitted distances (nu |t| ||h'|| / d <= 1/2)
/// against C / d^(2nu+1), C calibrated at the smallest admitted distance.
OffDiagonalReport verify_offdiagonal_decay(const SymbolSpec& spec, double t, const std::vector<int>& distances);

enum class DecayMode { max_over_offsets, fixed_offset };

struct AxisTimeDecay {
    double slope = 0.0;
    double intercept = 0.0;
    double target = 0.0;  // NaN when the stationary points are too degenerate to predict
    bool pass = false;
    std::vector<double> m_values;
};

struct TimeDecayReport {
    std::vector<double> t;
    std::vector<AxisTimeDecay> axes;
    double total_slope = 0.0;
    double total_target = 0.0;
    bool pass = false;
};

/// Log-log slope of M(t) per axis; M is max_d |a| or, for a fixed offset, the
/// envelope max over [t, t + 2 tau] with tau = 2pi / (max h - min h).
TimeDecayReport verify_time_decay(const SymbolSpec& spec, std::span<const double> t_grid,
                                  DecayMode mode = DecayMode::max_over_offsets, int offset = 0);

/// -1/3 if h'' vanishes somewhere (with h''' != 0 there), else -1/2.
double max_decay_target(const std::vector<CosineTerm>& axis);
/// Same classification at the zeros of h', the stationary points for fixed d.
double fixed_decay_target(const std::vector<CosineTerm>& axis);

struct DyadicWindow {
    double lo = 0.0, hi = 0.0;
    double integral = 0.0;
    double error = 0.0;
};

struct SparsenessResult {
    std::vector<double> t;
    std::vector<double> c;
    std::vector<DyadicWindow> windows;
    std::vector<double> ratios;  // windows[j+1] / windows[j]
    double head_bound = 0.0;     // bounds the [0, 1] contribution
    double tail_bound = 0.0;     // certified contribution of S beyond its cube
    double total = 0.0;
    bool converging = false;
};

/// c(t) = (sum_{m in S} w(m)^2 |(e^{-itH0} phi)(m)|^2)^{1/2}, w = 1 or (1+|m|)^gamma,
/// integrated over dyadic windows of [1, T_max]. Converging iff the last three
/// window ratios are < 0.9.
SparsenessResult sparseness_integral(const SymbolSpec& spec, const SparseSet& s, const LatticeVector& phi,
                                     double t_max, std::optional<double> gamma = std::nullopt,
                                     int samples = 512);

struct CookRow {
    double t = 0.0;
    double bound = 0.0;        // sigma c(t)
    double expected_sq = 0.0;  // sigma^2 c(t)^2
    double mean_sq = 0.0;      // MC mean of ||V psi_t||^2
    double stderr_sq = 0.0;
    double q10 = 0.0, median = 0.0, q90 = 0.0;  // quantiles of ||V psi_t||
    bool pass = true;                           // median <= bound
};

/// Deterministic Cook bound against sampled ||V_S psi_t||, psi_t = e^{-itH0} phi.
std::vector<CookRow> cook_integrand(const SymbolSpec& spec, const SiteSet& s, const DisorderModel& model,
                                    const LatticeVector& phi, std::span<const double> t_grid, int samples = 30);

struct WeightedTailResult {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// sum_{m in S, m in cube} (1+|m|)^(2 beta) |psi_t(m)|^2; the part of S beyond the
/// cube is bounded by the kernel envelopes and must be < 1e-12.
WeightedTailResult weighted_tail_norm(const SymbolSpec& spec, const LatticeVector& phi, double t, double beta,
                                      const SiteSet& s, const Cube& cube);

}  // namespace sparseloc

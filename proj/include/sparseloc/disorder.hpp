#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparseloc/lattice.hpp"
#include "sparseloc/operators.hpp"

namespace sparseloc {

enum class LawKind { uniform, gaussian, truncated_cauchy };

std::string to_string(LawKind k);
LawKind parse_law(const std::string& name);

/// Single-site distribution mu. Parameters:
///   uniform(a, b); gaussian(mean, sd); truncated_cauchy(scale, cut) on [-cut, cut].
/// gaussian with sd = 0 is the point mass, admitted only for regularity diagnostics.
struct Law {
    LawKind kind = LawKind::uniform;
    double p1 = -1.0;
    double p2 = 1.0;

    static Law uniform(double a, double b) { return {LawKind::uniform, a, b}; }
    static Law gaussian(double mean, double sd) { return {LawKind::gaussian, mean, sd}; }
    static Law truncated_cauchy(double scale, double cut) { return {LawKind::truncated_cauchy, scale, cut}; }

    void validate() const;
    bool absolutely_continuous() const;

    /// Inverse-CDF draw from u in (0,1); gaussian uses Box-Muller on (u1, u2).
    double draw(double u1, double u2) const;
    double density(double x) const;
    /// mu((lo, hi)) in closed form.
    double interval_measure(double lo, double hi) const;
    double mean() const;
    double variance() const;
    /// sigma^2 = int x^2 dmu.
    double second_moment() const;
    /// Interval carrying all but a negligible (< 1e-30) part of the mass.
    std::pair<double, double> effective_support() const;
    /// Characteristic width used to size decoupling search grids.
    double scale() const;
};

/// Theorem-2-style weights a_n = (1 + |n|)^gamma.
struct Weight {
    double gamma = 1.0;
};

double weight_value(double gamma, const Site& n);

struct DisorderModel {
    Law law;
    double lambda = 1.0;
    std::optional<Weight> weight;
    std::uint64_t seed = 0;

    void validate() const;
    /// Coupling at site n: a_n when weighted, lambda otherwise.
    double coupling(const Site& n) const;
};

/// Raw (unscaled) i.i.d. draw of the law at site n for one realization.
double draw_site(const DisorderModel& model, const Site& n, std::uint64_t realization);

/// Independent draws on S scaled by lambda (or by a_n when a weight is set).
/// Pure function of (seed, realization, site); sites off S are absent.
Potential sample_potential(const DisorderModel& model, const SiteSet& s, std::uint64_t realization);

struct RegularityGrid {
    std::optional<double> a_min;  // defaults to the 0.001 quantile
    std::optional<double> a_max;  // defaults to the 0.999 quantile
    int a_points = 201;
    double delta_min = 0.01;
    double delta_max = 0.99;
    int delta_points = 99;
};

struct RegularityReport {
    double b = 1.0;
    double c_estimate = 0.0;
    double a_min = 0.0, a_max = 0.0;
    double delta_min = 0.0, delta_max = 0.0;
    int samples = 0;
    bool pass = false;
};

/// max over the grid of mu(a-delta, a+delta) / (delta mu(a-b, a+b)).
RegularityReport check_regularity(const Law& law, double b, const RegularityGrid& grid = {});

}  // namespace sparseloc

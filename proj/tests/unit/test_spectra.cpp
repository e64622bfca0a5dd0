#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sparseloc/spectra.hpp"

using namespace sparseloc;

TEST_CASE("free chain eigenvalues and extended states") {
    const Cube c(origin(1), 30);
    const auto rep = eigensystem(assemble_finite_volume(kernel_from_symbol(cosine_symbol(1)), {}, c), kDenseCap, true);
    const int n = 61;
    for (int j = 1; j <= n; ++j)
        CHECK(std::abs(rep.eigenvalues[n - j] - 2.0 * std::cos(std::numbers::pi * j / (n + 1))) < 1e-12);
    // Dirichlet modes sqrt(2/(N+1)) sin(pi j n/(N+1)) have IPR 3/(2(N+1)) away from j = (N+1)/2.
    CHECK(rep.ipr[0] == doctest::Approx(1.5 / (n + 1)).epsilon(1e-10));
    CHECK(rep.max_residual <= 1e-8);
    CHECK(rep.vectors.cols() == n);
}

TEST_CASE("strong disorder localizes") {
    const Cube c(origin(1), 20);
    Potential v;
    for (const auto& m : cube_sites(c))
        v[m] = 1000.0 * m[0];
    const auto rep = eigensystem(assemble_finite_volume(kernel_from_symbol(cosine_symbol(1)), v, c));
    CHECK(rep.ipr.minCoeff() > 0.99);
}

TEST_CASE("dense cap") {
    const Cube c(origin(2), 40);
    CHECK_THROWS_AS(eigensystem(assemble_finite_volume(kernel_from_symbol(cosine_symbol(2)), {}, c)),
                    std::invalid_argument);
}

TEST_CASE("ipr of simple vectors") {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
    e[2] = 1.0;
    CHECK(ipr(e) == 1.0);
    CHECK(ipr(Eigen::VectorXd::Constant(16, 0.25)) == doctest::Approx(1.0 / 16.0));
    CHECK_THROWS_AS(ipr(Eigen::VectorXd::Constant(4, 1.0)), std::invalid_argument);
}

TEST_CASE("spacing ratios") {
    const std::vector<double> even{0.0, 1.0, 2.0, 3.0};
    CHECK(spacing_ratios(even) == std::vector<double>{1.0, 1.0});
    const std::vector<double> uneven{0.0, 1.0, 4.0};
    CHECK(spacing_ratios(uneven)[0] == doctest::Approx(1.0 / 3.0));
    const std::vector<double> degenerate{1.0, 1.0, 1.0};
    CHECK(std::isnan(spacing_ratios(degenerate)[0]));
}

TEST_CASE("poisson levels give mean ratio 2 ln 2 - 1") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> levels(200000);
    for (auto& x : levels)
        x = u(gen);
    std::sort(levels.begin(), levels.end());
    CHECK(spacing_ratio_mean(levels) == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(0.01));
}

TEST_CASE("mobility edge scan bookkeeping") {
    const Cube c(origin(1), 40);
    const auto set = cube_sites(c);
    DisorderModel model{Law::uniform(-1.0, 1.0), 1.0, std::nullopt, 4};
    const auto k = kernel_from_symbol(cosine_symbol(1));
    const auto scan = mobility_edge_scan(k, set, model, c, 20, 0.5, 0.25);
    std::int64_t total = 0;
    for (const auto& b : scan.bins) {
        total += b.count;
        CHECK(b.hi - b.lo == doctest::Approx(0.25));
        if (b.count > 0)
            CHECK(b.median_ipr > 0.0);
    }
    CHECK(total == 81 * 20);
    CHECK(scan.h0_norm_1 == doctest::Approx(2.0));
    CHECK(scan.h0_norm_s == doctest::Approx(4.0));
    CHECK(std::isfinite(median_ipr_center(scan)));
    CHECK_THROWS_AS(mobility_edge_scan(k, set, model, c, 5, 0.5), std::invalid_argument);
}

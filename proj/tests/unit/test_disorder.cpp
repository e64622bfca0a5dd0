#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sparseloc/disorder.hpp"
#include "sparseloc/rng.hpp"

using namespace sparseloc;

namespace {

// Plain inversion sampling on an independent stream, for law-of-large-numbers checks.
struct Moments {
    double mean = 0.0, second = 0.0, in_interval = 0.0;
};

Moments sample_moments(const Law& law, int n, double lo, double hi) {
    Moments m;
    for (int i = 0; i < n; ++i) {
        const double u1 = (static_cast<double>(splitmix64(2 * i + 1) >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = (static_cast<double>(splitmix64(2 * i + 2) >> 11) + 0.5) * 0x1.0p-53;
        const double x = law.draw(u1, u2);
        m.mean += x;
        m.second += x * x;
        m.in_interval += (x > lo && x < hi) ? 1.0 : 0.0;
    }
    m.mean /= n;
    m.second /= n;
    m.in_interval /= n;
    return m;
}

}  // namespace

TEST_CASE("closed-form moments") {
    const auto u = Law::uniform(-1.0, 3.0);
    CHECK(u.mean() == doctest::Approx(1.0));
    CHECK(u.variance() == doctest::Approx(16.0 / 12.0));
    CHECK(u.second_moment() == doctest::Approx(16.0 / 12.0 + 1.0));
    CHECK(u.density(0.0) == doctest::Approx(0.25));
    CHECK(u.density(4.0) == 0.0);

    const auto g = Law::gaussian(0.5, 2.0);
    CHECK(g.second_moment() == doctest::Approx(4.25));
    CHECK(g.interval_measure(0.5 - 2.0, 0.5 + 2.0) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))));

    // Truncated Cauchy: density g / (pi (g^2 + x^2)) / Z on [-cut, cut], Z = (2/pi) atan(cut/g).
    const auto c = Law::truncated_cauchy(1.0, 3.0);
    const double z = 2.0 / std::numbers::pi * std::atan(3.0);
    CHECK(c.density(0.0) == doctest::Approx(1.0 / (std::numbers::pi * z)));
    CHECK(c.interval_measure(-3.0, 3.0) == doctest::Approx(1.0));
    CHECK(c.mean() == doctest::Approx(0.0));
    // int x^2 / (1 + x^2) = 2 (3 - atan 3) over [-3, 3].
    CHECK(c.second_moment() == doctest::Approx(2.0 * (3.0 - std::atan(3.0)) / (std::numbers::pi * z)));
}

TEST_CASE("draws follow the law") {
    const int n = 200000;
    for (const auto& law : {Law::uniform(-1.0, 1.0), Law::gaussian(0.3, 1.5), Law::truncated_cauchy(0.5, 4.0)}) {
        const auto m = sample_moments(law, n, -0.5, 0.7);
        const double sd = std::sqrt(law.variance());
        CHECK(std::abs(m.mean - law.mean()) < 5.0 * sd / std::sqrt(n));
        CHECK(std::abs(m.second - law.second_moment()) < 0.02 * law.second_moment());
        const double p = law.interval_measure(-0.5, 0.7);
        CHECK(std::abs(m.in_interval - p) < 5.0 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("law validation") {
    CHECK_THROWS_AS(Law::uniform(1.0, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Law::gaussian(0.0, -1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Law::truncated_cauchy(0.0, 1.0).validate(), std::invalid_argument);
    CHECK_FALSE(Law::gaussian(0.0, 0.0).absolutely_continuous());
    CHECK(parse_law(to_string(LawKind::truncated_cauchy)) == LawKind::truncated_cauchy);
}

TEST_CASE("regularity: densities pass, point masses fail") {
    const auto u = check_regularity(Law::uniform(-1.0, 1.0), 1.0);
    CHECK(u.pass);
    CHECK(std::isfinite(u.c_estimate));
    // mu(a-d, a+d) <= d and mu(a-b, a+b) >= b/2 for interior a; the ratio stays bounded.
    CHECK(u.c_estimate < 10.0);
    const auto p = check_regularity(Law::gaussian(0.0, 0.0), 1.0);
    CHECK_FALSE(p.pass);
    CHECK(std::isinf(p.c_estimate));
    CHECK_THROWS_AS(check_regularity(Law::uniform(-1.0, 1.0), 0.5), std::invalid_argument);
}

TEST_CASE("potential is a pure function of (seed, realization, site)") {
    DisorderModel m{Law::uniform(-1.0, 1.0), 2.0, std::nullopt, 77};
    const SiteSet s = make_site_set({Site{0}, Site{4}, Site{-9}});
    const auto a = sample_potential(m, s, 3);
    const auto b = sample_potential(m, make_site_set({Site{4}}), 3);
    CHECK(a.size() == 3);
    CHECK(a.at(Site{4}) == b.at(Site{4}));
    CHECK(a.at(Site{4}) == 2.0 * draw_site(m, Site{4}, 3));
    CHECK(sample_potential(m, s, 4).at(Site{4}) != a.at(Site{4}));
    for (const auto& [n, v] : a)
        CHECK(std::abs(v) <= 2.0);
}

TEST_CASE("weighted couplings") {
    CHECK(weight_value(0.5, Site{3, -8}) == doctest::Approx(3.0));
    DisorderModel m{Law::uniform(-1.0, 1.0), 5.0, Weight{1.0}, 1};
    CHECK(m.coupling(Site{-4}) == doctest::Approx(5.0));
    CHECK(m.coupling(Site{0}) == doctest::Approx(1.0));
    const auto v = sample_potential(m, make_site_set({Site{9}}), 0);
    CHECK(v.at(Site{9}) == doctest::Approx(10.0 * draw_site(m, Site{9}, 0)));
}

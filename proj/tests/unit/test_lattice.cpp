#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "sparseloc/lattice.hpp"

using namespace sparseloc;

TEST_CASE("max norm and site arithmetic") {
    CHECK(max_norm(Site{3, -7, 2}) == 7);
    CHECK(max_distance(Site{1, 1}, Site{-2, 3}) == 3);
    CHECK(Site{1, 2} + Site{3, -4} == Site{4, -2});
    CHECK(Site{1, 2} - Site{3, -4} == Site{-2, 6});
    CHECK(origin(3) == Site{0, 0, 0});
}

TEST_CASE("cube enumeration is a lexicographic bijection") {
    const Cube c(Site{2, -1}, 3);
    CHECK(c.side() == 7);
    CHECK(c.volume() == 49);
    const auto sites = cube_sites(c);
    REQUIRE(sites.size() == 49);
    CHECK(std::is_sorted(sites.begin(), sites.end()));
    for (std::int64_t i = 0; i < c.volume(); ++i) {
        CHECK(c.index_of(sites[static_cast<std::size_t>(i)]) == i);
        CHECK(c.site_at(i) == sites[static_cast<std::size_t>(i)]);
    }
    CHECK(c.contains(Site{5, 2}));
    CHECK_FALSE(c.contains(Site{6, 2}));
}

TEST_CASE("centered sub-cubes") {
    const Cube c(origin(2), 9);
    const auto all = centered_subcubes(c);
    CHECK(all.size() == 10);
    const auto dyadic = centered_dyadic_subcubes(c);
    std::vector<int> halves;
    for (const auto& d : dyadic)
        halves.push_back(d.half_side);
    CHECK(halves == std::vector<int>{1, 2, 4, 8});
}

TEST_CASE("sparseness cap is exact on perfect powers") {
    CHECK(sparseness_cap(1000, 1.0 / 3.0) == 10);
    CHECK(sparseness_cap(1001, 1.0 / 3.0) == 11);
    CHECK(sparseness_cap(81, 0.5) == 9);
    CHECK(sparseness_cap(82, 0.5) == 10);
    CHECK(sparseness_cap(1, 0.25) == 1);
}

TEST_CASE("generated sets respect the cap on every centered cube") {
    for (int nu = 1; nu <= 3; ++nu)
        for (double alpha : {0.2, 0.5, 0.8})
            for (auto g : {SparseGenerator::deterministic_powers, SparseGenerator::bernoulli_thinned})
                for (std::uint64_t seed = 0; seed < 5; ++seed) {
                    const Cube c(origin(nu), nu == 1 ? 200 : (nu == 2 ? 30 : 10));
                    const auto s = generate_sparse_set(alpha, c, g, seed);
                    CHECK(all_pass(sparseness_profile(s, centered_subcubes(c))));
                    // A thinned draw may be empty when the cap is small.
                    if (g == SparseGenerator::deterministic_powers)
                        CHECK(s.size() > 0);
                    for (const auto& n : s.sites)
                        CHECK(c.contains(n));
                }
}

TEST_CASE("generation is deterministic and seed-sensitive") {
    const Cube c(origin(2), 40);
    const auto a = generate_sparse_set(0.5, c, SparseGenerator::bernoulli_thinned, 3);
    const auto b = generate_sparse_set(0.5, c, SparseGenerator::bernoulli_thinned, 3);
    const auto d = generate_sparse_set(0.5, c, SparseGenerator::bernoulli_thinned, 4);
    CHECK(a.sites == b.sites);
    CHECK(a.sites != d.sites);
}

TEST_CASE("explicit sets are checked against the cap") {
    const Cube c(origin(1), 10);
    CHECK_NOTHROW(make_explicit_sparse_set(0.5, c, {Site{0}, Site{5}, Site{-9}}));
    // Three sites within |n| <= 1 exceed ceil(3^0.5) = 2.
    CHECK_THROWS_AS(make_explicit_sparse_set(0.5, c, {Site{0}, Site{1}, Site{-1}}), std::invalid_argument);
    CHECK_THROWS_AS(make_explicit_sparse_set(0.5, c, {Site{11}}), std::invalid_argument);
}

TEST_CASE("site set membership") {
    const auto s = make_site_set({Site{3}, Site{-1}, Site{3}, Site{0}});
    CHECK(s.size() == 3);
    CHECK(contains(s, Site{-1}));
    CHECK_FALSE(contains(s, Site{1}));
}

TEST_CASE("text round trip") {
    const Cube c(origin(3), 6);
    const auto s = generate_sparse_set(0.4, c, SparseGenerator::bernoulli_thinned, 9);
    const auto text = to_text(s);
    CHECK(text.rfind("# alpha=", 0) == 0);
    const auto back = sparse_set_from_text(text, c);
    CHECK(back.sites == s.sites);
    CHECK(back.alpha == s.alpha);
    CHECK(back.seed == s.seed);
    CHECK(back.generator == s.generator);
}

TEST_CASE("generator names") {
    for (auto g : {SparseGenerator::deterministic_powers, SparseGenerator::bernoulli_thinned,
                   SparseGenerator::explicit_list})
        CHECK(parse_generator(to_string(g)) == g);
    CHECK_THROWS_AS(parse_generator("nope"), std::invalid_argument);
}

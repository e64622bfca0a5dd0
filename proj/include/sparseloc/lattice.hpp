#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sparseloc {

/// A point of Z^nu.
struct Site {
    std::vector<int> coords;

    Site() = default;
    explicit Site(std::vector<int> c) : coords(std::move(c)) {}
    Site(std::initializer_list<int> c) : coords(c) {}

    int nu() const { return static_cast<int>(coords.size()); }
    int operator[](int i) const { return coords[static_cast<std::size_t>(i)]; }

    auto operator<=>(const Site&) const = default;
    bool operator==(const Site&) const = default;
};

Site origin(int nu);

/// Max-norm |n|.
int max_norm(const Site& n);
int max_distance(const Site& a, const Site& b);
Site operator-(const Site& a, const Site& b);
Site operator+(const Site& a, const Site& b);

/// Sites center +- half_side along every axis.
struct Cube {
    Site center;
    int half_side = 0;

    Cube() = default;
    Cube(Site c, int L);

    int nu() const { return center.nu(); }
    int side() const { return 2 * half_side + 1; }
    std::int64_t volume() const;
    bool contains(const Site& n) const;

    /// Position of n in the canonical (lexicographic) enumeration.
    std::int64_t index_of(const Site& n) const;
    Site site_at(std::int64_t index) const;
};

/// All sites of the cube in canonical lexicographic order.
std::vector<Site> cube_sites(const Cube& cube);

/// Cubes sharing the center of `cube` with half-sides 0..L.
std::vector<Cube> centered_subcubes(const Cube& cube);
/// Centered sub-cubes with half-sides 1, 2, 4, ... <= L.
std::vector<Cube> centered_dyadic_subcubes(const Cube& cube);

/// ceil(volume^alpha), robust to pow() landing a hair above an integer.
std::int64_t sparseness_cap(std::int64_t volume, double alpha);

enum class SparseGenerator { deterministic_powers, bernoulli_thinned, explicit_list };

std::string to_string(SparseGenerator g);
SparseGenerator parse_generator(std::string_view name);

/// Sorted, deduplicated sites. Membership by binary search.
using SiteSet = std::vector<Site>;

SiteSet make_site_set(std::vector<Site> sites);
bool contains(const SiteSet& set, const Site& n);

struct SparseSet {
    SiteSet sites;
    double alpha = 0.0;
    SparseGenerator generator = SparseGenerator::explicit_list;
    std::uint64_t seed = 0;
    Cube cube;

    int nu() const { return cube.nu(); }
    std::size_t size() const { return sites.size(); }
};

/// Generates a set obeying |S cap Lambda| <= ceil(|Lambda|^alpha) on every
/// cube centered at the cube center. Deterministic in (alpha, cube, generator, seed).
SparseSet generate_sparse_set(double alpha, const Cube& cube, SparseGenerator generator,
                              std::uint64_t seed);

/// Wraps a user list; throws if a site is outside the cube or the centered cap fails.
SparseSet make_explicit_sparse_set(double alpha, const Cube& cube, std::vector<Site> sites);

struct ProfileRow {
    std::int64_t volume = 0;
    std::int64_t count = 0;
    std::int64_t cap = 0;
    bool pass = true;
};

std::vector<ProfileRow> sparseness_profile(const SparseSet& set, const std::vector<Cube>& cubes);
bool all_pass(const std::vector<ProfileRow>& rows);

/// `# alpha=<a> generator=<g> seed=<s> nu=<v>` then one site per line.
std::string to_text(const SparseSet& set);
/// Inverse of to_text. The cube is not part of the format and must be supplied.
SparseSet sparse_set_from_text(std::string_view text, const Cube& cube);

}  // namespace sparseloc

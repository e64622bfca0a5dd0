#include "sparseloc/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sparseloc/rng.hpp"

namespace sparseloc {

namespace {

void require_same_dim(const Site& a, const Site& b) {
    if (a.nu() != b.nu())
        throw std::invalid_argument("site dimension mismatch");
}

std::string format_shortest(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace

Site origin(int nu) {
    if (nu <= 0)
        throw std::invalid_argument("dimension must be >= 1");
    return Site(std::vector<int>(static_cast<std::size_t>(nu), 0));
}

int max_norm(const Site& n) {
    int m = 0;
    for (int c : n.coords)
        m = std::max(m, std::abs(c));
    return m;
}

int max_distance(const Site& a, const Site& b) {
    require_same_dim(a, b);
    int m = 0;
    for (int i = 0; i < a.nu(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Site operator-(const Site& a, const Site& b) {
    require_same_dim(a, b);
    Site d = a;
    for (std::size_t i = 0; i < d.coords.size(); ++i)
        d.coords[i] -= b.coords[i];
    return d;
}

Site operator+(const Site& a, const Site& b) {
    require_same_dim(a, b);
    Site d = a;
    for (std::size_t i = 0; i < d.coords.size(); ++i)
        d.coords[i] += b.coords[i];
    return d;
}

Cube::Cube(Site c, int L) : center(std::move(c)), half_side(L) {
    if (center.nu() <= 0)
        throw std::invalid_argument("cube dimension must be >= 1");
    if (L < 0)
        throw std::invalid_argument("cube half_side must be >= 0");
}

std::int64_t Cube::volume() const {
    std::int64_t v = 1;
    for (int i = 0; i < nu(); ++i)
        v *= side();
    return v;
}

bool Cube::contains(const Site& n) const {
    return n.nu() == nu() && max_distance(n, center) <= half_side;
}

std::int64_t Cube::index_of(const Site& n) const {
    if (!contains(n))
        throw std::invalid_argument("site outside cube");
    std::int64_t idx = 0;
    for (int i = 0; i < nu(); ++i)
        idx = idx * side() + (n[i] - center[i] + half_side);
    return idx;
}

Site Cube::site_at(std::int64_t index) const {
    if (index < 0 || index >= volume())
        throw std::out_of_range("cube index out of range");
    Site n = center;
    for (int i = nu() - 1; i >= 0; --i) {
        n.coords[static_cast<std::size_t>(i)] =
            center[i] - half_side + static_cast<int>(index % side());
        index /= side();
    }
    return n;
}

std::vector<Site> cube_sites(const Cube& cube) {
    if (cube.nu() <= 0)
        throw std::invalid_argument("dimension must be >= 1");
    std::vector<Site> out;
    out.reserve(static_cast<std::size_t>(cube.volume()));
    Site n = cube.center;
    for (auto& c : n.coords)
        c -= cube.half_side;
    const auto nu = static_cast<std::size_t>(cube.nu());
    while (true) {
        out.push_back(n);
        std::size_t axis = nu;
        while (axis > 0) {
            --axis;
            if (n.coords[axis] < cube.center.coords[axis] + cube.half_side) {
                ++n.coords[axis];
                break;
            }
            n.coords[axis] = cube.center.coords[axis] - cube.half_side;
            if (axis == 0)
                return out;
        }
    }
}

std::vector<Cube> centered_subcubes(const Cube& cube) {
    std::vector<Cube> out;
    for (int L = 0; L <= cube.half_side; ++L)
        out.emplace_back(cube.center, L);
    return out;
}

std::vector<Cube> centered_dyadic_subcubes(const Cube& cube) {
    std::vector<Cube> out;
    for (int L = 1; L <= cube.half_side; L *= 2)
        out.emplace_back(cube.center, L);
    return out;
}

std::int64_t sparseness_cap(std::int64_t volume, double alpha) {
    const double p = std::pow(static_cast<double>(volume), alpha);
    const double r = std::round(p);
    if (std::abs(p - r) <= 1e-9 * std::max(1.0, r))
        return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::ceil(p));
}

std::string to_string(SparseGenerator g) {
    switch (g) {
    case SparseGenerator::deterministic_powers: return "deterministic_powers";
    case SparseGenerator::bernoulli_thinned: return "bernoulli_thinned";
    case SparseGenerator::explicit_list: return "explicit_list";
    }
    return "unknown";
}

SparseGenerator parse_generator(std::string_view name) {
    if (name == "deterministic_powers") return SparseGenerator::deterministic_powers;
    if (name == "bernoulli_thinned") return SparseGenerator::bernoulli_thinned;
    if (name == "explicit_list") return SparseGenerator::explicit_list;
    throw std::invalid_argument("unknown sparse-set generator '" + std::string(name) + "'");
}

SiteSet make_site_set(std::vector<Site> sites) {
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    return sites;
}

bool contains(const SiteSet& set, const Site& n) {
    return std::binary_search(set.begin(), set.end(), n);
}

namespace {

struct RadialCandidate {
    int radius;
    Site site;
    bool operator<(const RadialCandidate& o) const {
        return radius != o.radius ? radius < o.radius : site < o.site;
    }
};

// Candidates arrive sorted by radius, so the tightest constraint for a new
// site at radius r is the centered cube of half-side r itself.
std::vector<Site> apply_centered_cap(const std::vector<RadialCandidate>& candidates,
                                     int nu, double alpha) {
    std::vector<Site> kept;
    std::int64_t total = 0;
    for (const auto& c : candidates) {
        std::int64_t side = 2 * c.radius + 1;
        std::int64_t vol = 1;
        for (int i = 0; i < nu; ++i)
            vol *= side;
        if (total + 1 <= sparseness_cap(vol, alpha)) {
            kept.push_back(c.site);
            ++total;
        }
    }
    return kept;
}

std::vector<Site> shell_directions(int nu) {
    std::vector<Site> dirs;
    Site d(std::vector<int>(static_cast<std::size_t>(nu), -1));
    while (true) {
        if (max_norm(d) > 0)
            dirs.push_back(d);
        int axis = nu - 1;
        while (axis >= 0 && d.coords[static_cast<std::size_t>(axis)] == 1) {
            d.coords[static_cast<std::size_t>(axis)] = -1;
            --axis;
        }
        if (axis < 0)
            break;
        ++d.coords[static_cast<std::size_t>(axis)];
    }
    auto nonzeros = [](const Site& s) {
        return std::count_if(s.coords.begin(), s.coords.end(), [](int c) { return c != 0; });
    };
    std::stable_sort(dirs.begin(), dirs.end(),
                     [&](const Site& a, const Site& b) { return nonzeros(a) < nonzeros(b); });
    return dirs;
}

std::vector<RadialCandidate> powers_candidates(double alpha, const Cube& cube) {
    const int nu = cube.nu();
    // Radii grow by rho with rho^(nu*alpha) = 2, so the cap doubles from shell to shell.
    const double rho = std::pow(2.0, 1.0 / (nu * alpha));
    std::vector<int> radii{0};
    for (double r = 1.0; r <= cube.half_side; r *= rho) {
        const int ri = static_cast<int>(std::floor(r));
        if (ri != radii.back())
            radii.push_back(ri);
    }
    const auto dirs = shell_directions(nu);
    std::vector<RadialCandidate> out;
    for (int r : radii) {
        if (r == 0) {
            out.push_back({0, cube.center});
            continue;
        }
        for (const auto& d : dirs) {
            Site n = cube.center;
            for (int i = 0; i < nu; ++i)
                n.coords[static_cast<std::size_t>(i)] += r * d[i];
            out.push_back({r, std::move(n)});
        }
    }
    return out;
}

constexpr std::int64_t kShellLimit = std::int64_t{1} << 62;

std::int64_t checked_pow(std::int64_t base, int exp) {
    std::int64_t v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > kShellLimit / base)
            throw std::invalid_argument("bernoulli_thinned: cube too large");
        v *= base;
    }
    return v;
}

// Sites with max-norm exactly r in m dimensions.
std::int64_t shell_size(int m, int r) {
    if (r == 0)
        return 1;
    return checked_pow(2 * r + 1, m) - checked_pow(2 * r - 1, m);
}

// idx-th offset (lexicographic) among the offsets of max-norm exactly r.
std::vector<int> unrank_shell(int nu, int r, std::int64_t idx) {
    std::vector<int> c(static_cast<std::size_t>(nu));
    bool hit = false;
    for (int i = 0; i < nu; ++i) {
        const int left = nu - i - 1;
        const std::int64_t full = checked_pow(2 * r + 1, left);
        if (hit) {
            c[static_cast<std::size_t>(i)] = -r + static_cast<int>(idx / full);
            idx %= full;
            continue;
        }
        const std::int64_t inner = r == 0 ? 0 : checked_pow(2 * r + 1, left) - checked_pow(2 * r - 1, left);
        if (idx < full) {
            c[static_cast<std::size_t>(i)] = -r;
            hit = true;
            continue;
        }
        idx -= full;
        const std::int64_t middle = inner * (2 * r - 1);
        if (idx < middle) {
            c[static_cast<std::size_t>(i)] = -r + 1 + static_cast<int>(idx / inner);
            idx %= inner;
            continue;
        }
        idx -= middle;
        c[static_cast<std::size_t>(i)] = r;
        hit = true;
    }
    return c;
}

std::vector<RadialCandidate> bernoulli_candidates(double alpha, const Cube& cube,
                                                  std::uint64_t seed) {
    const int nu = cube.nu();
    const CounterRng rng(seed, 0x5350415253455345ULL);
    std::vector<RadialCandidate> out;
    for (int r = 0; r <= cube.half_side; ++r) {
        // Inclusion probability (alpha/2) (2r+1)^(nu(alpha-1)): the expected
        // count inside radius r is about half the cap.
        const double p = 0.5 * alpha * std::pow(2.0 * r + 1.0, nu * (alpha - 1.0));
        const std::int64_t n = shell_size(nu, r);
        // Independent inclusion over the shell in lexicographic order, simulated
        // by geometric gaps so that the cost is the number of included sites.
        const double log_q = std::log1p(-p);
        double pos = -1.0;
        for (std::uint64_t k = 0;; ++k) {
            pos += std::floor(std::log(rng.uniform_open(static_cast<std::uint64_t>(r), k)) / log_q) + 1.0;
            if (pos >= static_cast<double>(n))
                break;
            const auto off = unrank_shell(nu, r, static_cast<std::int64_t>(pos));
            Site site = cube.center;
            for (int i = 0; i < nu; ++i)
                site.coords[static_cast<std::size_t>(i)] += off[static_cast<std::size_t>(i)];
            out.push_back({r, std::move(site)});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("alpha must lie in (0, 1)");
}

}  // namespace

SparseSet generate_sparse_set(double alpha, const Cube& cube, SparseGenerator generator,
                              std::uint64_t seed) {
    check_alpha(alpha);
    std::vector<RadialCandidate> candidates;
    switch (generator) {
    case SparseGenerator::deterministic_powers:
        candidates = powers_candidates(alpha, cube);
        seed = 0;
        break;
    case SparseGenerator::bernoulli_thinned:
        candidates = bernoulli_candidates(alpha, cube, seed);
        break;
    case SparseGenerator::explicit_list:
        throw std::invalid_argument("explicit_list sets are built with make_explicit_sparse_set");
    }
    SparseSet set;
    set.sites = make_site_set(apply_centered_cap(candidates, cube.nu(), alpha));
    set.alpha = alpha;
    set.generator = generator;
    set.seed = seed;
    set.cube = cube;
    return set;
}

SparseSet make_explicit_sparse_set(double alpha, const Cube& cube, std::vector<Site> sites) {
    check_alpha(alpha);
    for (const auto& s : sites)
        if (!cube.contains(s))
            throw std::invalid_argument("explicit sparse set: site outside the cube");
    SparseSet set;
    set.sites = make_site_set(std::move(sites));
    set.alpha = alpha;
    set.generator = SparseGenerator::explicit_list;
    set.cube = cube;
    if (!all_pass(sparseness_profile(set, centered_subcubes(cube))))
        throw std::invalid_argument("explicit sparse set violates the centered cap ceil(|cube|^alpha)");
    return set;
}

std::vector<ProfileRow> sparseness_profile(const SparseSet& set, const std::vector<Cube>& cubes) {
    if (cubes.empty())
        throw std::invalid_argument("sparseness_profile: no cubes given");
    std::vector<ProfileRow> rows;
    rows.reserve(cubes.size());
    for (const auto& c : cubes) {
        ProfileRow row;
        row.volume = c.volume();
        row.count = std::count_if(set.sites.begin(), set.sites.end(),
                                  [&](const Site& n) { return c.contains(n); });
        row.cap = sparseness_cap(row.volume, set.alpha);
        row.pass = row.count <= row.cap;
        rows.push_back(row);
    }
    return rows;
}

bool all_pass(const std::vector<ProfileRow>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const ProfileRow& r) { return r.pass; });
}

std::string to_text(const SparseSet& set) {
    std::ostringstream os;
    os << "# alpha=" << format_shortest(set.alpha) << " generator=" << to_string(set.generator)
       << " seed=" << set.seed << " nu=" << set.nu() << '\n';
    for (const auto& n : set.sites) {
        for (int i = 0; i < n.nu(); ++i)
            os << (i ? " " : "") << n[i];
        os << '\n';
    }
    return os.str();
}

SparseSet sparse_set_from_text(std::string_view text, const Cube& cube) {
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
        throw std::invalid_argument("sparse set text: missing header");
    SparseSet set;
    set.cube = cube;
    int nu = -1;
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("sparse set text: malformed header token '" + tok + "'");
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        if (key == "alpha") set.alpha = std::stod(val);
        else if (key == "generator") set.generator = parse_generator(val);
        else if (key == "seed") set.seed = std::stoull(val);
        else if (key == "nu") nu = std::stoi(val);
        else throw std::invalid_argument("sparse set text: unknown header key '" + key + "'");
    }
    if (nu != cube.nu())
        throw std::invalid_argument("sparse set text: nu does not match the cube");
    std::vector<Site> sites;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::vector<int> c;
        int v;
        while (ls >> v)
            c.push_back(v);
        if (static_cast<int>(c.size()) != nu)
            throw std::invalid_argument("sparse set text: site with wrong dimension");
        sites.emplace_back(std::move(c));
    }
    set.sites = make_site_set(std::move(sites));
    return set;
}

std::uint64_t site_hash(const Site& n) {
    std::uint64_t h = 0x243f6a8885a308d3ULL ^ static_cast<std::uint64_t>(n.nu());
    for (int c : n.coords)
        h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)));
    return h;
}

}  // namespace sparseloc

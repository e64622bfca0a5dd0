#include "sparseloc/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sparseloc/errors.hpp"

namespace sparseloc {

SymbolSpec cosine_symbol(int nu, int k) {
    if (nu <= 0)
        throw std::invalid_argument("dimension must be >= 1");
    SymbolSpec spec;
    spec.axes.assign(static_cast<std::size_t>(nu), {CosineTerm{k, 1.0}});
    return spec;
}

void validate(const SymbolSpec& spec) {
    if (spec.axes.empty())
        throw std::invalid_argument("symbol spec has no axes");
    for (const auto& axis : spec.axes)
        for (const auto& t : axis) {
            if (t.k <= 0)
                throw std::invalid_argument("cosine term frequency k must be a positive integer");
            if (!std::isfinite(t.c))
                throw std::invalid_argument("cosine term coefficient must be finite");
        }
}

double axis_symbol(const std::vector<CosineTerm>& axis, double theta, int order) {
    // d^p/dtheta^p cos(k theta) = k^p cos(k theta + p pi/2)
    double v = 0.0;
    for (const auto& t : axis) {
        const double kp = std::pow(static_cast<double>(t.k), order);
        v += 2.0 * t.c * kp * std::cos(t.k * theta + order * std::numbers::pi / 2);
    }
    return v;
}

double symbol_derivative_sup(const SymbolSpec& spec) {
    constexpr int kGrid = 1 << 14;
    const double step = 2 * std::numbers::pi / kGrid;
    double best = 0.0;
    for (const auto& axis : spec.axes) {
        if (axis.empty())
            continue;
        double arg = 0.0, val = -1.0;
        for (int j = 0; j < kGrid; ++j) {
            const double v = std::abs(axis_symbol(axis, j * step, 1));
            if (v > val) {
                val = v;
                arg = j * step;
            }
        }
        // Golden-section polish of the bracketing cell.
        double lo = arg - step, hi = arg + step;
        const double g = (std::sqrt(5.0) - 1) / 2;
        for (int it = 0; it < 80; ++it) {
            const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            if (std::abs(axis_symbol(axis, x1, 1)) > std::abs(axis_symbol(axis, x2, 1)))
                hi = x2;
            else
                lo = x1;
        }
        val = std::max(val, std::abs(axis_symbol(axis, 0.5 * (lo + hi), 1)));
        best = std::max(best, val);
    }
    return best;
}

KernelOperator::KernelOperator(int nu, std::map<Offset, double> hopping, double s0)
    : nu_(nu), hopping_(std::move(hopping)), s0_(s0), cache_(std::make_shared<Cache>()) {
    if (nu <= 0)
        throw std::invalid_argument("dimension must be >= 1");
    for (auto it = hopping_.begin(); it != hopping_.end();) {
        if (it->first.nu() != nu)
            throw std::invalid_argument("hopping offset has the wrong dimension");
        it = it->second == 0.0 ? hopping_.erase(it) : std::next(it);
    }
    for (const auto& [d, c] : hopping_) {
        Offset minus = d;
        for (auto& x : minus.coords)
            x = -x;
        auto m = hopping_.find(minus);
        if (m == hopping_.end() || m->second != c)
            throw std::invalid_argument("hopping kernel must satisfy c(d) = c(-d)");
    }
}

double KernelOperator::amplitude(const Offset& d) const {
    auto it = hopping_.find(d);
    return it == hopping_.end() ? 0.0 : it->second;
}

double KernelOperator::s_norm(double s) const {
    if (!(s > 0.0 && s <= 1.0))
        throw std::invalid_argument("s-norm requires 0 < s <= 1");
    {
        std::lock_guard lock(cache_->mutex);
        if (auto it = cache_->values.find(s); it != cache_->values.end())
            return it->second;
    }
    double sum = 0.0;
    for (const auto& [d, c] : hopping_) {
        sum += std::pow(std::abs(c), s);
        if (!std::isfinite(sum))
            throw DivergedError("s-norm sum diverged", sum);
    }
    const double value = std::pow(sum, 1.0 / s);
    std::lock_guard lock(cache_->mutex);
    cache_->values.emplace(s, value);
    return value;
}

KernelOperator kernel_from_symbol(const SymbolSpec& spec) {
    validate(spec);
    const int nu = spec.nu();
    std::map<Offset, double> hopping;
    for (int i = 0; i < nu; ++i)
        for (const auto& t : spec.axes[static_cast<std::size_t>(i)]) {
            Offset plus = origin(nu), minus = origin(nu);
            plus.coords[static_cast<std::size_t>(i)] = t.k;
            minus.coords[static_cast<std::size_t>(i)] = -t.k;
            hopping[plus] += t.c;
            hopping[minus] += t.c;
        }
    return KernelOperator(nu, std::move(hopping), 0.0);
}

double s_norm(const KernelOperator& k, double s) { return k.s_norm(s); }

AssembledOperator assemble_finite_volume(const KernelOperator& k, const Potential& potential,
                                         const Cube& cube) {
    if (k.nu() != cube.nu())
        throw std::invalid_argument("kernel and cube dimensions differ");
    for (const auto& [n, v] : potential)
        if (!cube.contains(n))
            throw std::invalid_argument("potential defined outside the cube");
    const auto sites = cube_sites(cube);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(sites.size() * (k.hopping().size() + 1));
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (const auto& [d, c] : k.hopping()) {
            const Site m = sites[i] + d;
            if (cube.contains(m))
                triplets.emplace_back(row, static_cast<Eigen::Index>(cube.index_of(m)), c);
        }
        if (auto it = potential.find(sites[i]); it != potential.end() && it->second != 0.0)
            triplets.emplace_back(row, row, it->second);
    }
    AssembledOperator a;
    a.cube = cube;
    const auto dim = static_cast<Eigen::Index>(sites.size());
    a.matrix.resize(dim, dim);
    a.matrix.setFromTriplets(triplets.begin(), triplets.end());
    a.matrix.makeCompressed();
    return a;
}

AssembledOperator restrict_complement(const KernelOperator& k, const SiteSet& s, const Cube& cube) {
    for (const auto& n : s)
        if (!cube.contains(n))
            throw std::invalid_argument("restrict_complement: S is not contained in the cube");
    AssembledOperator a = assemble_finite_volume(k, {}, cube);
    std::vector<char> in_s(static_cast<std::size_t>(a.dimension()), 0);
    for (const auto& n : s)
        in_s[static_cast<std::size_t>(cube.index_of(n))] = 1;
    a.matrix.prune([&](Eigen::Index r, Eigen::Index c, double) {
        return !in_s[static_cast<std::size_t>(r)] && !in_s[static_cast<std::size_t>(c)];
    });
    return a;
}

std::string to_coordinate_text(const AssembledOperator& a) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> rm = a.matrix;
    std::ostringstream os;
    char buf[64];
    for (Eigen::Index r = 0; r < rm.outerSize(); ++r)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rm, r); it; ++it) {
            std::snprintf(buf, sizeof(buf), "%.17g", it.value());
            os << it.row() << ' ' << it.col() << ' ' << buf << '\n';
        }
    return os.str();
}

double neumann_fractional_bound(const KernelOperator& k, double energy, double s) {
    const double norm = k.s_norm(s);
    const double e = std::abs(energy);
    if (!(e > norm))
        throw std::invalid_argument("Neumann bound requires |E| > ||H0||_s");
    // |G(n,m)|^s <= |E|^{-s} sum_k |H0^k(n,m)|^s / |E|^{ks}; the prefactor carries
    // the power s too. With 1/|E| alone the sum is undercut for every large |E|.
    return std::pow(e, -s) / (1.0 - std::pow(norm, s) / std::pow(e, s));
}

namespace {

std::size_t ipow(std::size_t base, int exp) {
    std::size_t v = 1;
    for (int i = 0; i < exp; ++i)
        v *= base;
    return v;
}

// Row-major position of a signed frequency vector on a side^nu DFT grid.
std::size_t grid_index(const Offset& d, std::size_t side) {
    std::size_t idx = 0;
    const auto s = static_cast<long long>(side);
    for (int c : d.coords)
        idx = idx * side + static_cast<std::size_t>(((c % s) + s) % s);
    return idx;
}

std::vector<cplx> symbol_spectrum(const GeneralSymbol& h, int nu, std::size_t side) {
    const std::size_t total = ipow(side, nu);
    std::vector<cplx> grid(total);
    std::vector<double> theta(static_cast<std::size_t>(nu));
    const double step = 2 * std::numbers::pi / static_cast<double>(side);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (int i = nu - 1; i >= 0; --i) {
            theta[static_cast<std::size_t>(i)] = static_cast<double>(rem % side) * step;
            rem /= side;
        }
        grid[idx] = h(theta);
    }
    transform_axes(grid, side, nu, false);
    const double norm = 1.0 / static_cast<double>(total);
    for (auto& v : grid)
        v *= norm;
    return grid;
}

void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (parts == 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int a = 0; a <= total; ++a) {
        cur.push_back(a);
        compositions(total - a, parts - 1, cur, out);
        cur.pop_back();
    }
}

double estimate_c_h(const std::vector<cplx>& spectrum, std::size_t side, int nu) {
    // Spectral interpolation onto a grid of step 2 pi / 4096 per axis,
    // coarsened for nu >= 2 so that at most 2^20 points are sampled.
    std::size_t fine = 4096;
    while (ipow(fine, nu) > (std::size_t{1} << 20))
        fine /= 2;
    fine = std::max(fine, side);
    std::vector<std::vector<int>> alphas;
    std::vector<int> cur;
    compositions(2 * nu + 2, nu, cur, alphas);

    const std::size_t total = ipow(side, nu);
    double best = 0.0;
    for (const auto& alpha : alphas) {
        std::vector<cplx> grid(ipow(fine, nu), cplx{});
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t rem = idx;
            Offset d(std::vector<int>(static_cast<std::size_t>(nu)));
            for (int i = nu - 1; i >= 0; --i) {
                d.coords[static_cast<std::size_t>(i)] = signed_frequency(rem % side, side);
                rem /= side;
            }
            cplx factor = spectrum[idx];
            for (int i = 0; i < nu; ++i) {
                const int f = d[i];
                if (2 * std::abs(f) >= static_cast<int>(side)) {
                    factor = 0.0;
                    break;
                }
                factor *= std::pow(cplx(0.0, static_cast<double>(f)), alpha[static_cast<std::size_t>(i)]);
            }
            grid[grid_index(d, fine)] += factor;
        }
        // Undo the 1/N normalization of the inverse transform: samples are plain sums.
        transform_axes(grid, fine, nu, true);
        const double scale = static_cast<double>(ipow(fine, nu));
        for (const auto& v : grid)
            best = std::max(best, std::abs(v) * scale);
    }
    return best;
}

}  // namespace

KernelDecayReport kernel_decay_check(const GeneralSymbol& h, int nu, const std::vector<Offset>& offsets,
                                     double c_h) {
    if (nu <= 0)
        throw std::invalid_argument("dimension must be >= 1");
    if (offsets.empty())
        throw std::invalid_argument("kernel_decay_check: no offsets");
    int max_d = 0;
    for (const auto& d : offsets) {
        if (d.nu() != nu)
            throw std::invalid_argument("offset dimension mismatch");
        max_d = std::max(max_d, max_norm(d));
    }
    constexpr double kTol = 1e-10;
    const std::size_t max_total = std::size_t{1} << 22;
    std::size_t side = 16;
    while (side < static_cast<std::size_t>(4 * max_d + 4))
        side *= 2;

    std::vector<cplx> prev = symbol_spectrum(h, nu, side);
    std::vector<cplx> spectrum;
    double change = std::numeric_limits<double>::infinity();
    while (true) {
        const std::size_t next = side * 2;
        if (ipow(next, nu) > max_total)
            throw NumericalError("kernel_decay_check: Fourier quadrature did not converge", change);
        spectrum = symbol_spectrum(h, nu, next);
        change = 0.0;
        for (const auto& d : offsets)
            change = std::max(change, std::abs(spectrum[grid_index(d, next)] - prev[grid_index(d, side)]));
        side = next;
        if (change <= kTol)
            break;
        prev = std::move(spectrum);
    }

    KernelDecayReport report;
    report.grid_points_per_axis = static_cast<int>(side);
    report.achieved_tolerance = change;
    report.c_h = c_h;
    if (!(c_h > 0.0)) {
        report.c_h = estimate_c_h(spectrum, side, nu);
        report.c_h_estimated = true;
    }
    const double pref = report.c_h * std::pow(static_cast<double>(nu), 2 * nu + 1);
    for (const auto& d : offsets) {
        CoefficientRow row;
        row.offset = d;
        row.distance = max_norm(d);
        row.abs_coefficient = std::abs(spectrum[grid_index(d, side)]);
        if (row.distance == 0) {
            row.bound = std::numeric_limits<double>::quiet_NaN();
        } else {
            row.bound = pref / std::pow(static_cast<double>(row.distance), 2 * nu + 1);
            row.pass = row.abs_coefficient <= row.bound + kTol;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace sparseloc

#include "sparseloc/resolvent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <omp.h>

#include "sparseloc/errors.hpp"

namespace sparseloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kResidualTol = 1e-10;
constexpr Eigen::Index kDirectLimit = 10000;
// Realizations per deterministic work unit. Changing it changes the bits.
constexpr int kBlock = 8;

void check_s(double s) {
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("s must lie in (0, 1)");
}

void check_same_s(double s, const DecouplingEstimate& dec) {
    if (std::abs(s - dec.s) > 1e-12)
        throw std::invalid_argument("decoupling estimate was computed at a different s");
}

}  // namespace

void GreenQuery::validate() const {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("epsilon must be > 0");
    check_s(s);
    if (!std::isfinite(energy))
        throw std::invalid_argument("energy must be finite");
    if (source.nu() != volume.nu())
        throw std::invalid_argument("source and volume dimensions differ");
    if (!volume.contains(source))
        throw std::invalid_argument("source site lies outside the volume");
    if (realizations < 2)
        throw std::invalid_argument("need at least 2 realizations");
}

void RunningStats::add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
}

void RunningStats::add_repeated(double x, std::int64_t n) {
    RunningStats block;
    block.count = n;
    block.mean = x;
    merge(block);
}

void RunningStats::merge(const RunningStats& other) {
    if (other.count == 0)
        return;
    if (count == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(other.count);
    const double n = na + nb;
    const double delta = other.mean - mean;
    mean += delta * nb / n;
    m2 += other.m2 + delta * delta * na * nb / n;
    count += other.count;
}

double RunningStats::variance() const {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
}

double RunningStats::standard_error() const {
    return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

GreenRow green_row(const AssembledOperator& a, cplx z, const Site& n) {
    if (z.imag() == 0.0)
        throw std::invalid_argument("green_row requires Im z != 0");
    if (!a.cube.contains(n))
        throw std::invalid_argument("source site lies outside the assembled volume");
    using SpC = Eigen::SparseMatrix<cplx>;
    const Eigen::Index dim = a.dimension();
    SpC id(dim, dim);
    id.setIdentity();
    SpC m = SpC(a.matrix.cast<cplx>()) - z * id;
    m.makeCompressed();

    VectorX<cplx> b = VectorX<cplx>::Zero(dim);
    b[a.cube.index_of(n)] = 1.0;

    GreenRow row;
    row.cube = a.cube;
    auto residual = [&](const VectorX<cplx>& x) { return (m * x - b).norm(); };

    bool done = false;
    if (dim > kDirectLimit) {
        Eigen::BiCGSTAB<SpC, Eigen::IncompleteLUT<cplx>> it;
        it.setTolerance(1e-13);
        it.setMaxIterations(static_cast<int>(std::min<Eigen::Index>(20 * dim, 200000)));
        it.compute(m);
        if (it.info() == Eigen::Success) {
            row.values = it.solve(b);
            row.residual = residual(row.values);
            done = it.info() == Eigen::Success && row.residual <= kResidualTol;
        }
    }
    if (!done) {
        Eigen::SparseLU<SpC, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(m);
        if (lu.info() != Eigen::Success)
            throw NumericalError("sparse LU factorization failed: " + lu.lastErrorMessage(), kNaN);
        row.values = lu.solve(b);
        // One step of iterative refinement.
        const VectorX<cplx> r = b - m * row.values;
        row.values += lu.solve(r);
        row.residual = residual(row.values);
    }
    if (!(row.residual <= kResidualTol))
        throw NumericalError("green_row residual above 1e-10", row.residual);
    return row;
}

namespace {

SiteSet restrict_to(const SiteSet& s, const Cube& cube) {
    SiteSet out;
    for (const auto& n : s)
        if (cube.contains(n))
            out.push_back(n);
    return out;
}

bool potential_vanishes(const SiteSet& inside, const DisorderModel& model) {
    return inside.empty() || (!model.weight && model.lambda == 0.0);
}

/// Runs body(r) for r in [0, count) in blocks of kBlock, waves of at most
/// `threads` blocks. fold(block, r, ...) accumulates inside a block; merge()
/// combines blocks strictly in index order.
template <typename State, typename Init, typename Step, typename Merge>
void run_blocks(int count, Init init, Step step, Merge merge) {
    const int nblocks = (count + kBlock - 1) / kBlock;
    const int wave = std::max(1, omp_get_max_threads());
    for (int first = 0; first < nblocks; first += wave) {
        const int last = std::min(nblocks, first + wave);
        std::vector<State> states(static_cast<std::size_t>(last - first));
        std::vector<std::exception_ptr> errors(states.size());
#pragma omp parallel for schedule(dynamic, 1)
        for (int b = first; b < last; ++b) {
            auto& st = states[static_cast<std::size_t>(b - first)];
            init(st);
            const int r_end = std::min(count, (b + 1) * kBlock);
            for (int r = b * kBlock; r < r_end; ++r) {
                try {
                    step(st, static_cast<std::uint64_t>(r));
                } catch (const NumericalError& e) {
                    errors[static_cast<std::size_t>(b - first)] = std::make_exception_ptr(
                        NumericalError("realization " + std::to_string(r) + ": " + e.what(), e.achieved()));
                    break;
                } catch (...) {
                    errors[static_cast<std::size_t>(b - first)] = std::current_exception();
                    break;
                }
            }
        }
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
        for (auto& st : states)
            merge(st);
    }
}

struct MomentBlock {
    std::vector<RunningStats> per_site;
    std::vector<RunningStats> per_distance;
    std::vector<double> absg;
    std::vector<double> shell;
};

}  // namespace

MomentEstimate fractional_moment_estimate(const GreenQuery& q, const KernelOperator& k, const SiteSet& s,
                                          const DisorderModel& model) {
    q.validate();
    model.validate();
    if (k.nu() != q.volume.nu())
        throw std::invalid_argument("kernel and volume dimensions differ");

    const SiteSet inside = restrict_to(s, q.volume);
    const auto vol = static_cast<std::size_t>(q.volume.volume());
    std::vector<int> dist(vol);
    int maxd = 0;
    for (std::size_t i = 0; i < vol; ++i) {
        dist[i] = max_distance(q.volume.site_at(static_cast<std::int64_t>(i)), q.source);
        maxd = std::max(maxd, dist[i]);
    }
    std::vector<double> shell_size(static_cast<std::size_t>(maxd) + 1, 0.0);
    for (int d : dist)
        shell_size[static_cast<std::size_t>(d)] += 1.0;

    const cplx z{q.energy, q.epsilon};
    auto realization = [&](std::uint64_t r, std::vector<double>& absg, std::vector<double>& shell) {
        const Potential v = potential_vanishes(inside, model) ? Potential{} : sample_potential(model, inside, r);
        const auto row = green_row(assemble_finite_volume(k, v, q.volume), z, q.source);
        std::fill(shell.begin(), shell.end(), 0.0);
        for (std::size_t i = 0; i < vol; ++i) {
            absg[i] = std::pow(std::abs(row.values[static_cast<Eigen::Index>(i)]), q.s);
            shell[static_cast<std::size_t>(dist[i])] += absg[i];
        }
        for (std::size_t d = 0; d < shell.size(); ++d)
            shell[d] /= shell_size[d];
    };

    MomentEstimate est;
    est.query = q;
    est.lambda = model.lambda;
    est.per_site.assign(vol, {});
    est.per_distance.assign(shell_size.size(), {});

    if (potential_vanishes(inside, model)) {
        std::vector<double> absg(vol), shell(shell_size.size());
        realization(0, absg, shell);
        for (std::size_t i = 0; i < vol; ++i)
            est.per_site[i].add_repeated(absg[i], q.realizations);
        for (std::size_t d = 0; d < shell.size(); ++d)
            est.per_distance[d].add_repeated(shell[d], q.realizations);
        return est;
    }

    run_blocks<MomentBlock>(
        q.realizations,
        [&](MomentBlock& b) {
            b.per_site.assign(vol, {});
            b.per_distance.assign(shell_size.size(), {});
            b.absg.assign(vol, 0.0);
            b.shell.assign(shell_size.size(), 0.0);
        },
        [&](MomentBlock& b, std::uint64_t r) {
            realization(r, b.absg, b.shell);
            for (std::size_t i = 0; i < vol; ++i)
                b.per_site[i].add(b.absg[i]);
            for (std::size_t d = 0; d < b.shell.size(); ++d)
                b.per_distance[d].add(b.shell[d]);
        },
        [&](const MomentBlock& b) {
            for (std::size_t i = 0; i < vol; ++i)
                est.per_site[i].merge(b.per_site[i]);
            for (std::size_t d = 0; d < b.per_distance.size(); ++d)
                est.per_distance[d].merge(b.per_distance[d]);
        });
    return est;
}

// ---------------------------------------------------------------- decoupling

namespace {

double power_weighted_integral(const Law& law, double s, std::span<const cplx> points) {
    auto [lo, hi] = law.effective_support();
    std::vector<double> cuts{lo, hi};
    for (const auto& p : points)
        if (p.real() > lo && p.real() < hi)
            cuts.push_back(p.real());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto f = [&](double x) {
        double v = law.density(x);
        for (const auto& p : points)
            v *= std::pow(std::abs(x - p), s);
        return v;
    };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += integrate_endpoint_singular(f, cuts[i], cuts[i + 1], 1e-15, 1e-8).value;
    return total;
}

void fill_conventions(DecouplingEstimate& d) {
    d.d_eff = d.kappa_hat / std::pow(1.0 - d.s, d.s);
    d.d_proof = std::pow((1.0 - d.s) / std::pow(d.kappa_hat, 1.0 / d.s), 1.0 / d.s);
}

/// Minimal Nelder-Mead; returns the best vertex.
template <std::size_t N, typename F>
std::pair<std::array<double, N>, double> nelder_mead(F f, std::array<double, N> x0, double step,
                                                     int max_iter = 600) {
    using P = std::array<double, N>;
    std::array<P, N + 1> v;
    std::array<double, N + 1> fv;
    v[0] = x0;
    for (std::size_t i = 0; i < N; ++i) {
        v[i + 1] = x0;
        v[i + 1][i] += step;
    }
    for (std::size_t i = 0; i <= N; ++i)
        fv[i] = f(v[i]);
    auto lerp = [](const P& a, const P& b, double t) {
        P r;
        for (std::size_t i = 0; i < N; ++i)
            r[i] = a[i] + t * (b[i] - a[i]);
        return r;
    };
    for (int it = 0; it < max_iter; ++it) {
        std::array<std::size_t, N + 1> ord;
        for (std::size_t i = 0; i <= N; ++i)
            ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = ord[0], worst = ord[N], second = ord[N - 1];
        if (fv[worst] - fv[best] <= 1e-12 * std::abs(fv[best]) + 1e-15)
            break;
        P c{};
        for (std::size_t i = 0; i <= N; ++i)
            if (i != worst)
                for (std::size_t j = 0; j < N; ++j)
                    c[j] += v[i][j] / static_cast<double>(N);
        const P xr = lerp(c, v[worst], -1.0);
        const double fr = f(xr);
        if (fr < fv[best]) {
            const P xe = lerp(c, v[worst], -2.0);
            const double fe = f(xe);
            if (fe < fr) {
                v[worst] = xe;
                fv[worst] = fe;
            } else {
                v[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            v[worst] = xr;
            fv[worst] = fr;
        } else {
            const P xc = fr < fv[worst] ? lerp(c, xr, 0.5) : lerp(c, v[worst], 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                v[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= N; ++i)
                    if (i != best) {
                        v[i] = lerp(v[best], v[i], 0.5);
                        fv[i] = f(v[i]);
                    }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= N; ++i)
        if (fv[i] < fv[best])
            best = i;
    return {v[best], fv[best]};
}

}  // namespace

double decoupling_ratio(const Law& law, double s, cplx eta, cplx beta) {
    const std::array<cplx, 2> both{eta, beta};
    const std::array<cplx, 1> one{beta};
    return power_weighted_integral(law, s, both) / power_weighted_integral(law, s, one);
}

DecouplingEstimate estimate_decoupling(const Law& law, double s, const DecouplingSearch& search) {
    law.validate();
    check_s(s);
    if (search.real_points < 3 || search.imag_points < 1)
        throw std::invalid_argument("decoupling grid needs >= 3 real and >= 1 imaginary points");
    const double r_min = 10.0 * law.scale();
    const double radius = search.radius > 0.0 ? search.radius : r_min;
    if (radius < r_min * (1.0 - 1e-12))
        throw std::invalid_argument("decoupling search radius must be >= 10 x law scale");

    const int nr = search.real_points, ni = search.imag_points;
    std::vector<cplx> grid;
    for (int j = 0; j < ni; ++j)
        for (int i = 0; i < nr; ++i) {
            const double re = -radius + 2.0 * radius * i / (nr - 1);
            const double im = ni == 1 ? 0.0 : radius * j / (ni - 1);
            grid.emplace_back(re, im);
        }
    const auto g = static_cast<int>(grid.size());

    std::vector<double> denom(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int b = 0; b < g; ++b) {
        const std::array<cplx, 1> one{grid[static_cast<std::size_t>(b)]};
        denom[static_cast<std::size_t>(b)] = power_weighted_integral(law, s, one);
    }
    std::vector<double> ratio(grid.size() * grid.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int b = 0; b < g; ++b)
        for (int e = 0; e < g; ++e) {
            const std::array<cplx, 2> both{grid[static_cast<std::size_t>(e)], grid[static_cast<std::size_t>(b)]};
            ratio[static_cast<std::size_t>(b) * grid.size() + static_cast<std::size_t>(e)] =
                power_weighted_integral(law, s, both) / denom[static_cast<std::size_t>(b)];
        }

    std::size_t arg = 0;
    for (std::size_t i = 1; i < ratio.size(); ++i)
        if (ratio[i] < ratio[arg])
            arg = i;
    const std::size_t ib = arg / grid.size(), ie = arg % grid.size();

    DecouplingEstimate out;
    out.s = s;
    out.search = search;
    out.search.radius = radius;
    out.grid_min = ratio[arg];
    out.kappa_hat = ratio[arg];
    out.eta = grid[ie];
    out.beta = grid[ib];
    auto outer = [&](std::size_t idx) {
        const auto i = static_cast<int>(idx % static_cast<std::size_t>(nr));
        const auto j = static_cast<int>(idx / static_cast<std::size_t>(nr));
        return i == 0 || i == nr - 1 || (ni > 1 && j == ni - 1);
    };
    out.on_boundary = outer(ie) || outer(ib);

    if (search.polish) {
        auto f = [&](const std::array<double, 4>& p) {
            for (double c : p)
                if (std::abs(c) > radius)
                    return std::numeric_limits<double>::infinity();
            return decoupling_ratio(law, s, {p[0], std::abs(p[1])}, {p[2], std::abs(p[3])});
        };
        const double step = radius / (nr - 1);
        const auto [p, fp] =
            nelder_mead<4>(f, {out.eta.real(), out.eta.imag(), out.beta.real(), out.beta.imag()}, step);
        if (fp < out.kappa_hat) {
            out.kappa_hat = fp;
            out.eta = {p[0], std::abs(p[1])};
            out.beta = {p[2], std::abs(p[3])};
        }
    }
    fill_conventions(out);
    return out;
}

DecouplingEstimate decoupling_override(double s, double kappa_hat) {
    check_s(s);
    if (!(kappa_hat > 0.0) || !std::isfinite(kappa_hat))
        throw std::invalid_argument("kappa_hat must be > 0");
    DecouplingEstimate d;
    d.s = s;
    d.kappa_hat = kappa_hat;
    d.grid_min = kappa_hat;
    fill_conventions(d);
    return d;
}

DecouplingEstimate decoupling_from_constant(double s, double d) {
    check_s(s);
    if (!(d > 0.0))
        throw std::invalid_argument("decoupling constant D must be > 0");
    return decoupling_override(s, std::pow(1.0 - s, s) * d);
}

double coupling_constant_C(double energy, double coupling, double s, bool on_s, const DecouplingEstimate& dec) {
    check_s(s);
    check_same_s(s, dec);
    return on_s ? std::pow(std::abs(coupling), s) * dec.kappa_hat : std::pow(std::abs(energy), s);
}

double k_s_factor(const KernelOperator& k, double energy, double coupling, double s, SiteProfile profile,
                  const DecouplingEstimate& dec) {
    if (!profile.on_s && !profile.off_s)
        throw std::invalid_argument("site profile must contain on-S or off-S sites");
    double c = std::numeric_limits<double>::infinity();
    if (profile.on_s)
        c = std::min(c, coupling_constant_C(energy, coupling, s, true, dec));
    if (profile.off_s)
        c = std::min(c, coupling_constant_C(energy, coupling, s, false, dec));
    if (!(c > 0.0))
        throw std::invalid_argument("k_s requires C > 0");
    return std::pow(k.s_norm(s), s) / c;
}

std::optional<LocalizationCertificate> localization_certificate(double k_s, int nu) {
    if (!(k_s >= 0.0 && k_s < 1.0) || nu < 1)
        return std::nullopt;
    LocalizationCertificate c;
    c.k_s = k_s;
    c.geometric_sum = 1.0 / (1.0 - k_s);
    if (k_s > 0.0) {
        const double peak = (nu - 1) / -std::log(k_s);
        double sum = 0.0;
        for (long l = 1; l < 100000000; ++l) {
            const double term = std::pow(static_cast<double>(l), nu - 1) * std::pow(k_s, static_cast<double>(l));
            sum += term;
            if (l > peak && term <= 1e-17 * sum)
                break;
        }
        c.shell_sum = sum;
    }
    return c;
}

double lambda_threshold(const KernelOperator& k, double s, const DecouplingEstimate& dec) {
    check_s(s);
    check_same_s(s, dec);
    if (!(dec.kappa_hat > 0.0))
        throw std::invalid_argument("kappa_hat must be > 0");
    return std::pow(std::pow(k.s_norm(s), s) / dec.kappa_hat, 1.0 / s);
}

double am_uniform_bound(double lambda, double s) {
    check_s(s);
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be > 0");
    return std::pow(2.0 * std::sqrt(2.0), s) / (std::pow(lambda, s) * (1.0 - s));
}

std::vector<DistanceBin> distance_bins(const MomentEstimate& est) {
    const auto& cube = est.query.volume;
    int margin = cube.half_side;
    for (int i = 0; i < cube.nu(); ++i)
        margin = std::min(margin, cube.half_side - std::abs(est.query.source[i] - cube.center[i]));
    const int dmax = std::min(margin - 2, static_cast<int>(est.per_distance.size()) - 1);
    std::vector<DistanceBin> bins;
    for (int d = 0; d <= dmax; ++d) {
        const auto& st = est.per_distance[static_cast<std::size_t>(d)];
        bins.push_back({d, st.mean, st.standard_error(), st.count});
    }
    return bins;
}

DecayFit decay_rate_fit(std::span<const DistanceBin> bins, double k_s) {
    if (!(k_s > 0.0))
        throw std::invalid_argument("k_s must be > 0");
    std::vector<double> x, y;
    DecayFit fit;
    for (const auto& b : bins)
        if (b.mean > 0.0 && b.mean > 10.0 * b.standard_error && std::isfinite(std::log(b.mean))) {
            x.push_back(b.distance);
            y.push_back(std::log(b.mean));
            fit.distances_used.push_back(b.distance);
        }
    if (x.size() < 6)
        throw FitDegenerateError("decay fit needs >= 6 distance bins with mean > 10 stderr, got " +
                                 std::to_string(x.size()));
    const auto line = fit_line(x, y);
    fit.rate = line.slope;
    fit.intercept = line.intercept;
    fit.pass = fit.rate <= std::log(k_s) + 0.05;
    return fit;
}

DecayFit decay_rate_fit(const MomentEstimate& est, double k_s) {
    const auto bins = distance_bins(est);
    return decay_rate_fit(bins, k_s);
}

std::vector<SimonWolffRow> simon_wolff_proxy(const GreenQuery& q, const KernelOperator& k, const SiteSet& s,
                                             const DisorderModel& model, std::span<const double> eps_ladder) {
    GreenQuery check = q;
    if (!eps_ladder.empty())
        check.epsilon = eps_ladder.front();
    check.validate();
    model.validate();
    if (eps_ladder.empty())
        throw std::invalid_argument("epsilon ladder is empty");
    for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
        if (!(eps_ladder[i] > 0.0))
            throw std::invalid_argument("epsilon ladder entries must be > 0");
        if (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))
            throw std::invalid_argument("epsilon ladder must be strictly decreasing");
    }
    const SiteSet inside = restrict_to(s, q.volume);
    const std::size_t ne = eps_ladder.size();

    auto realization = [&](std::uint64_t r, std::vector<double>& out) {
        const Potential v = potential_vanishes(inside, model) ? Potential{} : sample_potential(model, inside, r);
        const auto a = assemble_finite_volume(k, v, q.volume);
        for (std::size_t i = 0; i < ne; ++i)
            out[i] = green_row(a, {q.energy, eps_ladder[i]}, q.source).values.squaredNorm();
    };

    std::vector<RunningStats> stats(ne);
    if (potential_vanishes(inside, model)) {
        std::vector<double> vals(ne);
        realization(0, vals);
        for (std::size_t i = 0; i < ne; ++i)
            stats[i].add_repeated(vals[i], q.realizations);
    } else {
        struct Block {
            std::vector<RunningStats> st;
            std::vector<double> vals;
        };
        run_blocks<Block>(
            q.realizations,
            [&](Block& b) {
                b.st.assign(ne, {});
                b.vals.assign(ne, 0.0);
            },
            [&](Block& b, std::uint64_t r) {
                realization(r, b.vals);
                for (std::size_t i = 0; i < ne; ++i)
                    b.st[i].add(b.vals[i]);
            },
            [&](const Block& b) {
                for (std::size_t i = 0; i < ne; ++i)
                    stats[i].merge(b.st[i]);
            });
    }

    std::vector<SimonWolffRow> rows(ne);
    for (std::size_t i = 0; i < ne; ++i) {
        rows[i].epsilon = eps_ladder[i];
        rows[i].mean_sum_g2 = stats[i].mean;
        rows[i].standard_error = stats[i].standard_error();
        rows[i].trend_ratio =
            i == 0 ? kNaN
                   : std::pow(stats[i].mean / stats[i - 1].mean,
                              std::log(2.0) / std::log(eps_ladder[i - 1] / eps_ladder[i]));
    }
    return rows;
}

Theorem2Cube theorem2_cube(const Site& n, double s, double gamma, const KernelOperator& k,
                           const DecouplingEstimate& dec, const SiteSet& set) {
    check_s(s);
    check_same_s(s, dec);
    if (!(gamma > 0.0))
        throw std::invalid_argument("gamma must be > 0");
    if (n.nu() != k.nu())
        throw std::invalid_argument("site and kernel dimensions differ");
    const double norm_ss = std::pow(k.s_norm(s), s);
    auto strength = [&](const Site& m) { return std::pow(1.0 + max_norm(m), gamma * s) * dec.kappa_hat; };

    Theorem2Cube out;
    for (const auto& m : set) {
        if (m.nu() != n.nu())
            throw std::invalid_argument("S contains a site of the wrong dimension");
        if (strength(m) <= norm_ss)
            out.radius = std::max(out.radius, max_distance(m, n));
    }
    double b = std::numeric_limits<double>::infinity();
    for (const auto& m : set)
        if (max_distance(m, n) > out.radius)
            b = std::min(b, strength(m) / norm_ss);
    out.b = b;
    out.b_infinite = std::isinf(b);
    return out;
}

}  // namespace sparseloc

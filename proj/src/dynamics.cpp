#include "sparseloc/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sparseloc/errors.hpp"
#include "sparseloc/resolvent.hpp"

namespace sparseloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFactorTol = 1e-10;
constexpr double kTailTol = 1e-12;

/// sum 2|k c_k|, an upper bound for sup |h'|.
double axis_spread(const std::vector<CosineTerm>& axis) {
    double s = 0.0;
    for (const auto& term : axis)
        s += 2.0 * std::abs(term.k * term.c);
    return s;
}

std::vector<cplx> trapezoid_bins(const std::vector<CosineTerm>& axis, double t, std::size_t n) {
    std::vector<cplx> samples(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double theta = kTwoPi * static_cast<double>(j) / static_cast<double>(n);
        const double phase = -t * axis_symbol(axis, theta, 0);
        samples[j] = {std::cos(phase), std::sin(phase)};
    }
    return dft_inverse(samples);
}

std::vector<cplx> extract(const std::vector<cplx>& bins, int reach) {
    const auto n = static_cast<long long>(bins.size());
    std::vector<cplx> out(static_cast<std::size_t>(2 * reach + 1));
    for (int d = -reach; d <= reach; ++d)
        out[static_cast<std::size_t>(d + reach)] = bins[static_cast<std::size_t>(((d % n) + n) % n)];
    return out;
}

bool same_axis(const std::vector<CosineTerm>& a, const std::vector<CosineTerm>& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                      [](const CosineTerm& x, const CosineTerm& y) { return x.k == y.k && x.c == y.c; });
}

double phi_l1(const LatticeVector& phi) {
    double s = 0.0;
    for (const auto& [n, v] : phi)
        s += std::abs(v);
    return s;
}

/// psi_t = e^{-itH0} phi at a fixed list of target sites.
class PsiEvaluator {
public:
    PsiEvaluator(const SymbolSpec& spec, std::vector<Site> targets, const LatticeVector& phi)
        : spec_(spec), targets_(std::move(targets)), phi_(phi.begin(), phi.end()) {
        const int nu = spec.nu();
        for (const auto& [n, v] : phi_)
            if (n.nu() != nu)
                throw std::invalid_argument("phi has a site of the wrong dimension");
        for (const auto& m : targets_)
            if (m.nu() != nu)
                throw std::invalid_argument("target site of the wrong dimension");
        group_.resize(static_cast<std::size_t>(nu));
        for (int i = 0; i < nu; ++i) {
            int g = -1;
            for (std::size_t u = 0; u < unique_.size(); ++u)
                if (same_axis(spec.axes[static_cast<std::size_t>(i)], spec.axes[static_cast<std::size_t>(unique_[u])]))
                    g = static_cast<int>(u);
            if (g < 0) {
                g = static_cast<int>(unique_.size());
                unique_.push_back(i);
                reach_.push_back(0);
            }
            group_[static_cast<std::size_t>(i)] = g;
        }
        for (const auto& m : targets_)
            for (const auto& [n, v] : phi_)
                for (int i = 0; i < nu; ++i) {
                    auto& r = reach_[static_cast<std::size_t>(group_[static_cast<std::size_t>(i)])];
                    r = std::max(r, std::abs(m[i] - n[i]));
                }
    }

    std::vector<cplx> operator()(double t, bool verify) const {
        std::vector<AxisFactor> factors;
        for (std::size_t u = 0; u < unique_.size(); ++u) {
            factors.push_back(axis_factor(spec_.axes[static_cast<std::size_t>(unique_[u])], t, reach_[u], verify));
            if (verify && !(factors.back().error_estimate <= kFactorTol))
                throw NumericalError("propagator quadrature not converged", factors.back().error_estimate);
        }
        const int nu = spec_.nu();
        std::vector<cplx> psi(targets_.size());
        for (std::size_t j = 0; j < targets_.size(); ++j) {
            const auto& m = targets_[j];
            cplx acc{};
            for (const auto& [n, v] : phi_) {
                cplx k = v;
                for (int i = 0; i < nu; ++i)
                    k *= factors[static_cast<std::size_t>(group_[static_cast<std::size_t>(i)])](m[i] - n[i]);
                acc += k;
            }
            psi[j] = acc;
        }
        return psi;
    }

    const std::vector<Site>& targets() const { return targets_; }

private:
    SymbolSpec spec_;
    std::vector<Site> targets_;
    std::vector<std::pair<Site, cplx>> phi_;
    std::vector<int> unique_;  // representative axis of each group
    std::vector<int> reach_;   // per group
    std::vector<int> group_;   // per axis
};

/// Upper bound on |kernel(d)| for |d|_inf >= r, any axis.
double spec_envelope(const SymbolSpec& spec, double t, double r) {
    double e = 0.0;
    for (const auto& axis : spec.axes)
        e = std::max(e, contour_envelope(axis, t, r));
    return e;
}

/// Roots in [0, 2pi) of the derivative of the given order.
std::vector<double> derivative_zeros(const std::vector<CosineTerm>& axis, int order) {
    constexpr int kGrid = 4096;
    std::vector<double> roots;
    auto f = [&](double th) { return axis_symbol(axis, th, order); };
    double prev = f(0.0);
    for (int j = 1; j <= kGrid; ++j) {
        const double lo = kTwoPi * (j - 1) / kGrid, hi = kTwoPi * j / kGrid;
        const double cur = f(hi);
        if (prev == 0.0) {
            roots.push_back(lo);
        } else if (prev * cur < 0.0) {
            double a = lo, b = hi, fa = prev;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = f(mid);
                if ((fm < 0) == (fa < 0)) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        prev = cur;
    }
    return roots;
}

double derivative_scale(const std::vector<CosineTerm>& axis, int order) {
    double s = 0.0;
    for (const auto& term : axis)
        s += 2.0 * std::abs(term.c) * std::pow(std::abs(term.k), order);
    return s;
}

}  // namespace

LatticeVector delta_vector(const Site& n) { return {{n, cplx{1.0, 0.0}}}; }

AxisFactor axis_factor(const std::vector<CosineTerm>& axis, double t, int reach, bool verify) {
    if (reach < 0)
        throw std::invalid_argument("axis_factor reach must be >= 0");
    AxisFactor out;
    out.reach = reach;
    if (t == 0.0) {
        out.values.assign(static_cast<std::size_t>(2 * reach + 1), cplx{});
        out.values[static_cast<std::size_t>(reach)] = 1.0;
        return out;
    }
    const double spread = std::abs(t) * axis_spread(axis);
    const double need = std::max({64.0, 2.0 * reach + 2.0, reach + spread + 10.0 * std::cbrt(spread) + 40.0});
    auto n = std::bit_ceil(static_cast<std::size_t>(std::ceil(need)));
    if (!verify) {
        out.values = extract(trapezoid_bins(axis, t, n), reach);
        out.nodes = static_cast<int>(n);
        out.error_estimate = kNaN;
        return out;
    }
    constexpr std::size_t kMaxNodes = std::size_t{1} << 26;
    auto coarse = extract(trapezoid_bins(axis, t, n), reach);
    double err = 0.0;
    while (true) {
        auto fine = extract(trapezoid_bins(axis, t, 2 * n), reach);
        err = 0.0;
        for (std::size_t i = 0; i < fine.size(); ++i)
            err = std::max(err, std::abs(fine[i] - coarse[i]));
        n *= 2;
        if (err <= kFactorTol) {
            out.values = std::move(fine);
            break;
        }
        if (n >= kMaxNodes)
            throw NumericalError("propagator quadrature did not converge", err);
        coarse = std::move(fine);
    }
    out.nodes = static_cast<int>(n);
    out.error_estimate = err;
    return out;
}

std::map<Offset, cplx> evolution_kernel(const PropagatorQuery& q) {
    validate(q.spec);
    const int nu = q.spec.nu();
    std::vector<int> reach(static_cast<std::size_t>(nu), 0);
    for (const auto& d : q.offsets) {
        if (d.nu() != nu)
            throw std::invalid_argument("offset dimension differs from the symbol");
        for (int i = 0; i < nu; ++i)
            reach[static_cast<std::size_t>(i)] = std::max(reach[static_cast<std::size_t>(i)], std::abs(d[i]));
    }
    std::vector<AxisFactor> f;
    for (int i = 0; i < nu; ++i)
        f.push_back(axis_factor(q.spec.axes[static_cast<std::size_t>(i)], q.t, reach[static_cast<std::size_t>(i)]));
    std::map<Offset, cplx> out;
    for (const auto& d : q.offsets) {
        cplx v{1.0, 0.0};
        for (int i = 0; i < nu; ++i)
            v *= f[static_cast<std::size_t>(i)](d[i]);
        out[d] = v;
    }
    return out;
}

cplx bessel_axis_factor(int k, double c, double t, int d) {
    if (k <= 0)
        throw std::invalid_argument("bessel_axis_factor requires k >= 1");
    if (d % k != 0)
        return {};
    const int m = d / k;
    const int am = std::abs(m);
    const double z = 2.0 * c * t;
    double j = std::cyl_bessel_j(static_cast<double>(am), std::abs(z));
    if (am % 2 == 1) {
        if (z < 0)
            j = -j;
        if (m < 0)
            j = -j;
    }
    static constexpr cplx kPow[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    return kPow[((m % 4) + 4) % 4] * j;
}

double contour_envelope(const std::vector<CosineTerm>& axis, double t, double d) {
    const double r = std::abs(d);
    if (r == 0.0)
        return 1.0;
    const double at = std::abs(t);
    auto g = [&](double y) {
        double v = -r * y;
        for (const auto& term : axis)
            v += at * 2.0 * std::abs(term.c) * std::sinh(std::abs(term.k) * y);
        return v;
    };
    auto dg = [&](double y) {
        double v = -r;
        for (const auto& term : axis)
            v += at * 2.0 * std::abs(term.c * term.k) * std::cosh(std::abs(term.k) * y);
        return v;
    };
    if (dg(0.0) >= 0.0)
        return 1.0;
    int kmax = 1;
    for (const auto& term : axis)
        if (term.c != 0.0)
            kmax = std::max(kmax, std::abs(term.k));
    const double ycap = 600.0 / kmax;
    double hi = 1.0;
    while (dg(hi) < 0.0 && hi < ycap)
        hi = std::min(2.0 * hi, ycap);
    double lo = 0.0;
    if (dg(hi) < 0.0) {
        lo = hi;  // still descending at the cap
    } else {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (dg(mid) < 0.0 ? lo : hi) = mid;
        }
    }
    return std::min(1.0, std::exp(g(lo)));
}

OffDiagonalReport verify_offdiagonal_decay(const SymbolSpec& spec, double t, const std::vector<int>& distances) {
    validate(spec);
    const int nu = spec.nu();
    OffDiagonalReport rep;
    rep.h_prime_sup = symbol_derivative_sup(spec);
    std::vector<int> admitted;
    for (int d : distances)
        if (d >= 1 && nu * std::abs(t) * rep.h_prime_sup <= 0.5 * d * (1.0 + 1e-12))
            admitted.push_back(d);
    std::sort(admitted.begin(), admitted.end());
    admitted.erase(std::unique(admitted.begin(), admitted.end()), admitted.end());
    if (admitted.empty())
        throw std::invalid_argument("no admissible distance: need nu |t| ||h'|| / d <= 1/2");

    const int rmax = admitted.back();
    std::vector<AxisFactor> f;
    for (const auto& axis : spec.axes)
        f.push_back(axis_factor(axis, t, rmax));
    // Per axis: edge value E(r) at |d| = r and running maximum M(r) over |d| <= r.
    std::vector<std::vector<double>> edge(static_cast<std::size_t>(nu)), run(static_cast<std::size_t>(nu));
    for (int i = 0; i < nu; ++i) {
        auto& e = edge[static_cast<std::size_t>(i)];
        auto& m = run[static_cast<std::size_t>(i)];
        e.resize(static_cast<std::size_t>(rmax) + 1);
        m.resize(static_cast<std::size_t>(rmax) + 1);
        for (int r = 0; r <= rmax; ++r) {
            e[static_cast<std::size_t>(r)] =
                std::max(std::abs(f[static_cast<std::size_t>(i)](r)), std::abs(f[static_cast<std::size_t>(i)](-r)));
            m[static_cast<std::size_t>(r)] =
                r == 0 ? e[0] : std::max(m[static_cast<std::size_t>(r) - 1], e[static_cast<std::size_t>(r)]);
        }
    }
    auto shell = [&](int r) {
        double best = 0.0;
        for (int i = 0; i < nu; ++i) {
            double v = edge[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
            for (int j = 0; j < nu; ++j)
                if (j != i)
                    v *= run[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
            best = std::max(best, v);
        }
        return best;
    };
    const double p = 2.0 * nu + 1.0;
    rep.c = shell(admitted.front()) * std::pow(admitted.front(), p);
    for (int d : admitted) {
        OffDiagonalRow row;
        row.distance = d;
        row.abs_kernel = shell(d);
        row.bound = rep.c / std::pow(d, p);
        row.pass = row.abs_kernel <= row.bound * (1.0 + 1e-12) + 1e-13;
        rep.pass = rep.pass && row.pass;
        rep.rows.push_back(row);
    }
    return rep;
}

double max_decay_target(const std::vector<CosineTerm>& axis) {
    const double tol = 1e-8 * derivative_scale(axis, 3);
    if (derivative_scale(axis, 2) == 0.0)
        return kNaN;
    const auto zeros = derivative_zeros(axis, 2);
    if (zeros.empty())
        return -0.5;
    for (double z : zeros)
        if (!(std::abs(axis_symbol(axis, z, 3)) > tol))
            return kNaN;
    return -1.0 / 3.0;
}

double fixed_decay_target(const std::vector<CosineTerm>& axis) {
    if (derivative_scale(axis, 1) == 0.0)
        return kNaN;
    const double tol2 = 1e-8 * derivative_scale(axis, 2);
    const double tol3 = 1e-8 * derivative_scale(axis, 3);
    double target = -0.5;
    for (double z : derivative_zeros(axis, 1)) {
        if (std::abs(axis_symbol(axis, z, 2)) > tol2)
            continue;
        if (!(std::abs(axis_symbol(axis, z, 3)) > tol3))
            return kNaN;
        target = -1.0 / 3.0;
    }
    return target;
}

TimeDecayReport verify_time_decay(const SymbolSpec& spec, std::span<const double> t_grid, DecayMode mode,
                                  int offset) {
    validate(spec);
    if (t_grid.size() < 2)
        throw std::invalid_argument("time grid needs >= 2 points");
    for (double t : t_grid)
        if (!(t >= 50.0 && t <= 1000.0))
            throw std::invalid_argument("time grid must lie in [50, 1000]");
    TimeDecayReport rep;
    rep.t.assign(t_grid.begin(), t_grid.end());
    std::vector<double> logt;
    for (double t : t_grid)
        logt.push_back(std::log(t));
    rep.pass = true;
    for (const auto& axis : spec.axes) {
        AxisTimeDecay ax;
        std::vector<double> logm;
        double tau = 0.0;
        if (mode == DecayMode::fixed_offset) {
            double hmin = std::numeric_limits<double>::infinity(), hmax = -hmin;
            for (int j = 0; j < 4096; ++j) {
                const double h = axis_symbol(axis, kTwoPi * j / 4096.0, 0);
                hmin = std::min(hmin, h);
                hmax = std::max(hmax, h);
            }
            if (!(hmax > hmin))
                throw NumericalError("constant axis symbol: time decay fit is degenerate", 0.0);
            tau = kTwoPi / (hmax - hmin);
        }
        for (double t : t_grid) {
            double m = 0.0;
            if (mode == DecayMode::max_over_offsets) {
                const double spread = t * axis_spread(axis);
                const int reach = static_cast<int>(std::ceil(spread + 20.0 * std::cbrt(spread))) + 64;
                for (const auto& v : axis_factor(axis, t, reach).values)
                    m = std::max(m, std::abs(v));
            } else {
                constexpr int kWindow = 64;
                for (int j = 0; j < kWindow; ++j) {
                    const double tj = t + 2.0 * tau * j / (kWindow - 1);
                    m = std::max(m, std::abs(axis_factor(axis, tj, std::abs(offset))(offset)));
                }
            }
            if (!(m > 0.0) || !std::isfinite(m))
                throw NumericalError("time decay fit is degenerate (M(t) not positive)", m);
            ax.m_values.push_back(m);
            logm.push_back(std::log(m));
        }
        const auto fit = fit_line(logt, logm);
        ax.slope = fit.slope;
        ax.intercept = fit.intercept;
        ax.target = mode == DecayMode::max_over_offsets ? max_decay_target(axis) : fixed_decay_target(axis);
        ax.pass = std::isfinite(ax.target) && std::abs(ax.slope - ax.target) <= 0.05;
        rep.total_slope += ax.slope;
        rep.total_target += ax.target;
        rep.pass = rep.pass && ax.pass;
        rep.axes.push_back(std::move(ax));
    }
    return rep;
}

SparsenessResult sparseness_integral(const SymbolSpec& spec, const SparseSet& s, const LatticeVector& phi,
                                     double t_max, std::optional<double> gamma, int samples) {
    validate(spec);
    const int nu = spec.nu();
    if (s.nu() != nu)
        throw std::invalid_argument("sparse set dimension differs from the symbol");
    if (!(t_max >= 2.0))
        throw std::invalid_argument("T_max must be >= 2");
    if (gamma && !(*gamma > 0.0))
        throw std::invalid_argument("weight gamma must be > 0");
    if (samples < 1)
        throw std::invalid_argument("need >= 1 sample interval");
    for (const auto& row : sparseness_profile(s, centered_dyadic_subcubes(s.cube)))
        if (!row.pass)
            throw std::invalid_argument("S is too dense for alpha = " + std::to_string(s.alpha) + ": " +
                                        std::to_string(row.count) + " sites in a centered cube of volume " +
                                        std::to_string(row.volume) + " exceed the cap " + std::to_string(row.cap));

    int rho = 0;
    for (const auto& [n, v] : phi) {
        if (n.nu() != nu)
            throw std::invalid_argument("phi has a site of the wrong dimension");
        rho = std::max(rho, max_distance(n, s.cube.center));
    }
    const double hp = symbol_derivative_sup(spec);
    const int big_l = s.cube.half_side;
    const double r_adm = 2.0 * nu * t_max * hp;
    if (big_l - rho < r_adm)
        throw EnlargeDomainError("cube half-side must be >= " + std::to_string(rho + r_adm) +
                                     " (phi radius + 2 nu T_max ||h'||)",
                                 rho + r_adm);

    const int c_norm = max_norm(s.cube.center);
    auto weight = [&](double radius) { return gamma ? std::pow(1.0 + radius, *gamma) : 1.0; };

    // S beyond the cube: at most cap((2r+1)^nu) sites per radius r, each within
    // reach of the contour envelope at distance r - rho.
    SparsenessResult res;
    {
        const double l1 = phi_l1(phi);
        double tail2 = 0.0;
        for (long r = big_l + 1; r < big_l + 1000000L; ++r) {
            const double env = spec_envelope(spec, t_max, static_cast<double>(r - rho));
            const double vol = std::pow(2.0 * static_cast<double>(r) + 1.0, nu);
            const double cnt = std::ceil(std::pow(vol, s.alpha));
            const double w = weight(static_cast<double>(r + c_norm));
            const double term = cnt * w * w * l1 * l1 * env * env;
            tail2 += term;
            if (env < 1e-3 && term <= 1e-30 * (tail2 + 1e-300))
                break;
        }
        res.tail_bound = std::sqrt(tail2);
        if (!(res.tail_bound <= kTailTol))
            throw EnlargeDomainError("contribution of S beyond the cube is not certified below 1e-12",
                                     res.tail_bound);
    }

    std::vector<double> w2;
    for (const auto& m : s.sites) {
        const double w = gamma ? weight_value(*gamma, m) : 1.0;
        w2.push_back(w * w);
    }
    const PsiEvaluator psi(spec, s.sites, phi);
    auto c_at = [&](double t, bool verify) {
        const auto v = psi(t, verify);
        double acc = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j)
            acc += w2[j] * std::norm(v[j]);
        return std::sqrt(acc);
    };
    // Node counts are sized a priori; one verified evaluation at T_max checks them.
    (void)c_at(t_max, true);

    for (int k = 0; k <= samples; ++k) {
        const double t = t_max * k / samples;
        res.t.push_back(t);
        res.c.push_back(c_at(t, false));
    }
    for (int k = 0; k <= 64; ++k)
        res.head_bound = std::max(res.head_bound, c_at(k / 64.0, false));

    for (double lo = 1.0; 2.0 * lo <= t_max * (1.0 + 1e-12); lo *= 2.0)
        res.windows.push_back({lo, 2.0 * lo, 0.0, 0.0});
    const int nw = static_cast<int>(res.windows.size());
    std::vector<std::exception_ptr> errors(res.windows.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int j = 0; j < nw; ++j) {
        auto& w = res.windows[static_cast<std::size_t>(j)];
        try {
            const auto q = integrate_adaptive([&](double t) { return c_at(t, false); }, w.lo, w.hi, 1e-13, 1e-8,
                                              20000);
            w.integral = q.value;
            w.error = q.error;
        } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    res.total = res.head_bound;
    for (std::size_t j = 0; j < res.windows.size(); ++j) {
        res.total += res.windows[j].integral;
        if (j > 0) {
            const double prev = res.windows[j - 1].integral;
            res.ratios.push_back(prev > 0.0 ? res.windows[j].integral / prev : 0.0);
        }
    }
    res.converging = !res.ratios.empty();
    const std::size_t last = std::min<std::size_t>(3, res.ratios.size());
    for (std::size_t j = res.ratios.size() - last; j < res.ratios.size(); ++j)
        res.converging = res.converging && res.ratios[j] < 0.9;
    return res;
}

std::vector<CookRow> cook_integrand(const SymbolSpec& spec, const SiteSet& s, const DisorderModel& model,
                                    const LatticeVector& phi, std::span<const double> t_grid, int samples) {
    validate(spec);
    model.validate();
    if (samples < 30)
        throw std::invalid_argument("Cook check needs >= 30 disorder samples per time");
    const double sigma2 = model.law.second_moment();
    std::vector<double> coupling2;
    for (const auto& m : s) {
        const double c = model.coupling(m);
        coupling2.push_back(c * c);
    }
    const PsiEvaluator psi(spec, s, phi);
    std::vector<CookRow> rows;
    for (double t : t_grid) {
        const auto v = psi(t, true);
        CookRow row;
        row.t = t;
        double c2 = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j)
            c2 += coupling2[j] * std::norm(v[j]);
        row.expected_sq = sigma2 * c2;
        row.bound = std::sqrt(row.expected_sq);
        RunningStats st;
        std::vector<double> norms;
        for (int r = 0; r < samples; ++r) {
            const auto pot = sample_potential(model, s, static_cast<std::uint64_t>(r));
            double x = 0.0;
            for (std::size_t j = 0; j < s.size(); ++j) {
                const double val = pot.at(s[j]);
                x += val * val * std::norm(v[j]);
            }
            st.add(x);
            norms.push_back(std::sqrt(x));
        }
        std::sort(norms.begin(), norms.end());
        auto quantile = [&](double p) {
            const double h = p * static_cast<double>(norms.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const auto hi = std::min(lo + 1, norms.size() - 1);
            return norms[lo] + (h - static_cast<double>(lo)) * (norms[hi] - norms[lo]);
        };
        row.mean_sq = st.mean;
        row.stderr_sq = st.standard_error();
        row.q10 = quantile(0.1);
        row.median = quantile(0.5);
        row.q90 = quantile(0.9);
        row.pass = row.median <= row.bound * (1.0 + 1e-12);
        rows.push_back(row);
    }
    return rows;
}

WeightedTailResult weighted_tail_norm(const SymbolSpec& spec, const LatticeVector& phi, double t, double beta,
                                      const SiteSet& s, const Cube& cube) {
    validate(spec);
    const int nu = spec.nu();
    if (!(beta > nu))
        throw std::invalid_argument("weighted tail norm requires beta > nu");
    if (cube.nu() != nu)
        throw std::invalid_argument("cube dimension differs from the symbol");
    int rho = 0;
    for (const auto& [n, v] : phi) {
        if (n.nu() != nu)
            throw std::invalid_argument("phi has a site of the wrong dimension");
        rho = std::max(rho, max_distance(n, cube.center));
    }
    const double hp = symbol_derivative_sup(spec);
    const double r_adm = 2.0 * nu * std::abs(t) * hp;
    if (cube.half_side - rho < r_adm)
        throw EnlargeDomainError("cube half-side must be >= phi radius + 2 nu |t| ||h'||", rho + r_adm);

    WeightedTailResult out;
    const double l1 = phi_l1(phi);
    const int c_norm = max_norm(cube.center);
    double tail = 0.0;
    for (long r = cube.half_side + 1; r < cube.half_side + 1000000L; ++r) {
        const double env = spec_envelope(spec, t, static_cast<double>(r - rho));
        const double rr = static_cast<double>(r);
        const double shell = std::pow(2.0 * rr + 1.0, nu) - std::pow(2.0 * rr - 1.0, nu);
        const double term = shell * std::pow(1.0 + rr + c_norm, 2.0 * beta) * l1 * l1 * env * env;
        tail += term;
        if (env < 1e-3 && term <= 1e-30 * (tail + 1e-300))
            break;
    }
    out.tail_bound = tail;
    if (!(tail <= kTailTol))
        throw EnlargeDomainError("weighted tail beyond the cube is not certified below 1e-12", tail);

    SiteSet inside;
    for (const auto& m : s)
        if (cube.contains(m))
            inside.push_back(m);
    const PsiEvaluator psi(spec, inside, phi);
    const auto v = psi(t, true);
    for (std::size_t j = 0; j < v.size(); ++j)
        out.value += std::pow(1.0 + max_norm(inside[j]), 2.0 * beta) * std::norm(v[j]);
    return out;
}

}  // namespace sparseloc

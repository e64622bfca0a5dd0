// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Each criterion runs the library path and, where one exists, an independent
// oracle computed here (Bessel values by backward recurrence, direct counting,
// own fits).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "sparseloc/dynamics.hpp"
#include "sparseloc/experiment.hpp"
#include "sparseloc/lattice.hpp"
#include "sparseloc/operators.hpp"
#include "sparseloc/presets.hpp"
#include "sparseloc/resolvent.hpp"
#include "sparseloc/textio.hpp"

using namespace sparseloc;

namespace {

// Tolerances, pinned.
constexpr double kNormRelTol = 1e-12;
constexpr double kClosedFormTol = 1e-6;
constexpr double kPropagatorTol = 1e-8;
constexpr double kUnitarityTol = 1e-8;
constexpr double kSlopeTol = 0.05;
constexpr double kWindowRatio = 0.9;
constexpr double kCtRelTol = 1e-8;
constexpr double kRateMargin = 0.05;
constexpr double kTrendAc = 2.0;
constexpr double kTrendPp = 1.2;
constexpr double kIprFactor = 10.0;
constexpr int kCapSeeds = 100;

struct Result {
    bool pass = true;
    std::ostringstream detail;
    std::vector<std::string> failed;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            failed.push_back(what);
        }
    }
};

using Table = std::vector<std::map<std::string, std::string>>;

Table parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    Table rows;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string f;
        while (std::getline(ss, f, ','))
            out.push_back(f);
        return out;
    };
    if (std::getline(in, line))
        header = split(line);
    while (std::getline(in, line)) {
        const auto f = split(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < f.size(); ++i)
            row[header[i]] = f[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) {
    const auto& v = row.at(key);
    if (v == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    if (v == "inf")
        return std::numeric_limits<double>::infinity();
    return std::stod(v);
}

RunOutcome run_preset(const std::string& name, int threads) {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    const auto rep = validate_config(preset(name).config);
    if (!rep.ok())
        throw std::runtime_error("preset " + name + " rejected: " + rep.violations.front());
    auto out = execute(*rep.config);
    omp_set_num_threads(saved);
    return out;
}

void require_verdicts(Result& r, const RunOutcome& out, const std::string& label) {
    for (const auto& v : out.verdicts)
        r.require(v.pass, label + " " + v.name + ": " + v.detail);
}

// Least-squares slope of y on x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// J_0(x) .. J_nmax(x) by Miller's backward recurrence, normalized with
// J_0 + 2 sum J_2k = 1. Stable for every order, unlike the forward recurrence.
std::vector<double> bessel_table(double x, int nmax) {
    const int big = std::max(nmax, static_cast<int>(x));
    int start = big + 40 + static_cast<int>(std::sqrt(60.0 * big));
    start += start % 2;
    std::vector<double> b(static_cast<std::size_t>(start) + 2, 0.0);
    b[static_cast<std::size_t>(start)] = 1e-300;
    for (int n = start; n >= 1; --n) {
        const auto i = static_cast<std::size_t>(n);
        b[i - 1] = 2.0 * n / x * b[i] - b[i + 1];
        if (std::abs(b[i - 1]) > 1e250)
            for (std::size_t k = i - 1; k < b.size(); ++k)
                b[k] *= 1e-250;
    }
    double norm = b[0];
    for (std::size_t k = 2; k < b.size(); k += 2)
        norm += 2.0 * b[k];
    std::vector<double> j(b.begin(), b.begin() + nmax + 1);
    for (auto& v : j)
        v /= norm;
    return j;
}

// (-i)^|d| J_|d|(2t): the free one-dimensional propagator.
std::complex<double> bessel_oracle(const std::vector<double>& table, int d) {
    const int m = std::abs(d);
    static const std::complex<double> powers[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    return powers[m % 4] * table.at(static_cast<std::size_t>(m));
}

// ---------------------------------------------------------------------------

Result criterion1() {
    Result r;
    double worst = 0.0;
    for (int nu = 1; nu <= 3; ++nu)
        for (double s : {0.3, 0.5, 0.9}) {
            const double got = kernel_from_symbol(cosine_symbol(nu)).s_norm(s);
            worst = std::max(worst, std::abs(got / std::pow(2.0 * nu, 1.0 / s) - 1.0));
        }
    r.require(worst < kNormRelTol, "relative error");
    const auto out = run_preset("norms", 1);
    require_verdicts(r, out, "norms");
    r.detail << "max relative error " << worst << " over nu 1..3, s {0.3, 0.5, 0.9}";
    return r;
}

Result criterion2() {
    Result r;
    const auto k = kernel_from_symbol(cosine_symbol(1));
    const Cube cube(origin(1), 1000);  // side 2001
    const auto a = assemble_finite_volume(k, {}, cube);
    const double s = 0.9;
    for (double e : {3.0, 4.0, 6.0}) {
        const auto row = green_row(a, {e, 1e-6}, origin(1));
        double direct = 0.0;
        for (Eigen::Index i = 0; i < row.values.size(); ++i)
            direct += std::pow(std::abs(row.values[i]), s);
        const double bound = neumann_fractional_bound(k, e, s);
        r.require(direct <= bound, "direct sum above the bound at E = " + fmt(e));
        r.detail << "E=" << e << ": direct " << direct << " <= " << bound << "; ";
    }
    const double closed = (1.0 / 3.0) / (1.0 - 2.0 / std::pow(3.0, s));
    const double b3 = neumann_fractional_bound(k, 3.0, s);
    r.require(std::abs(b3 - closed) < kClosedFormTol, "bound(3) vs closed form");
    r.require(std::abs(b3 - 1.302) < 1e-3, "bound(3) near 1.302");
    r.detail << "bound(3) " << b3 << " vs closed form " << closed;
    return r;
}

Result criterion3() {
    Result r;
    double worst = 0.0, worst_unit = 0.0;
    for (int nu = 1; nu <= 2; ++nu)
        for (double t : {0.5, 1.0, 5.0, 20.0}) {
            PropagatorQuery q{cosine_symbol(nu), t, {}};
            for (const auto& d : cube_sites(Cube(origin(nu), 30)))
                q.offsets.push_back(d);
            const auto kern = evolution_kernel(q);
            const auto table = bessel_table(2.0 * t, 30);
            for (const auto& [d, v] : kern) {
                std::complex<double> oracle = 1.0;
                for (int i = 0; i < nu; ++i)
                    oracle *= bessel_oracle(table, d[i]);
                worst = std::max(worst, std::abs(v - oracle));
            }
            // Unitarity needs the whole support: reach 200 leaves |J_d(40)| far below 1e-30.
            PropagatorQuery wide{cosine_symbol(nu), t, {}};
            for (const auto& d : cube_sites(Cube(origin(nu), nu == 1 ? 200 : 120)))
                wide.offsets.push_back(d);
            double sum = 0.0;
            for (const auto& [d, v] : evolution_kernel(wide))
                sum += std::norm(v);
            worst_unit = std::max(worst_unit, std::abs(sum - 1.0));
        }
    r.require(worst < kPropagatorTol, "Bessel comparison");
    r.require(worst_unit < kUnitarityTol, "unitarity");
    require_verdicts(r, run_preset("propagator", 1), "propagator");
    r.detail << "max |kernel - Bessel product| " << worst << ", max |sum |kernel|^2 - 1| " << worst_unit;
    return r;
}

Result criterion4() {
    Result r;
    std::vector<double> ts;
    for (int i = 0; i < 13; ++i)
        ts.push_back(50.0 * std::pow(16.0, i / 12.0));
    const auto lib_max = verify_time_decay(cosine_symbol(1), ts, DecayMode::max_over_offsets);
    const auto lib_fix = verify_time_decay(cosine_symbol(1), ts, DecayMode::fixed_offset, 0);
    // Oracle: max_d |J_d(2t)| and the envelope of |J_0(2t')| on [t, t + 2 tau], tau = 2 pi / 4.
    std::vector<double> lx, ymax, yfix;
    for (double t : ts) {
        double m = 0.0;
        for (double v : bessel_table(2.0 * t, static_cast<int>(2.0 * t) + 60))
            m = std::max(m, std::abs(v));
        double f = 0.0;
        for (int j = 0; j <= 1024; ++j)
            f = std::max(f, std::abs(bessel_table(2.0 * (t + M_PI * j / 1024.0), 0)[0]));
        lx.push_back(std::log(t));
        ymax.push_back(std::log(m));
        yfix.push_back(std::log(f));
    }
    const double omax = ls_slope(lx, ymax), ofix = ls_slope(lx, yfix);
    const double smax = lib_max.axes.at(0).slope, sfix = lib_fix.axes.at(0).slope;
    r.require(std::abs(smax + 1.0 / 3.0) < kSlopeTol, "max-over-offsets slope");
    r.require(std::abs(sfix + 0.5) < kSlopeTol, "fixed-offset slope");
    r.require(std::abs(omax + 1.0 / 3.0) < kSlopeTol, "oracle max slope");
    r.require(std::abs(ofix + 0.5) < kSlopeTol, "oracle fixed slope");
    require_verdicts(r, run_preset("time_decay_max", 1), "time_decay_max");
    require_verdicts(r, run_preset("time_decay_fixed", 1), "time_decay_fixed");
    r.detail << "max slope " << smax << " (oracle " << omax << "), fixed d=0 slope " << sfix << " (oracle " << ofix
             << ")";
    return r;
}

Result criterion5() {
    Result r;
    const double t = 5.0;
    std::vector<int> ds;
    for (int d = 1; d <= 200; ++d)
        ds.push_back(d);
    const auto rep = verify_offdiagonal_decay(cosine_symbol(1), t, ds);
    int lib_violations = 0;
    for (const auto& row : rep.rows)
        lib_violations += row.pass ? 0 : 1;
    // Oracle: admitted iff 1 * 5 * 2 / d <= 1/2, i.e. d >= 20; C from |J_20(10)|.
    const int first = 20;
    const auto table = bessel_table(2.0 * t, 200);
    const double c = std::pow(first, 3.0) * std::abs(table[first]);
    int oracle_violations = 0;
    for (int d = first; d <= 200; ++d)
        oracle_violations += std::abs(table[static_cast<std::size_t>(d)]) <= c / std::pow(d, 3.0) * (1.0 + 1e-12) ? 0 : 1;
    r.require(rep.pass && lib_violations == 0, "library violations");
    r.require(!rep.rows.empty() && rep.rows.front().distance == first, "first admitted distance");
    r.require(rep.rows.size() == 181, "admitted count");
    r.require(oracle_violations == 0, "oracle violations");
    r.require(std::abs(rep.c / c - 1.0) < 1e-8, "calibrated C");
    require_verdicts(r, run_preset("offdiagonal", 1), "offdiagonal");
    r.detail << lib_violations << " violations over " << rep.rows.size() << " admitted distances (oracle "
             << oracle_violations << "), C " << rep.c;
    return r;
}

// Counts sites of the set inside the centered cube of radius `radius` directly.
std::int64_t direct_count(const SparseSet& s, int radius) {
    std::int64_t n = 0;
    for (const auto& m : s.sites)
        n += max_distance(m, s.cube.center) <= radius ? 1 : 0;
    return n;
}

Result criterion6() {
    Result r;
    std::int64_t sets = 0, cubes = 0, violations = 0;
    struct Case {
        int nu, half_side;
        double alpha;
        bool every_radius;
    };
    const std::vector<Case> cases{{1, 31, 0.3, true},  {1, 31, 0.7, true},  {2, 31, 0.3, true}, {2, 31, 0.7, true},
                                  {3, 31, 0.3, true},  {3, 31, 0.7, true},  {4, 127, 0.1, false},
                                  {4, 127, 0.16, false}, {5, 127, 0.25, false}, {5, 127, 0.1, false}};
    for (const auto& cs : cases)
        for (auto g : {SparseGenerator::deterministic_powers, SparseGenerator::bernoulli_thinned})
            for (int seed = 0; seed < kCapSeeds; ++seed) {
                if (g == SparseGenerator::deterministic_powers && seed > 0)
                    break;  // seed-independent
                const Cube cube(origin(cs.nu), cs.half_side);
                const auto set = generate_sparse_set(cs.alpha, cube, g, static_cast<std::uint64_t>(seed));
                ++sets;
                const auto sub = cs.every_radius ? centered_subcubes(cube) : centered_dyadic_subcubes(cube);
                const auto profile = sparseness_profile(set, sub);
                for (std::size_t i = 0; i < sub.size(); ++i) {
                    const double vol = std::pow(2.0 * sub[i].half_side + 1.0, cs.nu);
                    const auto count = direct_count(set, sub[i].half_side);
                    // count <= ceil(vol^alpha)  iff  count - 1 < vol^alpha
                    const bool ok = static_cast<double>(count - 1) < std::pow(vol, cs.alpha) * (1.0 + 1e-12);
                    violations += (ok && profile[i].pass && profile[i].count == count) ? 0 : 1;
                    ++cubes;
                }
            }
    r.require(violations == 0, "cap violations");
    r.detail << violations << " violations over " << sets << " sets and " << cubes << " centered sub-cubes";
    return r;
}

// c(t)^2 = sum_m w(m)^2 prod_i J_{m_i}(2t)^2 for phi = delta_0.
double ct_oracle(const std::vector<std::vector<int>>& sites, double t, double gamma) {
    int reach = 0;
    for (const auto& m : sites)
        for (int x : m)
            reach = std::max(reach, std::abs(x));
    const auto table = bessel_table(2.0 * t, reach);
    double acc = 0.0;
    for (const auto& m : sites) {
        double p = 1.0;
        int norm = 0;
        for (int x : m) {
            p *= table[static_cast<std::size_t>(std::abs(x))];
            norm = std::max(norm, std::abs(x));
        }
        const double w = gamma > 0.0 ? std::pow(1.0 + norm, gamma) : 1.0;
        acc += w * w * p * p;
    }
    return std::sqrt(acc);
}

std::vector<std::vector<int>> parse_sites(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<int>> out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls(line);
        std::vector<int> m;
        int x;
        while (ls >> x)
            m.push_back(x);
        out.push_back(m);
    }
    return out;
}

Result criterion7() {
    Result r;
    for (const auto& [name, gamma] : {std::pair<std::string, double>{"sparseness", 0.0}, {"sparseness_weighted", 0.25}}) {
        const auto out = run_preset(name, 1);
        require_verdicts(r, out, name);
        const auto sites = parse_sites(out.find("sparse_set.txt")->content);
        const auto ct = parse_csv(out.find("sparseness.csv")->content);
        double worst_ct = 0.0;
        for (std::size_t i = 0; i < ct.size(); i += 16) {
            const double t = num(ct[i], "t"), c = num(ct[i], "c_t");
            const double o = ct_oracle(sites, t, gamma);
            worst_ct = std::max(worst_ct, std::abs(c - o) / std::max(o, 1e-300));
        }
        r.require(worst_ct < kCtRelTol, name + " c(t) vs Bessel oracle");
        // Own Simpson integrals over the dyadic windows from the sampled c(t).
        std::vector<double> t, c;
        for (const auto& row : ct) {
            t.push_back(num(row, "t"));
            c.push_back(num(row, "c_t"));
        }
        const double h = t[1] - t[0];
        std::vector<double> windows;
        for (double lo = 1.0; 2.0 * lo <= t.back() + 1e-9; lo *= 2.0) {
            const auto a = static_cast<std::size_t>(std::lround(lo / h));
            const auto b = static_cast<std::size_t>(std::lround(2.0 * lo / h));
            double acc = c[a] + c[b];
            for (std::size_t j = a + 1; j < b; ++j)
                acc += ((j - a) % 2 ? 4.0 : 2.0) * c[j];
            windows.push_back(acc * h / 3.0);
        }
        const auto lib = parse_csv(out.find("sparseness_windows.csv")->content);
        double own_worst = 0.0, lib_worst = 0.0;
        for (std::size_t j = windows.size() - 3; j < windows.size(); ++j) {
            own_worst = std::max(own_worst, windows[j] / windows[j - 1]);
            lib_worst = std::max(lib_worst, num(lib.at(j), "ratio_to_previous"));
        }
        r.require(lib_worst < kWindowRatio, name + " library window ratios");
        r.require(own_worst < kWindowRatio, name + " recomputed window ratios");
        r.detail << name << ": " << sites.size() << " sites, last-three ratio max " << lib_worst << " (Simpson "
                 << own_worst << "), c(t) rel err " << worst_ct << "; ";
    }
    return r;
}

Result criterion8() {
    Result r;
    const auto out = run_preset("am_bound", 1);
    require_verdicts(r, out, "am_bound");
    const double lambda = 30.0, s = 0.5;
    const double bound = std::pow(2.0 * std::sqrt(2.0), s) / (std::pow(lambda, s) * (1.0 - s));
    std::int64_t checked = 0, violations = 0;
    double worst = -1e300;
    for (const auto& row : parse_csv(out.find("moments_sites.csv")->content)) {
        if (row.at("in_support") != "true")
            continue;
        const double slack = num(row, "mean_absG_s") - bound - 2.0 * num(row, "stderr");
        worst = std::max(worst, slack);
        violations += slack > 0.0 ? 1 : 0;
        ++checked;
    }
    r.require(checked == 2 * 401, "every site of both energies checked");
    r.require(violations == 0, "sites above the bound");
    r.detail << violations << " of " << checked << " (E, m) above " << bound << " + 2 stderr, worst slack " << worst;
    return r;
}

Result criterion9() {
    Result r;
    const auto out = run_preset("decay_fit", 1);
    require_verdicts(r, out, "decay_fit");
    const auto summary = out.find("decay_fit.json")->content;
    const auto key = summary.find("\"log_k_s\"");
    const double log_ks = std::stod(summary.substr(summary.find(':', key) + 1));
    // Own fit: log mean on distance over bins with mean > 10 stderr.
    std::vector<double> x, y;
    for (const auto& row : parse_csv(out.find("decay_bins.csv")->content)) {
        const double m = num(row, "mean"), se = num(row, "stderr");
        if (m > 10.0 * se && m > 0.0) {
            x.push_back(num(row, "distance"));
            y.push_back(std::log(m));
        }
    }
    r.require(x.size() >= 6, "at least 6 reliable bins");
    const double rate = x.size() >= 2 ? ls_slope(x, y) : std::numeric_limits<double>::quiet_NaN();
    r.require(rate <= log_ks + kRateMargin, "recomputed rate");
    r.detail << "rate " << rate << " over " << x.size() << " bins vs log k_s " << log_ks << " + " << kRateMargin;
    return r;
}

Result criterion10() {
    Result r;
    for (const auto& [name, ac] : {std::pair<std::string, bool>{"simon_wolff_ac", true}, {"simon_wolff_pp", false}}) {
        const auto out = run_preset(name, 1);
        require_verdicts(r, out, name);
        const auto rows = parse_csv(out.find("simon_wolff.csv")->content);
        double lo = 1e300, hi = -1e300, eps_min = 1.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double ratio = num(rows[i], "mean_sum_G2") / num(rows[i - 1], "mean_sum_G2");
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            eps_min = std::min(eps_min, num(rows[i], "epsilon"));
        }
        r.require(eps_min <= 1e-4, name + " ladder reaches 1e-4");
        if (ac)
            r.require(lo >= kTrendAc, name + " trend");
        else
            r.require(hi <= kTrendPp, name + " trend");
        r.detail << name << ": trend ratios in [" << lo << ", " << hi << "]; ";
    }
    return r;
}

Result criterion11() {
    Result r;
    const auto out = run_preset("theorem2_cube", 1);
    const auto row = parse_csv(out.find("theorem2_cube.csv")->content).at(0);
    r.require(num(row, "radius") == 3, "algebraic radius 3");
    r.require(std::abs(num(row, "h0_norm_s_pow_s") - 2.0) < 1e-12, "||K||_s^s = 2");
    std::mt19937_64 gen(2024);
    int agree = 0;
    const int trials = 50;
    for (int trial = 0; trial < trials; ++trial) {
        const int nu = 1 + trial % 2;
        const double gamma = std::uniform_real_distribution<double>(0.1, 2.5)(gen);
        const double s = std::uniform_real_distribution<double>(0.1, 0.95)(gen);
        const double kappa = std::uniform_real_distribution<double>(0.2, 1.0)(gen);
        const double density = std::uniform_real_distribution<double>(0.05, 0.6)(gen);
        std::vector<Site> pts;
        for (const auto& m : cube_sites(Cube(origin(nu), nu == 1 ? 60 : 15)))
            if (std::bernoulli_distribution(density)(gen))
                pts.push_back(m);
        const auto set = make_site_set(pts);
        const double norm = 2.0 * nu;  // ||K||_s^s of the nearest-neighbour kernel
        auto strong_outside = [&](int radius) {
            for (const auto& m : pts)
                if (max_norm(m) > radius && !(std::pow(1.0 + max_norm(m), gamma * s) * kappa > norm))
                    return false;
            return true;
        };
        int radius = 0;
        while (!strong_outside(radius))
            ++radius;
        const auto got = theorem2_cube(origin(nu), s, gamma, kernel_from_symbol(cosine_symbol(nu)),
                                       decoupling_override(s, kappa), set);
        agree += got.radius == radius ? 1 : 0;
    }
    r.require(agree == trials, "brute-force agreement");
    r.detail << "radius " << num(row, "radius") << ", b " << num(row, "b") << "; brute force agrees on " << agree
             << "/" << trials;
    return r;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Result criterion12() {
    Result r;
    const auto out = run_preset("edge_scan", 1);
    require_verdicts(r, out, "edge_scan");
    const double threshold = 2.0 + 0.5;  // ||H0||_1 + 0.5
    std::vector<double> outside;
    double center = std::numeric_limits<double>::quiet_NaN();
    std::int64_t levels = 0;
    for (const auto& row : parse_csv(out.find("edge_scan.csv")->content)) {
        const double lo = num(row, "bin_lo"), hi = num(row, "bin_hi");
        const auto count = static_cast<std::int64_t>(num(row, "count"));
        levels += count;
        if (count > 0 && (lo >= threshold || hi <= -threshold))
            outside.push_back(num(row, "median_ipr"));
        if (lo <= 0.0 && 0.0 < hi)
            center = num(row, "median_ipr");
    }
    const double med = outside.empty() ? std::numeric_limits<double>::quiet_NaN() : median(outside);
    r.require(levels == 401 * 20, "level count");
    r.require(med >= kIprFactor * center, "IPR contrast");
    r.detail << "median IPR beyond |E| = " << threshold << " is " << med << ", band center " << center << " (ratio "
             << med / center << ")";
    return r;
}

Result criterion13() {
    Result r;
    const std::vector<std::string> names{"sparseness", "sparseness_weighted", "am_bound",      "decay_fit",
                                         "simon_wolff_ac", "simon_wolff_pp",   "theorem2_cube", "edge_scan"};
    std::int64_t compared = 0;
    for (const auto& name : names) {
        const auto base = run_preset(name, 1);
        for (int threads : {4, 8}) {
            const auto other = run_preset(name, threads);
            for (const auto& a : base.artifacts) {
                if (a.name.size() < 4 || a.name.substr(a.name.size() - 4) != ".csv")
                    continue;
                const auto* b = other.find(a.name);
                r.require(b && csv_body(b->content) == csv_body(a.content),
                          name + "/" + a.name + " at " + std::to_string(threads) + " threads");
                ++compared;
            }
        }
    }
    // The sparse-set generators of criterion 6 under threads.
    for (int threads : {1, 4, 8}) {
        omp_set_num_threads(threads);
        const auto a = to_text(generate_sparse_set(0.25, Cube(origin(5), 127), SparseGenerator::bernoulli_thinned, 3));
        omp_set_num_threads(1);
        const auto b = to_text(generate_sparse_set(0.25, Cube(origin(5), 127), SparseGenerator::bernoulli_thinned, 3));
        r.require(a == b, "sparse set text at " + std::to_string(threads) + " threads");
        ++compared;
    }
    r.detail << compared << " CSV bodies and set texts compared across 1, 4, 8 threads";
    return r;
}

}  // namespace

// acceptance [N ...] [--known-red N ...]
// Exit 0 iff the failing criteria are exactly the --known-red ones.
int main(int argc, char** argv) {
    std::vector<std::pair<int, std::function<Result()>>> criteria{
        {1, criterion1}, {2, criterion2},   {3, criterion3},   {4, criterion4},   {5, criterion5},
        {6, criterion6}, {7, criterion7},   {8, criterion8},   {9, criterion9},   {10, criterion10},
        {11, criterion11}, {12, criterion12}, {13, criterion13}};
    std::vector<int> only, known_red;
    bool red = false;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--known-red")
            red = true;
        else
            (red ? known_red : only).push_back(std::atoi(arg.c_str()));
    }
    omp_set_num_threads(1);
    std::vector<int> failed;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end())
            continue;
        const auto start = std::chrono::steady_clock::now();
        Result res;
        try {
            res = fn();
        } catch (const std::exception& e) {
            res.pass = false;
            res.detail << "threw: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (res.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << res.detail.str();
        for (const auto& f : res.failed)
            std::cout << " [failed: " << f << "]";
        std::cout << " (" << secs << " s)" << std::endl;
        if (!res.pass)
            failed.push_back(id);
    }
    std::vector<int> expected;
    for (int id : known_red)
        if (only.empty() || std::find(only.begin(), only.end(), id) != only.end())
            expected.push_back(id);
    std::sort(expected.begin(), expected.end());
    std::cout << failed.size() << " failing";
    if (!known_red.empty()) {
        std::cout << "; known unattainable:";
        for (int id : expected)
            std::cout << " " << id;
    }
    std::cout << std::endl;
    return failed == expected ? 0 : 1;
}

#include "sparseloc/disorder.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "sparseloc/errors.hpp"
#include "sparseloc/rng.hpp"

namespace sparseloc {

std::string to_string(LawKind k) {
    switch (k) {
    case LawKind::uniform: return "uniform";
    case LawKind::gaussian: return "gaussian";
    case LawKind::truncated_cauchy: return "truncated_cauchy";
    }
    return "unknown";
}

LawKind parse_law(const std::string& name) {
    if (name == "uniform") return LawKind::uniform;
    if (name == "gaussian") return LawKind::gaussian;
    if (name == "truncated_cauchy") return LawKind::truncated_cauchy;
    throw std::invalid_argument("unknown law '" + name + "'");
}

void Law::validate() const {
    if (!std::isfinite(p1) || !std::isfinite(p2))
        throw std::invalid_argument("law parameters must be finite");
    switch (kind) {
    case LawKind::uniform:
        if (!(p1 < p2))
            throw std::invalid_argument("uniform(a, b) requires a < b");
        break;
    case LawKind::gaussian:
        if (!(p2 > 0))
            throw std::invalid_argument("gaussian sd must be > 0 (absolute continuity)");
        break;
    case LawKind::truncated_cauchy:
        if (!(p1 > 0) || !(p2 > 0))
            throw std::invalid_argument("truncated_cauchy requires scale > 0 and cut > 0");
        break;
    }
}

bool Law::absolutely_continuous() const {
    return !(kind == LawKind::gaussian && p2 == 0.0);
}

double Law::draw(double u1, double u2) const {
    switch (kind) {
    case LawKind::uniform:
        return p1 + (p2 - p1) * u1;
    case LawKind::gaussian:
        return p1 + p2 * std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
    case LawKind::truncated_cauchy: {
        const double a = std::atan(p2 / p1);
        return p1 * std::tan(a * (2.0 * u1 - 1.0));
    }
    }
    return 0.0;
}

double Law::density(double x) const {
    switch (kind) {
    case LawKind::uniform:
        return (x >= p1 && x <= p2) ? 1.0 / (p2 - p1) : 0.0;
    case LawKind::gaussian: {
        const double z = (x - p1) / p2;
        return std::exp(-0.5 * z * z) / (p2 * std::sqrt(2 * std::numbers::pi));
    }
    case LawKind::truncated_cauchy: {
        if (std::abs(x) > p2)
            return 0.0;
        const double y = x / p1;
        return 1.0 / (2.0 * p1 * std::atan(p2 / p1) * (1.0 + y * y));
    }
    }
    return 0.0;
}

double Law::interval_measure(double lo, double hi) const {
    if (!(hi > lo))
        return 0.0;
    switch (kind) {
    case LawKind::uniform: {
        const double l = std::max(lo, p1), h = std::min(hi, p2);
        return h > l ? (h - l) / (p2 - p1) : 0.0;
    }
    case LawKind::gaussian: {
        if (p2 == 0.0)
            return (lo < p1 && p1 < hi) ? 1.0 : 0.0;
        auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - p1) / (p2 * std::numbers::sqrt2)); };
        // Use the upper tail on the right half to keep precision.
        if (lo > p1) {
            auto sf = [&](double x) { return 0.5 * std::erfc((x - p1) / (p2 * std::numbers::sqrt2)); };
            return sf(lo) - sf(hi);
        }
        return cdf(hi) - cdf(lo);
    }
    case LawKind::truncated_cauchy: {
        const double l = std::max(lo, -p2), h = std::min(hi, p2);
        if (!(h > l))
            return 0.0;
        const double a = std::atan(p2 / p1);
        return (std::atan(h / p1) - std::atan(l / p1)) / (2.0 * a);
    }
    }
    return 0.0;
}

double Law::mean() const {
    switch (kind) {
    case LawKind::uniform: return 0.5 * (p1 + p2);
    case LawKind::gaussian: return p1;
    case LawKind::truncated_cauchy: return 0.0;
    }
    return 0.0;
}

double Law::second_moment() const {
    switch (kind) {
    case LawKind::uniform: return (p1 * p1 + p1 * p2 + p2 * p2) / 3.0;
    case LawKind::gaussian: return p1 * p1 + p2 * p2;
    case LawKind::truncated_cauchy: {
        const double c = p2 / p1, a = std::atan(c);
        return p1 * p1 * (c - a) / a;
    }
    }
    return 0.0;
}

double Law::variance() const { return second_moment() - mean() * mean(); }

std::pair<double, double> Law::effective_support() const {
    switch (kind) {
    case LawKind::uniform: return {p1, p2};
    case LawKind::gaussian: return {p1 - 12.0 * p2, p1 + 12.0 * p2};
    case LawKind::truncated_cauchy: return {-p2, p2};
    }
    return {0.0, 0.0};
}

double Law::scale() const {
    switch (kind) {
    case LawKind::uniform: return std::max(std::abs(p1), std::abs(p2));
    case LawKind::gaussian: return std::abs(p1) + p2;
    case LawKind::truncated_cauchy: return p2;
    }
    return 1.0;
}

double weight_value(double gamma, const Site& n) {
    if (!(gamma > 0))
        throw std::invalid_argument("weight exponent gamma must be > 0");
    return std::pow(1.0 + max_norm(n), gamma);
}

void DisorderModel::validate() const {
    law.validate();
    if (!(lambda >= 0) || !std::isfinite(lambda))
        throw std::invalid_argument("coupling lambda must be >= 0");
    if (weight && !(weight->gamma > 0))
        throw std::invalid_argument("weight gamma must be > 0");
}

double DisorderModel::coupling(const Site& n) const {
    return weight ? weight_value(weight->gamma, n) : lambda;
}

double draw_site(const DisorderModel& model, const Site& n, std::uint64_t realization) {
    const CounterRng rng(model.seed, realization);
    const auto key = site_hash(n);
    return model.law.draw(rng.uniform_open(key, 0), rng.uniform_open(key, 1));
}

Potential sample_potential(const DisorderModel& model, const SiteSet& s, std::uint64_t realization) {
    Potential v;
    for (const auto& n : s) {
        const double c = model.coupling(n);
        v.emplace_hint(v.end(), n, c == 0.0 ? 0.0 : c * draw_site(model, n, realization));
    }
    return v;
}

namespace {

double law_quantile(const Law& law, double p) {
    switch (law.kind) {
    case LawKind::uniform: return law.p1 + p * (law.p2 - law.p1);
    case LawKind::truncated_cauchy: return law.draw(p, 0.5);
    case LawKind::gaussian: {
        if (law.p2 == 0.0)
            return law.p1;
        // Bisection on the closed-form CDF.
        double lo = law.p1 - 40 * law.p2, hi = law.p1 + 40 * law.p2;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (law.interval_measure(-std::numeric_limits<double>::infinity(), mid) < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    }
    return 0.0;
}

}  // namespace

RegularityReport check_regularity(const Law& law, double b, const RegularityGrid& grid) {
    if (!(b >= 1.0))
        throw std::invalid_argument("regularity check requires b >= 1");
    if (grid.a_points < 1 || grid.delta_points < 1 || !(grid.delta_min > 0) || !(grid.delta_max < 1) ||
        grid.delta_min > grid.delta_max)
        throw std::invalid_argument("regularity grid: need a points >= 1 and 0 < delta_min <= delta_max < 1");
    RegularityReport rep;
    rep.b = b;
    rep.a_min = grid.a_min.value_or(law_quantile(law, 0.001));
    rep.a_max = grid.a_max.value_or(law_quantile(law, 0.999));
    rep.delta_min = grid.delta_min;
    rep.delta_max = grid.delta_max;
    if (!law.absolutely_continuous()) {
        rep.c_estimate = std::numeric_limits<double>::infinity();
        rep.pass = false;
        return rep;
    }
    double c = 0.0;
    for (int i = 0; i < grid.a_points; ++i) {
        const double a = grid.a_points == 1
                             ? rep.a_min
                             : rep.a_min + (rep.a_max - rep.a_min) * i / (grid.a_points - 1);
        const double wide = law.interval_measure(a - b, a + b);
        for (int j = 0; j < grid.delta_points; ++j) {
            const double d = grid.delta_points == 1
                                 ? grid.delta_min
                                 : grid.delta_min + (grid.delta_max - grid.delta_min) * j / (grid.delta_points - 1);
            const double narrow = law.interval_measure(a - d, a + d);
            ++rep.samples;
            if (narrow == 0.0)
                continue;
            const double ratio = wide > 0.0 ? narrow / (d * wide) : std::numeric_limits<double>::infinity();
            c = std::max(c, ratio);
        }
    }
    rep.c_estimate = c;
    rep.pass = std::isfinite(c);
    return rep;
}

}  // namespace sparseloc

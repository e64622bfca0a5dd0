#include "sparseloc/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "sparseloc/errors.hpp"

namespace sparseloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
    if (v.empty())
        return kNaN;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EigenReport eigensystem(const AssembledOperator& a, Eigen::Index cap, bool keep_vectors) {
    const Eigen::Index n = a.dimension();
    if (n > cap)
        throw std::invalid_argument("volume of " + std::to_string(n) + " sites exceeds the dense cap " +
                                    std::to_string(cap) + "; reduce the cube side");
    const Eigen::MatrixXd dense = Eigen::MatrixXd(a.matrix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    if (es.info() != Eigen::Success)
        throw NumericalError("symmetric eigensolver failed", kNaN);
    EigenReport rep;
    rep.side = a.cube.side();
    rep.eigenvalues = es.eigenvalues();
    rep.ipr.resize(n);
    const Eigen::MatrixXd& v = es.eigenvectors();
    const Eigen::MatrixXd res = dense * v - v * rep.eigenvalues.asDiagonal();
    for (Eigen::Index j = 0; j < n; ++j) {
        rep.max_residual = std::max(rep.max_residual, res.col(j).norm());
        const Eigen::VectorXd col = v.col(j).normalized();
        rep.ipr[j] = col.array().square().square().sum();
    }
    if (!(rep.max_residual <= 1e-8))
        throw NumericalError("eigenpair residual above 1e-8", rep.max_residual);
    if (keep_vectors)
        rep.vectors = v;
    return rep;
}

double ipr(const Eigen::Ref<const Eigen::VectorXd>& psi) {
    if (std::abs(psi.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("ipr expects a normalized vector");
    return psi.array().square().square().sum();
}

std::vector<double> spacing_ratios(std::span<const double> levels) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 2 < levels.size(); ++i) {
        const double a = levels[i + 1] - levels[i];
        const double b = levels[i + 2] - levels[i + 1];
        const double hi = std::max(a, b);
        out.push_back(hi > 0.0 ? std::min(a, b) / hi : kNaN);
    }
    return out;
}

double spacing_ratio_mean(std::span<const double> levels) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double r : spacing_ratios(levels))
        if (std::isfinite(r)) {
            sum += r;
            ++n;
        }
    return n > 0 ? sum / static_cast<double>(n) : kNaN;
}

EdgeScan mobility_edge_scan(const KernelOperator& k, const SiteSet& set, const DisorderModel& model,
                            const Cube& volume, int realizations, double s, double bin_width) {
    model.validate();
    if (realizations < 20)
        throw std::invalid_argument("mobility edge scan needs >= 20 realizations");
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("s must lie in (0, 1)");
    if (!(bin_width > 0.0))
        throw std::invalid_argument("bin width must be > 0");
    if (volume.volume() > kDenseCap)
        throw std::invalid_argument("volume exceeds the dense diagonalization cap; reduce the cube side");
    SiteSet inside;
    for (const auto& m : set)
        if (volume.contains(m))
            inside.push_back(m);

    std::vector<EigenReport> reports(static_cast<std::size_t>(realizations));
    std::vector<std::exception_ptr> errors(reports.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < realizations; ++r) {
        try {
            const auto pot = sample_potential(model, inside, static_cast<std::uint64_t>(r));
            auto rep = eigensystem(assemble_finite_volume(k, pot, volume));
            rep.realization = static_cast<std::uint64_t>(r);
            reports[static_cast<std::size_t>(r)] = std::move(rep);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    double emin = std::numeric_limits<double>::infinity(), emax = -emin;
    for (const auto& rep : reports) {
        emin = std::min(emin, rep.eigenvalues.minCoeff());
        emax = std::max(emax, rep.eigenvalues.maxCoeff());
    }
    const double lo = std::floor(emin / bin_width) * bin_width;
    const auto nbins = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((emax - lo) / bin_width)));
    auto bin_of = [&](double e) {
        const auto b = static_cast<std::int64_t>(std::floor((e - lo) / bin_width));
        return static_cast<std::size_t>(std::clamp<std::int64_t>(b, 0, nbins - 1));
    };

    std::vector<std::vector<double>> iprs(static_cast<std::size_t>(nbins));
    std::vector<double> rsum(static_cast<std::size_t>(nbins), 0.0);
    std::vector<std::int64_t> rcount(static_cast<std::size_t>(nbins), 0);
    for (const auto& rep : reports) {
        const auto n = rep.eigenvalues.size();
        for (Eigen::Index j = 0; j < n; ++j)
            iprs[bin_of(rep.eigenvalues[j])].push_back(rep.ipr[j]);
        const std::span<const double> levels(rep.eigenvalues.data(), static_cast<std::size_t>(n));
        const auto ratios = spacing_ratios(levels);
        for (std::size_t i = 0; i < ratios.size(); ++i)
            if (std::isfinite(ratios[i])) {
                const auto b = bin_of(levels[i + 1]);
                rsum[b] += ratios[i];
                ++rcount[b];
            }
    }

    EdgeScan scan;
    scan.h0_norm_1 = k.s_norm(1.0);
    scan.h0_norm_s = k.s_norm(s);
    scan.s = s;
    scan.realizations = realizations;
    scan.volume = volume.volume();
    for (std::int64_t b = 0; b < nbins; ++b) {
        const auto i = static_cast<std::size_t>(b);
        EdgeBin bin;
        bin.lo = lo + bin_width * static_cast<double>(b);
        bin.hi = lo + bin_width * static_cast<double>(b + 1);
        bin.count = static_cast<std::int64_t>(iprs[i].size());
        bin.median_ipr = median(iprs[i]);
        bin.ratio_count = rcount[i];
        bin.r_stat = rcount[i] > 0 ? rsum[i] / static_cast<double>(rcount[i]) : kNaN;
        scan.bins.push_back(bin);
    }
    return scan;
}

double median_ipr_outside(const EdgeScan& scan, double threshold) {
    std::vector<double> values;
    for (const auto& b : scan.bins)
        if (b.count > 0 && (b.lo >= threshold || b.hi <= -threshold))
            values.push_back(b.median_ipr);
    return median(values);
}

double median_ipr_center(const EdgeScan& scan) {
    for (const auto& b : scan.bins)
        if (b.lo <= 0.0 && 0.0 < b.hi)
            return b.median_ipr;
    return kNaN;
}

}  // namespace sparseloc

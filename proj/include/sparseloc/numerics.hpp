#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sparseloc {

using cplx = std::complex<double>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

/// Adaptive Gauss-Kronrod (7/15) on [a, b]. Throws NumericalError when the
/// tolerance max(abs_tol, rel_tol*|I|) is not reached within max_intervals.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double abs_tol, double rel_tol, int max_intervals = 4000);

/// Same, for integrands with algebraic singularities |x - a|^p at either
/// endpoint; the substitution x = a + (b-a) u^2 on each half removes them.
QuadratureResult integrate_endpoint_singular(const std::function<double(double)>& f, double a,
                                             double b, double abs_tol, double rel_tol);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Needs >= 2 distinct x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Unnormalized forward DFT X_k = sum_j x_j exp(-2 pi i jk/N).
std::vector<cplx> dft_forward(const std::vector<cplx>& x);
/// Normalized inverse x_j = (1/N) sum_k X_k exp(+2 pi i jk/N).
std::vector<cplx> dft_inverse(const std::vector<cplx>& x);

/// Frequency carried by DFT bin k of an N-point transform, in [-N/2, N/2).
inline int signed_frequency(std::size_t k, std::size_t n) {
    const auto ki = static_cast<long long>(k);
    const auto ni = static_cast<long long>(n);
    return static_cast<int>(ki < (ni + 1) / 2 ? ki : ki - ni);
}

/// Applies a 1-D transform along every axis of a row-major grid of `side`^nu points.
void transform_axes(std::vector<cplx>& grid, std::size_t side, int nu, bool inverse);

}  // namespace sparseloc

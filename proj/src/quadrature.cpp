#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "sparseloc/errors.hpp"
#include "sparseloc/numerics.hpp"

namespace sparseloc {

namespace {

// Kronrod 15-point abscissae; odd indices 1,3,5 and the center belong to Gauss-7.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resk = fc * kWgk[7];
    double resg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double f1 = f(c - dx);
        const double f2 = f(c + dx);
        resk += kWgk[j] * (f1 + f2);
        if (j % 2 == 1)
            resg += kWg[j / 2] * (f1 + f2);
    }
    const double value = resk * h;
    const double err = std::abs((resk - resg) * h);
    return {a, b, value, err};
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double abs_tol, double rel_tol, int max_intervals) {
    QuadratureResult out;
    if (a == b)
        return out;
    std::priority_queue<Segment> heap;
    heap.push(gk15(f, a, b));
    out.evaluations = 15;
    double total = heap.top().value;
    double err = heap.top().error;
    int intervals = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (intervals >= max_intervals)
            throw NumericalError("adaptive quadrature did not converge", err);
        Segment s = heap.top();
        heap.pop();
        const double mid = 0.5 * (s.a + s.b);
        Segment l = gk15(f, s.a, mid);
        Segment r = gk15(f, mid, s.b);
        out.evaluations += 30;
        total += l.value + r.value - s.value;
        err += l.error + r.error - s.error;
        heap.push(l);
        heap.push(r);
        ++intervals;
    }
    // Re-sum in a fixed order to avoid drift from the running updates.
    std::vector<Segment> segs;
    while (!heap.empty()) {
        segs.push_back(heap.top());
        heap.pop();
    }
    std::sort(segs.begin(), segs.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
    out.value = 0.0;
    out.error = 0.0;
    for (const auto& s : segs) {
        out.value += s.value;
        out.error += s.error;
    }
    return out;
}

QuadratureResult integrate_endpoint_singular(const std::function<double(double)>& f, double a,
                                             double b, double abs_tol, double rel_tol) {
    if (a == b)
        return {};
    const double m = 0.5 * (a + b);
    const double hl = m - a;
    const double hr = b - m;
    auto left = [&](double u) { return f(a + hl * u * u) * 2.0 * hl * u; };
    auto right = [&](double u) { return f(b - hr * u * u) * 2.0 * hr * u; };
    const auto l = integrate_adaptive(left, 0.0, 1.0, 0.5 * abs_tol, rel_tol);
    const auto r = integrate_adaptive(right, 0.0, 1.0, 0.5 * abs_tol, rel_tol);
    return {l.value + r.value, l.error + r.error, l.evaluations + r.evaluations};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need >= 2 points of matching size");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("fit_line: x values are all equal");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

std::vector<cplx> dft_forward(const std::vector<cplx>& x) {
    Eigen::FFT<double> fft;
    std::vector<cplx> out;
    fft.fwd(out, x);
    return out;
}

std::vector<cplx> dft_inverse(const std::vector<cplx>& x) {
    Eigen::FFT<double> fft;
    std::vector<cplx> out;
    fft.inv(out, x);
    return out;
}

void transform_axes(std::vector<cplx>& grid, std::size_t side, int nu, bool inverse) {
    Eigen::FFT<double> fft;
    std::vector<cplx> line(side), res;
    std::size_t stride = 1;
    for (int axis = nu - 1; axis >= 0; --axis) {
        const std::size_t block = stride * side;
        for (std::size_t base = 0; base < grid.size(); base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (std::size_t k = 0; k < side; ++k)
                    line[k] = grid[base + off + k * stride];
                if (inverse)
                    fft.inv(res, line);
                else
                    fft.fwd(res, line);
                for (std::size_t k = 0; k < side; ++k)
                    grid[base + off + k * stride] = res[k];
            }
        }
        stride = block;
    }
}

}  // namespace sparseloc

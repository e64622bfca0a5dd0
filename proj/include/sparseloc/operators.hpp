#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "sparseloc/lattice.hpp"
#include "sparseloc/numerics.hpp"

namespace sparseloc {

/// One term 2 c cos(k theta) of an axis symbol.
struct CosineTerm {
    int k = 1;
    double c = 0.0;
};

/// Separable symbol h(theta) = sum_i h_i(theta_i), each h_i a finite cosine series.
struct SymbolSpec {
    std::vector<std::vector<CosineTerm>> axes;

    int nu() const { return static_cast<int>(axes.size()); }
};

/// h(theta) = sum_i 2 cos(k theta_i); k = 1 is the lattice Laplacian.
SymbolSpec cosine_symbol(int nu, int k = 1);
void validate(const SymbolSpec& spec);

/// Derivative of order `order` of axis symbol h_i at theta.
double axis_symbol(const std::vector<CosineTerm>& axis, double theta, int order = 0);
/// sup_i sup_theta |h_i'(theta)|, maximized on a fine grid and polished by Newton steps.
double symbol_derivative_sup(const SymbolSpec& spec);

using Offset = Site;
using Potential = std::map<Site, double>;

/// Translation-invariant hopping kernel H0(n, m) = c(n - m).
class KernelOperator {
public:
    KernelOperator(int nu, std::map<Offset, double> hopping, double s0 = 0.0);

    int nu() const { return nu_; }
    const std::map<Offset, double>& hopping() const { return hopping_; }
    double s0() const { return s0_; }
    double amplitude(const Offset& d) const;

    /// (sum_d |c(d)|^s)^(1/s), memoized per s.
    double s_norm(double s) const;

private:
    int nu_;
    std::map<Offset, double> hopping_;
    double s0_;
    struct Cache {
        std::mutex mutex;
        std::map<double, double> values;
    };
    std::shared_ptr<Cache> cache_;
};

KernelOperator kernel_from_symbol(const SymbolSpec& spec);
double s_norm(const KernelOperator& k, double s);

enum class Boundary { dirichlet };

template <typename Scalar>
struct BasicAssembledOperator {
    Cube cube;
    Eigen::SparseMatrix<Scalar> matrix;
    Boundary boundary = Boundary::dirichlet;

    Eigen::Index dimension() const { return matrix.rows(); }
};

using AssembledOperator = BasicAssembledOperator<double>;

/// (Au)(n) = sum_d c(d) u(n+d) [n+d in cube] + V(n) u(n).
AssembledOperator assemble_finite_volume(const KernelOperator& k, const Potential& potential,
                                         const Cube& cube);

/// P_{S^c} H0 P_{S^c} on the cube: the free assembly with rows and columns of S zeroed.
AssembledOperator restrict_complement(const KernelOperator& k, const SiteSet& s, const Cube& cube);

/// Coordinate list "row col value", one nonzero per line, rows ascending.
std::string to_coordinate_text(const AssembledOperator& a);

/// |E|^(-s) (1 - ||K||_s^s / |E|^s)^(-1), a bound on sum_m |(H0 - z)^{-1}(n,m)|^s
/// for Re z = E; requires |E| > ||K||_s.
double neumann_fractional_bound(const KernelOperator& k, double energy, double s);

/// Smooth periodic symbol on [0, 2pi]^nu for the quadrature path.
using GeneralSymbol = std::function<double(std::span<const double>)>;

struct CoefficientRow {
    Offset offset;
    int distance = 0;
    double abs_coefficient = 0.0;
    double bound = 0.0;  // C_h nu^(2nu+1) / |d|^(2nu+1); NaN at d = 0
    bool pass = true;
};

struct KernelDecayReport {
    std::vector<CoefficientRow> rows;
    double c_h = 0.0;
    bool c_h_estimated = false;
    int grid_points_per_axis = 0;
    double achieved_tolerance = 0.0;
};

/// Fourier coefficients of a general symbol against the crude
/// C_h nu^(2nu+1)/|d|^(2nu+1) envelope. A C_h <= 0 requests estimation from
/// sampled (2nu+2)-nd derivatives.
KernelDecayReport kernel_decay_check(const GeneralSymbol& h, int nu, const std::vector<Offset>& offsets,
                                     double c_h = 0.0);

}  // namespace sparseloc

#pragma once

// Gaussian priors on a uniform 1-D grid: Matérn covariances, their
// Karhunen-Loève decomposition under trapezoidal quadrature, prior draws and
// projections onto eigenmodes.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace hpcn {

using Rng = std::mt19937_64;

/// Uniform grid on [0, L] with trapezoidal quadrature weights.
class Grid {
public:
    /// Throws ParameterError unless n >= 2 and length > 0.
    static std::shared_ptr<const Grid> uniform(std::size_t n, double length = 1.0);

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.size()); }
    double length() const noexcept { return length_; }
    double spacing() const noexcept { return spacing_; }
    const Eigen::VectorXd& points() const noexcept { return points_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    /// Weighted inner product sum_k w_k f_k g_k.
    double inner(const Eigen::Ref<const Eigen::VectorXd>& f,
                 const Eigen::Ref<const Eigen::VectorXd>& g) const;
    double norm(const Eigen::Ref<const Eigen::VectorXd>& f) const;

    /// Index of the grid point closest to x (clamped to the domain).
    std::size_t nearest_index(double x) const;

    /// Piecewise-linear interpolation of grid values at an arbitrary x in [0, L].
    double interpolate(const Eigen::Ref<const Eigen::VectorXd>& values, double x) const;

private:
    Grid(std::size_t n, double length);

    double length_;
    double spacing_;
    Eigen::VectorXd points_;
    Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// A function sample represented by its grid values.
class Field {
public:
    explicit Field(GridPtr grid);  // zero field
    Field(GridPtr grid, Eigen::VectorXd values);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    Eigen::VectorXd& values() noexcept { return values_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

    /// Quadrature norm ||u||_X.
    double norm() const { return grid_->norm(values_); }
    bool finite() const { return values_.allFinite(); }

private:
    GridPtr grid_;
    Eigen::VectorXd values_;
};

struct MaternParams {
    double sigma = 1.0;
    double ell = 1.0;
    double nu = 2.5;

    void validate() const;
};

/// Matérn kernel at distance d. nu = 1/2, 3/2 and 5/2 use closed forms;
/// any other positive nu goes through the modified Bessel function.
double matern_kernel(double d, const MaternParams& params);

/// Bessel-function form of the kernel, valid for every nu > 0.
double matern_kernel_bessel(double d, const MaternParams& params);

Eigen::MatrixXd build_matern_covariance(const Grid& grid, const MaternParams& params);

/// Eigenpairs of a covariance operator, orthonormal in the quadrature inner product.
class KLBasis {
public:
    KLBasis(GridPtr grid, Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenfunctions);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues_.size()); }

    /// Descending, non-negative.
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    /// Column j holds e_j on the grid.
    const Eigen::MatrixXd& eigenfunctions() const noexcept { return eigenfunctions_; }

    double total_variance() const noexcept { return eigenvalues_.sum(); }

    /// Coefficients <u, e_j>_W for j < count.
    Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& u, std::size_t count) const;
    Eigen::VectorXd project(const Field& u, std::size_t count) const {
        return project(u.values(), count);
    }

    /// sum_j coeffs_j e_{offset + j}
    Eigen::VectorXd reconstruct(const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                                std::size_t offset = 0) const;

    /// Writes one row per mode: index, eigenvalue, grid values.
    void write_csv(std::ostream& os) const;

private:
    GridPtr grid_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenfunctions_;
};

/// Decomposes W^{1/2} C W^{1/2} and maps eigenvectors back with W^{-1/2}.
/// Throws ContractViolation if cov is not square of the grid size or is
/// asymmetric beyond 1e-10.
KLBasis kl_decompose(const Eigen::MatrixXd& cov, GridPtr grid);

/// Convenience: covariance + decomposition.
KLBasis matern_basis(GridPtr grid, const MaternParams& params);

/// Exact discrete draw u = sum_j sqrt(alpha_j) xi_j e_j over all modes.
Field sample_prior(const KLBasis& basis, Rng& rng);

/// Same as sample_prior restricted to modes [first, size).
Eigen::VectorXd sample_prior_tail(const KLBasis& basis, std::size_t first, Rng& rng);

/// Coefficients of u on the first J modes; ParameterError unless 1 <= J <= n.
Eigen::VectorXd project(const Field& u, const KLBasis& basis, std::size_t J);

/// Smallest J whose leading eigenvalues carry more than a fraction rho of the
/// total. ParameterError unless 0 < rho < 1; DegeneratePriorError if all zero.
std::size_t select_J(std::span<const double> eigenvalues, double rho);
std::size_t select_J(const Eigen::VectorXd& eigenvalues, double rho);

}  // namespace hpcn

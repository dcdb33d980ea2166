#include "hpcn/prior.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <vector>

#include "hpcn/error.hpp"

namespace hpcn {

Grid::Grid(std::size_t n, double length)
    : length_(length),
      spacing_(length / static_cast<double>(n - 1)),
      points_(static_cast<Eigen::Index>(n)),
      weights_(static_cast<Eigen::Index>(n)) {
    for (std::size_t k = 0; k < n; ++k) {
        points_[static_cast<Eigen::Index>(k)] = spacing_ * static_cast<double>(k);
    }
    points_[points_.size() - 1] = length;
    weights_.setConstant(spacing_);
    weights_[0] = 0.5 * spacing_;
    weights_[weights_.size() - 1] = 0.5 * spacing_;
}

std::shared_ptr<const Grid> Grid::uniform(std::size_t n, double length) {
    if (n < 2) throw ParameterError("grid needs at least 2 points");
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw ParameterError("grid length must be positive and finite");
    }
    return std::shared_ptr<const Grid>(new Grid(n, length));
}

double Grid::inner(const Eigen::Ref<const Eigen::VectorXd>& f,
                   const Eigen::Ref<const Eigen::VectorXd>& g) const {
    return (weights_.array() * f.array() * g.array()).sum();
}

double Grid::norm(const Eigen::Ref<const Eigen::VectorXd>& f) const {
    return std::sqrt(inner(f, f));
}

std::size_t Grid::nearest_index(double x) const {
    const double s = std::clamp(x / spacing_, 0.0, static_cast<double>(size() - 1));
    return static_cast<std::size_t>(std::lround(s));
}

double Grid::interpolate(const Eigen::Ref<const Eigen::VectorXd>& values, double x) const {
    const auto last = static_cast<Eigen::Index>(size()) - 1;
    if (x <= 0.0) return values[0];
    if (x >= length_) return values[last];
    const double s = x / spacing_;
    auto k = static_cast<Eigen::Index>(std::floor(s));
    if (k >= last) k = last - 1;
    const double frac = s - static_cast<double>(k);
    return (1.0 - frac) * values[k] + frac * values[k + 1];
}

Field::Field(GridPtr grid) : grid_(std::move(grid)) {
    values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_->size()));
}

Field::Field(GridPtr grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
        throw ContractViolation("field length does not match grid size");
    }
}

void MaternParams::validate() const {
    if (!(sigma > 0.0)) throw ParameterError("Matérn sigma must be positive");
    if (!(ell > 0.0)) throw ParameterError("Matérn ell must be positive");
    if (!(nu > 0.0)) throw ParameterError("Matérn nu must be positive");
}

double matern_kernel_bessel(double d, const MaternParams& p) {
    p.validate();
    const double var = p.sigma * p.sigma;
    if (d == 0.0) return var;
    const double r = std::sqrt(2.0 * p.nu) * std::abs(d) / p.ell;
    // K_nu underflows long before the power term overflows
    if (r > 700.0) return 0.0;
    return var * std::pow(2.0, 1.0 - p.nu) / std::tgamma(p.nu) * std::pow(r, p.nu) *
           std::cyl_bessel_k(p.nu, r);
}

double matern_kernel(double d, const MaternParams& p) {
    p.validate();
    const double var = p.sigma * p.sigma;
    const double ad = std::abs(d);
    if (p.nu == 2.5) {
        const double r = std::sqrt(5.0) * ad / p.ell;
        return var * (1.0 + r + r * r / 3.0) * std::exp(-r);
    }
    if (p.nu == 1.5) {
        const double r = std::sqrt(3.0) * ad / p.ell;
        return var * (1.0 + r) * std::exp(-r);
    }
    if (p.nu == 0.5) return var * std::exp(-ad / p.ell);
    return matern_kernel_bessel(d, p);
}

Eigen::MatrixXd build_matern_covariance(const Grid& grid, const MaternParams& params) {
    params.validate();
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd cov(n, n);
    const auto& x = grid.points();
    for (Eigen::Index j = 0; j < n; ++j) {
        cov(j, j) = params.sigma * params.sigma;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double k = matern_kernel(x[i] - x[j], params);
            cov(i, j) = k;
            cov(j, i) = k;
        }
    }
    return cov;
}

KLBasis::KLBasis(GridPtr grid, Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenfunctions)
    : grid_(std::move(grid)),
      eigenvalues_(std::move(eigenvalues)),
      eigenfunctions_(std::move(eigenfunctions)) {
    const auto n = static_cast<Eigen::Index>(grid_->size());
    if (eigenvalues_.size() != n || eigenfunctions_.rows() != n || eigenfunctions_.cols() != n) {
        throw ContractViolation("KL basis dimensions do not match grid");
    }
}

Eigen::VectorXd KLBasis::project(const Eigen::Ref<const Eigen::VectorXd>& u,
                                 std::size_t count) const {
    if (count < 1 || count > size()) {
        throw ParameterError("projection count out of range [1, n]");
    }
    const Eigen::VectorXd wu = grid_->weights().cwiseProduct(u);
    return eigenfunctions_.leftCols(static_cast<Eigen::Index>(count)).transpose() * wu;
}

Eigen::VectorXd KLBasis::reconstruct(const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                                     std::size_t offset) const {
    const auto m = coeffs.size();
    if (offset + static_cast<std::size_t>(m) > size()) {
        throw ParameterError("reconstruction range exceeds basis size");
    }
    return eigenfunctions_.middleCols(static_cast<Eigen::Index>(offset), m) * coeffs;
}

void KLBasis::write_csv(std::ostream& os) const {
    const auto n = static_cast<Eigen::Index>(size());
    os << "index,eigenvalue";
    for (Eigen::Index k = 0; k < n; ++k) os << ",u" << k;
    os << '\n' << std::setprecision(17);
    for (Eigen::Index j = 0; j < n; ++j) {
        os << j + 1 << ',' << eigenvalues_[j];
        for (Eigen::Index k = 0; k < n; ++k) os << ',' << eigenfunctions_(k, j);
        os << '\n';
    }
}

KLBasis kl_decompose(const Eigen::MatrixXd& cov, GridPtr grid) {
    const auto n = static_cast<Eigen::Index>(grid->size());
    if (cov.rows() != n || cov.cols() != n) {
        throw ContractViolation("covariance size does not match grid");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ContractViolation("covariance is not symmetric");
    }
    const Eigen::VectorXd sqrt_w = grid->weights().cwiseSqrt();
    const Eigen::MatrixXd weighted = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted);
    if (solver.info() != Eigen::Success) {
        throw ContractViolation("symmetric eigensolver failed");
    }
    // Eigen returns ascending order
    Eigen::VectorXd values = solver.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
    Eigen::MatrixXd functions = sqrt_w.cwiseInverse().asDiagonal() * vectors;
    // fix the sign so that each mode starts non-negative; keeps output stable
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index arg = 0;
        functions.col(j).cwiseAbs().maxCoeff(&arg);
        if (functions(arg, j) < 0.0) functions.col(j) *= -1.0;
    }
    return KLBasis(std::move(grid), std::move(values), std::move(functions));
}

KLBasis matern_basis(GridPtr grid, const MaternParams& params) {
    auto cov = build_matern_covariance(*grid, params);
    return kl_decompose(cov, std::move(grid));
}

Eigen::VectorXd sample_prior_tail(const KLBasis& basis, std::size_t first, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    const auto start = static_cast<Eigen::Index>(first);
    if (start >= n) return Eigen::VectorXd::Zero(n);
    std::normal_distribution<double> normal;
    Eigen::VectorXd xi(n - start);
    for (Eigen::Index j = 0; j < xi.size(); ++j) {
        xi[j] = std::sqrt(basis.eigenvalues()[start + j]) * normal(rng);
    }
    return basis.eigenfunctions().rightCols(n - start) * xi;
}

Field sample_prior(const KLBasis& basis, Rng& rng) {
    return Field(basis.grid_ptr(), sample_prior_tail(basis, 0, rng));
}

Eigen::VectorXd project(const Field& u, const KLBasis& basis, std::size_t J) {
    if (u.size() != basis.size()) throw ContractViolation("field and basis sizes differ");
    return basis.project(u.values(), J);
}

std::size_t select_J(std::span<const double> eigenvalues, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("rho must lie in (0, 1)");
    const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
    if (!(total > 0.0)) throw DegeneratePriorError("all prior eigenvalues are zero");
    double partial = 0.0;
    for (std::size_t j = 0; j < eigenvalues.size(); ++j) {
        partial += eigenvalues[j];
        if (partial / total > rho) return j + 1;
    }
    return eigenvalues.size();
}

std::size_t select_J(const Eigen::VectorXd& eigenvalues, double rho) {
    return select_J(std::span<const double>(eigenvalues.data(),
                                            static_cast<std::size_t>(eigenvalues.size())),
                    rho);
}

}  // namespace hpcn

#pragma once

// Benchmark potentials: a quadratic Gaussian potential on KL coefficients,
// the decay-coefficient ODE and the Robin-coefficient heat equation, plus the
// Gaussian data misfit and synthetic data generation.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "hpcn/prior.hpp"
#include "hpcn/samplers.hpp"

namespace hpcn {

struct ObservationSet {
    std::vector<double> times;
    std::vector<double> values;
    double noise_sd = 0.1;

    /// Throws ParameterError / ContractViolation.
    void validate() const;
    std::size_t size() const noexcept { return times.size(); }

    void write_csv(std::ostream& os) const;
    /// Reads the two-column (time, value) form; noise_sd must be supplied.
    static ObservationSet read_csv(std::istream& is, double noise_sd);
};

/// Observation instants k * T / count for k = 0..count.
std::vector<double> uniform_times(double T, std::size_t count);

// ---------------------------------------------------------------------------
// Quadratic Gaussian potential Phi(u) = 1/2 x^T Gamma x.

/// Which coordinates the potential is written in.
///  - quadrature: x_i = <u, e_i>_W, the coefficients of the KL basis itself.
///  - grid: x_i = <u, e_i>_W / sqrt(h), i.e. coordinates with respect to
///    eigenvectors of unit Euclidean norm on the grid. This is the scaling a
///    plain matrix eigendecomposition of the covariance produces.
enum class CoefficientScaling { quadrature, grid };

struct GaussianPotentialSpec {
    std::size_t K = 14;
    double Delta = 1.0;
    CoefficientScaling scaling = CoefficientScaling::quadrature;
    Eigen::MatrixXd Gamma;

    static GaussianPotentialSpec make(std::size_t K, double Delta,
                                      CoefficientScaling scaling = CoefficientScaling::quadrature);
    /// Factor s with x = s * <u, e>_W.
    double coefficient_scale(const KLBasis& basis) const;
};

/// Gamma[i, j] = exp(-(i - j)^2 / Delta).
Eigen::MatrixXd build_gamma(std::size_t K, double Delta);

double phi_gaussian(const Field& u, const GaussianPotentialSpec& spec, const KLBasis& basis);

Potential gaussian_potential(GaussianPotentialSpec spec, std::shared_ptr<const KLBasis> basis);

/// Closed-form posterior covariance (D^{-1} + Gamma)^{-1} of the potential's
/// own coordinates x, where D holds the prior variances of x
/// (s^2 alpha_1 .. s^2 alpha_K). The posterior mean is zero and modes beyond
/// K keep their prior law.
Eigen::MatrixXd gaussian_posterior_covariance(const GaussianPotentialSpec& spec,
                                              const KLBasis& basis);

// ---------------------------------------------------------------------------
// Forward models.

class ForwardModel {
public:
    virtual ~ForwardModel() = default;
    virtual const std::vector<double>& times() const = 0;
    /// Predicted observations; non-finite entries flag a failed solve.
    virtual Eigen::VectorXd predict(const Field& u) const = 0;
};

/// dx/dt = -u(t) x(t), x(0) = x0, solved as x0 exp(-cumulative trapezoid of u).
Eigen::VectorXd solve_ode(const Field& u, double x0, const std::vector<double>& obs_times);

class OdeModel final : public ForwardModel {
public:
    OdeModel(double x0, std::vector<double> times);
    const std::vector<double>& times() const override { return times_; }
    Eigen::VectorXd predict(const Field& u) const override;

private:
    double x0_;
    std::vector<double> times_;
};

/// u_t = u_xx on [0, L] x [0, T], u(x, 0) = g(x),
/// -u_x(0, t) + rho(t) u(0, t) = h0(t), u_x(L, t) + rho(t) u(L, t) = h1(t).
struct HeatModelSpec {
    double L = 1.0;
    double T = 1.0;
    std::size_t nx = 100;  // spatial intervals
    std::size_t nt = 200;  // time steps
    std::size_t obs_count = 200;  // sensor readings at k T / obs_count, k = 0..obs_count
    std::function<double(double)> g = [](double x) { return x * x + 1.0; };
    std::function<double(double)> h0 = [](double t) { return t * (2.0 * t + 1.0); };
    std::function<double(double)> h1 = [](double t) { return 2.0 + t * (2.0 * t + 2.0); };

    void validate() const;
    std::vector<double> observation_times() const;
};

/// Crank-Nicolson in time, central differences in space, Robin conditions
/// through ghost points. Returns u(0, t_k) at the observation times; all
/// entries are NaN if a tridiagonal pivot vanishes or the solution is
/// non-finite. rho is sampled on its own grid over [0, T] and interpolated
/// linearly onto solver time levels.
Eigen::VectorXd solve_heat_robin(const Field& rho, const HeatModelSpec& spec);

/// Same solver with rho given as a callable of time (used by manufactured
/// solution tests).
Eigen::VectorXd solve_heat_robin(const std::function<double(double)>& rho,
                                 const HeatModelSpec& spec);

class HeatRobinModel final : public ForwardModel {
public:
    explicit HeatRobinModel(HeatModelSpec spec);
    const std::vector<double>& times() const override { return times_; }
    Eigen::VectorXd predict(const Field& rho) const override;
    const HeatModelSpec& spec() const noexcept { return spec_; }

private:
    HeatModelSpec spec_;
    std::vector<double> times_;
};

/// 1/2 sum (predicted - y)^2 / noise_sd^2, or the unhalved sum when
/// halved = false. Non-finite predictions give a non-finite result.
double phi_misfit(const Eigen::VectorXd& predicted, const ObservationSet& data,
                  bool halved = true);

Potential misfit_potential(std::shared_ptr<const ForwardModel> model, ObservationSet data,
                           bool halved = true);

/// Forward solve on the truth plus i.i.d. N(0, noise_sd^2) noise.
ObservationSet simulate_data(const Field& truth, const ForwardModel& model, double noise_sd,
                             Rng& rng);

}  // namespace hpcn

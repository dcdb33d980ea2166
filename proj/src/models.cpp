#include "hpcn/models.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "hpcn/error.hpp"

namespace hpcn {

void ObservationSet::validate() const {
    if (times.size() != values.size()) throw ContractViolation("times and values differ in length");
    if (!(noise_sd > 0.0)) throw ParameterError("noise_sd must be positive");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) throw ContractViolation("observation times must increase");
    }
}

void ObservationSet::write_csv(std::ostream& os) const {
    os << "time,value\n" << std::setprecision(17);
    for (std::size_t k = 0; k < times.size(); ++k) os << times[k] << ',' << values[k] << '\n';
}

ObservationSet ObservationSet::read_csv(std::istream& is, double noise_sd) {
    ObservationSet out;
    out.noise_sd = noise_sd;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;
        std::istringstream row(line);
        double t = 0.0;
        double y = 0.0;
        char comma = 0;
        if (!(row >> t >> comma >> y) || comma != ',') {
            throw ConfigParseError(lineno, "expected 'time,value'");
        }
        out.times.push_back(t);
        out.values.push_back(y);
    }
    out.validate();
    return out;
}

std::vector<double> uniform_times(double T, std::size_t count) {
    std::vector<double> out(count + 1);
    for (std::size_t k = 0; k <= count; ++k) {
        out[k] = T * static_cast<double>(k) / static_cast<double>(count);
    }
    return out;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd build_gamma(std::size_t K, double Delta) {
    if (K < 1) throw ParameterError("K must be at least 1");
    if (!(Delta > 0.0)) throw ParameterError("Delta must be positive");
    const auto n = static_cast<Eigen::Index>(K);
    Eigen::MatrixXd gamma(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = static_cast<double>(i - j);
            gamma(i, j) = std::exp(-d * d / Delta);
        }
    }
    return gamma;
}

GaussianPotentialSpec GaussianPotentialSpec::make(std::size_t K, double Delta,
                                                  CoefficientScaling scaling) {
    GaussianPotentialSpec spec;
    spec.K = K;
    spec.Delta = Delta;
    spec.scaling = scaling;
    spec.Gamma = build_gamma(K, Delta);
    return spec;
}

double GaussianPotentialSpec::coefficient_scale(const KLBasis& basis) const {
    return scaling == CoefficientScaling::grid ? 1.0 / std::sqrt(basis.grid().spacing()) : 1.0;
}

double phi_gaussian(const Field& u, const GaussianPotentialSpec& spec, const KLBasis& basis) {
    if (spec.K > basis.size()) throw ParameterError("K exceeds the number of modes");
    const Eigen::VectorXd x = spec.coefficient_scale(basis) * basis.project(u.values(), spec.K);
    return 0.5 * x.dot(spec.Gamma * x);
}

Potential gaussian_potential(GaussianPotentialSpec spec, std::shared_ptr<const KLBasis> basis) {
    if (spec.K > basis->size()) throw ParameterError("K exceeds the number of modes");
    return [spec = std::move(spec), basis = std::move(basis)](const Field& u) {
        return phi_gaussian(u, spec, *basis);
    };
}

Eigen::MatrixXd gaussian_posterior_covariance(const GaussianPotentialSpec& spec,
                                              const KLBasis& basis) {
    const auto K = static_cast<Eigen::Index>(spec.K);
    const double s = spec.coefficient_scale(basis);
    const Eigen::VectorXd alpha = basis.eigenvalues().head(K);
    if ((alpha.array() <= 0.0).any()) {
        throw DegeneratePriorError("zero prior eigenvalue within the first K modes");
    }
    Eigen::MatrixXd precision = spec.Gamma;
    precision.diagonal().array() += (s * s * alpha.array()).inverse();
    return precision.ldlt().solve(Eigen::MatrixXd::Identity(K, K));
}

// ---------------------------------------------------------------------------

Eigen::VectorXd solve_ode(const Field& u, double x0, const std::vector<double>& obs_times) {
    const Grid& grid = u.grid();
    const auto n = static_cast<Eigen::Index>(grid.size());
    const double h = grid.spacing();
    Eigen::VectorXd state(n);
    double integral = 0.0;
    state[0] = x0;
    for (Eigen::Index k = 1; k < n; ++k) {
        integral += 0.5 * h * (u.values()[k - 1] + u.values()[k]);
        state[k] = x0 * std::exp(-integral);
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(obs_times.size()));
    for (std::size_t k = 0; k < obs_times.size(); ++k) {
        const double t = obs_times[k];
        if (t < 0.0 || t > grid.length() * (1.0 + 1e-12)) {
            throw ParameterError("observation time outside the field domain");
        }
        out[static_cast<Eigen::Index>(k)] = grid.interpolate(state, t);
    }
    return out;
}

OdeModel::OdeModel(double x0, std::vector<double> times) : x0_(x0), times_(std::move(times)) {}

Eigen::VectorXd OdeModel::predict(const Field& u) const { return solve_ode(u, x0_, times_); }

// ---------------------------------------------------------------------------

void HeatModelSpec::validate() const {
    if (!(L > 0.0) || !(T > 0.0)) throw ParameterError("L and T must be positive");
    if (nx < 2 || nt < 2) throw ParameterError("nx and nt must be at least 2");
    if (obs_count == 0 || nt % obs_count != 0) {
        throw ParameterError("observation times must fall on solver time steps (nt % obs_count)");
    }
    if (!g || !h0 || !h1) throw ParameterError("g, h0 and h1 must be set");
}

std::vector<double> HeatModelSpec::observation_times() const { return uniform_times(T, obs_count); }

namespace {

/// Thomas algorithm; returns false on a zero pivot.
bool solve_tridiagonal(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                       const Eigen::VectorXd& upper, Eigen::VectorXd& rhs,
                       Eigen::VectorXd& scratch) {
    const auto n = diag.size();
    double pivot = diag[0];
    if (pivot == 0.0) return false;
    rhs[0] /= pivot;
    for (Eigen::Index i = 1; i < n; ++i) {
        scratch[i] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i] * scratch[i];
        if (pivot == 0.0 || !std::isfinite(pivot)) return false;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) rhs[i] -= scratch[i + 1] * rhs[i + 1];
    return true;
}

}  // namespace

Eigen::VectorXd solve_heat_robin(const std::function<double(double)>& rho,
                                 const HeatModelSpec& spec) {
    spec.validate();
    const auto nodes = static_cast<Eigen::Index>(spec.nx + 1);
    const double dx = spec.L / static_cast<double>(spec.nx);
    const double dt = spec.T / static_cast<double>(spec.nt);
    const double r = 0.5 * dt / (dx * dx);  // dt/2 * 1/dx^2
    const std::size_t obs_stride = spec.nt / spec.obs_count;

    Eigen::VectorXd u(nodes);
    for (Eigen::Index j = 0; j < nodes; ++j) u[j] = spec.g(dx * static_cast<double>(j));

    Eigen::VectorXd out(static_cast<Eigen::Index>(spec.obs_count + 1));
    out[0] = u[0];

    Eigen::VectorXd lower(nodes), diag(nodes), upper(nodes), rhs(nodes), scratch(nodes);
    lower.setConstant(-r);
    upper.setConstant(-r);
    // ghost-point rows carry a doubled neighbour coefficient
    upper[0] = -2.0 * r;
    lower[nodes - 1] = -2.0 * r;

    double rho_old = rho(0.0);
    double h0_old = spec.h0(0.0);
    double h1_old = spec.h1(0.0);
    for (std::size_t step = 1; step <= spec.nt; ++step) {
        const double t_new = dt * static_cast<double>(step);
        const double rho_new = rho(t_new);
        const double h0_new = spec.h0(t_new);
        const double h1_new = spec.h1(t_new);

        // explicit half: (I + dt/2 A(t_old)) u + dt/2 (b_old + b_new)
        const double bnd_old = 2.0 + 2.0 * dx * rho_old;
        rhs[0] = u[0] + r * (2.0 * u[1] - bnd_old * u[0]) + dt * (h0_old + h0_new) / dx;
        for (Eigen::Index j = 1; j < nodes - 1; ++j) {
            rhs[j] = u[j] + r * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
        }
        rhs[nodes - 1] = u[nodes - 1] + r * (2.0 * u[nodes - 2] - bnd_old * u[nodes - 1]) +
                         dt * (h1_old + h1_new) / dx;

        // implicit half: I - dt/2 A(t_new)
        const double bnd_new = 2.0 + 2.0 * dx * rho_new;
        diag.setConstant(1.0 + 2.0 * r);
        diag[0] = 1.0 + r * bnd_new;
        diag[nodes - 1] = 1.0 + r * bnd_new;

        if (!solve_tridiagonal(lower, diag, upper, rhs, scratch)) {
            return Eigen::VectorXd::Constant(out.size(), std::numeric_limits<double>::quiet_NaN());
        }
        u.swap(rhs);
        if (step % obs_stride == 0) out[static_cast<Eigen::Index>(step / obs_stride)] = u[0];

        rho_old = rho_new;
        h0_old = h0_new;
        h1_old = h1_new;
    }
    if (!out.allFinite()) out.setConstant(std::numeric_limits<double>::quiet_NaN());
    return out;
}

Eigen::VectorXd solve_heat_robin(const Field& rho, const HeatModelSpec& spec) {
    const Grid& grid = rho.grid();
    const double scale = grid.length() / spec.T;
    const Eigen::VectorXd& values = rho.values();
    return solve_heat_robin([&](double t) { return grid.interpolate(values, t * scale); }, spec);
}

HeatRobinModel::HeatRobinModel(HeatModelSpec spec)
    : spec_(std::move(spec)), times_(spec_.observation_times()) {
    spec_.validate();
}

Eigen::VectorXd HeatRobinModel::predict(const Field& rho) const {
    return solve_heat_robin(rho, spec_);
}

// ---------------------------------------------------------------------------

double phi_misfit(const Eigen::VectorXd& predicted, const ObservationSet& data, bool halved) {
    if (static_cast<std::size_t>(predicted.size()) != data.size()) {
        throw ContractViolation("prediction and data lengths differ");
    }
    if (!(data.noise_sd > 0.0)) throw ParameterError("noise_sd must be positive");
    const Eigen::Map<const Eigen::VectorXd> y(data.values.data(), predicted.size());
    const double sum = (predicted - y).squaredNorm() / (data.noise_sd * data.noise_sd);
    return halved ? 0.5 * sum : sum;
}

Potential misfit_potential(std::shared_ptr<const ForwardModel> model, ObservationSet data,
                           bool halved) {
    data.validate();
    if (model->times().size() != data.size()) {
        throw ContractViolation("model observation times and data differ in length");
    }
    return [model = std::move(model), data = std::move(data), halved](const Field& u) {
        return phi_misfit(model->predict(u), data, halved);
    };
}

ObservationSet simulate_data(const Field& truth, const ForwardModel& model, double noise_sd,
                             Rng& rng) {
    if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be non-negative");
    const Eigen::VectorXd clean = model.predict(truth);
    ObservationSet out;
    out.times = model.times();
    out.noise_sd = noise_sd;
    out.values.resize(out.times.size());
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        out.values[k] = clean[static_cast<Eigen::Index>(k)] + noise_sd * normal(rng);
    }
    return out;
}

}  // namespace hpcn

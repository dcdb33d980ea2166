#include "hpcn/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "hpcn/error.hpp"

namespace hpcn {

namespace {

constexpr double kMinBeta = 1e-4;
constexpr double kMaxBeta = 1.0;

void check_beta(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("beta must lie in [0, 1]");
}

double keep_factor(double beta) { return std::sqrt(std::max(0.0, 1.0 - beta * beta)); }

void warn_nonfinite(Chain& chain, std::size_t iteration) {
    if (chain.nonfinite_rejections++ == 0) {
        std::clog << "warning: non-finite potential at iteration " << iteration
                  << "; proposal rejected (further occurrences counted silently)\n";
    }
}

bool accept(const std::optional<double>& log_ratio, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    // always consume the uniform so the random stream does not depend on the
    // outcome of the potential evaluation
    const double theta = uniform(rng);
    if (!log_ratio) return false;
    return std::log(theta) <= *log_ratio;
}

struct PcnStepper {
    const KLBasis& basis;
    const Potential& potential;
    double beta;

    /// Returns true on acceptance.
    bool step(Field& u, double& phi_u, Chain& chain, std::size_t iteration, Rng& rng) const {
        Field v = pcn_propose(u, beta, basis, rng);
        const double phi_v = potential(v);
        const auto log_ratio = pcn_log_acceptance(phi_u, phi_v);
        if (!log_ratio) warn_nonfinite(chain, iteration);
        if (!accept(log_ratio, rng)) return false;
        u = std::move(v);
        phi_u = phi_v;
        return true;
    }
};

struct HybridStepper {
    const KLBasis& basis;
    const Potential& potential;
    const HybridProposal& proposal;

    bool step(Field& u, Eigen::VectorXd& x_u, double& phi_u, Chain& chain,
              std::size_t iteration, Rng& rng) const {
        Field v = proposal.propose(u, x_u, rng);
        Eigen::VectorXd x_v = basis.project(v.values(), proposal.J());
        const double phi_v = potential(v);
        const auto log_ratio = hybrid_log_acceptance(x_u, x_v, phi_u, phi_v, basis.eigenvalues());
        if (!log_ratio) warn_nonfinite(chain, iteration);
        if (!accept(log_ratio, rng)) return false;
        u = std::move(v);
        x_u = std::move(x_v);
        phi_u = phi_v;
        return true;
    }
};

double initial_potential(const Potential& potential, const Field& initial) {
    const double phi = potential(initial);
    if (!std::isfinite(phi)) throw StartupError("initial state has a non-finite potential");
    return phi;
}

void check_initial(const Field& initial, const KLBasis& basis) {
    if (initial.size() != basis.size()) {
        throw ContractViolation("initial field and basis sizes differ");
    }
}

/// Runs n pCN steps, storing states and optionally feeding the adaptation.
void pcn_phase(const PcnStepper& stepper, std::size_t steps, std::size_t store_stride,
               Field& u, double& phi_u, Chain& chain, AcceptanceCounts& counts,
               std::size_t& iteration, AdaptState* adapt, Rng& rng) {
    for (std::size_t i = 0; i < steps; ++i) {
        ++iteration;
        if (stepper.step(u, phi_u, chain, iteration, rng)) ++counts.accepted;
        ++counts.proposed;
        if (adapt != nullptr) {
            absorb_sample(*adapt, stepper.basis.project(u.values(), adapt->dim()), u.norm());
        }
        if (iteration % store_stride == 0) chain.push(iteration, u.values(), phi_u);
    }
}

}  // namespace

void PcnConfig::validate() const {
    check_beta(beta);
    if (n_samples == 0) throw ParameterError("n_samples must be positive");
    if (store_stride == 0) throw ParameterError("store_stride must be positive");
}

AdaptState AdaptState::empty(std::size_t J, double delta_reg, double R, CovarianceMode mode) {
    if (J == 0) throw ParameterError("adapted dimension must be positive");
    if (!(delta_reg >= 0.0)) throw ParameterError("delta_reg must be non-negative");
    AdaptState s;
    const auto n = static_cast<Eigen::Index>(J);
    s.running_mean = Eigen::VectorXd::Zero(n);
    s.running_scatter = Eigen::MatrixXd::Zero(n, n);
    s.delta_reg = delta_reg;
    s.R = R;
    s.mode = mode;
    s.sigma_hat = delta_reg * Eigen::MatrixXd::Identity(n, n);
    return s;
}

bool absorb_sample(AdaptState& s, const Eigen::Ref<const Eigen::VectorXd>& x_new,
                   double u_norm) {
    if (x_new.size() != s.running_mean.size()) {
        throw ContractViolation("coefficient vector length differs from adapted dimension");
    }
    if (!(u_norm < s.R)) return false;

    // Welford update; scatter increment d d^T * n/(n+1) keeps exact symmetry
    const double n = static_cast<double>(s.count);
    const Eigen::VectorXd d = x_new - s.running_mean;
    s.count += 1;
    s.running_mean += d / (n + 1.0);
    s.running_scatter.noalias() += (n / (n + 1.0)) * d * d.transpose();

    const auto J = s.running_mean.size();
    if (s.count >= 2) {
        const double denom = static_cast<double>(s.count - 1);
        if (s.mode == CovarianceMode::full) {
            s.sigma_hat = s.running_scatter / denom;
        } else {
            s.sigma_hat = (s.running_scatter.diagonal() / denom).asDiagonal();
        }
        s.sigma_hat.diagonal().array() += s.delta_reg;
    } else {
        s.sigma_hat = s.delta_reg * Eigen::MatrixXd::Identity(J, J);
    }
    return true;
}

AdaptState update_adaptive_covariance(AdaptState state,
                                      const Eigen::Ref<const Eigen::VectorXd>& x_new,
                                      double u_norm) {
    absorb_sample(state, x_new, u_norm);
    return state;
}

std::size_t HybridConfig::resolve_J(const KLBasis& basis) const {
    if (J > 0) return J;
    if (!rho) throw ConfigurationError("either J or rho must be given");
    return select_J(basis.eigenvalues(), *rho);
}

double HybridConfig::resolve_R(const KLBasis& basis) const {
    return R.value_or(10.0 * std::sqrt(basis.total_variance()));
}

void HybridConfig::validate(const KLBasis& basis) const {
    check_beta(beta);
    if (prerun_beta) check_beta(*prerun_beta);
    const std::size_t j = resolve_J(basis);
    if (j < 1 || j > basis.size()) throw ParameterError("J must lie in [1, n]");
    if (!(basis.eigenvalues()[static_cast<Eigen::Index>(j) - 1] > 0.0)) {
        throw ConfigurationError("prior eigenvalue alpha_J is zero; reduce J");
    }
    if (fixed_sigma) {
        if (fixed_sigma->rows() != static_cast<Eigen::Index>(j) ||
            fixed_sigma->cols() != static_cast<Eigen::Index>(j)) {
            throw ConfigurationError("fixed_sigma must be J x J");
        }
    } else if (n_prerun < 2) {
        throw ParameterError("n_prerun must be at least 2");
    }
    if (n_samples == 0) throw ParameterError("n_samples must be positive");
    if (!(delta_reg >= 0.0)) throw ParameterError("delta_reg must be non-negative");
    if (R && !(*R > 0.0)) throw ParameterError("R must be positive");
    if (snapshot_stride == 0 || store_stride == 0) {
        throw ParameterError("strides must be positive");
    }
}

Chain::Chain(GridPtr grid) : grid_(std::move(grid)) {}

void Chain::reserve(std::size_t states) {
    values_.reserve(states * dim());
    iterations_.reserve(states);
    log_potentials_.reserve(states);
}

void Chain::push(std::size_t iteration, const Eigen::VectorXd& u, double phi) {
    if (static_cast<std::size_t>(u.size()) != dim()) {
        throw ContractViolation("state length differs from chain dimension");
    }
    values_.insert(values_.end(), u.data(), u.data() + u.size());
    iterations_.push_back(iteration);
    log_potentials_.push_back(phi);
}

Eigen::Map<const Eigen::VectorXd> Chain::state(std::size_t i) const {
    return Eigen::Map<const Eigen::VectorXd>(values_.data() + i * dim(),
                                             static_cast<Eigen::Index>(dim()));
}

std::vector<double> Chain::point_series(std::size_t grid_index, std::size_t first) const {
    std::vector<double> out;
    if (first >= size()) return out;
    out.reserve(size() - first);
    for (std::size_t i = first; i < size(); ++i) out.push_back(values_[i * dim() + grid_index]);
    return out;
}

std::vector<double> Chain::coefficient_series(const KLBasis& basis, std::size_t j,
                                              std::size_t first) const {
    const Eigen::VectorXd weighted_mode =
        basis.grid().weights().cwiseProduct(basis.eigenfunctions().col(static_cast<Eigen::Index>(j)));
    std::vector<double> out;
    if (first >= size()) return out;
    out.reserve(size() - first);
    for (std::size_t i = first; i < size(); ++i) out.push_back(weighted_mode.dot(state(i)));
    return out;
}

Chain Chain::tail(std::size_t first) const {
    Chain out(grid_);
    if (first >= size()) return out;
    out.values_.assign(values_.begin() + static_cast<std::ptrdiff_t>(first * dim()), values_.end());
    out.iterations_.assign(iterations_.begin() + static_cast<std::ptrdiff_t>(first),
                           iterations_.end());
    out.log_potentials_.assign(log_potentials_.begin() + static_cast<std::ptrdiff_t>(first),
                               log_potentials_.end());
    out.prerun = prerun;
    out.measured = measured;
    out.prerun_states = first >= prerun_states ? 0 : prerun_states - first;
    out.nonfinite_rejections = nonfinite_rejections;
    out.sigma_snapshots = sigma_snapshots;
    return out;
}

double beta_from_delta(double delta) {
    if (!(delta > 0.0 && delta <= 2.0)) throw ParameterError("delta must lie in (0, 2]");
    return std::sqrt(8.0 * delta) / (2.0 + delta);
}

Field pcn_propose(const Field& u, double beta, const KLBasis& basis, Rng& rng) {
    check_beta(beta);
    const Field w = sample_prior(basis, rng);
    Eigen::VectorXd v = keep_factor(beta) * u.values() + beta * w.values();
    return Field(u.grid_ptr(), std::move(v));
}

std::optional<double> pcn_log_acceptance(double phi_u, double phi_v) {
    if (!std::isfinite(phi_u) || !std::isfinite(phi_v)) return std::nullopt;
    return phi_u - phi_v;
}

HybridProposal::HybridProposal(const KLBasis& basis, std::size_t J, double beta,
                               const Eigen::MatrixXd& sigma)
    : basis_(&basis), J_(J), beta_(beta) {
    check_beta(beta);
    if (J < 1 || J > basis.size()) throw ParameterError("J must lie in [1, n]");
    set_sigma(sigma);
}

void HybridProposal::set_sigma(const Eigen::MatrixXd& sigma) {
    const auto J = static_cast<Eigen::Index>(J_);
    if (sigma.rows() != J || sigma.cols() != J) {
        throw AdaptationError("proposal covariance must be J x J");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw AdaptationError("proposal covariance is not positive definite");
    }
    lower_ = llt.matrixL();
}

Field HybridProposal::propose(const Field& u, const Eigen::VectorXd& x_u, Rng& rng) const {
    const auto J = static_cast<Eigen::Index>(J_);
    std::normal_distribution<double> normal;
    Eigen::VectorXd xi(J);
    for (Eigen::Index i = 0; i < J; ++i) xi[i] = normal(rng);
    const Eigen::VectorXd w_plus = lower_ * xi;
    const Eigen::VectorXd w_minus = sample_prior_tail(*basis_, J_, rng);

    const Eigen::VectorXd u_minus = u.values() - basis_->reconstruct(x_u);
    // u+ + sqrt(1-b^2) u- written as u + (sqrt(1-b^2) - 1) u- so that beta = 0
    // returns u bit for bit
    Eigen::VectorXd v = u.values() + (keep_factor(beta_) - 1.0) * u_minus +
                        beta_ * (basis_->reconstruct(w_plus) + w_minus);
    return Field(u.grid_ptr(), std::move(v));
}

Field HybridProposal::propose(const Field& u, Rng& rng) const {
    return propose(u, basis_->project(u.values(), J_), rng);
}

Field hybrid_propose(const Field& u, double beta, const Eigen::MatrixXd& sigma_hat,
                     const KLBasis& basis, std::size_t J, Rng& rng) {
    return HybridProposal(basis, J, beta, sigma_hat).propose(u, rng);
}

std::optional<double> hybrid_log_acceptance(const Eigen::VectorXd& x_u,
                                            const Eigen::VectorXd& x_v, double phi_u,
                                            double phi_v, const Eigen::VectorXd& eigenvalues) {
    const auto J = x_u.size();
    if (x_v.size() != J || J > eigenvalues.size()) {
        throw ContractViolation("coefficient vectors and eigenvalues disagree in length");
    }
    const auto alpha = eigenvalues.head(J);
    if ((alpha.array() <= 0.0).any()) {
        throw ConfigurationError("a prior eigenvalue among the first J is zero; reduce J");
    }
    if (!std::isfinite(phi_u) || !std::isfinite(phi_v)) return std::nullopt;
    const double correction =
        0.5 * ((x_u.array().square() - x_v.array().square()) / alpha.array()).sum();
    return phi_u - phi_v + correction;
}

std::optional<double> hybrid_log_acceptance(const Field& u, const Field& v, double phi_u,
                                            double phi_v, const KLBasis& basis,
                                            std::size_t J) {
    return hybrid_log_acceptance(basis.project(u.values(), J), basis.project(v.values(), J),
                                 phi_u, phi_v, basis.eigenvalues());
}

Chain run_pcn_chain(const PcnConfig& config, const Potential& potential,
                    const KLBasis& basis, const Field& initial, Rng& rng) {
    config.validate();
    check_initial(initial, basis);
    Chain chain(basis.grid_ptr());
    chain.reserve(config.n_samples / config.store_stride);

    Field u = initial;
    double phi_u = initial_potential(potential, u);
    const PcnStepper stepper{basis, potential, config.beta};
    std::size_t iteration = 0;
    pcn_phase(stepper, config.n_samples, config.store_stride, u, phi_u, chain, chain.measured,
              iteration, nullptr, rng);
    return chain;
}

Chain run_pcn_chain(const PcnConfig& config, const Potential& potential,
                    const KLBasis& basis, const Field& initial) {
    Rng rng(config.seed);
    return run_pcn_chain(config, potential, basis, initial, rng);
}

Chain run_hybrid_chain(const HybridConfig& config, const Potential& potential,
                       const KLBasis& basis, const Field& initial, Rng& rng) {
    config.validate(basis);
    check_initial(initial, basis);
    const std::size_t J = config.resolve_J(basis);
    const std::size_t total = config.n_prerun + config.n_samples;

    Chain chain(basis.grid_ptr());
    chain.reserve(total / config.store_stride);

    Field u = initial;
    double phi_u = initial_potential(potential, u);
    std::size_t iteration = 0;

    AdaptState adapt = AdaptState::empty(J, config.delta_reg, config.resolve_R(basis), config.mode);
    const bool adaptive = !config.fixed_sigma.has_value();

    const PcnStepper prerun{basis, potential, config.resolve_prerun_beta()};
    pcn_phase(prerun, config.n_prerun, config.store_stride, u, phi_u, chain, chain.prerun,
              iteration, adaptive ? &adapt : nullptr, rng);
    chain.prerun_states = chain.size();

    if (adaptive && !adapt.ready()) {
        throw StartupError("fewer than two pre-run states passed the norm gate; increase R");
    }
    HybridProposal proposal(basis, J, config.beta,
                            adaptive ? adapt.sigma_hat : *config.fixed_sigma);
    const HybridStepper stepper{basis, potential, proposal};

    auto snapshot = [&] {
        chain.sigma_snapshots.push_back(
            {iteration, adapt.count, adaptive ? adapt.sigma_hat : *config.fixed_sigma});
    };
    snapshot();

    Eigen::VectorXd x_u = basis.project(u.values(), J);
    for (std::size_t i = 0; i < config.n_samples; ++i) {
        ++iteration;
        if (stepper.step(u, x_u, phi_u, chain, iteration, rng)) ++chain.measured.accepted;
        ++chain.measured.proposed;
        if (adaptive && absorb_sample(adapt, x_u, u.norm())) proposal.set_sigma(adapt.sigma_hat);
        if (iteration % config.store_stride == 0) chain.push(iteration, u.values(), phi_u);
        if ((i + 1) % config.snapshot_stride == 0) snapshot();
    }
    return chain;
}

Chain run_hybrid_chain(const HybridConfig& config, const Potential& potential,
                       const KLBasis& basis, const Field& initial) {
    Rng rng(config.seed);
    return run_hybrid_chain(config, potential, basis, initial, rng);
}

void TuneOptions::validate() const {
    if (!(target_rate > 0.0 && target_rate < 1.0)) {
        throw ParameterError("target acceptance rate must lie in (0, 1)");
    }
    check_beta(initial_beta);
    if (batch_size == 0) throw ParameterError("batch_size must be positive");
}

namespace {

double next_beta(double beta, double rate, double target) {
    return std::clamp(beta * std::exp(rate - target), kMinBeta, kMaxBeta);
}

}  // namespace

TuneResult tune_beta(const TuneOptions& options, const Potential& potential,
                     const KLBasis& basis, const Field& initial, Rng& rng) {
    options.validate();
    check_initial(initial, basis);
    Chain scratch(basis.grid_ptr());
    Field u = initial;
    double phi_u = initial_potential(potential, u);
    TuneResult result;
    double beta = std::clamp(options.initial_beta, kMinBeta, kMaxBeta);
    std::size_t iteration = 0;
    for (std::size_t b = 0; b < options.batches; ++b) {
        const PcnStepper stepper{basis, potential, beta};
        std::size_t accepted = 0;
        for (std::size_t i = 0; i < options.batch_size; ++i) {
            if (stepper.step(u, phi_u, scratch, ++iteration, rng)) ++accepted;
        }
        const double rate = static_cast<double>(accepted) / static_cast<double>(options.batch_size);
        beta = next_beta(beta, rate, options.target_rate);
        result.rates.push_back(rate);
        result.betas.push_back(beta);
    }
    result.beta = beta;
    return result;
}

TuneResult tune_beta(const TuneOptions& options, const HybridConfig& config,
                     const Potential& potential, const KLBasis& basis, const Field& initial,
                     Rng& rng) {
    options.validate();
    config.validate(basis);
    check_initial(initial, basis);
    const std::size_t J = config.resolve_J(basis);

    Chain scratch(basis.grid_ptr());
    Field u = initial;
    double phi_u = initial_potential(potential, u);
    std::size_t iteration = 0;

    AdaptState adapt = AdaptState::empty(J, config.delta_reg, config.resolve_R(basis), config.mode);
    const bool adaptive = !config.fixed_sigma.has_value();
    const PcnStepper prerun{basis, potential, config.resolve_prerun_beta()};
    for (std::size_t i = 0; i < config.n_prerun; ++i) {
        prerun.step(u, phi_u, scratch, ++iteration, rng);
        if (adaptive) absorb_sample(adapt, basis.project(u.values(), J), u.norm());
    }
    if (adaptive && !adapt.ready()) {
        throw StartupError("fewer than two pre-run states passed the norm gate; increase R");
    }

    TuneResult result;
    double beta = std::clamp(options.initial_beta, kMinBeta, kMaxBeta);
    Eigen::VectorXd x_u = basis.project(u.values(), J);
    const Eigen::MatrixXd& sigma0 = adaptive ? adapt.sigma_hat : *config.fixed_sigma;
    for (std::size_t b = 0; b < options.batches; ++b) {
        HybridProposal proposal(basis, J, beta, sigma0);
        if (adaptive) proposal.set_sigma(adapt.sigma_hat);
        const HybridStepper stepper{basis, potential, proposal};
        std::size_t accepted = 0;
        for (std::size_t i = 0; i < options.batch_size; ++i) {
            if (stepper.step(u, x_u, phi_u, scratch, ++iteration, rng)) ++accepted;
            if (adaptive && absorb_sample(adapt, x_u, u.norm())) proposal.set_sigma(adapt.sigma_hat);
        }
        const double rate = static_cast<double>(accepted) / static_cast<double>(options.batch_size);
        beta = next_beta(beta, rate, options.target_rate);
        result.rates.push_back(rate);
        result.betas.push_back(beta);
    }
    result.beta = beta;
    return result;
}

}  // namespace hpcn

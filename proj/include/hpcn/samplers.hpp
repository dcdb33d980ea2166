#pragma once

// pCN and hybrid adaptive samplers for Gaussian-prior posteriors on a grid.
//
// The hybrid sampler works in the KL coordinates of the prior: the first J
// coefficients follow a Gaussian random walk whose covariance is learned from
// the chain history (adaptive Metropolis), the remaining modes take pCN steps.
// A "diagonal" covariance mode keeps only the marginal variances and serves
// as the uncorrelated baseline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "hpcn/prior.hpp"

namespace hpcn {

/// Negative log-likelihood Phi(u). May return a non-finite value for a
/// failed forward solve; such proposals are rejected.
using Potential = std::function<double(const Field&)>;

enum class CovarianceMode { full, diagonal };

struct PcnConfig {
    double beta = 0.5;
    std::size_t n_samples = 50000;
    std::uint64_t seed = 0;
    std::size_t store_stride = 1;

    void validate() const;
};

/// Running moments of projected coefficients and the regularized covariance
/// built from them.
struct AdaptState {
    std::size_t count = 0;
    Eigen::VectorXd running_mean;
    Eigen::MatrixXd running_scatter;  // sum (x_i - mean)(x_i - mean)^T
    double delta_reg = 1e-8;
    double R = 0.0;                   // states with ||u||_X >= R are ignored
    CovarianceMode mode = CovarianceMode::full;
    Eigen::MatrixXd sigma_hat;        // scatter / (count - 1) + delta_reg * I

    static AdaptState empty(std::size_t J, double delta_reg, double R,
                            CovarianceMode mode = CovarianceMode::full);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(running_mean.size()); }
    bool ready() const noexcept { return count >= 2; }
};

/// Streams one state into the running statistics unless u_norm >= R.
/// Returns true when the state was absorbed.
bool absorb_sample(AdaptState& state, const Eigen::Ref<const Eigen::VectorXd>& x_new,
                   double u_norm);

/// Value-semantics form of absorb_sample.
AdaptState update_adaptive_covariance(AdaptState state,
                                      const Eigen::Ref<const Eigen::VectorXd>& x_new,
                                      double u_norm);

struct HybridConfig {
    double beta = 0.5;
    /// pCN step of the pre-run; defaults to beta.
    std::optional<double> prerun_beta;
    /// Adapted dimension. Zero means "derive from rho".
    std::size_t J = 0;
    std::optional<double> rho;
    std::size_t n_prerun = 5000;
    std::size_t n_samples = 50000;
    double delta_reg = 1e-8;
    /// Norm threshold; defaults to 10 * sqrt(sum of prior eigenvalues).
    std::optional<double> R;
    CovarianceMode mode = CovarianceMode::full;
    /// When set, the proposal covariance is frozen to this matrix and no
    /// pre-run or adaptation takes place.
    std::optional<Eigen::MatrixXd> fixed_sigma;
    std::size_t snapshot_stride = 1000;
    std::size_t store_stride = 1;
    std::uint64_t seed = 0;

    std::size_t resolve_J(const KLBasis& basis) const;
    double resolve_R(const KLBasis& basis) const;
    double resolve_prerun_beta() const { return prerun_beta.value_or(beta); }
    /// Throws ParameterError / ConfigurationError.
    void validate(const KLBasis& basis) const;
};

struct SigmaSnapshot {
    std::size_t iteration = 0;  // global iteration index (pre-run included)
    std::size_t count = 0;      // samples absorbed into the statistics
    Eigen::MatrixXd sigma;
};

struct AcceptanceCounts {
    std::size_t accepted = 0;
    std::size_t proposed = 0;
    double rate() const noexcept {
        return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
    }
};

/// Stored chain states with acceptance bookkeeping.
class Chain {
public:
    explicit Chain(GridPtr grid);

    void reserve(std::size_t states);
    void push(std::size_t iteration, const Eigen::VectorXd& u, double phi);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return log_potentials_.size(); }
    bool empty() const noexcept { return log_potentials_.empty(); }
    std::size_t dim() const noexcept { return grid_->size(); }

    Eigen::Map<const Eigen::VectorXd> state(std::size_t i) const;
    const std::vector<std::size_t>& iterations() const noexcept { return iterations_; }
    const std::vector<double>& log_potentials() const noexcept { return log_potentials_; }

    /// Values at one grid point for stored states [first, size).
    std::vector<double> point_series(std::size_t grid_index, std::size_t first = 0) const;
    /// KL coefficient j (0-based) for stored states [first, size).
    std::vector<double> coefficient_series(const KLBasis& basis, std::size_t j,
                                           std::size_t first = 0) const;

    /// Stored states [first, size) as a Chain sharing nothing with this one.
    Chain tail(std::size_t first) const;

    AcceptanceCounts prerun;    // pCN warm start of the hybrid sampler
    AcceptanceCounts measured;  // main phase
    std::size_t prerun_states = 0;  // leading stored states produced by the pre-run
    std::size_t nonfinite_rejections = 0;
    std::vector<SigmaSnapshot> sigma_snapshots;

    double acceptance_rate() const noexcept { return measured.rate(); }

private:
    GridPtr grid_;
    std::vector<double> values_;
    std::vector<std::size_t> iterations_;
    std::vector<double> log_potentials_;
};

/// beta = sqrt(8 delta) / (2 + delta); ParameterError unless 0 < delta < 2.
/// delta = 2 is accepted as the closed end (beta = 1).
double beta_from_delta(double delta);

/// v = sqrt(1 - beta^2) u + beta w with w a prior draw.
Field pcn_propose(const Field& u, double beta, const KLBasis& basis, Rng& rng);

/// Phi(u) - Phi(v), or nullopt when either potential is non-finite
/// (automatic rejection).
std::optional<double> pcn_log_acceptance(double phi_u, double phi_v);

/// Draws from the hybrid proposal for a fixed covariance. Holding the
/// Cholesky factor lets a chain reuse it between covariance updates.
class HybridProposal {
public:
    HybridProposal(const KLBasis& basis, std::size_t J, double beta,
                   const Eigen::MatrixXd& sigma);

    /// Refactorizes; throws AdaptationError if sigma is not positive definite.
    void set_sigma(const Eigen::MatrixXd& sigma);

    std::size_t J() const noexcept { return J_; }
    double beta() const noexcept { return beta_; }

    /// Proposal from u whose leading coefficients x_u = project(u, J) are
    /// already known.
    Field propose(const Field& u, const Eigen::VectorXd& x_u, Rng& rng) const;
    Field propose(const Field& u, Rng& rng) const;

private:
    const KLBasis* basis_;
    std::size_t J_;
    double beta_;
    Eigen::MatrixXd lower_;
};

Field hybrid_propose(const Field& u, double beta, const Eigen::MatrixXd& sigma_hat,
                     const KLBasis& basis, std::size_t J, Rng& rng);

/// Phi(u) - Phi(v) + 1/2 sum_{i<J} (x_u_i^2 - x_v_i^2) / alpha_i.
/// ConfigurationError if any of the first J eigenvalues is zero; nullopt for
/// a non-finite potential.
std::optional<double> hybrid_log_acceptance(const Eigen::VectorXd& x_u,
                                            const Eigen::VectorXd& x_v, double phi_u,
                                            double phi_v, const Eigen::VectorXd& eigenvalues);
std::optional<double> hybrid_log_acceptance(const Field& u, const Field& v, double phi_u,
                                            double phi_v, const KLBasis& basis,
                                            std::size_t J);

Chain run_pcn_chain(const PcnConfig& config, const Potential& potential,
                    const KLBasis& basis, const Field& initial, Rng& rng);
/// Seeds the generator from config.seed.
Chain run_pcn_chain(const PcnConfig& config, const Potential& potential,
                    const KLBasis& basis, const Field& initial);

/// pCN pre-run, covariance seeding from the gated pre-run states, then the
/// adaptive hybrid loop. Throws StartupError if fewer than two pre-run
/// states pass the norm gate.
Chain run_hybrid_chain(const HybridConfig& config, const Potential& potential,
                       const KLBasis& basis, const Field& initial, Rng& rng);
Chain run_hybrid_chain(const HybridConfig& config, const Potential& potential,
                       const KLBasis& basis, const Field& initial);

struct TuneOptions {
    double target_rate = 0.25;
    double initial_beta = 0.5;
    std::size_t batches = 50;
    std::size_t batch_size = 200;

    void validate() const;
};

struct TuneResult {
    double beta = 0.0;
    std::vector<double> betas;  // step size after each batch
    std::vector<double> rates;  // acceptance rate of each batch
};

/// Throwaway pCN run; after each batch beta *= exp(rate - target), clamped
/// to [1e-4, 1].
TuneResult tune_beta(const TuneOptions& options, const Potential& potential,
                     const KLBasis& basis, const Field& initial, Rng& rng);

/// Same search for the hybrid kernel: runs the configured pCN pre-run, seeds
/// the covariance, then tunes the adaptive-phase step with adaptation live.
/// config.beta is ignored; options.initial_beta is the starting point.
TuneResult tune_beta(const TuneOptions& options, const HybridConfig& config,
                     const Potential& potential, const KLBasis& basis, const Field& initial,
                     Rng& rng);

}  // namespace hpcn

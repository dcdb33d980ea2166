#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hpcn/samplers.hpp"

namespace hpcn {

/// Biased (divide-by-n) sample autocorrelation rho_0 .. rho_max_lag.
/// Throws ParameterError if max_lag >= n, UndefinedStatistic for a constant
/// series.
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

struct EssResult {
    double ess = 0.0;
    double tau = 0.0;           // integrated autocorrelation time n / ess
    std::size_t truncation = 0;  // last lag included in the sum
    double per_100(std::size_t n) const { return 100.0 * ess / static_cast<double>(n); }
};

/// ESS = n / (1 + 2 sum_{k=1}^{K*} rho_k) with K* from Geyer's initial
/// positive sequence (stop before the first pair rho_{2m} + rho_{2m+1} <= 0).
EssResult effective_sample_size(std::span<const double> series);

struct PointwiseMoments {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // unbiased; zero for a single state
};

/// Per-grid-point mean and variance over stored states [first, size).
PointwiseMoments pointwise_moments(const Chain& chain, std::size_t first = 0);

/// count_a * ||Sigma_a - Sigma_b||_F / (count_b - count_a) for consecutive
/// snapshots, using the number of absorbed samples as the time index. A pair
/// with no absorbed samples in between contributes zero.
std::vector<double> adaptation_decay(const std::vector<SigmaSnapshot>& snapshots);

struct DecayVerdict {
    double first_quartile_max = 0.0;
    double last_quartile_max = 0.0;
    bool bounded = true;  // last <= 2 * first
};

/// No-upward-trend check on an adaptation_decay series.
DecayVerdict check_adaptation_decay(std::span<const double> decay);

/// Per-grid-point summary used by the diagnostics CSV.
struct PointDiagnostics {
    std::vector<double> x;
    std::vector<double> acf_at_lag;
    std::vector<double> ess_per_100;
    std::vector<double> mean;
    std::vector<double> variance;
};

/// ACF at one lag and ESS per 100 samples at every grid point, computed on
/// stored states [first, size). Points with zero variance report NaN.
PointDiagnostics point_diagnostics(const Chain& chain, std::size_t acf_lag,
                                   std::size_t first = 0);

}  // namespace hpcn

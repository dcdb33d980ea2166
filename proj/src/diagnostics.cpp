#include "hpcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <unsupported/Eigen/FFT>

#include "hpcn/error.hpp"

namespace hpcn {

namespace {

void check_series(std::span<const double> series) {
    if (series.empty()) throw ParameterError("series is empty");
    for (double v : series) {
        if (!std::isfinite(v)) throw ParameterError("series contains non-finite values");
    }
}

/// Biased autocorrelation at every lag 0..n-1 via zero-padded FFT.
std::vector<double> full_acf(std::span<const double> series) {
    check_series(series);
    const std::size_t n = series.size();
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);

    std::size_t padded = 1;
    while (padded < 2 * n) padded <<= 1;
    std::vector<double> centred(padded, 0.0);
    double c0 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        centred[t] = series[t] - mean;
        c0 += centred[t] * centred[t];
    }
    if (!(c0 > 0.0)) throw UndefinedStatistic("autocorrelation of a constant series");

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, centred);
    for (auto& z : spectrum) z = std::norm(z);
    std::vector<double> lagged;
    fft.inv(lagged, spectrum);

    std::vector<double> acf(n);
    for (std::size_t k = 0; k < n; ++k) acf[k] = lagged[k] / lagged[0];
    acf[0] = 1.0;
    return acf;
}

EssResult ess_from_acf(const std::vector<double>& acf) {
    const std::size_t n = acf.size();
    double sum_pairs = 0.0;
    std::size_t m = 0;
    while (2 * m + 1 < n) {
        const double pair = acf[2 * m] + acf[2 * m + 1];
        if (pair <= 0.0) break;
        sum_pairs += pair;
        ++m;
    }
    EssResult out;
    // tau = -1 + 2 sum Gamma_m = 1 + 2 sum_{k=1}^{2m-1} rho_k
    out.tau = m == 0 ? 1.0 : -1.0 + 2.0 * sum_pairs;
    out.truncation = m == 0 ? 0 : 2 * m - 1;
    out.ess = static_cast<double>(n) / out.tau;
    return out;
}

}  // namespace

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
    if (max_lag >= series.size()) throw ParameterError("max_lag must be below the series length");
    auto acf = full_acf(series);
    acf.resize(max_lag + 1);
    return acf;
}

EssResult effective_sample_size(std::span<const double> series) {
    return ess_from_acf(full_acf(series));
}

PointwiseMoments pointwise_moments(const Chain& chain, std::size_t first) {
    if (first >= chain.size()) throw ParameterError("no states in the requested range");
    const auto n = static_cast<Eigen::Index>(chain.dim());
    const double count = static_cast<double>(chain.size() - first);
    PointwiseMoments out;
    out.mean = Eigen::VectorXd::Zero(n);
    for (std::size_t i = first; i < chain.size(); ++i) out.mean += chain.state(i);
    out.mean /= count;
    out.variance = Eigen::VectorXd::Zero(n);
    for (std::size_t i = first; i < chain.size(); ++i) {
        out.variance += (chain.state(i) - out.mean).array().square().matrix();
    }
    if (count > 1.0) out.variance /= count - 1.0;
    return out;
}

std::vector<double> adaptation_decay(const std::vector<SigmaSnapshot>& snapshots) {
    if (snapshots.size() < 2) throw ParameterError("need at least two covariance snapshots");
    std::vector<double> out;
    out.reserve(snapshots.size() - 1);
    for (std::size_t k = 0; k + 1 < snapshots.size(); ++k) {
        const auto& a = snapshots[k];
        const auto& b = snapshots[k + 1];
        if (b.count <= a.count) {
            out.push_back(0.0);
            continue;
        }
        const double change = (a.sigma - b.sigma).norm();
        out.push_back(static_cast<double>(a.count) * change /
                      static_cast<double>(b.count - a.count));
    }
    return out;
}

DecayVerdict check_adaptation_decay(std::span<const double> decay) {
    DecayVerdict v;
    if (decay.empty()) return v;
    const std::size_t quarter = std::max<std::size_t>(1, decay.size() / 4);
    v.first_quartile_max = *std::max_element(decay.begin(), decay.begin() + quarter);
    v.last_quartile_max = *std::max_element(decay.end() - quarter, decay.end());
    v.bounded = v.last_quartile_max <= 2.0 * v.first_quartile_max;
    return v;
}

PointDiagnostics point_diagnostics(const Chain& chain, std::size_t acf_lag, std::size_t first) {
    const auto moments = pointwise_moments(chain, first);
    const std::size_t length = chain.size() - first;
    if (acf_lag >= length) throw ParameterError("ACF lag must be below the chain length");
    const auto& x = chain.grid().points();
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    PointDiagnostics out;
    for (std::size_t k = 0; k < chain.dim(); ++k) {
        const auto idx = static_cast<Eigen::Index>(k);
        out.x.push_back(x[idx]);
        out.mean.push_back(moments.mean[idx]);
        out.variance.push_back(moments.variance[idx]);
        try {
            const auto acf = full_acf(chain.point_series(k, first));
            out.acf_at_lag.push_back(acf[acf_lag]);
            out.ess_per_100.push_back(ess_from_acf(acf).per_100(length));
        } catch (const UndefinedStatistic&) {
            out.acf_at_lag.push_back(nan);
            out.ess_per_100.push_back(nan);
        }
    }
    return out;
}

}  // namespace hpcn

#include "evpipe/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <string>

#include "evpipe/errors.hpp"
#include "evpipe/rng.hpp"

namespace evpipe::noise {
namespace {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

bool is_pow2(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

}  // namespace

double PsdEstimate::total_power() const {
    return std::accumulate(psd.begin(), psd.end(), 0.0) * df_hz;
}

PsdEstimate welch_psd(std::span<const double> signal, double sample_rate_hz, std::size_t segment,
                      double overlap) {
    if (sample_rate_hz <= 0.0) throw ConfigError("welch_psd: sample rate must be positive");
    if (!is_pow2(segment)) throw ConfigError("welch_psd: segment length must be a power of two >= 2");
    if (overlap < 0.0 || overlap >= 1.0) throw ConfigError("welch_psd: overlap must be in [0, 1)");
    if (signal.size() < 2 * segment)
        throw InsufficientDataError("welch_psd: need at least " + std::to_string(2 * segment) +
                                    " samples, got " + std::to_string(signal.size()));

    const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) /
                        static_cast<double>(signal.size());

    std::vector<double> window(segment);
    double win_energy = 0.0;
    for (std::size_t i = 0; i < segment; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(segment)));
        win_energy += window[i] * window[i];
    }

    const std::size_t hop =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(segment * (1.0 - overlap))));
    const std::size_t n_bins = segment / 2 + 1;

    PsdEstimate out;
    out.df_hz = sample_rate_hz / static_cast<double>(segment);
    out.psd.assign(n_bins, 0.0);

    std::vector<std::complex<double>> buf(segment);
    std::size_t count = 0;
    for (std::size_t start = 0; start + segment <= signal.size(); start += hop, ++count) {
        for (std::size_t i = 0; i < segment; ++i)
            buf[i] = {(signal[start + i] - mean) * window[i], 0.0};
        fft(buf);
        const double scale = 1.0 / (sample_rate_hz * win_energy);
        for (std::size_t k = 0; k < n_bins; ++k) {
            double p = std::norm(buf[k]) * scale;
            if (k != 0 && k != segment / 2) p *= 2.0;  // fold negative frequencies
            out.psd[k] += p;
        }
    }
    for (double& p : out.psd) p /= static_cast<double>(count);
    return out;
}

bool ARModel::stationary() const {
    if (sigma2 <= 0.0) return false;
    const int p = order();
    if (p == 0) return true;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) companion(0, i) = coeffs[static_cast<std::size_t>(i)];
    for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
    const Eigen::VectorXcd roots = companion.eigenvalues();
    for (int i = 0; i < p; ++i)
        if (std::abs(roots(i)) >= 1.0) return false;
    return true;
}

ARModel yule_walker_fit(std::span<const double> signal, int order) {
    if (order < 1) throw ConfigError("yule_walker_fit: order must be >= 1");
    if (signal.size() < 10 * static_cast<std::size_t>(order))
        throw InsufficientDataError("yule_walker_fit: need >= 10*order samples, got " +
                                    std::to_string(signal.size()));

    const std::size_t n = signal.size();
    const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / static_cast<double>(n);

    // Biased autocovariances r[0..p].
    std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
    for (std::size_t lag = 0; lag <= static_cast<std::size_t>(order); ++lag) {
        double acc = 0.0;
        for (std::size_t i = lag; i < n; ++i) acc += (signal[i] - mean) * (signal[i - lag] - mean);
        r[lag] = acc / static_cast<double>(n);
    }
    if (r[0] <= 1e-300) throw EstimationError("yule_walker_fit: signal has no variance");

    // Levinson-Durbin recursion.
    std::vector<double> a(static_cast<std::size_t>(order), 0.0), prev;
    double err = r[0];
    for (int m = 1; m <= order; ++m) {
        double acc = r[static_cast<std::size_t>(m)];
        for (int i = 1; i < m; ++i) acc -= a[static_cast<std::size_t>(i - 1)] * r[static_cast<std::size_t>(m - i)];
        if (err <= 0.0) throw EstimationError("yule_walker_fit: singular normal equations");
        const double k = acc / err;
        prev.assign(a.begin(), a.begin() + (m - 1));
        a[static_cast<std::size_t>(m - 1)] = k;
        for (int i = 1; i < m; ++i)
            a[static_cast<std::size_t>(i - 1)] = prev[static_cast<std::size_t>(i - 1)] -
                                                 k * prev[static_cast<std::size_t>(m - 1 - i)];
        err *= 1.0 - k * k;
    }

    ARModel model;
    model.coeffs = std::move(a);
    model.sigma2 = err;
    if (!model.stationary()) throw EstimationError("yule_walker_fit: fitted model is not stationary");
    return model;
}

std::vector<double> ar_generate(const ARModel& model, std::size_t n, std::uint64_t seed,
                                std::size_t burn_in) {
    if (!model.stationary()) throw ConfigError("ar_generate: model must be stationary");
    const std::size_t p = model.coeffs.size();
    if (burn_in < 10 * p) throw ConfigError("ar_generate: burn_in must be >= 10*order");

    Rng rng(seed);
    const double sigma = std::sqrt(model.sigma2);
    std::vector<double> x(burn_in + n, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double acc = rng.normal() * sigma;
        for (std::size_t i = 0; i < p && i < t; ++i) acc += model.coeffs[i] * x[t - 1 - i];
        x[t] = acc;
    }
    x.erase(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(burn_in));
    return x;
}

}  // namespace evpipe::noise

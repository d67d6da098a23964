#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Spectral disturbance modeling: Welch PSD estimation, Yule-Walker AR fits
// and spectrally matched noise synthesis.

namespace evpipe::noise {

// One-sided power spectral density. psd[k] is the density at k * df_hz;
// sum(psd) * df_hz equals the signal variance.
struct PsdEstimate {
    double df_hz = 0.0;
    std::vector<double> psd;

    double freq_hz(std::size_t bin) const { return df_hz * static_cast<double>(bin); }
    double total_power() const;
};

// Averaged periodogram over Hann-windowed segments. `segment` must be a
// power of two; the signal must supply at least two segments.
PsdEstimate welch_psd(std::span<const double> signal, double sample_rate_hz,
                      std::size_t segment = 1024, double overlap = 0.5);

// x[t] = sum_i coeffs[i] * x[t-1-i] + e[t],  e ~ N(0, sigma2)
struct ARModel {
    std::vector<double> coeffs;
    double sigma2 = 1.0;

    int order() const { return static_cast<int>(coeffs.size()); }
    bool stationary() const;
};

// Levinson-Durbin solve of the Toeplitz normal equations built from biased
// sample autocovariances (mean removed).
ARModel yule_walker_fit(std::span<const double> signal, int order);

// Drives the recursion with Gaussian innovations and discards `burn_in`
// warm-up samples (at least 10x the model order).
std::vector<double> ar_generate(const ARModel& model, std::size_t n, std::uint64_t seed,
                                std::size_t burn_in);

}  // namespace evpipe::noise

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "evpipe/disturbance_map.hpp"
#include "evpipe/errors.hpp"
#include "evpipe/rng.hpp"
#include "evpipe/spectrum.hpp"

using namespace evpipe;
using namespace evpipe::noise;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(0.0, sigma);
    return x;
}

double variance(std::span<const double> x) {
    double mean = 0.0;
    for (const double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double s = 0.0;
    for (const double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size());
}

// one-sided analytic AR PSD at frequency f (sample rate fs)
double ar_psd(const ARModel& model, double f, double fs) {
    const double w = 2.0 * std::numbers::pi * f / fs;
    std::complex<double> denom(1.0, 0.0);
    for (int k = 0; k < model.order(); ++k)
        denom -= model.coeffs[static_cast<std::size_t>(k)] *
                 std::exp(std::complex<double>(0.0, -(k + 1.0) * w));
    return 2.0 * model.sigma2 / (fs * std::norm(denom));
}

// mean PSD over bands of >= 5 bins; returns per-band (estimate, reference)
void band_compare(const PsdEstimate& est, const ARModel& model, double fs, double rel_tol) {
    const std::size_t bins = est.psd.size();
    const std::size_t band = std::max<std::size_t>(5, bins / 24);
    // skip the DC band (mean removal distorts it) and the final partial band
    for (std::size_t b = band; b + band <= bins; b += band) {
        double got = 0.0, want = 0.0;
        for (std::size_t k = b; k < b + band; ++k) {
            got += est.psd[k];
            want += ar_psd(model, est.freq_hz(k), fs);
        }
        CHECK(std::abs(got - want) <= rel_tol * want);
    }
}

// random stationary AR model, built from reflection coefficients
ARModel random_ar(Rng& rng, int order) {
    std::vector<double> k(static_cast<std::size_t>(order));
    for (auto& v : k) v = rng.uniform(-0.7, 0.7);
    // Levinson recursion turns reflection coefficients into AR coefficients
    std::vector<double> a;
    for (int m = 0; m < order; ++m) {
        std::vector<double> next(static_cast<std::size_t>(m) + 1);
        next[static_cast<std::size_t>(m)] = k[static_cast<std::size_t>(m)];
        for (int i = 0; i < m; ++i)
            next[static_cast<std::size_t>(i)] =
                a[static_cast<std::size_t>(i)] -
                k[static_cast<std::size_t>(m)] * a[static_cast<std::size_t>(m - 1 - i)];
        a = std::move(next);
    }
    ARModel model;
    model.coeffs = a;
    model.sigma2 = rng.uniform(0.2, 2.0);
    return model;
}

std::vector<WrenchSample> planted_samples(int n, std::uint64_t seed,
                                          const std::function<Wrench(double, double)>& field,
                                          double radius = 0.19) {
    Rng rng(seed);
    std::vector<WrenchSample> out;
    while (static_cast<int>(out.size()) < n) {
        const double y = rng.uniform(-radius, radius);
        const double z = rng.uniform(-radius, radius);
        if (y * y + z * z > radius * radius) continue;
        const Wrench w = field(y, z);
        out.push_back({y, z, w.fy_N, w.fz_N, w.taux_Nm});
    }
    return out;
}

double coeff_norm(const DisturbanceMap& map) {
    double s = 0.0;
    for (const double c : map.coeff_fy) s += c * c;
    for (const double c : map.coeff_fz) s += c * c;
    for (const double c : map.coeff_taux) s += c * c;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("welch input validation") {
    const auto x = white_noise(4096, 1);
    CHECK_THROWS_AS(welch_psd(x, 0.0, 1024), ConfigError);
    CHECK_THROWS_AS(welch_psd(x, 100.0, 1000), ConfigError);   // not a power of two
    CHECK_THROWS_AS(welch_psd(x, 100.0, 1024, 1.0), ConfigError);
    CHECK_THROWS_AS(welch_psd(x, 100.0, 1024, -0.1), ConfigError);
    CHECK_THROWS_AS(welch_psd(std::vector<double>(2047, 0.0), 100.0, 1024), InsufficientDataError);
    CHECK_NOTHROW(welch_psd(std::vector<double>(2048, 1.0), 100.0, 1024));
}

TEST_CASE("white noise has a flat spectrum with the right total power") {
    const auto x = white_noise(1 << 16, 2);
    const PsdEstimate est = welch_psd(x, 1000.0);

    CHECK(est.total_power() == doctest::Approx(variance(x)).epsilon(0.1));

    // mid-band flatness: 8 coarse bands between 5% and 45% of fs
    const std::size_t bins = est.psd.size();
    std::vector<double> bands;
    const std::size_t lo = bins / 10, hi = (bins * 9) / 10;
    const std::size_t step = (hi - lo) / 8;
    for (std::size_t b = lo; b + step <= hi; b += step) {
        double s = 0.0;
        for (std::size_t k = b; k < b + step; ++k) s += est.psd[k];
        bands.push_back(s);
    }
    const auto [mn, mx] = std::minmax_element(bands.begin(), bands.end());
    CHECK(*mx / *mn < 3.0);
}

TEST_CASE("a pure tone peaks in its own bin") {
    const double fs = 2000.0, f0 = 312.5;
    std::vector<double> x(1 << 14);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs);
    const PsdEstimate est = welch_psd(x, fs);
    const std::size_t peak = static_cast<std::size_t>(
        std::max_element(est.psd.begin(), est.psd.end()) - est.psd.begin());
    CHECK(est.freq_hz(peak) == doctest::Approx(f0).epsilon(0.01));
}

TEST_CASE("an AR(1) spectrum matches its closed form band-wise") {
    ARModel model;
    model.coeffs = {0.9};
    model.sigma2 = 1.0;
    const auto x = ar_generate(model, 1 << 17, 3, 1000);
    const PsdEstimate est = welch_psd(x, 500.0);
    band_compare(est, model, 500.0, 0.2);

    // low frequencies carry more power than high ones
    CHECK(est.psd[2] > est.psd[est.psd.size() - 2]);
}

TEST_CASE("yule-walker recovers planted autoregressions") {
    SUBCASE("AR(1), a = 0.9") {
        ARModel truth;
        truth.coeffs = {0.9};
        const auto x = ar_generate(truth, 100000, 4, 100);
        const ARModel fit = yule_walker_fit(x, 1);
        CHECK(fit.coeffs[0] > 0.88);
        CHECK(fit.coeffs[0] < 0.92);
        CHECK(fit.sigma2 == doctest::Approx(1.0).epsilon(0.1));
        CHECK(fit.stationary());
    }

    SUBCASE("AR(2), a = (0.5, -0.3)") {
        ARModel truth;
        truth.coeffs = {0.5, -0.3};
        const auto x = ar_generate(truth, 100000, 5, 100);
        const ARModel fit = yule_walker_fit(x, 2);
        CHECK(std::abs(fit.coeffs[0] - 0.5) < 0.03);
        CHECK(std::abs(fit.coeffs[1] + 0.3) < 0.03);
    }

    SUBCASE("white noise fits to nothing") {
        const auto x = white_noise(100000, 6);
        const ARModel fit = yule_walker_fit(x, 1);
        CHECK(std::abs(fit.coeffs[0]) < 0.02);
    }

    SUBCASE("degenerate input") {
        CHECK_THROWS_AS(yule_walker_fit(std::vector<double>(500, 3.25), 2), EstimationError);
        CHECK_THROWS_AS(yule_walker_fit(white_noise(15, 7), 2), InsufficientDataError);
        CHECK_THROWS_AS(yule_walker_fit(white_noise(500, 7), 0), ConfigError);
    }
}

TEST_CASE("every fit is stationary") {
    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const int order = 1 + static_cast<int>(rng.next_below(6));
        std::vector<double> x(static_cast<std::size_t>(10 * order) + 64);
        // arbitrary colored junk: random walk segments + noise
        double acc = 0.0;
        for (auto& v : x) {
            acc = 0.8 * acc + rng.normal();
            v = acc + 0.3 * rng.uniform(-1, 1);
        }
        const ARModel fit = yule_walker_fit(x, order);
        CHECK(fit.stationary());
        CHECK(fit.sigma2 > 0.0);
    }
}

TEST_CASE("stationarity predicate") {
    ARModel m;
    m.coeffs = {0.9};
    CHECK(m.stationary());
    m.coeffs = {1.0};
    CHECK_FALSE(m.stationary());
    m.coeffs = {0.5, -0.3};
    CHECK(m.stationary());
    m.coeffs = {1.2, 0.3};
    CHECK_FALSE(m.stationary());
    m.coeffs = {};
    CHECK(m.stationary());  // white noise is trivially stationary
}

TEST_CASE("ar generation") {
    ARModel model;
    model.coeffs = {0.9};
    model.sigma2 = 1.0;

    SUBCASE("closed-form variance") {
        const auto x = ar_generate(model, 100000, 9, 500);
        CHECK(variance(x) == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(0.1));
    }

    SUBCASE("no coefficients means white output") {
        ARModel white;
        white.sigma2 = 2.0;
        const auto x = ar_generate(white, 50000, 10, 0);
        CHECK(variance(x) == doctest::Approx(2.0).epsilon(0.1));
        const ARModel fit = yule_walker_fit(x, 1);
        CHECK(std::abs(fit.coeffs[0]) < 0.02);
    }

    SUBCASE("determinism and seed sensitivity") {
        const auto a = ar_generate(model, 1000, 11, 100);
        const auto b = ar_generate(model, 1000, 11, 100);
        const auto c = ar_generate(model, 1000, 12, 100);
        CHECK(a == b);
        CHECK(a != c);
    }

    SUBCASE("bad arguments") {
        CHECK_THROWS_AS(ar_generate(model, 100, 1, 9), ConfigError);  // burn_in < 10p
        ARModel unstable;
        unstable.coeffs = {1.1};
        CHECK_THROWS_AS(ar_generate(unstable, 100, 1, 100), ConfigError);
    }
}

TEST_CASE("fit-generate round trip preserves the spectrum to order 6") {
    Rng rng(13);
    const double fs = 200.0;
    for (int order = 1; order <= 6; ++order) {
        const ARModel source = random_ar(rng, order);
        const auto x = ar_generate(source, 1 << 17, static_cast<std::uint64_t>(order) + 20, 1000);
        const ARModel fit = yule_walker_fit(x, order);
        const auto y = ar_generate(fit, 1 << 17, static_cast<std::uint64_t>(order) + 40, 1000);
        const PsdEstimate est = welch_psd(y, fs);
        band_compare(est, source, fs, 0.2);
    }
}

TEST_CASE("map basis bookkeeping") {
    MapBasis poly;
    poly.degree = 2;
    CHECK(poly.size() == 6);
    poly.degree = 4;
    CHECK(poly.size() == 15);
    poly.degree = -1;
    CHECK_THROWS_AS(poly.validate(), ConfigError);

    MapBasis rbf;
    rbf.kind = MapBasis::Kind::Rbf;
    rbf.grid = 5;
    CHECK(rbf.size() == 25);
    rbf.sigma_m = 0.0;
    CHECK_THROWS_AS(rbf.validate(), ConfigError);
    rbf.sigma_m = 0.08;
    rbf.grid = 0;
    CHECK_THROWS_AS(rbf.validate(), ConfigError);
}

TEST_CASE("a planted quadratic field is recovered exactly") {
    const auto field = [](double y, double z) {
        Wrench w;
        w.fy_N = 0.3 + 1.2 * y - 0.7 * z + 0.5 * y * y - 0.3 * y * z + 0.2 * z * z;
        w.fz_N = -0.1 + 0.4 * y + 0.9 * z - 0.2 * y * y + 0.6 * y * z;
        w.taux_Nm = 0.05 - 0.3 * y + 0.15 * z * z;
        return w;
    };
    const auto samples = planted_samples(60, 14, field);
    MapBasis basis;
    basis.degree = 2;
    const MapFit fit = fit_disturbance_map(samples, basis, 1e-9);
    CHECK(fit.rmse_fy < 1e-8);
    CHECK(fit.rmse_fz < 1e-8);
    CHECK(fit.rmse_taux < 1e-8);

    for (const auto& s : samples) {
        const Wrench w = eval_disturbance_map(fit.map, s.y_m, s.z_m);
        CHECK(std::abs(w.fy_N - s.fy_N) < 1e-8);
        CHECK(std::abs(w.fz_N - s.fz_N) < 1e-8);
        CHECK(std::abs(w.taux_Nm - s.taux_Nm) < 1e-8);
    }
}

TEST_CASE("mirror-symmetric data produces an antisymmetric lateral map") {
    Rng rng(15);
    std::vector<WrenchSample> samples;
    for (int i = 0; i < 120; ++i) {
        const double y = rng.uniform(0.0, 0.18);
        const double z = rng.uniform(-0.12, 0.12);
        if (y * y + z * z > 0.19 * 0.19) continue;
        const double fy = rng.uniform(-1, 1);
        const double fz = rng.uniform(-1, 1);
        const double tx = rng.uniform(-0.2, 0.2);
        samples.push_back({y, z, fy, fz, tx});
        samples.push_back({-y, z, -fy, fz, -tx});
    }
    MapBasis basis;  // degree-4 polynomial is closed under y -> -y
    const MapFit fit = fit_disturbance_map(samples, basis, 1e-6);

    for (int i = 0; i < 50; ++i) {
        const double y = rng.uniform(0.0, 0.13);
        const double z = rng.uniform(-0.13, 0.13);
        const Wrench a = eval_disturbance_map(fit.map, y, z);
        const Wrench b = eval_disturbance_map(fit.map, -y, z);
        CHECK(std::abs(a.fy_N + b.fy_N) < 1e-6);
        CHECK(std::abs(a.taux_Nm + b.taux_Nm) < 1e-6);
        CHECK(std::abs(a.fz_N - b.fz_N) < 1e-6);
    }

    // antisymmetry pins the lateral channels to zero on the symmetry axis
    const Wrench mid = eval_disturbance_map(fit.map, 0.0, 0.05);
    CHECK(std::abs(mid.fy_N) < 1e-6);
    CHECK(std::abs(mid.taux_Nm) < 1e-6);
}

TEST_CASE("constant samples give a constant map") {
    const auto samples = planted_samples(50, 16, [](double, double) {
        Wrench w;
        w.fy_N = 0.42;
        w.fz_N = -0.1;
        w.taux_Nm = 0.07;
        return w;
    });
    MapBasis basis;
    basis.degree = 3;
    const MapFit fit = fit_disturbance_map(samples, basis, 1e-9);
    const Wrench at_a = eval_disturbance_map(fit.map, 0.02, -0.05);
    const Wrench at_b = eval_disturbance_map(fit.map, -0.11, 0.09);
    CHECK(at_a.fy_N == doctest::Approx(0.42).epsilon(1e-6));
    CHECK(at_b.fy_N == doctest::Approx(0.42).epsilon(1e-6));
    CHECK(at_a.taux_Nm == doctest::Approx(0.07).epsilon(1e-6));
}

TEST_CASE("stronger ridge never grows the coefficients") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        const auto field = [&](double y, double z) {
            Wrench w;
            w.fy_N = rng.normal() + y * z;
            w.fz_N = rng.normal(0.0, 0.5) + z;
            w.taux_Nm = 0.1 * rng.normal();
            return w;
        };
        const auto samples = planted_samples(45, 18 + static_cast<std::uint64_t>(trial), field);
        MapBasis basis;
        basis.degree = 3;
        double prev = std::numeric_limits<double>::infinity();
        for (const double lambda : {1e-9, 1e-6, 1e-3, 1e-1, 1.0, 10.0}) {
            const MapFit fit = fit_disturbance_map(samples, basis, lambda);
            const double norm = coeff_norm(fit.map);
            CHECK(norm <= prev * (1.0 + 1e-12));
            prev = norm;
        }
    }
}

TEST_CASE("map error paths") {
    const auto field = [](double y, double z) {
        Wrench w;
        w.fy_N = y + z;
        return w;
    };
    MapBasis basis;  // degree 4 -> 15 basis functions -> needs 45 samples

    CHECK_THROWS_AS(fit_disturbance_map(planted_samples(44, 19, field), basis, 1e-6),
                    InsufficientDataError);

    // every sample at one point: rank-deficient without regularization
    std::vector<WrenchSample> stacked(50, WrenchSample{0.05, 0.01, 1.0, 0.5, 0.1});
    CHECK_THROWS_AS(fit_disturbance_map(stacked, basis, 0.0), EstimationError);
    CHECK_NOTHROW(fit_disturbance_map(stacked, basis, 1e-3));

    CHECK_THROWS_AS(fit_disturbance_map(planted_samples(50, 20, field), basis, -1.0), ConfigError);

    const MapFit fit = fit_disturbance_map(planted_samples(50, 21, field), basis, 1e-6);
    CHECK_THROWS_AS(eval_disturbance_map(fit.map, 0.19, 0.19), std::domain_error);
    CHECK_NOTHROW(eval_disturbance_map(fit.map, 0.0, 0.0));
    CHECK_NOTHROW(eval_disturbance_map(fit.map, 0.19, 0.0));  // boundary is inside
}

TEST_CASE("rbf basis fits smooth fields") {
    const auto field = [](double y, double z) {
        Wrench w;
        w.fy_N = std::sin(8.0 * y) * 0.3;
        w.fz_N = std::cos(7.0 * z) * 0.3;
        w.taux_Nm = 0.1 * y * z;
        return w;
    };
    const auto samples = planted_samples(200, 22, field);
    MapBasis basis;
    basis.kind = MapBasis::Kind::Rbf;
    basis.grid = 6;
    basis.sigma_m = 0.08;
    const MapFit fit = fit_disturbance_map(samples, basis, 1e-8);
    CHECK(fit.rmse_fy < 0.01);
    CHECK(fit.rmse_fz < 0.01);

    const Wrench w = eval_disturbance_map(fit.map, 0.05, -0.03);
    CHECK(w.fy_N == doctest::Approx(std::sin(0.4) * 0.3).epsilon(0.1));
}

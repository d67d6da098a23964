#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Position-dependent mean-disturbance map over the duct cross-section,
// fitted by per-channel ridge regression on a polynomial or RBF basis.

namespace evpipe::noise {

struct WrenchSample {
    double y_m = 0.0;
    double z_m = 0.0;
    double fy_N = 0.0;
    double fz_N = 0.0;
    double taux_Nm = 0.0;
};

struct Wrench {
    double fy_N = 0.0;
    double fz_N = 0.0;
    double taux_Nm = 0.0;
};

struct MapBasis {
    enum class Kind { Polynomial, Rbf };

    Kind kind = Kind::Polynomial;
    int degree = 4;        // polynomial: monomials y^i z'^j with i + j <= degree
    int grid = 5;          // rbf: grid x grid Gaussian centers spanning the section
    double sigma_m = 0.08; // rbf width

    std::size_t size() const;
    void validate() const;
};

struct DisturbanceMap {
    MapBasis basis;
    double radius_m = 0.19;    // valid domain: y^2 + (z - center_z)^2 <= radius^2
    double center_z_m = 0.0;
    double lambda = 0.0;
    std::vector<double> coeff_fy;
    std::vector<double> coeff_fz;
    std::vector<double> coeff_taux;
};

struct MapFit {
    DisturbanceMap map;
    double rmse_fy = 0.0;
    double rmse_fz = 0.0;
    double rmse_taux = 0.0;
};

// Needs at least 3x more samples than basis functions; lambda == 0 requires
// a full-rank design.
MapFit fit_disturbance_map(std::span<const WrenchSample> samples, const MapBasis& basis,
                           double lambda, double radius_m = 0.19, double center_z_m = 0.0);

// Throws std::domain_error outside the cross-section.
Wrench eval_disturbance_map(const DisturbanceMap& map, double y_m, double z_m);

}  // namespace evpipe::noise

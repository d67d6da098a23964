#include "evpipe/disturbance_map.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "evpipe/errors.hpp"

namespace evpipe::noise {
namespace {

void basis_row(const MapBasis& basis, double radius_m, double y, double zp, double* out) {
    std::size_t idx = 0;
    if (basis.kind == MapBasis::Kind::Polynomial) {
        for (int i = 0; i <= basis.degree; ++i) {
            double yi = 1.0;
            for (int k = 0; k < i; ++k) yi *= y;
            double zj = 1.0;
            for (int j = 0; i + j <= basis.degree; ++j) {
                out[idx++] = yi * zj;
                zj *= zp;
            }
        }
    } else {
        // Centers on a symmetric grid over [-R, R]^2 so the basis set is
        // closed under y -> -y.
        const int g = basis.grid;
        const double inv_2s2 = 0.5 / (basis.sigma_m * basis.sigma_m);
        for (int iy = 0; iy < g; ++iy) {
            const double cy = g == 1 ? 0.0 : -radius_m + 2.0 * radius_m * iy / (g - 1);
            for (int iz = 0; iz < g; ++iz) {
                const double cz = g == 1 ? 0.0 : -radius_m + 2.0 * radius_m * iz / (g - 1);
                const double d2 = (y - cy) * (y - cy) + (zp - cz) * (zp - cz);
                out[idx++] = std::exp(-d2 * inv_2s2);
            }
        }
    }
}

}  // namespace

std::size_t MapBasis::size() const {
    if (kind == Kind::Polynomial)
        return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2);
    return static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
}

void MapBasis::validate() const {
    if (kind == Kind::Polynomial) {
        if (degree < 0) throw ConfigError("map basis: polynomial degree must be >= 0");
    } else {
        if (grid < 1) throw ConfigError("map basis: rbf grid must be >= 1");
        if (sigma_m <= 0.0) throw ConfigError("map basis: rbf sigma must be positive");
    }
}

MapFit fit_disturbance_map(std::span<const WrenchSample> samples, const MapBasis& basis,
                           double lambda, double radius_m, double center_z_m) {
    basis.validate();
    if (lambda < 0.0) throw ConfigError("fit_disturbance_map: lambda must be >= 0");
    if (radius_m <= 0.0) throw ConfigError("fit_disturbance_map: radius must be positive");
    const std::size_t m = basis.size();
    if (samples.size() < 3 * m)
        throw InsufficientDataError("fit_disturbance_map: need >= 3x basis size (" +
                                    std::to_string(3 * m) + ") samples, got " +
                                    std::to_string(samples.size()));

    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd design(n, cols);
    Eigen::MatrixXd targets(n, 3);
    std::vector<double> row(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const WrenchSample& s = samples[static_cast<std::size_t>(i)];
        basis_row(basis, radius_m, s.y_m, s.z_m - center_z_m, row.data());
        for (Eigen::Index j = 0; j < cols; ++j) design(i, j) = row[static_cast<std::size_t>(j)];
        targets(i, 0) = s.fy_N;
        targets(i, 1) = s.fz_N;
        targets(i, 2) = s.taux_Nm;
    }

    if (lambda == 0.0) {
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < cols)
            throw EstimationError("fit_disturbance_map: rank-deficient design with lambda = 0");
    }

    const Eigen::MatrixXd gram =
        design.transpose() * design + lambda * Eigen::MatrixXd::Identity(cols, cols);
    const Eigen::MatrixXd coeffs = gram.ldlt().solve(design.transpose() * targets);
    const Eigen::MatrixXd residual = design * coeffs - targets;

    MapFit fit;
    fit.map.basis = basis;
    fit.map.radius_m = radius_m;
    fit.map.center_z_m = center_z_m;
    fit.map.lambda = lambda;
    fit.map.coeff_fy.assign(coeffs.col(0).data(), coeffs.col(0).data() + cols);
    fit.map.coeff_fz.assign(coeffs.col(1).data(), coeffs.col(1).data() + cols);
    fit.map.coeff_taux.assign(coeffs.col(2).data(), coeffs.col(2).data() + cols);
    fit.rmse_fy = std::sqrt(residual.col(0).squaredNorm() / static_cast<double>(n));
    fit.rmse_fz = std::sqrt(residual.col(1).squaredNorm() / static_cast<double>(n));
    fit.rmse_taux = std::sqrt(residual.col(2).squaredNorm() / static_cast<double>(n));
    return fit;
}

Wrench eval_disturbance_map(const DisturbanceMap& map, double y_m, double z_m) {
    map.basis.validate();
    const std::size_t m = map.basis.size();
    if (map.coeff_fy.size() != m || map.coeff_fz.size() != m || map.coeff_taux.size() != m)
        throw ConfigError("eval_disturbance_map: coefficient count does not match basis");
    const double zp = z_m - map.center_z_m;
    if (y_m * y_m + zp * zp > map.radius_m * map.radius_m * (1.0 + 1e-12))
        throw std::domain_error("eval_disturbance_map: point outside the cross-section");

    std::vector<double> row(m);
    basis_row(map.basis, map.radius_m, y_m, zp, row.data());
    Wrench w;
    for (std::size_t i = 0; i < m; ++i) {
        w.fy_N += row[i] * map.coeff_fy[i];
        w.fz_N += row[i] * map.coeff_fz[i];
        w.taux_Nm += row[i] * map.coeff_taux[i];
    }
    return w;
}

}  // namespace evpipe::noise

#include "evpipe/camera.hpp"

#include <cmath>

#include "evpipe/errors.hpp"

namespace evpipe::mocap {

void CameraModel::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw ConfigError("camera: focal lengths must be positive");
    if (kind == Kind::DoubleSphere && (alpha < 0.0 || alpha >= 1.0))
        throw ConfigError("camera: alpha must lie in [0, 1)");
}

std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Eigen::Vector3d& p) {
    if (cam.kind == CameraModel::Kind::Pinhole) {
        if (p.z() <= 0.0) return std::nullopt;
        return Eigen::Vector2d(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
    }

    const double d1 = p.norm();
    const double zs = cam.xi * d1 + p.z();
    const double d2 = std::sqrt(p.x() * p.x() + p.y() * p.y() + zs * zs);

    // Validity: z > -w2 * d1 with the standard w2 derived from (xi, alpha).
    const double w1 = cam.alpha <= 0.5 ? cam.alpha / (1.0 - cam.alpha) : (1.0 - cam.alpha) / cam.alpha;
    const double w2 = (w1 + cam.xi) / std::sqrt(2.0 * w1 * cam.xi + cam.xi * cam.xi + 1.0);
    if (p.z() <= -w2 * d1) return std::nullopt;

    const double denom = cam.alpha * d2 + (1.0 - cam.alpha) * zs;
    if (denom <= 0.0) return std::nullopt;
    return Eigen::Vector2d(cam.fx * p.x() / denom + cam.cx, cam.fy * p.y() / denom + cam.cy);
}

std::optional<Eigen::Vector3d> unproject(const CameraModel& cam, const Eigen::Vector2d& uv) {
    const double mx = (uv.x() - cam.cx) / cam.fx;
    const double my = (uv.y() - cam.cy) / cam.fy;

    if (cam.kind == CameraModel::Kind::Pinhole)
        return Eigen::Vector3d(mx, my, 1.0).normalized();

    const double r2 = mx * mx + my * my;
    if (cam.alpha > 0.5 && r2 > 1.0 / (2.0 * cam.alpha - 1.0)) return std::nullopt;

    const double mz_num = 1.0 - cam.alpha * cam.alpha * r2;
    const double mz_den = cam.alpha * std::sqrt(1.0 - (2.0 * cam.alpha - 1.0) * r2) + 1.0 - cam.alpha;
    const double mz = mz_num / mz_den;

    const double factor =
        (mz * cam.xi + std::sqrt(mz * mz + (1.0 - cam.xi * cam.xi) * r2)) / (mz * mz + r2);
    const Eigen::Vector3d ray(factor * mx, factor * my, factor * mz - cam.xi);
    return ray.normalized();
}

}  // namespace evpipe::mocap

// camera.hpp - pinhole and double-sphere projection models.
//
// The double-sphere model follows the standard two-sphere closed form with
// parameters (xi, alpha); with xi = 0 and alpha = 0 it degenerates exactly to
// the pinhole model. project() returns nullopt for points outside the model's
// validity region ("behind" the camera); unproject() returns nullopt for
// pixels outside the valid image region.

#pragma once

#include <Eigen/Core>
#include <optional>

namespace evpipe::mocap {

struct CameraModel {
    enum class Kind { Pinhole, DoubleSphere };

    Kind kind = Kind::Pinhole;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double xi = 0.0;     // double-sphere only
    double alpha = 0.0;  // double-sphere only, in [0, 1)
    int width = 0;       // optional image bounds, 0 = unknown
    int height = 0;

    void validate() const;
};

std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Eigen::Vector3d& p);

// Unit-norm ray through the pixel; projecting it back lands within 1e-6 px.
std::optional<Eigen::Vector3d> unproject(const CameraModel& cam, const Eigen::Vector2d& uv);

}  // namespace evpipe::mocap

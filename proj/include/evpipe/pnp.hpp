// pnp.hpp - pose estimation from 3D-2D correspondences and static pose-noise
// statistics.
//
// solve_pnp minimizes the sum of squared reprojection errors with damped
// Gauss-Newton on SE(3). Without a prior it refines from seven rotation seeds
// (identity plus +/-90 degrees about each axis) and keeps the best; a prior
// pose replaces the seed set.

#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "evpipe/camera.hpp"

namespace evpipe::mocap {

struct Pose {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return R * p + t; }
};

struct Correspondence {
    Eigen::Vector3d object;  // body frame, meters
    Eigen::Vector2d image;   // px
};

struct PnpResult {
    Pose pose;
    double rmse_px = 0.0;
    int iterations = 0;
};

PnpResult solve_pnp(std::span<const Correspondence> points, const CameraModel& cam,
                    const Pose* prior = nullptr);

// Reprojection RMSE of a given pose (sqrt of mean squared 2-vector residual
// norm); points that fail to project count as misses with a large penalty.
double reprojection_rmse(const Pose& pose, std::span<const Correspondence> points,
                         const CameraModel& cam);

struct PoseNoiseStats {
    double sigma_x = 0.0;  // translation std devs, meters
    double sigma_y = 0.0;
    double sigma_z = 0.0;
    double sigma_rot_rad = 0.0;  // std dev of angle to the chordal mean rotation
};

// Requires >= 100 samples (throws InsufficientDataError otherwise).
PoseNoiseStats pose_noise_analysis(std::span<const Pose> poses);

}  // namespace evpipe::mocap

#include "evpipe/pnp.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "evpipe/errors.hpp"

namespace evpipe::mocap {
namespace {

constexpr double kMissPenaltyPx = 1e4;
constexpr int kMaxIters = 50;
constexpr double kStepTol = 1e-10;

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
    const double angle = w.norm();
    if (angle < 1e-14) {
        Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
        r(0, 1) = -w.z();
        r(1, 0) = w.z();
        r(0, 2) = w.y();
        r(2, 0) = -w.y();
        r(1, 2) = -w.x();
        r(2, 1) = w.x();
        return r;
    }
    return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

// Residual vector (2N), misses padded with the penalty so seeds that put
// points behind the camera lose against any seed with full visibility.
bool residuals(const Pose& pose, std::span<const Correspondence> pts, const CameraModel& cam,
               Eigen::VectorXd& r) {
    bool all_visible = true;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto uv = project(cam, pose.apply(pts[i].object));
        if (uv) {
            r(2 * i) = uv->x() - pts[i].image.x();
            r(2 * i + 1) = uv->y() - pts[i].image.y();
        } else {
            r(2 * i) = kMissPenaltyPx;
            r(2 * i + 1) = kMissPenaltyPx;
            all_visible = false;
        }
    }
    return all_visible;
}

struct RefineOutcome {
    Pose pose;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// Damped Gauss-Newton with a left-multiplicative rotation increment.
// Jacobians are central finite differences in the 6 tangent coordinates.
RefineOutcome refine(Pose pose, std::span<const Correspondence> pts, const CameraModel& cam) {
    const std::size_t n = pts.size();
    Eigen::VectorXd r(2 * n);
    Eigen::VectorXd r_plus(2 * n), r_minus(2 * n);
    Eigen::MatrixXd jac(2 * n, 6);

    residuals(pose, pts, cam, r);
    double cost = r.squaredNorm();
    double lambda = 1e-4;
    RefineOutcome out;

    int iter = 0;
    for (; iter < kMaxIters; ++iter) {
        constexpr double h = 1e-6;
        for (int k = 0; k < 6; ++k) {
            Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
            d(k) = h;
            Pose p_plus{rodrigues(d.head<3>()) * pose.R, pose.t + d.tail<3>()};
            Pose p_minus{rodrigues(-d.head<3>()) * pose.R, pose.t - d.tail<3>()};
            residuals(p_plus, pts, cam, r_plus);
            residuals(p_minus, pts, cam, r_minus);
            jac.col(k) = (r_plus - r_minus) / (2.0 * h);
        }

        const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
        const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r;

        bool stepped = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::Matrix<double, 6, 6> damped = jtj;
            damped.diagonal().array() += lambda;
            const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-jtr);
            Pose trial{orthonormalize(rodrigues(step.head<3>()) * pose.R), pose.t + step.tail<3>()};
            residuals(trial, pts, cam, r_plus);
            const double trial_cost = r_plus.squaredNorm();
            if (trial_cost < cost) {
                pose = trial;
                r = r_plus;
                cost = trial_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (step.norm() < kStepTol) {
                    out.converged = true;
                    ++iter;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped || out.converged) {
            out.converged = out.converged || !stepped;
            break;
        }
    }

    out.pose = pose;
    out.cost = cost;
    out.iterations = iter;
    return out;
}

// Rough depth/translation seed: place the object centroid on the ray through
// the image centroid at a depth matching apparent size.
Pose seed_pose(const Eigen::Matrix3d& r0, std::span<const Correspondence> pts, const CameraModel& cam) {
    Eigen::Vector3d c_obj = Eigen::Vector3d::Zero();
    Eigen::Vector2d c_img = Eigen::Vector2d::Zero();
    for (const auto& p : pts) {
        c_obj += p.object;
        c_img += p.image;
    }
    c_obj /= static_cast<double>(pts.size());
    c_img /= static_cast<double>(pts.size());

    double rho_obj = 0.0, rho_img = 0.0;
    for (const auto& p : pts) {
        rho_obj += (p.object - c_obj).squaredNorm();
        rho_img += (p.image - c_img).squaredNorm();
    }
    rho_obj = std::sqrt(rho_obj / static_cast<double>(pts.size()));
    rho_img = std::sqrt(rho_img / static_cast<double>(pts.size()));

    const double f = 0.5 * (cam.fx + cam.fy);
    const double depth = rho_img > 1e-9 ? std::max(f * rho_obj / rho_img, 0.05) : 1.0;
    const auto ray = unproject(cam, c_img);
    const Eigen::Vector3d center = ray ? (*ray * depth / std::max(ray->z(), 0.1)).eval()
                                       : Eigen::Vector3d(0, 0, depth);
    return Pose{r0, center - r0 * c_obj};
}

}  // namespace

double reprojection_rmse(const Pose& pose, std::span<const Correspondence> points,
                         const CameraModel& cam) {
    Eigen::VectorXd r(2 * points.size());
    residuals(pose, points, cam, r);
    return std::sqrt(r.squaredNorm() / static_cast<double>(points.size()));
}

PnpResult solve_pnp(std::span<const Correspondence> points, const CameraModel& cam,
                    const Pose* prior) {
    cam.validate();
    if (points.size() < 4)
        throw std::invalid_argument("solve_pnp: need at least 4 correspondences, got " +
                                    std::to_string(points.size()));

    // Collinear object points leave a rotation about the common axis
    // unobservable.
    {
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        for (const auto& p : points) c += p.object;
        c /= static_cast<double>(points.size());
        Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
        for (const auto& p : points) scatter += (p.object - c) * (p.object - c).transpose();
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
        if (eig.eigenvalues()(1) < 1e-12 * std::max(eig.eigenvalues()(2), 1e-30))
            throw EstimationError("solve_pnp: degenerate geometry (object points collinear)");
    }

    std::vector<Pose> seeds;
    if (prior) {
        seeds.push_back(*prior);
    } else {
        seeds.push_back(seed_pose(Eigen::Matrix3d::Identity(), points, cam));
        for (int axis = 0; axis < 3; ++axis) {
            for (const double sign : {1.0, -1.0}) {
                const Eigen::Matrix3d r0 =
                    Eigen::AngleAxisd(sign * std::numbers::pi / 2.0, Eigen::Vector3d::Unit(axis))
                        .toRotationMatrix();
                seeds.push_back(seed_pose(r0, points, cam));
            }
        }
    }

    RefineOutcome best;
    for (const Pose& seed : seeds) {
        const RefineOutcome outcome = refine(seed, points, cam);
        if (outcome.cost < best.cost) best = outcome;
    }

    if (!std::isfinite(best.cost))
        throw EstimationError("solve_pnp: refinement failed to produce a finite cost");
    const double rmse = std::sqrt(best.cost / static_cast<double>(points.size()));
    if (rmse >= kMissPenaltyPx)
        throw EstimationError("solve_pnp: no seed converged (rmse " + std::to_string(rmse) + " px)");

    PnpResult result;
    result.pose = best.pose;
    result.pose.R = orthonormalize(result.pose.R);
    result.rmse_px = rmse;
    result.iterations = best.iterations;
    return result;
}

PoseNoiseStats pose_noise_analysis(std::span<const Pose> poses) {
    if (poses.size() < 100)
        throw InsufficientDataError("pose_noise_analysis: need >= 100 poses, got " +
                                    std::to_string(poses.size()));
    const double n = static_cast<double>(poses.size());

    Eigen::Vector3d mean_t = Eigen::Vector3d::Zero();
    for (const auto& p : poses) mean_t += p.t;
    mean_t /= n;
    Eigen::Vector3d var_t = Eigen::Vector3d::Zero();
    for (const auto& p : poses) var_t += (p.t - mean_t).cwiseAbs2();
    var_t /= (n - 1.0);

    // Chordal mean rotation: projection of the summed matrices onto SO(3).
    Eigen::Matrix3d sum_r = Eigen::Matrix3d::Zero();
    for (const auto& p : poses) sum_r += p.R;
    const Eigen::Matrix3d mean_r = orthonormalize(sum_r);

    double var_angle = 0.0;
    for (const auto& p : poses) {
        const double c = ((mean_r.transpose() * p.R).trace() - 1.0) * 0.5;
        const double angle = std::acos(std::clamp(c, -1.0, 1.0));
        var_angle += angle * angle;
    }
    var_angle /= (n - 1.0);

    PoseNoiseStats stats;
    stats.sigma_x = std::sqrt(var_t.x());
    stats.sigma_y = std::sqrt(var_t.y());
    stats.sigma_z = std::sqrt(var_t.z());
    stats.sigma_rot_rad = std::sqrt(var_angle);
    return stats;
}

}  // namespace evpipe::mocap

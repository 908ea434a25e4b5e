#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "photocal/image.hpp"
#include "photocal/se3.hpp"
#include "photocal/synth.hpp"

namespace photocal {

// Residual bookkeeping: entry counts and variances of the photometric
// (intensity^2) and geometric (px^2) terms.
struct ResidualStats {
    long n_p = 0;
    long n_g = 0;
    double sigma_p2 = 0.0;
    double sigma_g2 = 0.0;
};

struct PyramidContext {
    int level = 0;     // 0 = finest
    int n_inliers = 0; // current inlier geometric match count
};

struct PhotoPoint {
    double u = 0.0, v = 0.0;  // reference pixel
    double inv_depth = 0.0;   // > 0
};

struct GeoKeypoint {
    Eigen::Vector3d point_ref;   // 3-D point in the reference camera frame
    Eigen::Vector2d observed;    // perceived position in the target image (px)
};

// One alignment problem: reference irradiance + sparse inverse depths,
// target irradiance, keypoint observations. Images in [0,1]; residuals are
// reported on the 0..255 intensity scale.
struct SceneObservation {
    Camera cam;
    Image<double> reference;
    Image<double> target;
    std::vector<PhotoPoint> points;
    std::vector<GeoKeypoint> keypoints;
};

// DSO-style 8-point residual spread pattern.
inline constexpr int kPatternSize = 8;
inline constexpr int kPattern[kPatternSize][2] = {{0, 0},  {-2, 0}, {2, 0},  {0, -2},
                                                  {0, 2},  {-1, -1}, {1, 1}, {-1, 1}};

// Per point and pattern offset: I_target(warp(p)) - I_ref(p). Points whose
// warp leaves the target are dropped and counted in dropped (if given).
std::vector<double> photometric_residuals(const SceneObservation& obs, const PoseSE3& pose,
                                          int* dropped = nullptr);

// Per keypoint: predicted projection minus observed position (2 entries per
// keypoint). Keypoints behind the camera are excluded and counted.
std::vector<Eigen::Vector2d> geometric_residuals(const SceneObservation& obs,
                                                 const PoseSE3& pose, int* excluded = nullptr);

// K = 5 e^{-2l} / (1 + e^{(30 - N_g)/4}).
double utility_k(const PyramidContext& ctx);

// Half-quadratic Huber penalty: r^2/2 below delta, delta(|r| - delta/2) above.
double huber_penalty(double r, double delta);

struct JointEnergyConfig {
    double delta_p = 9.0;  // intensity levels
    double delta_g = 3.0;  // px
};

// e = sum rho(e_p) / (n_p sigma_p^2) + K sum rho(|e_g|) / (n_g sigma_g^2).
// The geometric Huber penalty is applied to each keypoint's residual norm.
double joint_energy(const SceneObservation& obs, const PoseSE3& pose,
                    const ResidualStats& stats, const PyramidContext& ctx,
                    const JointEnergyConfig& cfg = {});

// Analytic gradient of joint_energy in the tangent increment xi at the given
// pose, with stats and K held fixed (matches central finite differences away
// from Huber kinks).
Vector6d joint_energy_gradient(const SceneObservation& obs, const PoseSE3& pose,
                               const ResidualStats& stats, const PyramidContext& ctx,
                               const JointEnergyConfig& cfg = {});

struct OptimizeConfig {
    int pyramid_levels = 4;
    int max_iterations = 50;          // per level
    double step_tolerance = 1e-8;
    double delta_p = 9.0;
    double delta_g = 3.0;
    int max_damping_retries = 12;
};

struct ConvergenceReport {
    bool converged = false;
    std::vector<std::string> lines;  // `level l iter i energy E K k n_g N`

    std::string text() const;
};

struct OptimizeResult {
    PoseSE3 pose;
    ResidualStats stats;
    ConvergenceReport report;
};

// Coarse-to-fine IRLS on the joint energy; K is recomputed from (level,
// current inlier count) every iteration. On divergence the best pose seen is
// returned with converged = false.
OptimizeResult optimize_pose(const SceneObservation& obs, const PoseSE3& initial,
                             const OptimizeConfig& cfg = {});

}  // namespace photocal

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "photocal/se3.hpp"

namespace photocal {

struct TrajectorySample {
    double timestamp = 0.0;
    PoseSE3 pose;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;  // timestamps strictly increasing
};

enum class AlignMode { Rigid, Similarity };

struct Alignment {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return scale * (rotation * p) + translation;
    }
};

// Closed-form least-squares alignment of the estimate onto the reference
// over timestamp-associated samples. Throws AlignmentError on fewer than 3
// or collinear correspondences.
struct AlignedTrajectory {
    Alignment transform;
    Trajectory estimate;  // transformed copy
};

AlignedTrajectory align_trajectories(const Trajectory& estimate, const Trajectory& reference,
                                     AlignMode mode, double time_tolerance = 0.02);

// RMS of translational differences over associated samples.
double ate_rmse(const Trajectory& aligned, const Trajectory& reference,
                double time_tolerance = 0.02);

struct DriftErrors {
    double rotation_deg = 0.0;
    double translation_pct = 0.0;  // relative to reference path length
};

// Accumulated drift: discrepancy between the estimated and reference
// start-to-end relative poses, after alignment. Approximates the
// benchmark-style loop alignment error with single-pose end segments.
DriftErrors drift_errors(const Trajectory& estimate, const Trajectory& reference,
                         AlignMode mode = AlignMode::Similarity,
                         double time_tolerance = 0.02);

}  // namespace photocal

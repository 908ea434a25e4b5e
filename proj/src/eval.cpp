#include "photocal/eval.hpp"

#include <algorithm>
#include <cmath>

#include "photocal/errors.hpp"

namespace photocal {

namespace {

// Index pairs (estimate, reference) associated by nearest timestamp.
std::vector<std::pair<size_t, size_t>> associate(const Trajectory& estimate,
                                                 const Trajectory& reference,
                                                 double tolerance) {
    std::vector<std::pair<size_t, size_t>> out;
    size_t j = 0;
    for (size_t i = 0; i < estimate.samples.size(); ++i) {
        const double t = estimate.samples[i].timestamp;
        while (j + 1 < reference.samples.size() &&
               std::abs(reference.samples[j + 1].timestamp - t) <=
                   std::abs(reference.samples[j].timestamp - t))
            ++j;
        if (j < reference.samples.size() &&
            std::abs(reference.samples[j].timestamp - t) <= tolerance)
            out.emplace_back(i, j);
    }
    return out;
}

}  // namespace

AlignedTrajectory align_trajectories(const Trajectory& estimate, const Trajectory& reference,
                                     AlignMode mode, double time_tolerance) {
    const auto assoc = associate(estimate, reference, time_tolerance);
    if (assoc.size() < 3)
        throw AlignmentError("align_trajectories: fewer than 3 associated samples");

    Eigen::Matrix3Xd src(3, assoc.size()), dst(3, assoc.size());
    for (size_t k = 0; k < assoc.size(); ++k) {
        src.col(k) = estimate.samples[assoc[k].first].pose.translation();
        dst.col(k) = reference.samples[assoc[k].second].pose.translation();
    }

    // Collinearity check on the centered source points.
    const Eigen::Vector3d mean = src.rowwise().mean();
    const Eigen::Matrix3Xd centered = src.colwise() - mean;
    const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
    if (svd.singularValues()(1) < 1e-9 * std::max(svd.singularValues()(0), 1.0))
        throw AlignmentError("align_trajectories: correspondences are collinear");

    const Eigen::Matrix4d T =
        Eigen::umeyama(src, dst, mode == AlignMode::Similarity);
    Alignment a;
    const Eigen::Matrix3d sR = T.topLeftCorner<3, 3>();
    a.scale = mode == AlignMode::Similarity ? std::cbrt(sR.determinant()) : 1.0;
    a.rotation = sR / a.scale;
    a.translation = T.topRightCorner<3, 1>();

    AlignedTrajectory out;
    out.transform = a;
    out.estimate.samples.reserve(estimate.samples.size());
    for (const auto& s : estimate.samples)
        out.estimate.samples.push_back(
            {s.timestamp,
             PoseSE3(a.rotation * s.pose.rotation(), a.apply(s.pose.translation()))});
    return out;
}

double ate_rmse(const Trajectory& aligned, const Trajectory& reference, double time_tolerance) {
    const auto assoc = associate(aligned, reference, time_tolerance);
    if (assoc.empty()) throw AlignmentError("ate_rmse: no associated samples");
    double sum = 0.0;
    for (const auto& [i, j] : assoc)
        sum += (aligned.samples[i].pose.translation() -
                reference.samples[j].pose.translation())
                   .squaredNorm();
    return std::sqrt(sum / assoc.size());
}

DriftErrors drift_errors(const Trajectory& estimate, const Trajectory& reference,
                         AlignMode mode, double time_tolerance) {
    const auto aligned = align_trajectories(estimate, reference, mode, time_tolerance);
    const auto assoc = associate(aligned.estimate, reference, time_tolerance);
    if (assoc.size() < 2) throw AlignmentError("drift_errors: need at least 2 associations");

    const auto& est_start = aligned.estimate.samples[assoc.front().first].pose;
    const auto& est_end = aligned.estimate.samples[assoc.back().first].pose;
    const auto& ref_start = reference.samples[assoc.front().second].pose;
    const auto& ref_end = reference.samples[assoc.back().second].pose;

    const PoseSE3 rel_est = est_start.inverse() * est_end;
    const PoseSE3 rel_ref = ref_start.inverse() * ref_end;
    const PoseSE3 discrepancy = rel_ref.inverse() * rel_est;

    double path_length = 0.0;
    for (size_t k = 1; k < assoc.size(); ++k)
        path_length += (reference.samples[assoc[k].second].pose.translation() -
                        reference.samples[assoc[k - 1].second].pose.translation())
                           .norm();

    DriftErrors out;
    out.rotation_deg = discrepancy.rotation_angle() * 180.0 / M_PI;
    out.translation_pct =
        path_length > 1e-12 ? 100.0 * discrepancy.translation().norm() / path_length : 0.0;
    return out;
}

}  // namespace photocal

#include <cmath>
#include <random>

#include "doctest.h"
#include "photocal/eval.hpp"

using namespace photocal;

namespace {

Trajectory random_trajectory(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Trajectory t;
    Eigen::Vector3d p(0, 0, 0);
    for (int i = 0; i < n; ++i) {
        p += 0.3 * Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
        const Eigen::Vector3d axis = Eigen::Vector3d(nd(rng), nd(rng), nd(rng)).normalized();
        const Eigen::Matrix3d R = Eigen::AngleAxisd(0.1 * i, axis).toRotationMatrix();
        t.samples.push_back({0.05 * i, PoseSE3(R, p)});
    }
    return t;
}

Trajectory transformed(const Trajectory& src, double scale, const Eigen::Matrix3d& R,
                       const Eigen::Vector3d& t) {
    Trajectory out;
    for (const auto& s : src.samples)
        out.samples.push_back(
            {s.timestamp,
             PoseSE3(R * s.pose.rotation(), scale * (R * s.pose.translation()) + t)});
    return out;
}

}  // namespace

TEST_CASE("alignment recovers a known similarity transform") {
    const Trajectory ref = random_trajectory(40, 3);
    const double scale = 1.7;
    const Eigen::Matrix3d R =
        Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 2, -1).normalized()).toRotationMatrix();
    const Eigen::Vector3d t(0.4, -2.0, 1.1);
    // The estimate is the reference pushed through the transform; alignment
    // must find the exact inverse.
    const Trajectory est = transformed(ref, scale, R, t);

    const AlignedTrajectory aligned = align_trajectories(est, ref, AlignMode::Similarity);
    CHECK(aligned.transform.scale == doctest::Approx(1.0 / scale).epsilon(1e-9));
    CHECK(ate_rmse(aligned.estimate, ref) == doctest::Approx(0.0).epsilon(1e-9));

    // Rigid alignment cannot absorb the scale.
    const AlignedTrajectory rigid = align_trajectories(est, ref, AlignMode::Rigid);
    CHECK(rigid.transform.scale == 1.0);
    CHECK(ate_rmse(rigid.estimate, ref) > 0.1);
}

TEST_CASE("ate_rmse matches a brute-force evaluation") {
    const Trajectory ref = random_trajectory(30, 4);
    Trajectory est = ref;
    std::mt19937 rng(5);
    std::normal_distribution<double> nd(0.0, 0.1);
    for (auto& s : est.samples) {
        const Eigen::Vector3d jitter(nd(rng), nd(rng), nd(rng));
        s.pose = PoseSE3(s.pose.rotation(), s.pose.translation() + jitter);
    }
    double brute = 0.0;
    for (size_t i = 0; i < ref.samples.size(); ++i)
        brute +=
            (est.samples[i].pose.translation() - ref.samples[i].pose.translation()).squaredNorm();
    brute = std::sqrt(brute / static_cast<double>(ref.samples.size()));
    CHECK(ate_rmse(est, ref) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("association respects the time tolerance") {
    const Trajectory ref = random_trajectory(20, 6);
    Trajectory est = ref;
    for (auto& s : est.samples) s.timestamp += 100.0;  // no sample associates
    CHECK_THROWS_AS(align_trajectories(est, ref, AlignMode::Similarity), AlignmentError);
    // With a generous tolerance the samples associate again.
    CHECK_NOTHROW(align_trajectories(est, ref, AlignMode::Similarity, 1000.0));
}

TEST_CASE("alignment needs at least three non-collinear samples") {
    Trajectory a, b;
    for (int i = 0; i < 2; ++i) {
        a.samples.push_back({0.1 * i, PoseSE3()});
        b.samples.push_back({0.1 * i, PoseSE3()});
    }
    CHECK_THROWS_AS(align_trajectories(a, b, AlignMode::Rigid), AlignmentError);
}

TEST_CASE("drift is zero for a perfect estimate and positive for a corrupted one") {
    const Trajectory ref = random_trajectory(25, 7);
    const DriftErrors none = drift_errors(ref, ref);
    CHECK(none.rotation_deg == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(none.translation_pct == doctest::Approx(0.0).epsilon(1e-9));

    Trajectory est = ref;
    auto& last = est.samples.back();
    const Eigen::Matrix3d twist =
        Eigen::AngleAxisd(0.05, Eigen::Vector3d::UnitY()).toRotationMatrix();
    last.pose = PoseSE3(twist * last.pose.rotation(),
                        last.pose.translation() + Eigen::Vector3d(0.5, 0, 0));
    const DriftErrors some = drift_errors(est, ref);
    CHECK(some.rotation_deg > 0.5);
    CHECK(some.translation_pct > 0.0);
}

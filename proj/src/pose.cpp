#include "photocal/pose.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace photocal {

namespace {

constexpr double kMinDepth = 0.01;

struct PhotoEntry {
    double residual;
    Eigen::Matrix<double, 1, 6> J;
};

struct GeoEntry {
    Eigen::Vector2d residual;
    Eigen::Matrix<double, 2, 6> J;
};

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Eigen::Vector3d& X) {
    const double iz = 1.0 / X.z();
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx * iz, 0.0, -cam.fx * X.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * X.y() * iz * iz;
    return J;
}

// Photometric entries with Jacobians; dropped counts invalid pattern entries.
std::vector<PhotoEntry> eval_photometric(const SceneObservation& obs, const PoseSE3& pose,
                                         int* dropped, bool with_jacobian) {
    std::vector<PhotoEntry> entries;
    entries.reserve(obs.points.size() * kPatternSize);
    int n_dropped = 0;
    const double border = 1.0;
    for (const auto& pt : obs.points) {
        for (int k = 0; k < kPatternSize; ++k) {
            const double u = pt.u + kPattern[k][0];
            const double v = pt.v + kPattern[k][1];
            if (!obs.reference.inside(u, v, border)) {
                ++n_dropped;
                continue;
            }
            const Eigen::Vector3d X(( u - obs.cam.cx) / obs.cam.fx / pt.inv_depth,
                                    (v - obs.cam.cy) / obs.cam.fy / pt.inv_depth,
                                    1.0 / pt.inv_depth);
            const Eigen::Vector3d Xp = pose * X;
            if (Xp.z() < kMinDepth) {
                ++n_dropped;
                continue;
            }
            const double up = obs.cam.fx * Xp.x() / Xp.z() + obs.cam.cx;
            const double vp = obs.cam.fy * Xp.y() / Xp.z() + obs.cam.cy;
            if (!obs.target.inside(up, vp, border)) {
                ++n_dropped;
                continue;
            }
            PhotoEntry e;
            e.residual = 255.0 * (obs.target.bilinear(up, vp) - obs.reference.bilinear(u, v));
            if (with_jacobian) {
                const auto [gx, gy] = obs.target.bilinear_grad(up, vp);
                Eigen::Matrix<double, 1, 2> gI;
                gI << 255.0 * gx, 255.0 * gy;
                Eigen::Matrix<double, 3, 6> Jse3;
                Jse3.leftCols<3>() = Eigen::Matrix3d::Identity();
                Jse3.rightCols<3>() = -PoseSE3::hat(Xp);
                e.J = gI * projection_jacobian(obs.cam, Xp) * Jse3;
            } else {
                e.J.setZero();
            }
            entries.push_back(e);
        }
    }
    if (dropped) *dropped = n_dropped;
    return entries;
}

std::vector<GeoEntry> eval_geometric(const SceneObservation& obs, const PoseSE3& pose,
                                     int* excluded, bool with_jacobian) {
    std::vector<GeoEntry> entries;
    entries.reserve(obs.keypoints.size());
    int n_excluded = 0;
    for (const auto& kp : obs.keypoints) {
        const Eigen::Vector3d Xp = pose * kp.point_ref;
        if (Xp.z() < kMinDepth) {
            ++n_excluded;
            continue;
        }
        GeoEntry e;
        e.residual = Eigen::Vector2d(obs.cam.fx * Xp.x() / Xp.z() + obs.cam.cx,
                                     obs.cam.fy * Xp.y() / Xp.z() + obs.cam.cy) -
                     kp.observed;
        if (with_jacobian) {
            Eigen::Matrix<double, 3, 6> Jse3;
            Jse3.leftCols<3>() = Eigen::Matrix3d::Identity();
            Jse3.rightCols<3>() = -PoseSE3::hat(Xp);
            e.J = projection_jacobian(obs.cam, Xp) * Jse3;
        } else {
            e.J.setZero();
        }
        entries.push_back(e);
    }
    if (excluded) *excluded = n_excluded;
    return entries;
}

double huber_weight(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 1.0 : delta / a;
}

}  // namespace

std::vector<double> photometric_residuals(const SceneObservation& obs, const PoseSE3& pose,
                                          int* dropped) {
    const auto entries = eval_photometric(obs, pose, dropped, false);
    if (entries.empty())
        throw EmptyResidualError("photometric_residuals: no valid projections");
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.residual);
    return out;
}

std::vector<Eigen::Vector2d> geometric_residuals(const SceneObservation& obs,
                                                 const PoseSE3& pose, int* excluded) {
    if (obs.keypoints.empty()) throw DomainError("geometric_residuals: empty keypoint set");
    const auto entries = eval_geometric(obs, pose, excluded, false);
    std::vector<Eigen::Vector2d> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.residual);
    return out;
}

double utility_k(const PyramidContext& ctx) {
    return 5.0 * std::exp(-2.0 * ctx.level) /
           (1.0 + std::exp((30.0 - ctx.n_inliers) / 4.0));
}

double huber_penalty(double r, double delta) {
    const double a = std::abs(r);
    if (a <= delta) return 0.5 * r * r;
    return delta * (a - 0.5 * delta);
}

namespace {

double energy_from_entries(const std::vector<PhotoEntry>& pe, const std::vector<GeoEntry>& ge,
                           const ResidualStats& stats, double K,
                           const JointEnergyConfig& cfg) {
    if (stats.n_p == 0 && stats.n_g == 0)
        throw EmptyResidualError("joint_energy: zero counts on both terms");
    double e = 0.0;
    if (stats.n_p > 0 && stats.sigma_p2 > 0.0) {
        double sum = 0.0;
        for (const auto& r : pe) sum += huber_penalty(r.residual, cfg.delta_p);
        e += sum / (stats.n_p * stats.sigma_p2);
    }
    if (stats.n_g > 0 && stats.sigma_g2 > 0.0) {
        double sum = 0.0;
        for (const auto& r : ge) sum += huber_penalty(r.residual.norm(), cfg.delta_g);
        e += K * sum / (stats.n_g * stats.sigma_g2);
    }
    return e;
}

}  // namespace

double joint_energy(const SceneObservation& obs, const PoseSE3& pose,
                    const ResidualStats& stats, const PyramidContext& ctx,
                    const JointEnergyConfig& cfg) {
    const auto pe = eval_photometric(obs, pose, nullptr, false);
    const auto ge = eval_geometric(obs, pose, nullptr, false);
    return energy_from_entries(pe, ge, stats, utility_k(ctx), cfg);
}

Vector6d joint_energy_gradient(const SceneObservation& obs, const PoseSE3& pose,
                               const ResidualStats& stats, const PyramidContext& ctx,
                               const JointEnergyConfig& cfg) {
    const auto pe = eval_photometric(obs, pose, nullptr, true);
    const auto ge = eval_geometric(obs, pose, nullptr, true);
    if (stats.n_p == 0 && stats.n_g == 0)
        throw EmptyResidualError("joint_energy_gradient: zero counts on both terms");
    Vector6d g = Vector6d::Zero();
    if (stats.n_p > 0 && stats.sigma_p2 > 0.0) {
        for (const auto& e : pe) {
            const double r = e.residual;
            const double dr = std::abs(r) <= cfg.delta_p
                                  ? r
                                  : cfg.delta_p * (r > 0 ? 1.0 : -1.0);
            g += (dr / (stats.n_p * stats.sigma_p2)) * e.J.transpose();
        }
    }
    if (stats.n_g > 0 && stats.sigma_g2 > 0.0) {
        const double K = utility_k(ctx);
        for (const auto& e : ge) {
            const double n = e.residual.norm();
            if (n < 1e-15) continue;
            const double dn = n <= cfg.delta_g ? n : cfg.delta_g;
            const Eigen::Vector2d dir = e.residual / n;
            g += (K * dn / (stats.n_g * stats.sigma_g2)) * (e.J.transpose() * dir);
        }
    }
    return g;
}

std::string ConvergenceReport::text() const {
    std::string out;
    for (const auto& line : lines) {
        out += line;
        out += '\n';
    }
    return out;
}

OptimizeResult optimize_pose(const SceneObservation& obs, const PoseSE3& initial,
                             const OptimizeConfig& cfg) {
    if (!initial.translation().allFinite())
        throw DomainError("optimize_pose: initial pose not finite");

    // Per-level observations, finest first.
    std::vector<SceneObservation> levels(cfg.pyramid_levels);
    levels[0] = obs;
    for (int l = 1; l < cfg.pyramid_levels; ++l) {
        auto& prev = levels[l - 1];
        auto& cur = levels[l];
        cur.cam = obs.cam.level(l);
        cur.reference = half_sample(prev.reference);
        cur.target = half_sample(prev.target);
        cur.points.reserve(obs.points.size());
        for (const auto& p : obs.points)
            cur.points.push_back({to_level(p.u, l), to_level(p.v, l), p.inv_depth});
        cur.keypoints.reserve(obs.keypoints.size());
        for (const auto& k : obs.keypoints)
            cur.keypoints.push_back(
                {k.point_ref, {to_level(k.observed.x(), l), to_level(k.observed.y(), l)}});
    }

    const JointEnergyConfig ecfg{cfg.delta_p, cfg.delta_g};
    PoseSE3 pose = initial;
    OptimizeResult result;
    result.report.converged = true;
    bool evaluated_any = false;

    for (int l = cfg.pyramid_levels - 1; l >= 0; --l) {
        const SceneObservation& lobs = levels[l];
        ResidualStats stats{0, 0, cfg.delta_p * cfg.delta_p, cfg.delta_g * cfg.delta_g};
        double mu = 1e-6;
        bool level_converged = false;

        for (int iter = 0; iter < cfg.max_iterations; ++iter) {
            const auto pe = eval_photometric(lobs, pose, nullptr, true);
            const auto ge = eval_geometric(lobs, pose, nullptr, true);
            if (pe.empty() && ge.empty()) break;  // nothing visible at this level
            evaluated_any = true;

            stats.n_p = static_cast<long>(pe.size());
            stats.n_g = static_cast<long>(ge.size());
            int n_inliers = 0;
            for (const auto& e : ge)
                if (e.residual.norm() < cfg.delta_g) ++n_inliers;
            const double K = utility_k({l, n_inliers});

            Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
            Vector6d b = Vector6d::Zero();
            if (stats.n_p > 0) {
                const double norm = 1.0 / (stats.n_p * stats.sigma_p2);
                for (const auto& e : pe) {
                    const double w = huber_weight(e.residual, cfg.delta_p) * norm;
                    H += w * e.J.transpose() * e.J;
                    b += w * e.J.transpose() * e.residual;
                }
            }
            if (stats.n_g > 0) {
                const double norm = K / (stats.n_g * stats.sigma_g2);
                for (const auto& e : ge) {
                    const double w = huber_weight(e.residual.norm(), cfg.delta_g) * norm;
                    H += w * e.J.transpose() * e.J;
                    b += w * e.J.transpose() * e.residual;
                }
            }

            const double energy = energy_from_entries(pe, ge, stats, K, ecfg);

            // Levenberg-style damping with x10 retries on energy increase.
            bool accepted = false;
            double best_candidate = std::numeric_limits<double>::infinity();
            Vector6d step = Vector6d::Zero();
            for (int retry = 0; retry <= cfg.max_damping_retries; ++retry) {
                Eigen::Matrix<double, 6, 6> Hd = H;
                Hd.diagonal() += mu * H.diagonal();
                step = Hd.ldlt().solve(-b);
                if (!step.allFinite()) {
                    mu *= 10.0;
                    continue;
                }
                const PoseSE3 candidate = PoseSE3::exp(step) * pose;
                const auto pe2 = eval_photometric(lobs, candidate, nullptr, false);
                const auto ge2 = eval_geometric(lobs, candidate, nullptr, false);
                double energy_new = std::numeric_limits<double>::infinity();
                if (!(pe2.empty() && ge2.empty()))
                    energy_new = energy_from_entries(pe2, ge2, stats, K, ecfg);
                best_candidate = std::min(best_candidate, energy_new);
                if (energy_new <= energy + 1e-15) {
                    pose = candidate;
                    accepted = true;
                    mu = std::max(mu / 3.0, 1e-9);
                    break;
                }
                mu *= 10.0;
            }

            {
                std::ostringstream os;
                os << "level " << l << " iter " << iter << " energy " << energy << " K " << K
                   << " n_g " << n_inliers;
                result.report.lines.push_back(os.str());
            }

            if (!accepted) {
                // A stalled line search where the best damped step changes the
                // energy only at relative noise level means we are stationary:
                // that is convergence, not failure. A real failure leaves the
                // best candidate clearly above the current energy.
                const bool stalled =
                    std::isfinite(best_candidate) && best_candidate <= energy * (1.0 + 1e-9);
                if (stalled)
                    level_converged = true;
                else if (l == 0)
                    result.report.converged = false;
                break;
            }

            // Variance of inlier residuals feeds the next iteration.
            {
                double sp = 0.0;
                long np = 0;
                const auto pe2 = eval_photometric(lobs, pose, nullptr, false);
                for (const auto& e : pe2)
                    if (std::abs(e.residual) < cfg.delta_p) {
                        sp += e.residual * e.residual;
                        ++np;
                    }
                if (np > 0) stats.sigma_p2 = std::max(sp / np, 1e-6);
                double sg = 0.0;
                long ng = 0;
                const auto ge2 = eval_geometric(lobs, pose, nullptr, false);
                for (const auto& e : ge2)
                    if (e.residual.norm() < cfg.delta_g) {
                        sg += e.residual.squaredNorm();
                        ng += 2;
                    }
                if (ng > 0) stats.sigma_g2 = std::max(sg / ng, 1e-8);
            }

            if (step.norm() < cfg.step_tolerance) {
                level_converged = true;
                break;
            }
        }

        if (l == 0) {
            // Final stats at the solution.
            const auto pe = eval_photometric(lobs, pose, nullptr, false);
            const auto ge = eval_geometric(lobs, pose, nullptr, false);
            stats.n_p = static_cast<long>(pe.size());
            stats.n_g = static_cast<long>(ge.size());
            result.stats = stats;
            if (!level_converged) result.report.converged = false;
        }
    }

    if (!evaluated_any)
        throw EmptyResidualError("optimize_pose: no valid residuals at any level");

    result.pose = pose;
    return result;
}

}  // namespace photocal

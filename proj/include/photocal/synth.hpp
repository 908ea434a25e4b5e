#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "photocal/photometry.hpp"
#include "photocal/se3.hpp"

namespace photocal {

struct Camera {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    // Intrinsics of pyramid level l (pixel centers aligned across levels).
    Camera level(int l) const {
        const double s = 1.0 / static_cast<double>(1 << l);
        return {fx * s, fy * s, (cx + 0.5) * s - 0.5, (cy + 0.5) * s - 0.5,
                width >> l, height >> l};
    }
};

enum class TextureKind { ValueNoise, Checkerboard };
enum class CrfFamily { Identity, Gamma };
enum class TrajectoryShape { Sweep, Still };

// Everything needed to regenerate a scene deterministically.
struct SceneSpec {
    int width = 320;
    int height = 240;
    int frames = 200;
    uint64_t seed = 1;
    TextureKind texture = TextureKind::ValueNoise;
    int octaves = 4;
    double radiance_min = 0.2;
    double radiance_max = 0.9;
    CrfFamily crf = CrfFamily::Gamma;
    double crf_gamma = 2.2;
    double vignette_a2 = -0.25, vignette_a4 = -0.10, vignette_a6 = -0.05;
    double exposure_min_ms = 125.0;  // factors of the normalized exposure e
    double exposure_max_ms = 1000.0;
    double exposure_jitter = 1.3;  // per-frame multiplicative jitter bound
    TrajectoryShape trajectory = TrajectoryShape::Sweep;
    double noise_sigma = 1.0;  // intensity levels, pre-quantization
    double plane_depth = 3.0;  // distance to the textured plane along +z
};

// Ground-truth oracle: a tilted textured plane observed by a moving camera
// with known response, vignette, and exposure schedule.
class SyntheticScene {
public:
    explicit SyntheticScene(const SceneSpec& spec);

    const SceneSpec& spec() const { return spec_; }
    const Camera& camera() const { return cam_; }
    int frame_count() const { return spec_.frames; }

    const InverseResponse& response() const { return response_; }
    const VignetteModel& vignette() const { return vignette_; }

    // Camera-to-world pose of frame i.
    const PoseSE3& pose(int i) const { return poses_.at(i); }
    ExposureRecord exposure(int i) const { return exposures_.at(i); }

    // Scene radiance seen by pixel (x, y) of frame i (before exposure,
    // vignette, and response).
    double radiance(int i, double x, double y) const;

    // Depth along the camera z axis of the surface point seen by pixel (x, y).
    double depth(int i, double x, double y) const;

    Frame render_frame(int i) const;

    // Noiseless continuous intensity (0..255) at a pixel, for oracles that
    // need to avoid quantization.
    double continuous_intensity(int i, double x, double y) const;

    double mean_depth() const { return spec_.plane_depth; }

private:
    Eigen::Vector3d pixel_ray(double x, double y) const;
    // Intersect a world-space ray with the scene plane; returns plane (s, t)
    // coordinates and the ray parameter.
    bool intersect(const PoseSE3& pose, const Eigen::Vector3d& dir, double& s, double& t,
                   double& lambda) const;
    double texture_at(double s, double t) const;
    double vignette_at(double x, double y) const;

    SceneSpec spec_;
    Camera cam_;
    InverseResponse response_;
    VignetteModel vignette_;
    std::vector<PoseSE3> poses_;
    std::vector<ExposureRecord> exposures_;

    // Plane: X = origin + s * u + t * v, with normal n.
    Eigen::Vector3d plane_origin_, plane_u_, plane_v_, plane_n_;
    // Value-noise lattices, one per octave.
    std::vector<std::vector<double>> lattices_;
    int lattice_size_ = 64;
    double radius_scale_ = 1.0;
};

SyntheticScene generate_scene(const SceneSpec& spec);

}  // namespace photocal

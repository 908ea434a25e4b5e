#include "photocal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace photocal {

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t x = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

}  // namespace

SyntheticScene::SyntheticScene(const SceneSpec& spec) : spec_(spec) {
    if (spec.width < 16 || spec.height < 16) throw GenerationError("scene: frame too small");
    if (spec.frames < 1) throw GenerationError("scene: need at least one frame");
    if (!(spec.exposure_min_ms > 0.0) || spec.exposure_max_ms < spec.exposure_min_ms)
        throw GenerationError("scene: exposure range must be positive and ordered");
    if (!(spec.radiance_min > 0.0) || spec.radiance_max < spec.radiance_min ||
        spec.radiance_max > 1.0)
        throw GenerationError("scene: radiance range must satisfy 0 < min <= max <= 1");

    cam_ = Camera{0.8 * spec.width, 0.8 * spec.width, (spec.width - 1) / 2.0,
                  (spec.height - 1) / 2.0, spec.width, spec.height};
    const double dx = std::max(cam_.cx, spec.width - 1 - cam_.cx);
    const double dy = std::max(cam_.cy, spec.height - 1 - cam_.cy);
    radius_scale_ = 1.0 / std::hypot(dx, dy);

    response_ = spec.crf == CrfFamily::Identity ? InverseResponse::identity()
                                                : InverseResponse::gamma(spec.crf_gamma);
    vignette_ = VignetteModel(spec.vignette_a2, spec.vignette_a4, spec.vignette_a6);

    // Tilted plane in front of the camera.
    plane_origin_ = Eigen::Vector3d(0.0, 0.0, spec.plane_depth);
    plane_n_ = Eigen::Vector3d(-0.15, 0.10, -1.0).normalized();
    plane_u_ = plane_n_.cross(Eigen::Vector3d::UnitY()).normalized();
    plane_v_ = plane_n_.cross(plane_u_).normalized();

    // Value-noise lattices.
    lattices_.resize(std::max(1, spec.octaves));
    for (size_t o = 0; o < lattices_.size(); ++o) {
        std::mt19937_64 rng(mix_seed(spec.seed, 1000 + o));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        lattices_[o].resize(static_cast<size_t>(lattice_size_) * lattice_size_);
        for (auto& v : lattices_[o]) v = uni(rng);
    }

    // Trajectory.
    poses_.reserve(spec.frames);
    const double d = spec.plane_depth;
    for (int i = 0; i < spec.frames; ++i) {
        const double t = spec.frames > 1 ? static_cast<double>(i) / (spec.frames - 1) : 0.0;
        if (spec.trajectory == TrajectoryShape::Still) {
            poses_.emplace_back();
            continue;
        }
        const Eigen::Vector3d p(0.18 * d * std::sin(2.0 * M_PI * t),
                                0.12 * d * std::sin(4.0 * M_PI * t + 0.5),
                                0.02 * d * std::sin(2.0 * M_PI * t + 1.0));
        const double yaw = 0.025 * std::sin(2.0 * M_PI * t + 0.3);
        const double pitch = 0.018 * std::sin(4.0 * M_PI * t + 1.1);
        const Eigen::Matrix3d R = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
                                   Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
                                      .toRotationMatrix();
        poses_.emplace_back(R, p);
    }

    // Exposure schedule: multiplicative triangle sweep across the range with
    // per-frame jitter, clamped back into the range.
    exposures_.reserve(spec.frames);
    std::mt19937_64 rng(mix_seed(spec.seed, 7));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double lo = std::log(spec.exposure_min_ms);
    const double hi = std::log(spec.exposure_max_ms);
    const double lj = std::log(std::max(1.0, spec.exposure_jitter));
    for (int i = 0; i < spec.frames; ++i) {
        const double t = spec.frames > 1 ? static_cast<double>(i) / (spec.frames - 1) : 0.0;
        const double tri = t < 0.5 ? 2.0 * t : 2.0 * (1.0 - t);
        double le = lo + (hi - lo) * tri + lj * uni(rng);
        le = std::clamp(le, lo, hi);
        exposures_.push_back(ExposureRecord{i, 0.05 * i, std::exp(le)});
    }

    // Saturation budget, sampled on a coarse grid per frame.
    for (int i = 0; i < spec.frames; ++i) {
        int total = 0, ok = 0;
        for (int gy = 0; gy < 32; ++gy) {
            for (int gx = 0; gx < 32; ++gx) {
                const double x = (gx + 0.5) / 32.0 * (spec.width - 1);
                const double y = (gy + 0.5) / 32.0 * (spec.height - 1);
                const double m = continuous_intensity(i, x, y);
                ++total;
                if (m >= kSaturationLow && m <= kSaturationHigh) ++ok;
            }
        }
        if (ok < static_cast<int>(0.95 * total))
            throw GenerationError("scene: frame " + std::to_string(i) +
                                  " exceeds the 5% saturation budget");
    }
}

Eigen::Vector3d SyntheticScene::pixel_ray(double x, double y) const {
    return {(x - cam_.cx) / cam_.fx, (y - cam_.cy) / cam_.fy, 1.0};
}

bool SyntheticScene::intersect(const PoseSE3& pose, const Eigen::Vector3d& dir, double& s,
                               double& t, double& lambda) const {
    const Eigen::Vector3d o = pose.translation();
    const Eigen::Vector3d d = pose.rotation() * dir;
    const double denom = plane_n_.dot(d);
    if (std::abs(denom) < 1e-12) return false;
    lambda = plane_n_.dot(plane_origin_ - o) / denom;
    if (lambda <= 0.0) return false;
    const Eigen::Vector3d hit = o + lambda * d - plane_origin_;
    s = plane_u_.dot(hit);
    t = plane_v_.dot(hit);
    return true;
}

double SyntheticScene::texture_at(double s, double t) const {
    if (spec_.texture == TextureKind::Checkerboard) {
        const double cell = 0.3;
        const int cs = static_cast<int>(std::floor(s / cell));
        const int ct = static_cast<int>(std::floor(t / cell));
        return ((cs + ct) & 1) ? spec_.radiance_max : spec_.radiance_min;
    }
    double value = 0.0, amp_sum = 0.0;
    double cell = 0.6, amp = 1.0;
    for (size_t o = 0; o < lattices_.size(); ++o) {
        const double fs = s / cell + 17.3;
        const double ft = t / cell + 11.7;
        const int is = static_cast<int>(std::floor(fs));
        const int it = static_cast<int>(std::floor(ft));
        const double as = smoothstep(fs - is);
        const double at = smoothstep(ft - it);
        auto lat = [&](int a, int b) {
            const int ia = ((a % lattice_size_) + lattice_size_) % lattice_size_;
            const int ib = ((b % lattice_size_) + lattice_size_) % lattice_size_;
            return lattices_[o][static_cast<size_t>(ib) * lattice_size_ + ia];
        };
        const double v = (1 - as) * (1 - at) * lat(is, it) + as * (1 - at) * lat(is + 1, it) +
                         (1 - as) * at * lat(is, it + 1) + as * at * lat(is + 1, it + 1);
        value += amp * v;
        amp_sum += amp;
        cell *= 0.5;
        amp *= 0.55;
    }
    value /= amp_sum;
    // Stretch around mid to use more of the radiance range.
    value = std::clamp(0.5 + 1.8 * (value - 0.5), 0.0, 1.0);
    return spec_.radiance_min + value * (spec_.radiance_max - spec_.radiance_min);
}

double SyntheticScene::vignette_at(double x, double y) const {
    const double r = std::min(1.0, std::hypot(x - cam_.cx, y - cam_.cy) * radius_scale_);
    return vignette_(r);
}

double SyntheticScene::radiance(int i, double x, double y) const {
    double s, t, lambda;
    if (!intersect(poses_.at(i), pixel_ray(x, y), s, t, lambda))
        throw GenerationError("radiance: ray misses the scene plane");
    return texture_at(s, t);
}

double SyntheticScene::depth(int i, double x, double y) const {
    double s, t, lambda;
    if (!intersect(poses_.at(i), pixel_ray(x, y), s, t, lambda))
        throw GenerationError("depth: ray misses the scene plane");
    return lambda;  // ray direction has unit z in the camera frame
}

double SyntheticScene::continuous_intensity(int i, double x, double y) const {
    const double e = exposures_.at(i).exposure_factor();
    const double val = e * vignette_at(x, y) * radiance(i, x, y);
    return response_.forward(std::min(val, 1.0));
}

Frame SyntheticScene::render_frame(int i) const {
    if (i < 0 || i >= spec_.frames) throw DomainError("render_frame: index out of range");
    Image<uint8_t> img(spec_.width, spec_.height);
    std::mt19937_64 rng(mix_seed(spec_.seed, 0x500000 + i));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int y = 0; y < spec_.height; ++y) {
        for (int x = 0; x < spec_.width; ++x) {
            double m = continuous_intensity(i, x, y);
            if (spec_.noise_sigma > 0.0) m += spec_.noise_sigma * noise(rng);
            img.at(x, y) = static_cast<uint8_t>(quantize_intensity(m));
        }
    }
    return Frame(std::move(img), exposures_.at(i), cam_.cx, cam_.cy);
}

SyntheticScene generate_scene(const SceneSpec& spec) { return SyntheticScene(spec); }

}  // namespace photocal

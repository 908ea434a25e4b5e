#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "photocal/errors.hpp"
#include "photocal/image.hpp"

namespace photocal {

// Pixels outside [kSaturationLow, kSaturationHigh] are excluded from
// estimation and masked during rectification.
inline constexpr double kSaturationLow = 5.0;
inline constexpr double kSaturationHigh = 250.0;

// Inverse camera response as a 256-entry monotone LUT mapping 8-bit
// intensity to normalized irradiance. lut[0] = 0 and lut[255] = 1 pin the
// global scale that ratio-only constraints leave free.
class InverseResponse {
public:
    InverseResponse();  // identity
    explicit InverseResponse(const std::array<double, 256>& lut);

    static InverseResponse identity();
    static InverseResponse gamma(double exponent);

    // Evaluate at a (possibly fractional) intensity in [0, 255]; linear
    // interpolation between adjacent entries.
    double operator()(double m) const;

    // Forward response: intensity (fractional, in [0, 255]) producing the
    // given normalized irradiance, via monotone inversion of the LUT.
    double forward(double irradiance) const;

    const std::array<double, 256>& lut() const { return lut_; }

    bool operator==(const InverseResponse& other) const { return lut_ == other.lut_; }

private:
    std::array<double, 256> lut_;
};

// Radial attenuation V(r) = 1 + a2 r^2 + a4 r^4 + a6 r^6 over normalized
// radius r in [0, 1]. Evaluation clamps at 1 so the model is attenuation
// only; the polynomial must stay strictly positive.
class VignetteModel {
public:
    VignetteModel();  // unit vignette
    VignetteModel(double a2, double a4, double a6);

    static VignetteModel unit() { return VignetteModel(); }

    double operator()(double r) const;

    double a2() const { return a2_; }
    double a4() const { return a4_; }
    double a6() const { return a6_; }

    bool operator==(const VignetteModel& other) const {
        return a2_ == other.a2_ && a4_ == other.a4_ && a6_ == other.a6_;
    }

private:
    double a2_ = 0.0, a4_ = 0.0, a6_ = 0.0;
};

struct ExposureRecord {
    long frame_id = 0;
    double timestamp = 0.0;    // seconds
    double exposure_ms = 0.0;  // > 0

    // Exposure factor used by the image formation model (seconds x
    // gain-normalized units).
    double exposure_factor() const { return exposure_ms / 1000.0; }
};

// 8-bit grayscale frame plus the geometry needed to compute normalized radii.
class Frame {
public:
    Frame(Image<uint8_t> image, ExposureRecord exposure);
    Frame(Image<uint8_t> image, ExposureRecord exposure, double cx, double cy);

    const Image<uint8_t>& image() const { return image_; }
    const ExposureRecord& exposure() const { return exposure_; }
    int width() const { return image_.width(); }
    int height() const { return image_.height(); }
    double cx() const { return cx_; }
    double cy() const { return cy_; }

    // Normalized radius in [0, 1]: distance from the principal point scaled
    // by the distance to the farthest image corner.
    double radius(double x, double y) const;

private:
    Image<uint8_t> image_;
    ExposureRecord exposure_;
    double cx_ = 0.0, cy_ = 0.0, radius_scale_ = 1.0;
};

// Rectified output: values proportional to scene radiance, with a validity
// mask (0 = saturated / unusable).
struct IrradianceImage {
    Image<double> values;
    Image<uint8_t> mask;
};

struct ValidationReport {
    double k = 0.0;          // mean corrected irradiance ratio
    double expected = 0.0;   // metadata exposure ratio e1/e2
    double rel_error = 0.0;  // |k - expected| / expected
    long n = 0;              // correspondences used
    double window_pass_rate = 0.0;
};

// Frozen (inverse response, vignette) pair plus the validation report that
// justified freezing it.
class CalibrationSnapshot {
public:
    CalibrationSnapshot() = default;  // unfrozen placeholder
    CalibrationSnapshot(InverseResponse response, VignetteModel vignette,
                        ValidationReport report);

    bool frozen() const { return frozen_; }
    const InverseResponse& response() const;
    const VignetteModel& vignette() const;
    const ValidationReport& report() const;

private:
    bool frozen_ = false;
    InverseResponse response_;
    VignetteModel vignette_;
    ValidationReport report_;
};

// Per-pixel: out = f^-1(M) / (e * V(r)); saturated pixels masked invalid.
IrradianceImage rectify_frame(const Frame& frame, const CalibrationSnapshot& snapshot);

// Round half away from zero, clamped to [0, 255].
int quantize_intensity(double value);

}  // namespace photocal

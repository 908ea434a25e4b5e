#include "photocal/photometry.hpp"

#include <algorithm>
#include <cmath>

namespace photocal {

namespace {

void check_lut(const std::array<double, 256>& lut) {
    if (std::abs(lut[0]) > 1e-12 || std::abs(lut[255] - 1.0) > 1e-12)
        throw DomainError("InverseResponse: lut must satisfy lut[0]=0, lut[255]=1");
    for (int i = 1; i < 256; ++i) {
        if (!std::isfinite(lut[i]) || lut[i] < lut[i - 1])
            throw DomainError("InverseResponse: lut must be monotone non-decreasing");
    }
}

}  // namespace

InverseResponse::InverseResponse() {
    for (int i = 0; i < 256; ++i) lut_[i] = i / 255.0;
}

InverseResponse::InverseResponse(const std::array<double, 256>& lut) : lut_(lut) {
    check_lut(lut_);
}

InverseResponse InverseResponse::identity() { return InverseResponse(); }

InverseResponse InverseResponse::gamma(double exponent) {
    if (exponent <= 0.0) throw DomainError("InverseResponse::gamma: exponent must be > 0");
    std::array<double, 256> lut;
    for (int i = 0; i < 256; ++i) lut[i] = std::pow(i / 255.0, exponent);
    return InverseResponse(lut);
}

double InverseResponse::operator()(double m) const {
    if (!(m >= 0.0 && m <= 255.0))
        throw DomainError("eval_inverse_response: intensity outside [0,255]");
    const int i = std::min(254, static_cast<int>(std::floor(m)));
    const double a = m - i;
    return (1.0 - a) * lut_[i] + a * lut_[i + 1];
}

double InverseResponse::forward(double irradiance) const {
    if (!(irradiance >= 0.0)) throw DomainError("forward: irradiance must be >= 0");
    if (irradiance >= 1.0) return 255.0;
    // First entry strictly above the target; monotonicity makes the segment
    // containing the value well-defined.
    int lo = 0, hi = 255;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (lut_[mid] <= irradiance)
            lo = mid;
        else
            hi = mid;
    }
    if (lut_[lo] == irradiance) {
        // On a plateau report the lowest intensity producing the value.
        while (lo > 0 && lut_[lo - 1] == lut_[lo]) --lo;
        return static_cast<double>(lo);
    }
    const double seg = lut_[lo + 1] - lut_[lo];
    if (seg <= 0.0) return static_cast<double>(lo);
    return lo + (irradiance - lut_[lo]) / seg;
}

VignetteModel::VignetteModel() = default;

VignetteModel::VignetteModel(double a2, double a4, double a6) : a2_(a2), a4_(a4), a6_(a6) {
    for (int i = 0; i <= 1000; ++i) {
        const double r = i / 1000.0;
        const double r2 = r * r;
        const double v = 1.0 + r2 * (a2_ + r2 * (a4_ + r2 * a6_));
        if (!(v > 0.0))
            throw ModelError("VignetteModel: V(r) must be > 0 on [0,1]");
        if (v > 1.05)
            throw ModelError("VignetteModel: V(r) exceeds 1 by more than noise tolerance");
    }
}

double VignetteModel::operator()(double r) const {
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("eval_vignette: radius outside [0,1]");
    const double r2 = r * r;
    const double v = 1.0 + r2 * (a2_ + r2 * (a4_ + r2 * a6_));
    if (!(v > 0.0)) throw ModelError("eval_vignette: V(r) <= 0");
    return std::min(v, 1.0);
}

Frame::Frame(Image<uint8_t> image, ExposureRecord exposure)
    : Frame(std::move(image), exposure, 0.0, 0.0) {
    cx_ = (image_.width() - 1) / 2.0;
    cy_ = (image_.height() - 1) / 2.0;
    const double dx = std::max(cx_, image_.width() - 1 - cx_);
    const double dy = std::max(cy_, image_.height() - 1 - cy_);
    radius_scale_ = 1.0 / std::hypot(dx, dy);
}

Frame::Frame(Image<uint8_t> image, ExposureRecord exposure, double cx, double cy)
    : image_(std::move(image)), exposure_(exposure), cx_(cx), cy_(cy) {
    if (image_.width() < 16 || image_.height() < 16)
        throw DomainError("Frame: dimensions must be >= 16");
    if (!(exposure_.exposure_ms > 0.0)) throw DataError("Frame: exposure must be > 0");
    const double dx = std::max(cx_, image_.width() - 1 - cx_);
    const double dy = std::max(cy_, image_.height() - 1 - cy_);
    radius_scale_ = 1.0 / std::hypot(dx, dy);
}

double Frame::radius(double x, double y) const {
    const double r = std::hypot(x - cx_, y - cy_) * radius_scale_;
    return std::min(r, 1.0);
}

CalibrationSnapshot::CalibrationSnapshot(InverseResponse response, VignetteModel vignette,
                                         ValidationReport report)
    : frozen_(true),
      response_(std::move(response)),
      vignette_(vignette),
      report_(report) {}

const InverseResponse& CalibrationSnapshot::response() const {
    if (!frozen_) throw StateError("CalibrationSnapshot: not frozen");
    return response_;
}

const VignetteModel& CalibrationSnapshot::vignette() const {
    if (!frozen_) throw StateError("CalibrationSnapshot: not frozen");
    return vignette_;
}

const ValidationReport& CalibrationSnapshot::report() const {
    if (!frozen_) throw StateError("CalibrationSnapshot: not frozen");
    return report_;
}

IrradianceImage rectify_frame(const Frame& frame, const CalibrationSnapshot& snapshot) {
    if (!snapshot.frozen()) throw StateError("rectify_frame: snapshot not frozen");
    const auto& f_inv = snapshot.response();
    const auto& vig = snapshot.vignette();
    const double e = frame.exposure().exposure_factor();

    const int w = frame.width();
    const int h = frame.height();
    IrradianceImage out{Image<double>(w, h), Image<uint8_t>(w, h, 1)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double m = frame.image().at(x, y);
            const double v = vig(frame.radius(x, y));
            out.values.at(x, y) = f_inv(m) / (e * v);
            if (m < kSaturationLow || m > kSaturationHigh) out.mask.at(x, y) = 0;
        }
    }
    return out;
}

int quantize_intensity(double value) {
    const double r = value < 0.0 ? -std::floor(-value + 0.5) : std::floor(value + 0.5);
    return static_cast<int>(std::clamp(r, 0.0, 255.0));
}

}  // namespace photocal

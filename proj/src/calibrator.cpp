#include "photocal/calibrator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace photocal {

namespace {

double median_abs(std::vector<double> values) {
    if (values.empty()) return 0.0;
    for (auto& v : values) v = std::abs(v);
    const size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    return values[mid];
}

// Pool-adjacent-violators: closest non-decreasing sequence in least squares.
std::vector<double> pav_non_decreasing(const std::vector<double>& y) {
    struct Block {
        double sum;
        int count;
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (const double v : y) {
        blocks.push_back({v, 1});
        while (blocks.size() > 1) {
            auto& b = blocks[blocks.size() - 1];
            auto& a = blocks[blocks.size() - 2];
            if (a.sum / a.count <= b.sum / b.count) break;
            a.sum += b.sum;
            a.count += b.count;
            blocks.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& b : blocks) {
        const double v = b.sum / b.count;
        for (int i = 0; i < b.count; ++i) out.push_back(v);
    }
    return out;
}

struct InterpCoef {
    int idx[2];
    double w[2];
};

InterpCoef interp_coef(double m) {
    const int i = std::min(254, static_cast<int>(std::floor(m)));
    const double a = m - i;
    return {{i, i + 1}, {1.0 - a, a}};
}

}  // namespace

InverseResponse estimate_crf(const std::vector<CorrespondencePair>& pairs,
                             const CalibratorConfig& cfg) {
    if (pairs.size() < cfg.min_pairs)
        throw NotReadyError("estimate_crf: " + std::to_string(pairs.size()) + " pairs, need " +
                            std::to_string(cfg.min_pairs));

    std::array<bool, 256> seen{};
    for (const auto& p : pairs) {
        seen[quantize_intensity(p.m1)] = true;
        seen[quantize_intensity(p.m2)] = true;
    }
    const int levels = static_cast<int>(std::count(seen.begin(), seen.end(), true));
    if (levels < cfg.min_intensity_levels)
        throw NotReadyError("estimate_crf: only " + std::to_string(levels) +
                            " distinct intensity levels");

    double max_log_ratio = 0.0;
    for (const auto& p : pairs)
        max_log_ratio = std::max(max_log_ratio, std::abs(std::log(p.e1 / p.e2)));
    if (max_log_ratio < 0.01)
        throw UnobservableError(
            "estimate_crf: exposure ratios are all ~1; response shape is unobservable");

    // Samples near the saturation cuts suffer truncation bias (a point whose
    // brighter observation lands above the cut only survives when noise
    // pushed it down), so the fit uses a band with headroom inside them.
    std::vector<CorrespondencePair> fit_pairs;
    fit_pairs.reserve(pairs.size());
    // Small-ratio pairs carry almost no shape signal but their intensity
    // noise still dilutes the fitted slope, so prefer wide-baseline pairs.
    for (const auto& p : pairs)
        if (p.m1 >= kSaturationLow + 3.0 && p.m1 <= kSaturationHigh - 15.0 &&
            p.m2 >= kSaturationLow + 3.0 && p.m2 <= kSaturationHigh - 15.0 &&
            std::abs(std::log(p.e1 / p.e2)) >= 0.2)
            fit_pairs.push_back(p);
    if (fit_pairs.size() < cfg.min_pairs / 2) fit_pairs = pairs;

    // The ratio constraint f(m1) = rho f(m2) is homogeneous in f, so a direct
    // least-squares fit of the LUT shrinks toward the trivial zero solution
    // under noise. Fit g = log f instead: g(m1) - g(m2) = log rho is linear
    // and noise cannot collapse the scale. Ratio constraints fix g only up
    // to an additive constant; the gauge is released during the solve (tiny
    // ridge) and fixed afterwards by shifting the curve so that g(255) = 0,
    // with both data-free ends extended from the supported boundary slopes.
    // g[0] is never touched, so f(0) = 0 is pinned outside the solve.
    constexpr int kFree = 255;
    std::vector<double> g(256);
    for (int i = 1; i < 256; ++i) g[i] = std::log(i / 255.0);
    std::vector<double> weights(fit_pairs.size(), 1.0);

    // Knots with actual sample support. Below the supported range the solve
    // is pure smoothing extrapolation and can swing wildly; those knots are
    // replaced by a linear log-domain extension after each solve.
    std::array<int, 256> support{};
    for (const auto& p : fit_pairs) {
        const InterpCoef c1 = interp_coef(p.m1);
        const InterpCoef c2 = interp_coef(p.m2);
        for (int k = 0; k < 2; ++k) {
            ++support[c1.idx[k]];
            ++support[c2.idx[k]];
        }
    }
    const int min_support =
        std::clamp(static_cast<int>(fit_pairs.size() / 2000), 3, 20);
    int lo_knot = 1;
    while (lo_knot < 254 && support[lo_knot] < min_support) ++lo_knot;
    int hi_knot = 255;
    while (hi_knot > lo_knot + 1 && support[hi_knot] < min_support) --hi_knot;

    // Intensity noise enters the log residual scaled by the local slope of
    // g, which blows up toward dark pixels; whiten each pair by the inverse
    // slope variance at its two intensities (recomputed per round from the
    // current estimate).
    auto slope_at = [&](double m) {
        const int i = std::clamp(static_cast<int>(std::lround(m)), 2, 253);
        return (g[i + 2] - g[i - 2]) / 4.0;
    };
    auto whiten = [&](const CorrespondencePair& p) {
        const double s1 = slope_at(p.m1);
        const double s2 = slope_at(p.m2);
        return 1.0 / (s1 * s1 + s2 * s2 + 1e-6);
    };

    for (int round = 0; round < cfg.reweight_rounds; ++round) {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(kFree, kFree);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kFree);
        double weight_sum = 0.0;

        for (size_t n = 0; n < fit_pairs.size(); ++n) {
            const auto& p = fit_pairs[n];
            const double target = std::log(p.e1 / p.e2);
            const InterpCoef c1 = interp_coef(p.m1);
            const InterpCoef c2 = interp_coef(p.m2);
            // Row: g(m1) - g(m2) = target; up to four knots touched.
            int idx[4];
            double coef[4];
            int nz = 0;
            auto add = [&](int g_idx, double w) {
                if (w == 0.0) return;
                for (int k = 0; k < nz; ++k)
                    if (idx[k] == g_idx - 1) {
                        coef[k] += w;
                        return;
                    }
                idx[nz] = g_idx - 1;
                coef[nz++] = w;
            };
            add(c1.idx[0], c1.w[0]);
            add(c1.idx[1], c1.w[1]);
            add(c2.idx[0], -c2.w[0]);
            add(c2.idx[1], -c2.w[1]);

            const double w = weights[n] * whiten(p);
            weight_sum += w;
            for (int a = 0; a < nz; ++a) {
                rhs(idx[a]) += w * coef[a] * target;
                for (int b = 0; b < nz; ++b) H(idx[a], idx[b]) += w * coef[a] * coef[b];
            }
        }

        // Second-difference smoothing on g, skipping index 0 (log of the
        // pinned zero). Both smoothing and data rows are invariant to a
        // constant shift of g; a tiny ridge keeps that direction solvable.
        const double lambda = cfg.smoothness * std::max(weight_sum, 1.0) / 254.0;
        for (int k = 1; k <= 253; ++k) {
            // g[k] - 2 g[k+1] + g[k+2]
            const int idx[3] = {k - 1, k, k + 1};
            const double coef[3] = {1.0, -2.0, 1.0};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) H(idx[a], idx[b]) += lambda * coef[a] * coef[b];
        }
        H.diagonal().array() += 1e-9 * std::max(weight_sum, 1.0);

        const Eigen::VectorXd x = H.ldlt().solve(rhs);
        for (int i = 0; i < kFree; ++i) g[i + 1] = x(i);

        // Extend both data-free ends linearly from the supported boundary
        // slopes (the log-curve keeps rising toward saturation and keeps
        // falling toward f(0) = 0), then fix the gauge with g(255) = 0.
        if (hi_knot < 255) {
            const int ref = std::max(hi_knot - 10, lo_knot);
            double slope = (g[hi_knot] - g[ref]) / std::max(1, hi_knot - ref);
            slope = std::max(slope, 1e-4);
            for (int m = hi_knot + 1; m <= 255; ++m) g[m] = g[hi_knot] + slope * (m - hi_knot);
        }
        if (lo_knot > 1) {
            const int ref = std::min(lo_knot + 10, hi_knot);
            double slope = (g[ref] - g[lo_knot]) / std::max(1, ref - lo_knot);
            slope = std::max(slope, 1e-4);
            for (int m = lo_knot - 1; m >= 1; --m) g[m] = g[lo_knot] - slope * (lo_knot - m);
        }
        const double shift = g[255];
        for (int i = 1; i < 256; ++i) g[i] -= shift;

        // Monotone projection, then re-pin.
        std::vector<double> tail(g.begin() + 1, g.end());
        tail = pav_non_decreasing(tail);
        for (int i = 1; i < 256; ++i) g[i] = std::min(tail[i - 1], 0.0);
        g[255] = 0.0;

        if (round + 1 < cfg.reweight_rounds) {
            std::vector<double> residuals(fit_pairs.size());
            auto eval = [&](double m) {
                const InterpCoef c = interp_coef(m);
                return c.w[0] * g[c.idx[0]] + c.w[1] * g[c.idx[1]];
            };
            for (size_t n = 0; n < fit_pairs.size(); ++n)
                residuals[n] =
                    (eval(fit_pairs[n].m1) - eval(fit_pairs[n].m2) -
                     std::log(fit_pairs[n].e1 / fit_pairs[n].e2)) *
                    std::sqrt(whiten(fit_pairs[n]));
            const double delta = std::max(2.0 * median_abs(residuals), 1e-6);
            for (size_t n = 0; n < fit_pairs.size(); ++n)
                weights[n] = std::min(1.0, delta / std::max(std::abs(residuals[n]), 1e-12));
        }
    }

    std::array<double, 256> out;
    out[0] = 0.0;
    for (int i = 1; i < 256; ++i) out[i] = std::exp(g[i]);
    out[255] = 1.0;
    return InverseResponse(out);
}

VignetteModel estimate_vignette(const std::vector<CorrespondencePair>& pairs,
                                const InverseResponse& ir, const CalibratorConfig& cfg) {
    if (pairs.size() < cfg.min_pairs)
        throw NotReadyError("estimate_vignette: " + std::to_string(pairs.size()) +
                            " pairs, need " + std::to_string(cfg.min_pairs));

    constexpr int kBins = 20;
    std::array<bool, kBins> bin{};
    double max_dr = 0.0;
    for (const auto& p : pairs) {
        bin[std::min(kBins - 1, static_cast<int>(p.r1 * kBins))] = true;
        bin[std::min(kBins - 1, static_cast<int>(p.r2 * kBins))] = true;
        max_dr = std::max(max_dr, std::abs(p.r1 - p.r2));
    }
    const int covered = static_cast<int>(std::count(bin.begin(), bin.end(), true));
    if (covered < static_cast<int>(cfg.radial_coverage * kBins))
        throw UnobservableError("estimate_vignette: radii cover only " +
                                std::to_string(covered) + "/" + std::to_string(kBins) +
                                " bins");
    if (max_dr < cfg.same_radius_rho)
        throw UnobservableError("estimate_vignette: no radial motion in the pair set");

    // Usable terms: q = f(m1) e2 / (f(m2) e1) must be positive.
    struct Term {
        double logq, r1, r2;
    };
    std::vector<Term> terms;
    terms.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double f1 = ir(p.m1);
        const double f2 = ir(p.m2);
        if (f1 <= 1e-9 || f2 <= 1e-9) continue;
        terms.push_back({std::log(f1 * p.e2 / (f2 * p.e1)), p.r1, p.r2});
    }
    if (terms.size() < cfg.min_pairs / 4)
        throw UnobservableError("estimate_vignette: too few usable (non-dark) pairs");

    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    auto poly = [&](const Eigen::Vector3d& c, double r) {
        const double r2 = r * r;
        return 1.0 + r2 * (c(0) + r2 * (c(1) + r2 * c(2)));
    };
    auto poly_ok = [&](const Eigen::Vector3d& c) {
        for (int i = 0; i <= 100; ++i)
            if (poly(c, i / 100.0) < 0.05) return false;
        return true;
    };

    std::vector<double> weights(terms.size(), 1.0);
    for (int round = 0; round < cfg.reweight_rounds; ++round) {
        for (int it = 0; it < 8; ++it) {
            Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
            Eigen::Vector3d g = Eigen::Vector3d::Zero();
            for (size_t n = 0; n < terms.size(); ++n) {
                const auto& t = terms[n];
                const double v1 = poly(a, t.r1);
                const double v2 = poly(a, t.r2);
                const double res = t.logq - (std::log(v1) - std::log(v2));
                Eigen::Vector3d J;
                for (int k = 0; k < 3; ++k) {
                    const double e = 2.0 * (k + 1);
                    J(k) = -(std::pow(t.r1, e) / v1 - std::pow(t.r2, e) / v2);
                }
                H += weights[n] * J * J.transpose();
                g -= weights[n] * J * res;
            }
            Eigen::Vector3d step = (H + 1e-12 * Eigen::Matrix3d::Identity()).ldlt().solve(g);
            // Keep the polynomial positive on [0,1].
            while (!poly_ok(a + step) && step.norm() > 1e-12) step *= 0.5;
            a += step;
            if (step.norm() < 1e-12) break;
        }
        if (round + 1 < cfg.reweight_rounds) {
            std::vector<double> residuals(terms.size());
            for (size_t n = 0; n < terms.size(); ++n)
                residuals[n] =
                    terms[n].logq - (std::log(poly(a, terms[n].r1)) - std::log(poly(a, terms[n].r2)));
            const double delta = std::max(2.0 * median_abs(residuals), 1e-6);
            for (size_t n = 0; n < terms.size(); ++n)
                weights[n] = std::min(1.0, delta / std::max(std::abs(residuals[n]), 1e-12));
        }
    }

    return VignetteModel(a(0), a(1), a(2));
}

ValidationReport validate_exposure(const std::vector<CorrespondencePair>& pairs,
                                   const InverseResponse& ir, const VignetteModel& v) {
    if (pairs.empty()) throw DataError("validate_exposure: no pairs");
    for (const auto& p : pairs)
        if (p.frame1 != pairs.front().frame1 || p.frame2 != pairs.front().frame2)
            throw DataError("validate_exposure: pairs span multiple frame pairs");

    double sum = 0.0;
    long used = 0;
    for (const auto& p : pairs) {
        const double f2 = ir(p.m2);
        if (f2 <= 0.0) continue;
        sum += ir(p.m1) / f2 * (v(p.r2) / v(p.r1));
        ++used;
    }
    if (used == 0) throw DataError("validate_exposure: all terms excluded");

    ValidationReport report;
    report.k = sum / used;
    report.expected = pairs.front().e1 / pairs.front().e2;
    report.rel_error = std::abs(report.k - report.expected) / report.expected;
    report.n = used;
    return report;
}

const char* to_string(CalibrationPhase phase) {
    switch (phase) {
        case CalibrationPhase::CollectingCrf: return "collecting-crf";
        case CalibrationPhase::CollectingVignette: return "collecting-vignette";
        case CalibrationPhase::Validating: return "validating";
        case CalibrationPhase::Frozen: return "frozen";
    }
    return "?";
}

Calibrator::Calibrator(CalibratorConfig cfg) : cfg_(cfg) {}

void Calibrator::feed_frame(const Frame& frame, const TrackSet& tracks) {
    const long fid = frame.exposure().frame_id;
    if (fid <= last_frame_id_)
        throw SequenceError("feed_frame: frame " + std::to_string(fid) +
                            " arrived after frame " + std::to_string(last_frame_id_));
    const long prev_id = last_frame_id_;
    last_frame_id_ = fid;
    exposures_.push_back(frame.exposure());

    if (phase_ == CalibrationPhase::Frozen) {
        status_ = std::string("phase=") + to_string(phase_) + " pairs=0 k_err=" +
                  std::to_string(last_k_err_);
        if (log_) log_(status_);
        return;
    }

    // Harvest the pairs this frame completes.
    std::vector<CorrespondencePair> adjacent;
    auto exposure_ms_of = [&](long frame_id) -> double {
        for (auto it = exposures_.rbegin(); it != exposures_.rend(); ++it)
            if (it->frame_id == frame_id) return it->exposure_ms;
        throw DataError("feed_frame: missing exposure record for frame " +
                        std::to_string(frame_id));
    };
    for (const auto& track : tracks.tracks) {
        const auto& obs = track.observations;
        // Observations are frame-ordered; tracks may be fed incrementally or
        // preloaded from a track file.
        const auto it = std::lower_bound(
            obs.begin(), obs.end(), fid,
            [](const TrackObservation& o, long id) { return o.frame_id < id; });
        if (it == obs.end() || it->frame_id != fid) continue;
        const size_t j = static_cast<size_t>(it - obs.begin());
        if (j == 0) continue;
        const auto& b = obs[j];
        if (b.intensity < kSaturationLow || b.intensity > kSaturationHigh) continue;
        const size_t lo = j > static_cast<size_t>(cfg_.pair_max_gap)
                              ? j - static_cast<size_t>(cfg_.pair_max_gap)
                              : 0;
        for (size_t i = lo; i < j; ++i) {
            const auto& a = obs[i];
            if (a.intensity < kSaturationLow || a.intensity > kSaturationHigh) continue;
            CorrespondencePair pair{a.intensity, b.intensity, a.radius,  b.radius,
                                    exposure_ms_of(a.frame_id), exposure_ms_of(b.frame_id),
                                    a.frame_id, b.frame_id};
            const double dr = std::abs(a.radius - b.radius);
            if (dr < cfg_.same_radius_rho)
                crf_pairs_.push_back(pair);
            else
                vignette_pairs_.push_back(pair);
            if (a.frame_id == prev_id) adjacent.push_back(pair);
        }
    }

    try_advance();

    if (phase_ == CalibrationPhase::Validating && !adjacent.empty() &&
        adjacent.size() >= cfg_.min_validation_pairs) {
        ValidationReport report;
        bool have_report = true;
        try {
            report = validate_exposure(adjacent, response_, vignette_);
        } catch (const DataError&) {
            have_report = false;  // e.g. a fully dark frame pair; skip it
        }
        if (have_report) {
            last_k_err_ = report.rel_error;
            validation_window_.push_back(report.rel_error < cfg_.validation_eps);
            while (static_cast<int>(validation_window_.size()) > cfg_.validation_window)
                validation_window_.pop_front();
            if (static_cast<int>(validation_window_.size()) == cfg_.validation_window) {
                const long passes =
                    std::count(validation_window_.begin(), validation_window_.end(), true);
                if (passes >= static_cast<long>(std::ceil(cfg_.validation_pass_fraction *
                                                          cfg_.validation_window))) {
                    // Confirm with a refit over everything collected so far:
                    // if the estimates still move, freezing would lock in a
                    // model the remaining data disagrees with.
                    if (confirm_stable_refit()) {
                        ValidationReport final_report = report;
                        final_report.window_pass_rate =
                            static_cast<double>(passes) / cfg_.validation_window;
                        snapshot_ = CalibrationSnapshot(response_, vignette_, final_report);
                        phase_ = CalibrationPhase::Frozen;
                    } else {
                        validation_window_.clear();
                    }
                }
            }
        }
    }

    const size_t n = phase_ == CalibrationPhase::CollectingCrf ? crf_pairs_.size()
                                                               : vignette_pairs_.size();
    std::ostringstream os;
    os << "phase=" << to_string(phase_) << " pairs=" << n << " k_err=" << last_k_err_;
    status_ = os.str();
    if (log_) log_(status_);
}

namespace {
// Sup-norm movement (LUT units / attenuation units) below which a refit is
// considered to confirm the previous estimate.
constexpr double kStableTol = 0.005;
}  // namespace

// Refit both models on all collected pairs and report whether neither moved
// beyond kStableTol. The refits are kept either way.
bool Calibrator::confirm_stable_refit() {
    bool moved = false;
    try {
        const InverseResponse refit = estimate_crf(crf_pairs_, cfg_);
        double change = 0.0;
        for (int m = 0; m <= 255; ++m)
            change = std::max(change, std::abs(refit(m) - response_(m)));
        response_ = refit;
        crf_fit_pairs_ = crf_pairs_.size();
        if (change > kStableTol) moved = true;
    } catch (const Error&) {
        // keep the previous estimate
    }
    try {
        const VignetteModel refit = estimate_vignette(vignette_pairs_, response_, cfg_);
        double change = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const double r = i / 100.0;
            change = std::max(change, std::abs(refit(r) - vignette_(r)));
        }
        vignette_ = refit;
        vignette_fit_pairs_ = vignette_pairs_.size();
        if (change > kStableTol) moved = true;
    } catch (const Error&) {
        // keep the previous estimate
    }
    return !moved;
}

void Calibrator::try_advance() {
    if (phase_ == CalibrationPhase::CollectingCrf) {
        if (crf_pairs_.size() < cfg_.min_pairs) return;
        if (crf_pairs_.size() < pairs_at_last_attempt_ + pairs_at_last_attempt_ / 10) return;
        pairs_at_last_attempt_ = crf_pairs_.size();
        try {
            response_ = estimate_crf(crf_pairs_, cfg_);
            crf_fit_pairs_ = crf_pairs_.size();
            phase_ = CalibrationPhase::CollectingVignette;
            pairs_at_last_attempt_ = 0;
            last_failure_.clear();
            degenerate_exposures_ = false;
        } catch (const UnobservableError& e) {
            last_failure_ = e.what();
            degenerate_exposures_ = true;
        } catch (const NotReadyError& e) {
            last_failure_ = e.what();
        }
        return;
    }

    // After the first fits the estimates keep refining as pairs accumulate
    // (each refit waits for the pair set to grow substantially); validation
    // history is reset whenever a model changes.
    // Eq.-3-style validation measures consistency, not absolute shape (a
    // curve that is wrong in a way adjacent-frame ratios cannot see still
    // passes). Freezing therefore additionally requires the estimates to
    // have stabilized: refits continue as the pair sets grow, and any refit
    // that materially moves a model restarts the validation window.
    bool models_moved = false;

    if (crf_pairs_.size() >= crf_fit_pairs_ + crf_fit_pairs_ / 2) {
        try {
            const InverseResponse refit = estimate_crf(crf_pairs_, cfg_);
            double change = 0.0;
            for (int m = 0; m <= 255; ++m)
                change = std::max(change, std::abs(refit(m) - response_(m)));
            response_ = refit;
            if (change > kStableTol) models_moved = true;
        } catch (const Error&) {
            // keep the previous estimate
        }
        crf_fit_pairs_ = crf_pairs_.size();
    }

    if (phase_ == CalibrationPhase::CollectingVignette) {
        if (vignette_pairs_.size() < cfg_.min_pairs) return;
        if (vignette_pairs_.size() < pairs_at_last_attempt_ + pairs_at_last_attempt_ / 10)
            return;
        pairs_at_last_attempt_ = vignette_pairs_.size();
        try {
            vignette_ = estimate_vignette(vignette_pairs_, response_, cfg_);
            vignette_fit_pairs_ = vignette_pairs_.size();
            phase_ = CalibrationPhase::Validating;
            last_failure_.clear();
            models_moved = true;
        } catch (const UnobservableError& e) {
            last_failure_ = e.what();
        } catch (const NotReadyError& e) {
            last_failure_ = e.what();
        } catch (const ModelError& e) {
            // An early fit on few pairs can stall at the range boundary;
            // retry once more pairs arrive.
            last_failure_ = e.what();
        }
    } else if (phase_ == CalibrationPhase::Validating &&
               (models_moved ||
                vignette_pairs_.size() >= vignette_fit_pairs_ + vignette_fit_pairs_ / 2)) {
        try {
            const VignetteModel refit = estimate_vignette(vignette_pairs_, response_, cfg_);
            double change = 0.0;
            for (int i = 0; i <= 100; ++i) {
                const double r = i / 100.0;
                change = std::max(change, std::abs(refit(r) - vignette_(r)));
            }
            vignette_ = refit;
            if (change > kStableTol) models_moved = true;
        } catch (const Error&) {
            // keep the previous estimate
        }
        vignette_fit_pairs_ = vignette_pairs_.size();
    }

    if (models_moved) validation_window_.clear();
}

void Calibrator::finish() const {
    if (phase_ == CalibrationPhase::Frozen) return;
    if (degenerate_exposures_)
        throw UnobservableError("calibration unobservable: " + last_failure_);
    std::string reason = last_failure_.empty()
                             ? std::string("sequence ended in phase ") + to_string(phase_)
                             : last_failure_;
    throw NotReadyError("calibration did not converge: " + reason);
}

const CalibrationSnapshot& Calibrator::snapshot() const {
    if (phase_ != CalibrationPhase::Frozen)
        throw StateError("Calibrator::snapshot: calibration not frozen");
    return snapshot_;
}

}  // namespace photocal

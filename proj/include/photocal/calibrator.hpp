#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "photocal/photometry.hpp"
#include "photocal/tracker.hpp"

namespace photocal {

struct CalibratorConfig {
    size_t min_pairs = 2000;
    int min_intensity_levels = 64;
    double same_radius_rho = 0.02;
    int pair_max_gap = 30;
    double smoothness = 1e-3;       // relative to the data term
    int reweight_rounds = 3;
    double validation_eps = 0.02;   // relative error threshold on k
    int validation_window = 30;     // frame pairs
    double validation_pass_fraction = 0.9;
    size_t min_validation_pairs = 10;
    double radial_coverage = 0.7;   // fraction of [0,1] the radii must cover
};

// Monotone LUT minimizing the Huber-weighted Eq.-style ratio residuals with
// second-difference smoothing; endpoints pinned, monotonicity by
// pool-adjacent-violators projection.
InverseResponse estimate_crf(const std::vector<CorrespondencePair>& pairs,
                             const CalibratorConfig& cfg = {});

// Least-squares fit of (a2, a4, a6) in the log domain with Huber weighting.
VignetteModel estimate_vignette(const std::vector<CorrespondencePair>& pairs,
                                const InverseResponse& ir,
                                const CalibratorConfig& cfg = {});

// k = (1/N) sum f^-1(m1)/f^-1(m2) * V(r2)/V(r1), compared to the metadata
// ratio e1/e2. All pairs must belong to one frame pair.
ValidationReport validate_exposure(const std::vector<CorrespondencePair>& pairs,
                                   const InverseResponse& ir, const VignetteModel& v);

enum class CalibrationPhase { CollectingCrf, CollectingVignette, Validating, Frozen };

const char* to_string(CalibrationPhase phase);

// Sequential pipeline: CRF first, then vignette, then exposure validation;
// freezes once the validation window clears the threshold.
class Calibrator {
public:
    explicit Calibrator(CalibratorConfig cfg = {});

    // Advance the state with a new frame and the tracks accumulated so far.
    // Frames must arrive in strictly increasing id order.
    void feed_frame(const Frame& frame, const TrackSet& tracks);

    // End-of-sequence check: throws UnobservableError / NotReadyError when
    // the pipeline never froze, with the blocking reason.
    void finish() const;

    CalibrationPhase phase() const { return phase_; }
    bool frozen() const { return phase_ == CalibrationPhase::Frozen; }
    const CalibrationSnapshot& snapshot() const;
    const InverseResponse& response() const { return response_; }
    const VignetteModel& vignette() const { return vignette_; }

    // `phase=<p> pairs=<n> k_err=<x>` for the most recent frame.
    const std::string& status_line() const { return status_; }

    using LogFn = std::function<void(const std::string&)>;
    void set_logger(LogFn fn) { log_ = std::move(fn); }

private:
    void try_advance();
    bool confirm_stable_refit();

    CalibratorConfig cfg_;
    CalibrationPhase phase_ = CalibrationPhase::CollectingCrf;
    long last_frame_id_ = -1;
    std::vector<ExposureRecord> exposures_;

    // Pairs classified once on arrival; the vignette accumulator grows from
    // the start so that stage begins with history.
    std::vector<CorrespondencePair> crf_pairs_;
    std::vector<CorrespondencePair> vignette_pairs_;

    size_t pairs_at_last_attempt_ = 0;
    size_t crf_fit_pairs_ = 0;  // pair count at the last successful fit
    size_t vignette_fit_pairs_ = 0;
    std::string last_failure_;
    bool degenerate_exposures_ = false;

    InverseResponse response_;
    VignetteModel vignette_;
    std::deque<bool> validation_window_;
    double last_k_err_ = -1.0;
    CalibrationSnapshot snapshot_;
    std::string status_;
    LogFn log_;
};

}  // namespace photocal

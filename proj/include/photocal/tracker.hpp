#pragma once

#include <optional>
#include <vector>

#include "photocal/photometry.hpp"

namespace photocal {

struct TrackObservation {
    long frame_id = 0;
    double x = 0.0, y = 0.0;  // sub-pixel position
    double intensity = 0.0;   // bilinear-sampled, 0..255
    double radius = 0.0;      // normalized
};

struct Track {
    long id = 0;
    std::vector<TrackObservation> observations;
};

struct TrackSet {
    std::vector<Track> tracks;
};

// One (M1, M2, R1, R2, e1, e2) sample feeding the ratio constraints.
struct CorrespondencePair {
    double m1 = 0.0, m2 = 0.0;
    double r1 = 0.0, r2 = 0.0;
    double e1 = 0.0, e2 = 0.0;
    long frame1 = 0, frame2 = 0;
};

enum class PairMode { SameRadius, RadialMotion };

struct TrackerConfig {
    int max_corners = 600;
    int nms_radius = 8;
    double min_corner_score = 1.0;  // on 0..255 intensity scale
    int pyramid_levels = 4;
    int patch_half = 4;             // 8x8 patch
    int max_iterations = 30;
    double loss_threshold = 12.0;   // mean |residual| in intensity levels
    double convergence_eps = 0.01;  // px
};

// Min-eigenvalue corner score over a 3x3 gradient window, non-maximum
// suppression, score-descending order, deterministic tie-breaking by scan
// order. Sub-pixel via parabolic fit of the score map.
std::vector<std::pair<double, double>> detect_corners(const Frame& frame, int max_count,
                                                      const TrackerConfig& cfg = {});

// Pyramidal translation-only patch alignment. A per-patch gain is solved in
// closed form each iteration so tracking survives exposure changes between
// frames; the loss test applies to the gain-compensated residual.
std::vector<std::optional<std::pair<double, double>>> track_points(
    const Frame& prev, const Frame& next, const std::vector<std::pair<double, double>>& points,
    const TrackerConfig& cfg = {});

// Pair extraction. same-radius keeps |r1 - r2| < rho (vignette cancels),
// radial-motion keeps |r1 - r2| >= rho. Pairs violating saturation bounds
// are dropped. Observations within a track are paired up to max_gap frames
// apart (by observation index).
std::vector<CorrespondencePair> extract_pairs(const TrackSet& tracks,
                                              const std::vector<ExposureRecord>& exposures,
                                              PairMode mode, double rho = 0.02,
                                              int max_gap = 30);

// Stateful frame-to-frame tracker: maintains live tracks, retires lost ones,
// re-detects corners when coverage drops.
class SparseTracker {
public:
    explicit SparseTracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

    void feed(const Frame& frame);
    const TrackSet& tracks() const { return tracks_; }

private:
    struct Live {
        size_t track_index;
        double x, y;
    };

    TrackerConfig cfg_;
    TrackSet tracks_;
    std::vector<Live> live_;
    std::optional<Frame> last_frame_;
    long next_id_ = 0;
};

}  // namespace photocal

#include "photocal/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace photocal {

namespace {

Image<double> to_double(const Image<uint8_t>& src) {
    Image<double> out(src.width(), src.height());
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x) out.at(x, y) = src.at(x, y);
    return out;
}

// Separable 3x3 binomial blur with replicated borders. Pixel noise is the
// dominant error source for both corner scores and LK gradients, so all
// geometric estimation runs on the smoothed image; photometric samples keep
// using the raw frame.
Image<double> smooth3(const Image<double>& src) {
    const int w = src.width(), h = src.height();
    Image<double> tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
            tmp.at(x, y) = 0.25 * (src.at(xm, y) + 2.0 * src.at(x, y) + src.at(xp, y));
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
            out.at(x, y) = 0.25 * (tmp.at(x, ym) + 2.0 * tmp.at(x, y) + tmp.at(x, yp));
        }
    return out;
}

std::vector<Image<double>> build_pyramid(const Image<uint8_t>& img, int levels) {
    std::vector<Image<double>> pyr;
    pyr.push_back(smooth3(to_double(img)));
    for (int l = 1; l < levels; ++l) {
        if (pyr.back().width() < 16 || pyr.back().height() < 16) break;
        pyr.push_back(half_sample(pyr.back()));
    }
    return pyr;
}

}  // namespace

std::vector<std::pair<double, double>> detect_corners(const Frame& frame, int max_count,
                                                      const TrackerConfig& cfg) {
    if (max_count < 1) throw DomainError("detect_corners: max_count must be >= 1");
    const Image<double> img = smooth3(to_double(frame.image()));
    const int w = img.width(), h = img.height();

    Image<double> gx(w, h), gy(w, h);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            gx.at(x, y) = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
            gy.at(x, y) = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
        }
    }

    Image<double> score(w, h, 0.0);
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            double sxx = 0, syy = 0, sxy = 0;
            for (int j = -1; j <= 1; ++j) {
                for (int i = -1; i <= 1; ++i) {
                    const double a = gx.at(x + i, y + j);
                    const double b = gy.at(x + i, y + j);
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            const double tr = sxx + syy;
            const double det = std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
            score.at(x, y) = 0.5 * (tr - det);
        }
    }

    struct Cand {
        double s;
        int x, y;
    };
    std::vector<Cand> cands;
    const int r = cfg.nms_radius;
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            const double s = score.at(x, y);
            if (s < cfg.min_corner_score) continue;
            bool is_max = true;
            for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r) && is_max; ++j)
                for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) {
                    const double o = score.at(i, j);
                    // Scan-order tie break: an equal-scoring earlier pixel wins.
                    if (o > s || (o == s && (j < y || (j == y && i < x)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) cands.push_back({s, x, y});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.s != b.s) return a.s > b.s;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (static_cast<int>(cands.size()) > max_count) cands.resize(max_count);

    std::vector<std::pair<double, double>> out;
    out.reserve(cands.size());
    for (const auto& c : cands) {
        double sx = c.x, sy = c.y;
        // Parabolic sub-pixel refinement on the score map.
        const double den_x =
            score.at(c.x - 1, c.y) - 2 * score.at(c.x, c.y) + score.at(c.x + 1, c.y);
        const double den_y =
            score.at(c.x, c.y - 1) - 2 * score.at(c.x, c.y) + score.at(c.x, c.y + 1);
        if (den_x < 0) {
            const double d = 0.5 * (score.at(c.x - 1, c.y) - score.at(c.x + 1, c.y)) / den_x;
            if (std::abs(d) < 1.0) sx += -d;
        }
        if (den_y < 0) {
            const double d = 0.5 * (score.at(c.x, c.y - 1) - score.at(c.x, c.y + 1)) / den_y;
            if (std::abs(d) < 1.0) sy += -d;
        }
        out.emplace_back(sx, sy);
    }
    return out;
}

std::vector<std::optional<std::pair<double, double>>> track_points(
    const Frame& prev, const Frame& next, const std::vector<std::pair<double, double>>& points,
    const TrackerConfig& cfg) {
    for (const auto& [px, py] : points)
        if (!prev.image().inside(px, py)) throw DomainError("track_points: point outside frame");

    const auto pyr_prev = build_pyramid(prev.image(), cfg.pyramid_levels);
    const auto pyr_next = build_pyramid(next.image(), cfg.pyramid_levels);
    const int levels = static_cast<int>(std::min(pyr_prev.size(), pyr_next.size()));
    const int hp = cfg.patch_half;
    const int patch_n = (2 * hp) * (2 * hp);

    std::vector<std::optional<std::pair<double, double>>> result(points.size());
    for (size_t pi = 0; pi < points.size(); ++pi) {
        double dx = 0.0, dy = 0.0;  // displacement at the current level
        bool ok = true;
        double final_loss = 0.0;
        for (int l = levels - 1; l >= 0 && ok; --l) {
            const auto& I0 = pyr_prev[l];
            const auto& I1 = pyr_next[l];
            const double px = to_level(points[pi].first, l);
            const double py = to_level(points[pi].second, l);
            if (!I0.inside(px, py, hp + 1.0)) {
                // Patch does not fit at this level; rely on finer levels.
                if (l > 0) {
                    dx *= 2.0;
                    dy *= 2.0;
                }
                continue;
            }

            // Template gradients and Gauss-Newton system (inverse style: the
            // Hessian comes from the reference patch and is constant).
            double gxx = 0, gyy = 0, gxy = 0;
            std::vector<double> tv(patch_n), tgx(patch_n), tgy(patch_n);
            int k = 0;
            for (int j = -hp; j < hp; ++j) {
                for (int i = -hp; i < hp; ++i, ++k) {
                    const double ox = px + i + 0.5;
                    const double oy = py + j + 0.5;
                    tv[k] = I0.bilinear(ox, oy);
                    const auto [gx, gy] = I0.bilinear_grad(ox, oy);
                    tgx[k] = gx;
                    tgy[k] = gy;
                    gxx += gx * gx;
                    gyy += gy * gy;
                    gxy += gx * gy;
                }
            }
            const double det = gxx * gyy - gxy * gxy;
            if (det < 1e-6 || gxx + gyy < 1e-4) {
                ok = false;
                break;
            }

            for (int it = 0; it < cfg.max_iterations; ++it) {
                if (!I1.inside(px + dx, py + dy, hp + 1.0)) {
                    ok = false;
                    break;
                }
                // Closed-form per-patch gain, then the usual LK step.
                double st2 = 0, stn = 0;
                std::vector<double> nv(patch_n);
                k = 0;
                for (int j = -hp; j < hp; ++j)
                    for (int i = -hp; i < hp; ++i, ++k) {
                        nv[k] = I1.bilinear(px + dx + i + 0.5, py + dy + j + 0.5);
                        st2 += tv[k] * tv[k];
                        stn += tv[k] * nv[k];
                    }
                const double gain = st2 > 1e-9 ? stn / st2 : 1.0;
                double bx = 0, by = 0, loss = 0;
                for (k = 0; k < patch_n; ++k) {
                    const double r = nv[k] - gain * tv[k];
                    bx += r * tgx[k] * gain;
                    by += r * tgy[k] * gain;
                    loss += std::abs(r);
                }
                final_loss = loss / patch_n;
                const double g2xx = gain * gain * gxx, g2yy = gain * gain * gyy,
                             g2xy = gain * gain * gxy;
                const double d2 = g2xx * g2yy - g2xy * g2xy;
                if (d2 < 1e-9) {
                    ok = false;
                    break;
                }
                const double sx = -(g2yy * bx - g2xy * by) / d2;
                const double sy = -(-g2xy * bx + g2xx * by) / d2;
                dx += sx;
                dy += sy;
                if (std::hypot(sx, sy) < cfg.convergence_eps) break;
            }
            if (l > 0) {
                dx *= 2.0;
                dy *= 2.0;
            }
        }
        const double nx = points[pi].first + dx;
        const double ny = points[pi].second + dy;
        if (!ok || final_loss > cfg.loss_threshold ||
            !next.image().inside(nx, ny, hp + 1.0)) {
            result[pi] = std::nullopt;
        } else {
            result[pi] = std::make_pair(nx, ny);
        }
    }
    return result;
}

std::vector<CorrespondencePair> extract_pairs(const TrackSet& tracks,
                                              const std::vector<ExposureRecord>& exposures,
                                              PairMode mode, double rho, int max_gap) {
    std::map<long, double> exposure_by_frame;
    for (const auto& e : exposures) exposure_by_frame[e.frame_id] = e.exposure_ms;

    auto exposure_of = [&](long frame_id) {
        const auto it = exposure_by_frame.find(frame_id);
        if (it == exposure_by_frame.end())
            throw DataError("extract_pairs: no exposure record for frame " +
                            std::to_string(frame_id));
        return it->second;
    };

    std::vector<CorrespondencePair> out;
    for (const auto& track : tracks.tracks) {
        const auto& obs = track.observations;
        for (size_t i = 0; i < obs.size(); ++i) {
            const size_t jmax = std::min(obs.size(), i + 1 + static_cast<size_t>(max_gap));
            for (size_t j = i + 1; j < jmax; ++j) {
                const auto& a = obs[i];
                const auto& b = obs[j];
                if (a.intensity < kSaturationLow || a.intensity > kSaturationHigh ||
                    b.intensity < kSaturationLow || b.intensity > kSaturationHigh)
                    continue;
                const double dr = std::abs(a.radius - b.radius);
                if (mode == PairMode::SameRadius ? dr >= rho : dr < rho) continue;
                out.push_back({a.intensity, b.intensity, a.radius, b.radius,
                               exposure_of(a.frame_id), exposure_of(b.frame_id), a.frame_id,
                               b.frame_id});
            }
        }
    }
    return out;
}

void SparseTracker::feed(const Frame& frame) {
    if (last_frame_) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(live_.size());
        for (const auto& lv : live_) pts.emplace_back(lv.x, lv.y);
        const auto moved = track_points(*last_frame_, frame, pts, cfg_);
        std::vector<Live> survivors;
        survivors.reserve(live_.size());
        for (size_t i = 0; i < live_.size(); ++i) {
            if (!moved[i]) continue;
            auto [nx, ny] = *moved[i];
            auto& track = tracks_.tracks[live_[i].track_index];
            track.observations.push_back(
                {frame.exposure().frame_id, nx, ny, frame.image().bilinear(nx, ny),
                 frame.radius(nx, ny)});
            survivors.push_back({live_[i].track_index, nx, ny});
        }
        live_ = std::move(survivors);
    }

    if (static_cast<int>(live_.size()) < (6 * cfg_.max_corners) / 10) {
        const auto corners =
            detect_corners(frame, cfg_.max_corners - static_cast<int>(live_.size()), cfg_);
        const double min_dist2 = static_cast<double>(cfg_.nms_radius) * cfg_.nms_radius;
        for (const auto& [cx, cy] : corners) {
            bool taken = false;
            for (const auto& lv : live_) {
                const double dx = lv.x - cx, dy = lv.y - cy;
                if (dx * dx + dy * dy < min_dist2) {
                    taken = true;
                    break;
                }
            }
            if (taken) continue;
            Track t;
            t.id = next_id_++;
            t.observations.push_back({frame.exposure().frame_id, cx, cy,
                                      frame.image().bilinear(cx, cy), frame.radius(cx, cy)});
            live_.push_back({tracks_.tracks.size(), cx, cy});
            tracks_.tracks.push_back(std::move(t));
        }
    }
    last_frame_ = frame;
}

}  // namespace photocal

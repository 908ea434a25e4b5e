#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "photocal/eval.hpp"
#include "photocal/photometry.hpp"
#include "photocal/tracker.hpp"

namespace photocal {
namespace io {

// --- portable graymap (PGM P5) -------------------------------------------

Image<uint8_t> read_pgm8(const std::filesystem::path& path);
void write_pgm8(const std::filesystem::path& path, const Image<uint8_t>& img);

// 16-bit samples are big-endian per the format; values/65535 map to [0,1].
Image<uint16_t> read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const Image<uint16_t>& img);

// --- times file: `frame_id timestamp exposure_ms` per line ----------------

std::vector<ExposureRecord> read_times(const std::filesystem::path& path);
void write_times(const std::filesystem::path& path, const std::vector<ExposureRecord>& records);

// --- response file: 256 ascending values, normalized on read --------------

InverseResponse read_response(const std::filesystem::path& path);
void write_response(const std::filesystem::path& path, const InverseResponse& response);

// --- vignette image: 16-bit PGM attenuation map ---------------------------

struct VignetteMap {
    Image<double> dense;    // values in [0,1]
    VignetteModel fitted;   // even-polynomial least-squares fit
};

VignetteMap read_vignette_image(const std::filesystem::path& path);
void write_vignette_image(const std::filesystem::path& path, const VignetteModel& model,
                          int width, int height);
void write_vignette_dense(const std::filesystem::path& path, const Image<double>& dense);

// Least-squares projection of a dense map onto the polynomial model over
// radius bins; principal point at the image center.
VignetteModel fit_vignette_model(const Image<double>& dense);

// --- trajectory file: `timestamp tx ty tz qx qy qz qw` --------------------

Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);

// --- track file: `track_id frame_id x y` -----------------------------------

TrackSet read_tracks(const std::filesystem::path& path);
void write_tracks(const std::filesystem::path& path, const TrackSet& tracks);

// Recompute per-observation intensity and radius from frames (track files
// store positions only).
void resample_track_observations(TrackSet& tracks, const std::vector<Frame>& frames);

// --- dataset layout --------------------------------------------------------

struct DatasetLayout {
    std::filesystem::path root;

    std::filesystem::path images_dir() const { return root / "images"; }
    std::filesystem::path times_file() const { return root / "times.txt"; }
    std::filesystem::path image_file(long frame_id) const;
};

// Frame count consistency is checked against the times file.
std::vector<Frame> read_dataset(const DatasetLayout& layout);

}  // namespace io
}  // namespace photocal

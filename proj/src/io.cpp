#include "photocal/io.hpp"

#include <Eigen/Geometry>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace photocal {
namespace io {

namespace {

std::string loc(const std::filesystem::path& path, size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

// PGM header token, skipping whitespace and `#` comments.
std::string pgm_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw FormatError(path.string() + ": truncated PGM header");
    return tok;
}

struct PgmHeader {
    int width, height, maxval;
};

PgmHeader read_pgm_header(std::istream& in, const std::filesystem::path& path) {
    if (pgm_token(in, path) != "P5")
        throw FormatError(path.string() + ": not a binary PGM (P5) file");
    PgmHeader h{};
    try {
        h.width = std::stoi(pgm_token(in, path));
        h.height = std::stoi(pgm_token(in, path));
        h.maxval = std::stoi(pgm_token(in, path));
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    if (h.width <= 0 || h.height <= 0)
        throw FormatError(path.string() + ": non-positive PGM dimensions");
    return h;
}

double parse_double(const std::string& tok, const std::string& where) {
    try {
        size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where + ": cannot parse number '" + tok + "'");
    }
}

long parse_long(const std::string& tok, const std::string& where) {
    try {
        size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where + ": cannot parse integer '" + tok + "'");
    }
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace

Image<uint8_t> read_pgm8(const std::filesystem::path& path) {
    auto in = open_in(path, true);
    const PgmHeader h = read_pgm_header(in, path);
    if (h.maxval != 255)
        throw FormatError(path.string() + ": expected 8-bit PGM (maxval 255), got maxval " +
                          std::to_string(h.maxval));
    Image<uint8_t> img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data().size()))
        throw FormatError(path.string() + ": truncated PGM pixel data");
    return img;
}

void write_pgm8(const std::filesystem::path& path, const Image<uint8_t>& img) {
    auto out = open_out(path, true);
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data().data()),
              static_cast<std::streamsize>(img.data().size()));
    if (!out) throw DataError("write failed: " + path.string());
}

Image<uint16_t> read_pgm16(const std::filesystem::path& path) {
    auto in = open_in(path, true);
    const PgmHeader h = read_pgm_header(in, path);
    if (h.maxval != 65535)
        throw FormatError(path.string() + ": expected 16-bit PGM (maxval 65535), got maxval " +
                          std::to_string(h.maxval));
    Image<uint16_t> img(h.width, h.height);
    std::vector<uint8_t> raw(img.data().size() * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw FormatError(path.string() + ": truncated PGM pixel data");
    for (size_t i = 0; i < img.data().size(); ++i)
        img.data()[i] = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    return img;
}

void write_pgm16(const std::filesystem::path& path, const Image<uint16_t>& img) {
    auto out = open_out(path, true);
    out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::vector<uint8_t> raw(img.data().size() * 2);
    for (size_t i = 0; i < img.data().size(); ++i) {
        raw[2 * i] = static_cast<uint8_t>(img.data()[i] >> 8);
        raw[2 * i + 1] = static_cast<uint8_t>(img.data()[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ExposureRecord> read_times(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<ExposureRecord> out;
    std::string line;
    size_t line_no = 0;
    long prev_id = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 3)
            throw FormatError(loc(path, line_no) + ": expected `frame_id timestamp exposure_ms`");
        ExposureRecord rec;
        rec.frame_id = parse_long(toks[0], loc(path, line_no));
        rec.timestamp = parse_double(toks[1], loc(path, line_no));
        rec.exposure_ms = parse_double(toks[2], loc(path, line_no));
        if (!(rec.exposure_ms > 0.0))
            throw DataError(loc(path, line_no) + ": exposure must be > 0");
        if (rec.frame_id <= prev_id)
            throw DataError(loc(path, line_no) + ": frame ids must be strictly increasing");
        prev_id = rec.frame_id;
        out.push_back(rec);
    }
    return out;
}

void write_times(const std::filesystem::path& path,
                 const std::vector<ExposureRecord>& records) {
    auto out = open_out(path);
    out.precision(17);
    for (const auto& r : records)
        out << r.frame_id << " " << r.timestamp << " " << r.exposure_ms << "\n";
    if (!out) throw DataError("write failed: " + path.string());
}

InverseResponse read_response(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<double> values;
    std::string tok;
    while (in >> tok) values.push_back(parse_double(tok, path.string()));
    if (values.size() != 256)
        throw FormatError(path.string() + ": expected 256 values, got " +
                          std::to_string(values.size()));
    const double last = values.back();
    if (!(last > 0.0)) throw FormatError(path.string() + ": last value must be > 0");
    std::array<double, 256> lut;
    for (int i = 0; i < 256; ++i) {
        lut[i] = values[i] / last;
        if (i > 0 && lut[i] < lut[i - 1])
            throw FormatError(path.string() + ": values not ascending at index " +
                              std::to_string(i));
    }
    if (lut[0] != 0.0)
        throw FormatError(path.string() + ": first value must be 0");
    return InverseResponse(lut);
}

void write_response(const std::filesystem::path& path, const InverseResponse& response) {
    auto out = open_out(path);
    out.precision(17);
    for (int i = 0; i < 256; ++i) out << response.lut()[i] << (i == 255 ? "\n" : " ");
    if (!out) throw DataError("write failed: " + path.string());
}

VignetteModel fit_vignette_model(const Image<double>& dense) {
    const double cx = (dense.width() - 1) / 2.0;
    const double cy = (dense.height() - 1) / 2.0;
    const double scale = 1.0 / std::hypot(cx, cy);

    constexpr int kBins = 100;
    std::array<double, kBins> sum{}, cnt{};
    for (int y = 0; y < dense.height(); ++y) {
        for (int x = 0; x < dense.width(); ++x) {
            const double r = std::min(1.0, std::hypot(x - cx, y - cy) * scale);
            const int b = std::min(kBins - 1, static_cast<int>(r * kBins));
            sum[b] += dense.at(x, y);
            cnt[b] += 1.0;
        }
    }

    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int b = 0; b < kBins; ++b) {
        if (cnt[b] == 0.0) continue;
        const double r = (b + 0.5) / kBins;
        const double r2 = r * r;
        const Eigen::Vector3d phi(r2, r2 * r2, r2 * r2 * r2);
        H += cnt[b] * phi * phi.transpose();
        g += cnt[b] * phi * (sum[b] / cnt[b] - 1.0);
    }
    const Eigen::Vector3d a = (H + 1e-12 * Eigen::Matrix3d::Identity()).ldlt().solve(g);
    return VignetteModel(a(0), a(1), a(2));
}

VignetteMap read_vignette_image(const std::filesystem::path& path) {
    const Image<uint16_t> raw = read_pgm16(path);
    VignetteMap out{Image<double>(raw.width(), raw.height()), VignetteModel()};
    for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x) out.dense.at(x, y) = raw.at(x, y) / 65535.0;
    out.fitted = fit_vignette_model(out.dense);
    return out;
}

void write_vignette_image(const std::filesystem::path& path, const VignetteModel& model,
                          int width, int height) {
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    const double scale = 1.0 / std::hypot(cx, cy);
    Image<uint16_t> img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double r = std::min(1.0, std::hypot(x - cx, y - cy) * scale);
            img.at(x, y) = static_cast<uint16_t>(std::lround(model(r) * 65535.0));
        }
    write_pgm16(path, img);
}

void write_vignette_dense(const std::filesystem::path& path, const Image<double>& dense) {
    Image<uint16_t> img(dense.width(), dense.height());
    for (int y = 0; y < dense.height(); ++y)
        for (int x = 0; x < dense.width(); ++x)
            img.at(x, y) = static_cast<uint16_t>(
                std::lround(std::clamp(dense.at(x, y), 0.0, 1.0) * 65535.0));
    write_pgm16(path, img);
}

Trajectory read_trajectory(const std::filesystem::path& path) {
    auto in = open_in(path);
    Trajectory out;
    std::string line;
    size_t line_no = 0;
    double prev_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks.size() != 8)
            throw FormatError(loc(path, line_no) +
                              ": expected `timestamp tx ty tz qx qy qz qw`");
        std::array<double, 8> v;
        for (size_t i = 0; i < 8; ++i) v[i] = parse_double(toks[i], loc(path, line_no));
        if (v[0] <= prev_t)
            throw DataError(loc(path, line_no) + ": timestamps must be strictly increasing");
        prev_t = v[0];
        Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);  // w, x, y, z
        if (std::abs(q.norm() - 1.0) > 1e-6)
            throw DataError(loc(path, line_no) + ": quaternion not normalized");
        out.samples.push_back(
            {v[0], PoseSE3(q.normalized().toRotationMatrix(), {v[1], v[2], v[3]})});
    }
    return out;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
    auto out = open_out(path);
    out.precision(17);
    for (const auto& s : trajectory.samples) {
        Eigen::Quaterniond q(s.pose.rotation());
        if (q.w() < 0) q.coeffs() = -q.coeffs();
        q.normalize();
        const auto& t = s.pose.translation();
        out << s.timestamp << " " << t.x() << " " << t.y() << " " << t.z() << " " << q.x()
            << " " << q.y() << " " << q.z() << " " << q.w() << "\n";
    }
    if (!out) throw DataError("write failed: " + path.string());
}

TrackSet read_tracks(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::map<long, Track> by_id;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 4)
            throw FormatError(loc(path, line_no) + ": expected `track_id frame_id x y`");
        const long tid = parse_long(toks[0], loc(path, line_no));
        TrackObservation obs;
        obs.frame_id = parse_long(toks[1], loc(path, line_no));
        obs.x = parse_double(toks[2], loc(path, line_no));
        obs.y = parse_double(toks[3], loc(path, line_no));
        auto& track = by_id[tid];
        track.id = tid;
        if (!track.observations.empty() && obs.frame_id <= track.observations.back().frame_id)
            throw DataError(loc(path, line_no) + ": track " + std::to_string(tid) +
                            " frame ids must increase");
        track.observations.push_back(obs);
    }
    TrackSet out;
    out.tracks.reserve(by_id.size());
    for (auto& [id, track] : by_id) out.tracks.push_back(std::move(track));
    return out;
}

void write_tracks(const std::filesystem::path& path, const TrackSet& tracks) {
    auto out = open_out(path);
    out.precision(17);
    for (const auto& t : tracks.tracks)
        for (const auto& o : t.observations)
            out << t.id << " " << o.frame_id << " " << o.x << " " << o.y << "\n";
    if (!out) throw DataError("write failed: " + path.string());
}

void resample_track_observations(TrackSet& tracks, const std::vector<Frame>& frames) {
    std::map<long, const Frame*> by_id;
    for (const auto& f : frames) by_id[f.exposure().frame_id] = &f;
    for (auto& track : tracks.tracks) {
        for (auto& obs : track.observations) {
            const auto it = by_id.find(obs.frame_id);
            if (it == by_id.end())
                throw DataError("resample_track_observations: no frame " +
                                std::to_string(obs.frame_id));
            const Frame& f = *it->second;
            if (!f.image().inside(obs.x, obs.y))
                throw DataError("resample_track_observations: observation outside frame " +
                                std::to_string(obs.frame_id));
            obs.intensity = f.image().bilinear(obs.x, obs.y);
            obs.radius = f.radius(obs.x, obs.y);
        }
    }
}

std::filesystem::path DatasetLayout::image_file(long frame_id) const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05ld.pgm", frame_id);
    return images_dir() / buf;
}

std::vector<Frame> read_dataset(const DatasetLayout& layout) {
    const auto records = read_times(layout.times_file());
    std::vector<Frame> frames;
    frames.reserve(records.size());
    for (const auto& rec : records) {
        const auto path = layout.image_file(rec.frame_id);
        if (!std::filesystem::exists(path))
            throw DataError("dataset: times file lists frame " + std::to_string(rec.frame_id) +
                            " but " + path.string() + " is missing");
        frames.emplace_back(read_pgm8(path), rec);
    }
    return frames;
}

}  // namespace io
}  // namespace photocal

// photocal: synthesize, calibrate, rectify, pose-refine, evaluate.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "photocal/calibrator.hpp"
#include "photocal/eval.hpp"
#include "photocal/io.hpp"
#include "photocal/pose.hpp"
#include "photocal/synth.hpp"
#include "photocal/tracker.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace photocal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitUnobservable = 4;

json spec_to_json(const SceneSpec& s) {
    return json{{"width", s.width},
                {"height", s.height},
                {"frames", s.frames},
                {"seed", s.seed},
                {"texture", s.texture == TextureKind::Checkerboard ? "checker" : "noise"},
                {"octaves", s.octaves},
                {"radiance_min", s.radiance_min},
                {"radiance_max", s.radiance_max},
                {"crf", s.crf == CrfFamily::Identity ? "identity" : "gamma"},
                {"crf_gamma", s.crf_gamma},
                {"vignette", {s.vignette_a2, s.vignette_a4, s.vignette_a6}},
                {"exposure_min_ms", s.exposure_min_ms},
                {"exposure_max_ms", s.exposure_max_ms},
                {"exposure_jitter", s.exposure_jitter},
                {"trajectory", s.trajectory == TrajectoryShape::Still ? "still" : "sweep"},
                {"noise_sigma", s.noise_sigma},
                {"plane_depth", s.plane_depth}};
}

SceneSpec spec_from_json(const json& j) {
    SceneSpec s;
    s.width = j.at("width");
    s.height = j.at("height");
    s.frames = j.at("frames");
    s.seed = j.at("seed");
    s.texture = j.at("texture") == "checker" ? TextureKind::Checkerboard
                                             : TextureKind::ValueNoise;
    s.octaves = j.at("octaves");
    s.radiance_min = j.at("radiance_min");
    s.radiance_max = j.at("radiance_max");
    s.crf = j.at("crf") == "identity" ? CrfFamily::Identity : CrfFamily::Gamma;
    s.crf_gamma = j.at("crf_gamma");
    s.vignette_a2 = j.at("vignette")[0];
    s.vignette_a4 = j.at("vignette")[1];
    s.vignette_a6 = j.at("vignette")[2];
    s.exposure_min_ms = j.at("exposure_min_ms");
    s.exposure_max_ms = j.at("exposure_max_ms");
    s.exposure_jitter = j.at("exposure_jitter");
    s.trajectory = j.at("trajectory") == "still" ? TrajectoryShape::Still
                                                 : TrajectoryShape::Sweep;
    s.noise_sigma = j.at("noise_sigma");
    s.plane_depth = j.at("plane_depth");
    return s;
}

Trajectory camera_trajectory(const SyntheticScene& scene) {
    Trajectory t;
    for (int i = 0; i < scene.frame_count(); ++i)
        t.samples.push_back({scene.exposure(i).timestamp, scene.pose(i)});
    return t;
}

int cmd_synth(const SceneSpec& spec, const fs::path& out_dir) {
    const SyntheticScene scene = generate_scene(spec);
    fs::create_directories(out_dir / "images");
    const io::DatasetLayout layout{out_dir};

    std::vector<ExposureRecord> records;
    for (int i = 0; i < scene.frame_count(); ++i) {
        const Frame frame = scene.render_frame(i);
        io::write_pgm8(layout.image_file(i), frame.image());
        records.push_back(frame.exposure());
    }
    io::write_times(layout.times_file(), records);

    std::ofstream(out_dir / "scene.json") << spec_to_json(spec).dump(2) << "\n";
    io::write_response(out_dir / "gt_response.txt", scene.response());
    io::write_vignette_image(out_dir / "gt_vignette.pgm", scene.vignette(), spec.width,
                             spec.height);
    io::write_trajectory(out_dir / "gt_trajectory.txt", camera_trajectory(scene));
    std::cout << "synth: wrote " << scene.frame_count() << " frames to " << out_dir << "\n";
    return kExitOk;
}

int cmd_calibrate(const fs::path& data_dir, const fs::path& out_dir,
                  const CalibratorConfig& ccfg, const std::string& tracks_path) {
    const io::DatasetLayout layout{data_dir};
    const std::vector<Frame> frames = io::read_dataset(layout);
    fs::create_directories(out_dir);
    std::ofstream log(out_dir / "validation.log");

    Calibrator calibrator(ccfg);
    calibrator.set_logger([&log](const std::string& line) { log << line << "\n"; });

    if (!tracks_path.empty()) {
        TrackSet tracks = io::read_tracks(tracks_path);
        io::resample_track_observations(tracks, frames);
        for (const auto& frame : frames) calibrator.feed_frame(frame, tracks);
    } else {
        SparseTracker tracker;
        for (const auto& frame : frames) {
            tracker.feed(frame);
            calibrator.feed_frame(frame, tracker.tracks());
        }
    }
    calibrator.finish();  // throws when not frozen

    const auto& snapshot = calibrator.snapshot();
    io::write_response(out_dir / "response.txt", snapshot.response());
    io::write_vignette_image(out_dir / "vignette.pgm", snapshot.vignette(),
                             frames.front().width(), frames.front().height());
    const auto& report = snapshot.report();
    log << "frozen k=" << report.k << " expected=" << report.expected
        << " rel_error=" << report.rel_error << " n=" << report.n
        << " window_pass_rate=" << report.window_pass_rate << "\n";
    std::cout << "calibrate: frozen after " << frames.size() << " frames\n";
    return kExitOk;
}

CalibrationSnapshot load_snapshot(const std::string& response_path,
                                  const std::string& vignette_path) {
    InverseResponse ir;
    VignetteModel vig;
    if (!response_path.empty()) ir = io::read_response(response_path);
    if (!vignette_path.empty()) vig = io::read_vignette_image(vignette_path).fitted;
    return CalibrationSnapshot(ir, vig, ValidationReport{});
}

int cmd_rectify(const fs::path& data_dir, const fs::path& out_dir,
                const std::string& response_path, const std::string& vignette_path) {
    const io::DatasetLayout layout{data_dir};
    const std::vector<Frame> frames = io::read_dataset(layout);
    const CalibrationSnapshot snapshot = load_snapshot(response_path, vignette_path);
    fs::create_directories(out_dir);
    for (const auto& frame : frames) {
        const IrradianceImage irr = rectify_frame(frame, snapshot);
        Image<uint16_t> img(irr.values.width(), irr.values.height());
        Image<uint8_t> mask(irr.values.width(), irr.values.height());
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                img.at(x, y) = static_cast<uint16_t>(
                    std::lround(std::clamp(irr.values.at(x, y), 0.0, 1.0) * 65535.0));
                mask.at(x, y) = irr.mask.at(x, y) ? 255 : 0;
            }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%05ld", frame.exposure().frame_id);
        io::write_pgm16(out_dir / (std::string("irradiance_") + buf + ".pgm"), img);
        io::write_pgm8(out_dir / (std::string("mask_") + buf + ".pgm"), mask);
    }
    std::cout << "rectify: wrote " << frames.size() << " irradiance images\n";
    return kExitOk;
}

Image<double> frame_irradiance(const Frame& frame, const CalibrationSnapshot* snapshot) {
    Image<double> out(frame.width(), frame.height());
    if (snapshot) {
        const IrradianceImage irr = rectify_frame(frame, *snapshot);
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x)
                out.at(x, y) = std::clamp(irr.values.at(x, y), 0.0, 1.0);
    } else {
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x) out.at(x, y) = frame.image().at(x, y) / 255.0;
    }
    return out;
}

struct PoseOptions {
    int stride = 5;
    int max_points = 400;
    int keypoints = 40;
    double kp_noise = 0.5;       // px
    double perturb_rot_deg = 2.0;
    double perturb_trans_frac = 0.05;  // of mean scene depth
    uint64_t seed = 1;
    OptimizeConfig opt;
};

int cmd_pose(const fs::path& data_dir, const fs::path& out_dir,
             const std::string& response_path, const std::string& vignette_path,
             const PoseOptions& opts) {
    std::ifstream scene_file(data_dir / "scene.json");
    if (!scene_file) throw DataError("pose: missing scene.json in " + data_dir.string());
    json j;
    scene_file >> j;
    const SceneSpec spec = spec_from_json(j);
    const SyntheticScene scene(spec);
    const io::DatasetLayout layout{data_dir};
    const std::vector<Frame> frames = io::read_dataset(layout);

    std::unique_ptr<CalibrationSnapshot> snapshot;
    if (!response_path.empty() || !vignette_path.empty())
        snapshot = std::make_unique<CalibrationSnapshot>(
            load_snapshot(response_path, vignette_path));

    fs::create_directories(out_dir);
    std::ofstream report_out(out_dir / "convergence.txt");
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Trajectory est;
    PoseSE3 world_pose = scene.pose(0);
    est.samples.push_back({scene.exposure(0).timestamp, world_pose});

    bool all_converged = true;
    for (int i = 0; i + opts.stride < scene.frame_count(); i += opts.stride) {
        const int t = i + opts.stride;
        SceneObservation obs;
        obs.cam = scene.camera();
        obs.reference = frame_irradiance(frames[i], snapshot.get());
        obs.target = frame_irradiance(frames[t], snapshot.get());

        const auto corners = detect_corners(frames[i], opts.max_points);
        for (const auto& [cx, cy] : corners) {
            if (!obs.reference.inside(cx, cy, 4.0)) continue;
            obs.points.push_back({cx, cy, 1.0 / scene.depth(i, cx, cy)});
        }

        const PoseSE3 gt_rel = scene.pose(t).inverse() * scene.pose(i);
        const Camera& cam = scene.camera();
        const int kp_step = std::max<size_t>(1, obs.points.size() / opts.keypoints);
        for (size_t k = 0; k < obs.points.size(); k += kp_step) {
            const auto& p = obs.points[k];
            const Eigen::Vector3d X((p.u - cam.cx) / cam.fx / p.inv_depth,
                                    (p.v - cam.cy) / cam.fy / p.inv_depth, 1.0 / p.inv_depth);
            const Eigen::Vector3d Xt = gt_rel * X;
            if (Xt.z() < 0.01) continue;
            Eigen::Vector2d uv(cam.fx * Xt.x() / Xt.z() + cam.cx,
                               cam.fy * Xt.y() / Xt.z() + cam.cy);
            uv += opts.kp_noise * Eigen::Vector2d(gauss(rng), gauss(rng));
            obs.keypoints.push_back({X, uv});
        }

        // Seeded perturbation of the true relative pose as the starting point.
        Vector6d xi;
        for (int d = 0; d < 6; ++d) xi(d) = gauss(rng);
        xi.head<3>() = xi.head<3>().normalized() * opts.perturb_trans_frac * scene.mean_depth();
        xi.tail<3>() = xi.tail<3>().normalized() * opts.perturb_rot_deg * M_PI / 180.0;
        const PoseSE3 initial = PoseSE3::exp(xi) * gt_rel;

        const OptimizeResult result = optimize_pose(obs, initial, opts.opt);
        all_converged = all_converged && result.report.converged;
        report_out << "pair " << i << " " << t << "\n" << result.report.text();

        world_pose = world_pose * result.pose.inverse();
        est.samples.push_back({scene.exposure(t).timestamp, world_pose});
    }
    io::write_trajectory(out_dir / "trajectory.txt", est);
    io::write_trajectory(out_dir / "gt_trajectory.txt", camera_trajectory(scene));
    std::cout << "pose: wrote " << est.samples.size() << " poses\n";
    if (!all_converged) throw NotReadyError("pose: at least one pair did not converge");
    return kExitOk;
}

int cmd_eval(const fs::path& estimate_path, const fs::path& reference_path,
             const fs::path& out_csv, const std::string& run_name, AlignMode mode) {
    const Trajectory est = io::read_trajectory(estimate_path);
    const Trajectory ref = io::read_trajectory(reference_path);
    const auto aligned = align_trajectories(est, ref, mode);
    const double ate = ate_rmse(aligned.estimate, ref);
    const DriftErrors drift = drift_errors(est, ref, mode);

    std::ofstream out(out_csv);
    if (!out) throw DataError("eval: cannot open " + out_csv.string());
    out.precision(12);
    out << "run, ate_rmse, rot_drift_deg, trans_drift_pct\n";
    out << run_name << ", " << ate << ", " << drift.rotation_deg << ", "
        << drift.translation_pct << "\n";
    std::cout << "eval: ate_rmse=" << ate << " rot_drift_deg=" << drift.rotation_deg
              << " trans_drift_pct=" << drift.translation_pct << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online photometric calibration and joint pose refinement"};
    app.set_config("--config", "", "key=value config file; flags take precedence");
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
    SceneSpec spec;
    std::string synth_out, crf = "gamma", texture = "noise", trajectory = "sweep";
    std::vector<double> vignette{spec.vignette_a2, spec.vignette_a4, spec.vignette_a6};
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--frames", spec.frames);
    synth->add_option("--width", spec.width);
    synth->add_option("--height", spec.height);
    synth->add_option("--seed", spec.seed);
    synth->add_option("--crf", crf, "identity | gamma");
    synth->add_option("--crf-gamma", spec.crf_gamma);
    synth->add_option("--texture", texture, "noise | checker");
    synth->add_option("--octaves", spec.octaves);
    synth->add_option("--vignette", vignette, "a2 a4 a6")->expected(3);
    synth->add_option("--exposure-min", spec.exposure_min_ms, "ms");
    synth->add_option("--exposure-max", spec.exposure_max_ms, "ms");
    synth->add_option("--exposure-jitter", spec.exposure_jitter);
    synth->add_option("--trajectory", trajectory, "sweep | still");
    synth->add_option("--noise-sigma", spec.noise_sigma);
    synth->add_option("--plane-depth", spec.plane_depth);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "estimate response and vignette");
    std::string cal_data, cal_out, cal_tracks;
    CalibratorConfig ccfg;
    calibrate->add_option("--data", cal_data, "dataset directory")->required();
    calibrate->add_option("--out", cal_out, "output directory")->required();
    calibrate->add_option("--tracks", cal_tracks, "track file instead of the tracker");
    calibrate->add_option("--rho", ccfg.same_radius_rho, "same-radius threshold");
    calibrate->add_option("--eps", ccfg.validation_eps, "validation threshold");
    calibrate->add_option("--window", ccfg.validation_window, "validation window (frame pairs)");
    calibrate->add_option("--pass-frac", ccfg.validation_pass_fraction);
    calibrate->add_option("--min-pairs", ccfg.min_pairs);
    calibrate->add_option("--pair-gap", ccfg.pair_max_gap);

    // rectify
    auto* rectify = app.add_subcommand("rectify", "write irradiance images + masks");
    std::string rec_data, rec_out, rec_response, rec_vignette;
    rectify->add_option("--data", rec_data)->required();
    rectify->add_option("--out", rec_out)->required();
    rectify->add_option("--response", rec_response, "response file (identity if omitted)");
    rectify->add_option("--vignette", rec_vignette, "vignette image (unit if omitted)");

    // pose
    auto* pose = app.add_subcommand("pose", "pairwise joint pose refinement");
    std::string pose_data, pose_out, pose_response, pose_vignette;
    PoseOptions popts;
    pose->add_option("--data", pose_data, "synthetic dataset directory")->required();
    pose->add_option("--out", pose_out)->required();
    pose->add_option("--response", pose_response);
    pose->add_option("--vignette", pose_vignette);
    pose->add_option("--stride", popts.stride);
    pose->add_option("--max-points", popts.max_points);
    pose->add_option("--keypoints", popts.keypoints);
    pose->add_option("--kp-noise", popts.kp_noise, "px");
    pose->add_option("--perturb-rot", popts.perturb_rot_deg, "deg");
    pose->add_option("--perturb-trans", popts.perturb_trans_frac, "fraction of mean depth");
    pose->add_option("--seed", popts.seed);
    pose->add_option("--levels", popts.opt.pyramid_levels);
    pose->add_option("--delta-p", popts.opt.delta_p, "Huber threshold, intensity");
    pose->add_option("--delta-g", popts.opt.delta_g, "Huber threshold, px");

    // eval
    auto* eval = app.add_subcommand("eval", "trajectory error metrics");
    std::string eval_est, eval_ref, eval_out, eval_run = "run0", eval_mode = "similarity";
    eval->add_option("--estimate", eval_est)->required();
    eval->add_option("--reference", eval_ref)->required();
    eval->add_option("--out", eval_out, "metric CSV")->required();
    eval->add_option("--run", eval_run, "run label");
    eval->add_option("--mode", eval_mode, "rigid | similarity");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            spec.crf = crf == "identity" ? CrfFamily::Identity : CrfFamily::Gamma;
            spec.texture =
                texture == "checker" ? TextureKind::Checkerboard : TextureKind::ValueNoise;
            spec.trajectory =
                trajectory == "still" ? TrajectoryShape::Still : TrajectoryShape::Sweep;
            spec.vignette_a2 = vignette[0];
            spec.vignette_a4 = vignette[1];
            spec.vignette_a6 = vignette[2];
            return cmd_synth(spec, synth_out);
        }
        if (*calibrate) return cmd_calibrate(cal_data, cal_out, ccfg, cal_tracks);
        if (*rectify) return cmd_rectify(rec_data, rec_out, rec_response, rec_vignette);
        if (*pose) return cmd_pose(pose_data, pose_out, pose_response, pose_vignette, popts);
        if (*eval)
            return cmd_eval(eval_est, eval_ref, eval_out, eval_run,
                            eval_mode == "rigid" ? AlignMode::Rigid : AlignMode::Similarity);
    } catch (const UnobservableError& e) {
        std::cerr << "error (unobservable): " << e.what() << "\n";
        return kExitUnobservable;
    } catch (const NotReadyError& e) {
        std::cerr << "error (not converged): " << e.what() << "\n";
        return kExitUnobservable;
    } catch (const FormatError& e) {
        std::cerr << "error (format): " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return kExitData;
    } catch (const SequenceError& e) {
        std::cerr << "error (sequence): " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "error (json): " << e.what() << "\n";
        return kExitData;
    }
    return kExitConfig;
}

#include "qpi_tools/commands.hpp"

#include <exception>
#include <ostream>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "qpi/dynamics.hpp"
#include "qpi/error.hpp"
#include "qpi/io.hpp"
#include "qpi/keyvalue.hpp"
#include "qpi/recon.hpp"
#include "qpi_tools/manifest.hpp"

namespace qpi::cli {
namespace {

std::string plateaus_csv(const forward::PhaseMask& mask)
{
    std::string out = "step,row,col,x0,y0,width,height,thickness_um,phase_rad\n";
    for (const auto& p : mask.plateaus)
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", p.step, p.row, p.col, p.cell.x0, p.cell.y0,
                           p.cell.width, p.cell.height, format_double(p.thickness_um),
                           format_double(p.phase_rad));
    return out;
}

// Global phase per frame: a Gaussian random walk starting at zero.
std::vector<double> drift_walk(const RunConfig& c)
{
    std::vector<double> walk(static_cast<std::size_t>(c.frames), 0.0);
    if (c.drift_std_rad == 0.0)
        return walk;
    std::mt19937_64 rng(c.system.rng_seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> step(0.0, c.drift_std_rad);
    for (std::size_t i = 1; i < walk.size(); ++i)
        walk[i] = walk[i - 1] + step(rng);
    return walk;
}

std::vector<QuadratureFrame> read_frames(const fs::path& dir)
{
    const auto dirs = io::list_frame_dirs(dir);
    if (dirs.empty())
        throw DataError(dir.string() + ": no frame_NNNN directories");
    std::vector<QuadratureFrame> frames;
    frames.reserve(dirs.size());
    for (const auto& d : dirs)
        frames.push_back(io::read_frame(d));
    return frames;
}

} // namespace

void cmd_simulate(const RunConfig& config, const fs::path& out_dir)
{
    config.validate();
    fs::create_directories(out_dir);
    const auto encoding = config.system.noise == NoiseModel::poisson ? io::ChannelEncoding::counts
                                                                      : io::ChannelEncoding::rates;
    const auto walk = drift_walk(config);
    const auto blank = ComplexSample::blank(config.geometry);

    std::vector<ComplexSample> samples;
    if (config.scene == Scene::mask) {
        const auto mask = forward::make_phase_mask(config.mask, config.geometry);
        io::write_file_atomic(out_dir / "plateaus.csv", plateaus_csv(mask));
        samples.assign(1, mask.sample);
    } else if (config.scene == Scene::drying) {
        forward::TimelineSpec spec;
        spec.kind = forward::TimelineKind::drying_film;
        spec.frames = config.frames;
        spec.frame_interval_s = config.frame_interval_s;
        spec.drying = config.film;
        samples = forward::make_timeline(spec, blank);
    } else {
        samples.assign(1, blank);
    }

    const double kappa = config.system.effective_delay_to_phase();
    for (int i = 0; i < config.frames; ++i) {
        const auto& sample = samples[std::min<std::size_t>(i, samples.size() - 1)];
        double global = walk[i];
        std::optional<double> delay;
        if (config.scene == Scene::sweep) {
            delay = config.sweep_start_um + i * config.sweep_step();
            global += kappa * *delay;
        }
        auto frame = forward::simulate_frame(sample, config.system, global, config.exposure_s,
                                             config.system.rng_seed, static_cast<std::uint64_t>(i));
        frame.timestamp_s = i * config.frame_interval_s;
        frame.delay_um = delay;
        const auto dir = out_dir / io::frame_dir_name(static_cast<std::size_t>(i));
        io::write_frame(dir, frame, encoding);
        io::write_f32r(dir / "truth_phase.f32r", sample.phase);
        io::write_f32r(dir / "truth_loss.f32r", sample.loss);
    }
    io::write_file_atomic(out_dir / "manifest.txt", build_manifest(out_dir));
}

calib::QualityReport cmd_calibrate(const fs::path& sweep_dir, const RunConfig& config,
                                   const fs::path& out_file)
{
    const auto frames = read_frames(sweep_dir);
    if (frames.size() < 3)
        throw DataError(fmt::format("{}: calibration needs at least 3 frames, found {}",
                                    sweep_dir.string(), frames.size()));
    const FieldGeometry g = frames.front().channels[0].geometry();
    const auto defaults = calib::ChannelCalibration::identity(g);

    calib::CalibrationOptions opt;
    opt.delay_to_phase = config.system.effective_delay_to_phase();
    opt.kappa_search = config.kappa_search;
    for (int k = 0; k < kChannelCount; ++k) {
        opt.sweep_rois[k] = config.calib_roi.value_or(defaults.channels[k].sweep_roi);
        opt.crop_rois[k] = Roi::full(g);
    }
    const auto cal = calib::calibrate(frames, opt);
    const auto report = calib::quality_report(frames, cal);
    calib::save(out_file, cal);
    return report;
}

void cmd_reconstruct(const fs::path& frame_dir, const fs::path& calib_file, const RunConfig& config,
                     bool unwrap, const fs::path& out_dir)
{
    const auto frame = io::read_frame(frame_dir);
    const auto cal = calib::load(calib_file);
    recon::ReconOptions opt;
    opt.sigma = config.sigma;
    opt.validity_threshold = config.validity_threshold;
    opt.unwrap = unwrap;
    if (unwrap)
        opt.reference_roi = config.reference_roi;
    const auto r = recon::reconstruct(frame, cal, opt);
    fs::create_directories(out_dir);
    io::write_f32r(out_dir / "phase.f32r", r.phase);
    io::write_f32r(out_dir / "visibility.f32r", r.visibility);
    io::write_mask_pgm(out_dir / "mask.pgm", r.valid);
    if (r.unwrapped)
        io::write_f32r(out_dir / "unwrapped_phase.f32r", *r.unwrapped);
}

void cmd_track(const fs::path& frames_dir, const fs::path& calib_file, const fs::path& probes_file,
               const RunConfig& config, bool with_thickness, const fs::path& out_csv)
{
    if (!config.reference_roi)
        throw ValidationError("tracking needs a reference roi");
    const auto frames = read_frames(frames_dir);
    const auto cal = calib::load(calib_file);
    const auto probes = dynamics::parse_probes(io::read_file(probes_file), probes_file.string());
    dynamics::TrackOptions opt;
    opt.probe_window = config.probe_window;
    opt.reference_roi = *config.reference_roi;
    opt.sigma = config.sigma;
    opt.validity_threshold = config.validity_threshold;
    const auto series = dynamics::track_probes(frames, cal, probes, opt);
    std::optional<dynamics::MaterialParams> material;
    if (with_thickness)
        material = config.material;
    if (out_csv.has_parent_path())
        fs::create_directories(out_csv.parent_path());
    io::write_file_atomic(out_csv, dynamics::to_csv(series, material));
}

void cmd_maskgen(const RunConfig& config, const fs::path& out_dir)
{
    config.validate();
    const auto mask = forward::make_phase_mask(config.mask, config.geometry);
    ScalarField thickness(config.geometry, 0.0);
    for (const auto& p : mask.plateaus)
        for (int y = p.cell.y0; y < p.cell.y0 + p.cell.height; ++y)
            for (int x = p.cell.x0; x < p.cell.x0 + p.cell.width; ++x)
                thickness(x, y) = p.thickness_um;
    if (mask.marker)
        for (int y = mask.marker->y0; y < mask.marker->y0 + mask.marker->height; ++y)
            for (int x = mask.marker->x0; x < mask.marker->x0 + mask.marker->width; ++x)
                thickness(x, y) = config.mask.thickness_max_um;
    fs::create_directories(out_dir);
    io::write_f32r(out_dir / "truth_phase.f32r", mask.sample.phase);
    io::write_f32r(out_dir / "thickness.f32r", thickness);
    io::write_file_atomic(out_dir / "plateaus.csv", plateaus_csv(mask));
}

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<long long> seed;
};

void add_common(CLI::App* app, Common& c, bool out_required, const std::string& out_help)
{
    app->add_option("--config", c.config, "key = value run configuration")->check(CLI::ExistingFile);
    auto* out = app->add_option("--out", c.out, out_help);
    if (out_required)
        out->required();
    app->add_option("--seed", c.seed, "random seed (overrides the config)")->check(CLI::NonNegativeNumber);
}

RunConfig resolve(const Common& c)
{
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    if (c.seed)
        cfg.system.rng_seed = static_cast<std::uint64_t>(*c.seed);
    return cfg;
}

std::optional<Roi> roi_flag(const std::string& text)
{
    if (text.empty())
        return std::nullopt;
    auto roi = parse_roi(text);
    if (!roi)
        throw CLI::ValidationError("--ref-roi", "expected x0,y0,width,height");
    return roi;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Quadrature phase imaging pipeline", "qpi"};
    app.require_subcommand(1);

    Common sim_c, cal_c, rec_c, trk_c, mg_c;
    std::optional<int> frames;
    std::string sweep_dir, frame_dir, frames_dir, calib_file, probes_file, ref_roi_text;
    std::optional<double> sigma;
    std::optional<int> window;
    bool unwrap = false, thickness = false;

    auto* sim = app.add_subcommand("simulate", "write synthetic frames with ground truth");
    add_common(sim, sim_c, true, "output directory");
    sim->add_option("--frames", frames, "frame count (overrides the config)")->check(CLI::PositiveNumber);

    auto* cal = app.add_subcommand("calibrate", "fit a delay sweep and write a calibration file");
    cal->add_option("sweep_dir", sweep_dir, "directory of sweep frames")->required();
    add_common(cal, cal_c, true, "calibration file to write");

    auto* rec = app.add_subcommand("reconstruct", "phase and visibility of one frame");
    rec->add_option("frame_dir", frame_dir, "frame directory")->required();
    rec->add_option("--calib", calib_file, "calibration file")->required();
    add_common(rec, rec_c, true, "output directory");
    rec->add_option("--sigma", sigma, "Gaussian blur sigma in pixels")->check(CLI::NonNegativeNumber);
    rec->add_flag("--unwrap", unwrap, "also write the unwrapped phase");
    rec->add_option("--ref-roi", ref_roi_text, "reference region x0,y0,width,height");

    auto* trk = app.add_subcommand("track", "probe phase series over a frame sequence");
    trk->add_option("frames_dir", frames_dir, "directory of frames")->required();
    trk->add_option("--calib", calib_file, "calibration file")->required();
    trk->add_option("--probes", probes_file, "probe list, lines 'name x y'")->required();
    add_common(trk, trk_c, true, "CSV file to write");
    trk->add_option("--ref-roi", ref_roi_text, "reference region x0,y0,width,height");
    trk->add_option("--sigma", sigma, "Gaussian blur sigma in pixels")->check(CLI::NonNegativeNumber);
    trk->add_option("--window", window, "probe window side in pixels")->check(CLI::PositiveNumber);
    trk->add_flag("--thickness", thickness, "add a thickness_um column");

    auto* mg = app.add_subcommand("maskgen", "write the phase mask ground truth");
    add_common(mg, mg_c, true, "output directory");

    std::optional<Roi> ref_roi;
    try {
        app.parse(argc, argv);
        ref_roi = roi_flag(ref_roi_text);
        if (rec->parsed() && ref_roi && !unwrap)
            throw CLI::ValidationError("--ref-roi", "requires --unwrap");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ExitCode::ok : ExitCode::usage_error;
    }

    try {
        if (sim->parsed()) {
            RunConfig c = resolve(sim_c);
            if (frames)
                c.frames = *frames;
            cmd_simulate(c, sim_c.out);
            out << fmt::format("wrote {} frame(s) to {}\n", c.frames, sim_c.out);
        } else if (cal->parsed()) {
            const auto q = cmd_calibrate(sweep_dir, resolve(cal_c), cal_c.out);
            out << fmt::format("r2={} vis_mean={} vis_std={}\n", format_double(q.r_squared),
                               format_double(q.visibility_mean), format_double(q.visibility_std));
        } else if (rec->parsed()) {
            RunConfig c = resolve(rec_c);
            if (sigma)
                c.sigma = *sigma;
            if (ref_roi)
                c.reference_roi = ref_roi;
            cmd_reconstruct(frame_dir, calib_file, c, unwrap, rec_c.out);
        } else if (trk->parsed()) {
            RunConfig c = resolve(trk_c);
            if (sigma)
                c.sigma = *sigma;
            if (window)
                c.probe_window = *window;
            if (ref_roi)
                c.reference_roi = ref_roi;
            if (!c.reference_roi) {
                err << "track: a reference roi is required (--ref-roi or reference_roi)\n";
                return ExitCode::usage_error;
            }
            cmd_track(frames_dir, calib_file, probes_file, c, thickness, trk_c.out);
        } else if (mg->parsed()) {
            cmd_maskgen(resolve(mg_c), mg_c.out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return ExitCode::data_error;
    }
    return ExitCode::ok;
}

} // namespace qpi::cli

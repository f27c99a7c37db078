#include "qpi/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "qpi/dynamics.hpp"
#include "qpi/error.hpp"
#include "qpi/io.hpp"
#include "qpi/keyvalue.hpp"
#include "qpi/phase.hpp"

namespace qpi::calib {
namespace {

struct RoiMeans {
    double delay = 0.0;
    std::array<double, kChannelCount> means{};
};

std::vector<RoiMeans> roi_means_by_delay(std::span<const QuadratureFrame> frames,
                                         const std::array<Roi, kChannelCount>& rois)
{
    std::vector<RoiMeans> rows;
    rows.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (!f.delay_um)
            throw DataError(fmt::format("sweep frame {} carries no delay", i));
        RoiMeans r{*f.delay_um, {}};
        for (int k = 0; k < kChannelCount; ++k)
            r.means[k] = field_stats(f.channels[k], rois[k]).mean;
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RoiMeans& a, const RoiMeans& b) { return a.delay < b.delay; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].delay == rows[i - 1].delay)
            throw DataError(fmt::format("sweep delays are not strictly monotone (repeated {} um)",
                                        rows[i].delay));
    return rows;
}

double evaluate_rms(std::span<const double> delays, std::span<const double> means,
                    const SinusoidFit& fit)
{
    double ss = 0.0;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const double r = means[i] - fit.evaluate(delays[i]);
        ss += r * r;
    }
    return std::sqrt(ss / static_cast<double>(delays.size()));
}

std::string roi_text(const Roi& r)
{
    return fmt::format("{} {} {} {}", r.x0, r.y0, r.width, r.height);
}

Roi parse_roi(const KeyValueFile& kv, const std::string& key)
{
    const auto v = kv.require_doubles(key, 4);
    for (double x : v)
        if (x != std::floor(x))
            throw DataError(fmt::format("{}: '{}' must hold integers", kv.source(), key));
    return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
            static_cast<int>(v[3])};
}

} // namespace

double SinusoidFit::evaluate(double delay) const
{
    return offset + amplitude * std::cos(kappa * delay + phase_origin);
}

void Interferogram::validate() const
{
    for (const auto& m : means)
        if (m.size() != delays.size())
            throw ValidationError("interferogram channels differ in length");
    for (std::size_t i = 1; i < delays.size(); ++i)
        if (!(delays[i] > delays[i - 1]))
            throw ValidationError("interferogram delays must increase strictly");
}

ChannelCalibration ChannelCalibration::identity(const FieldGeometry& g)
{
    ChannelCalibration c;
    const Roi sweep = Roi::centered(g, std::min(100, g.width), std::min(100, g.height));
    for (auto& ch : c.channels) {
        ch.roi = Roi::full(g);
        ch.sweep_roi = sweep;
    }
    c.frame_width = g.width;
    c.frame_height = g.height;
    return c;
}

void ChannelCalibration::validate() const
{
    if (frame_width < 0 || frame_height < 0 || (frame_width == 0) != (frame_height == 0))
        throw ValidationError("calibration frame size must be both positive or both unset");
    for (const auto& ch : channels) {
        if (ch.roi.width <= 0 || ch.roi.height <= 0)
            throw ValidationError("calibration crop roi is empty");
        if (!(ch.alpha > 0.0) || !std::isfinite(ch.alpha) || !std::isfinite(ch.beta))
            throw ValidationError("calibration gain correction must be positive and finite");
        ch.affine.inverse();
    }
}

Interferogram extract_interferogram(std::span<const QuadratureFrame> frames,
                                    const std::array<Roi, kChannelCount>& rois)
{
    if (frames.empty())
        throw DataError("no sweep frames");
    Interferogram ig;
    for (const auto& row : roi_means_by_delay(frames, rois)) {
        ig.delays.push_back(row.delay);
        for (int k = 0; k < kChannelCount; ++k)
            ig.means[k].push_back(row.means[k]);
    }
    return ig;
}

SinusoidFit fit_sinusoid(std::span<const double> delays, std::span<const double> means,
                         double delay_to_phase)
{
    if (delays.size() != means.size())
        throw ValidationError("delays and means differ in length");
    if (delays.size() < 3)
        throw DataError("sinusoid fit needs at least three samples");
    if (!(delay_to_phase > 0.0))
        throw ValidationError("delay_to_phase must be positive");
    const auto [lo, hi] = std::minmax_element(delays.begin(), delays.end());
    if ((*hi - *lo) * delay_to_phase < kPi - 1e-12)
        throw DataError("sweep spans less than half a fringe period");

    const auto n = static_cast<Eigen::Index>(delays.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double arg = delay_to_phase * delays[static_cast<std::size_t>(i)];
        design(i, 0) = 1.0;
        design(i, 1) = std::cos(arg);
        design(i, 2) = std::sin(arg);
        rhs(i) = means[static_cast<std::size_t>(i)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3)
        throw DataError("sinusoid fit is rank deficient (delays sample one phase)");
    const Eigen::Vector3d coef = qr.solve(rhs);

    SinusoidFit fit;
    fit.kappa = delay_to_phase;
    fit.offset = coef(0);
    fit.amplitude = std::hypot(coef(1), coef(2));
    fit.phase_origin = fit.amplitude > 0.0 ? wrap_phase(std::atan2(-coef(2), coef(1))) : 0.0;
    if (!(fit.offset > 0.0))
        throw DataError("fitted interferogram offset is not positive");
    fit.visibility = std::clamp(fit.amplitude / fit.offset, 0.0, 1.0);
    fit.residual_rms = evaluate_rms(delays, means, fit);
    return fit;
}

SinusoidFit fit_sinusoid_search(std::span<const double> delays, std::span<const double> means,
                                double nominal_delay_to_phase, double relative_span, int steps)
{
    if (steps < 2 || !(relative_span >= 0.0) || relative_span >= 1.0)
        throw ValidationError("invalid kappa search grid");
    std::optional<SinusoidFit> best;
    for (int i = 0; i < steps; ++i) {
        const double scale = 1.0 - relative_span + 2.0 * relative_span * i / (steps - 1);
        SinusoidFit fit;
        try {
            fit = fit_sinusoid(delays, means, nominal_delay_to_phase * scale);
        } catch (const DataError&) {
            continue;
        }
        if (!best || fit.residual_rms < best->residual_rms)
            best = fit;
    }
    if (!best)
        throw DataError("no kappa in the search grid admits a sinusoid fit");
    return *best;
}

Corrections derive_corrections(const std::array<SinusoidFit, kChannelCount>& fits)
{
    double mean_offset = 0.0;
    double mean_amplitude = 0.0;
    for (int k = 0; k < kChannelCount; ++k) {
        if (!(fits[k].amplitude > 0.0))
            throw DataError(fmt::format("channel {} shows no interference", k));
        mean_offset += fits[k].offset / kChannelCount;
        mean_amplitude += fits[k].amplitude / kChannelCount;
    }
    Corrections c;
    for (int k = 0; k < kChannelCount; ++k) {
        c.alpha[k] = mean_amplitude / fits[k].amplitude;
        c.beta[k] = mean_offset - c.alpha[k] * fits[k].offset;
    }
    return c;
}

QualityReport quality_report(std::span<const QuadratureFrame> frames,
                             const ChannelCalibration& calibration)
{
    if (frames.size() < 3)
        throw DataError("quality report needs at least three sweep frames");
    std::array<Roi, kChannelCount> rois;
    for (int k = 0; k < kChannelCount; ++k)
        rois[k] = calibration.channels[k].sweep_roi;
    const auto rows = roi_means_by_delay(frames, rois);

    std::vector<double> delays;
    std::vector<double> wrapped;
    std::vector<double> visibility;
    for (const auto& row : rows) {
        std::array<double, kChannelCount> p{};
        for (int k = 0; k < kChannelCount; ++k)
            p[k] = calibration.channels[k].alpha * row.means[k] + calibration.channels[k].beta;
        const double sum = p[0] + p[1] + p[2] + p[3];
        if (!(sum > 0.0))
            throw DataError("corrected channel sum is not positive");
        delays.push_back(row.delay);
        wrapped.push_back(std::atan2(p[3] - p[1], p[0] - p[2]));
        visibility.push_back(2.0 * std::hypot(p[3] - p[1], p[2] - p[0]) / sum);
    }
    const auto phase = dynamics::temporal_unwrap(wrapped);

    const double n = static_cast<double>(delays.size());
    const double mx = std::accumulate(delays.begin(), delays.end(), 0.0) / n;
    const double my = std::accumulate(phase.begin(), phase.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        sxx += (delays[i] - mx) * (delays[i] - mx);
        sxy += (delays[i] - mx) * (phase[i] - my);
        syy += (phase[i] - my) * (phase[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw DataError("degenerate phase-versus-delay regression");
    const double slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const double r = phase[i] - (my + slope * (delays[i] - mx));
        ss_res += r * r;
    }

    QualityReport q;
    q.r_squared = 1.0 - ss_res / syy;
    q.visibility_mean = std::accumulate(visibility.begin(), visibility.end(), 0.0) / n;
    double vv = 0.0;
    for (double v : visibility)
        vv += (v - q.visibility_mean) * (v - q.visibility_mean);
    q.visibility_std = std::sqrt(vv / n);
    return q;
}

ChannelCalibration calibrate(std::span<const QuadratureFrame> sweep, const CalibrationOptions& options)
{
    const Interferogram ig = extract_interferogram(sweep, options.sweep_rois);
    std::array<SinusoidFit, kChannelCount> fits;
    for (int k = 0; k < kChannelCount; ++k)
        fits[k] = options.kappa_search
                      ? fit_sinusoid_search(ig.delays, ig.means[k], options.delay_to_phase)
                      : fit_sinusoid(ig.delays, ig.means[k], options.delay_to_phase);
    const Corrections corr = derive_corrections(fits);

    ChannelCalibration c;
    for (int k = 0; k < kChannelCount; ++k) {
        auto& ch = c.channels[k];
        ch.roi = options.crop_rois[k];
        ch.sweep_roi = options.sweep_rois[k];
        ch.affine = options.affines[k];
        ch.alpha = corr.alpha[k];
        ch.beta = corr.beta[k];
        ch.fit = fits[k];
    }
    c.frame_width = sweep.front().channels[0].width();
    c.frame_height = sweep.front().channels[0].height();
    c.validate();
    return c;
}

std::string serialize(const ChannelCalibration& calibration)
{
    std::string out = "# per-channel registration and gain/offset correction\n";
    if (calibration.frame_width > 0)
        out += fmt::format("frame_size = {} {}\n", calibration.frame_width, calibration.frame_height);
    for (int k = 0; k < kChannelCount; ++k) {
        const auto& ch = calibration.channels[k];
        std::string affine;
        for (std::size_t i = 0; i < ch.affine.m.size(); ++i)
            affine += (i ? " " : "") + format_double(ch.affine.m[i]);
        out += fmt::format("roi_{} = {}\n", k, roi_text(ch.roi));
        out += fmt::format("sweep_roi_{} = {}\n", k, roi_text(ch.sweep_roi));
        out += fmt::format("affine_{} = {}\n", k, affine);
        out += fmt::format("alpha_{} = {}\n", k, format_double(ch.alpha));
        out += fmt::format("beta_{} = {}\n", k, format_double(ch.beta));
        out += fmt::format("fit_offset_{} = {}\n", k, format_double(ch.fit.offset));
        out += fmt::format("fit_amplitude_{} = {}\n", k, format_double(ch.fit.amplitude));
        out += fmt::format("fit_phase_{} = {}\n", k, format_double(ch.fit.phase_origin));
        out += fmt::format("fit_visibility_{} = {}\n", k, format_double(ch.fit.visibility));
        out += fmt::format("fit_residual_rms_{} = {}\n", k, format_double(ch.fit.residual_rms));
        out += fmt::format("fit_kappa_{} = {}\n", k, format_double(ch.fit.kappa));
    }
    return out;
}

ChannelCalibration parse_calibration(std::string_view text, const std::string& source)
{
    const auto kv = KeyValueFile::parse(text, source);
    static const char* const kFields[] = {"roi",          "sweep_roi",     "affine",
                                          "alpha",        "beta",          "fit_offset",
                                          "fit_amplitude", "fit_phase",    "fit_visibility",
                                          "fit_residual_rms", "fit_kappa"};
    std::vector<std::string> names{"frame_size"};
    for (int k = 0; k < kChannelCount; ++k)
        for (const char* f : kFields)
            names.push_back(fmt::format("{}_{}", f, k));
    kv.reject_unknown(std::vector<std::string_view>(names.begin(), names.end()));

    ChannelCalibration c;
    if (kv.contains("frame_size")) {
        const auto size = kv.require_doubles("frame_size", 2);
        if (size[0] != std::floor(size[0]) || size[1] != std::floor(size[1]) || size[0] < 1 ||
            size[1] < 1 || size[0] > 1e6 || size[1] > 1e6)
            throw DataError(source + ": frame_size must be two positive integers");
        c.frame_width = static_cast<int>(size[0]);
        c.frame_height = static_cast<int>(size[1]);
    }
    for (int k = 0; k < kChannelCount; ++k) {
        auto& ch = c.channels[k];
        auto key = [k](const char* f) { return fmt::format("{}_{}", f, k); };
        ch.roi = parse_roi(kv, key("roi"));
        ch.sweep_roi = parse_roi(kv, key("sweep_roi"));
        const auto a = kv.require_doubles(key("affine"), 6);
        std::copy(a.begin(), a.end(), ch.affine.m.begin());
        ch.alpha = kv.require_double(key("alpha"));
        ch.beta = kv.require_double(key("beta"));
        ch.fit.offset = kv.require_double(key("fit_offset"));
        ch.fit.amplitude = kv.require_double(key("fit_amplitude"));
        ch.fit.phase_origin = kv.require_double(key("fit_phase"));
        ch.fit.visibility = kv.require_double(key("fit_visibility"));
        ch.fit.residual_rms = kv.require_double(key("fit_residual_rms"));
        ch.fit.kappa = kv.require_double(key("fit_kappa"));
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw DataError(source + ": " + e.what());
    }
    return c;
}

void save(const std::filesystem::path& path, const ChannelCalibration& calibration)
{
    io::write_file_atomic(path, serialize(calibration));
}

ChannelCalibration load(const std::filesystem::path& path)
{
    return parse_calibration(io::read_file(path), path.string());
}

} // namespace qpi::calib

#include "qpi/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "qpi/error.hpp"
#include "qpi/keyvalue.hpp"
#include "qpi/phase.hpp"

namespace qpi::dynamics {
namespace {

double window_circular_mean(const recon::ReconResult& r, const Roi& window, const char* what)
{
    std::vector<double> phases;
    phases.reserve(window.area());
    for (int y = window.y0; y < window.y0 + window.height; ++y)
        for (int x = window.x0; x < window.x0 + window.width; ++x)
            if (r.valid(x, y))
                phases.push_back(r.phase(x, y));
    if (phases.empty())
        throw DataError(fmt::format("{} has no valid pixels", what));
    return circular_mean(phases);
}

Roi probe_window(const Probe& p, int side, int width, int height)
{
    const int half = side / 2;
    const int x0 = std::max(0, p.x - half);
    const int y0 = std::max(0, p.y - half);
    const int x1 = std::min(width, p.x - half + side);
    const int y1 = std::min(height, p.y - half + side);
    return {x0, y0, x1 - x0, y1 - y0};
}

} // namespace

std::vector<double> temporal_unwrap(std::span<const double> series)
{
    std::vector<double> out(series.begin(), series.end());
    for (std::size_t i = 1; i < out.size(); ++i)
        out[i] = out[i - 1] + wrap_phase(series[i] - series[i - 1]);
    return out;
}

void ProbeSeries::validate() const
{
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ValidationError("probe series times must increase strictly");
    if (values.size() != probes.size())
        throw ValidationError("probe series needs one value list per probe");
    for (const auto& v : values)
        if (v.size() != times.size())
            throw ValidationError("probe series needs one value per probe and time");
}

ProbeSeries track_probes(std::span<const QuadratureFrame> frames,
                         const calib::ChannelCalibration& calibration,
                         std::span<const Probe> probes, const TrackOptions& options)
{
    if (frames.empty())
        throw DataError("probe tracking needs at least one frame");
    if (options.probe_window < 1)
        throw ValidationError("probe window must be at least one pixel");

    ProbeSeries series;
    series.probes.assign(probes.begin(), probes.end());
    series.values.assign(probes.size(), {});
    const recon::ReconOptions recon_options{options.sigma, options.validity_threshold, false,
                                            std::nullopt};

    for (std::size_t f = 1; f < frames.size(); ++f)
        if (!(frames[f].timestamp_s > frames[f - 1].timestamp_s))
            throw DataError(fmt::format("frame {} is not later than its predecessor", f));

    // Frames are independent; each worker fills whole rows of `per_frame`.
    std::vector<std::vector<double>> per_frame(frames.size());
    std::vector<std::exception_ptr> failures(frames.size());
    const auto process = [&](std::size_t f) {
        const auto r = recon::reconstruct(frames[f], calibration, recon_options);
        const int w = r.phase.width();
        const int h = r.phase.height();
        options.reference_roi.require_inside(w, h);

        const double ref = window_circular_mean(r, options.reference_roi, "reference roi");
        for (const Probe& probe : probes) {
            if (probe.x < 0 || probe.y < 0 || probe.x >= w || probe.y >= h)
                throw ValidationError(fmt::format("probe '{}' at ({}, {}) lies outside the field",
                                                  probe.name, probe.x, probe.y));
            const Roi window = probe_window(probe, options.probe_window, w, h);
            const std::string what = fmt::format("probe '{}' window in frame {}", probe.name, f);
            per_frame[f].push_back(wrap_phase(window_circular_mean(r, window, what.c_str()) - ref));
        }
    };
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t f = next++; f < frames.size(); f = next++) {
            try {
                process(f);
            } catch (...) {
                failures[f] = std::current_exception();
            }
        }
    };
    const std::size_t threads =
        std::min<std::size_t>(frames.size(), std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    for (const auto& e : failures)
        if (e)
            std::rethrow_exception(e);

    std::vector<std::vector<double>> wrapped(probes.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (std::size_t p = 0; p < probes.size(); ++p)
            wrapped[p].push_back(per_frame[f][p]);
        series.times.push_back(frames[f].timestamp_s);
    }
    for (std::size_t p = 0; p < probes.size(); ++p)
        series.values[p] = temporal_unwrap(wrapped[p]);
    return series;
}

void MaterialParams::validate() const
{
    if (!(refractive_index > 1.0))
        throw ValidationError("refractive index must exceed 1");
    if (!(wavelength_um > 0.0))
        throw ValidationError("wavelength must be positive");
}

double thickness_from_phase(double delta_phase, const MaterialParams& material)
{
    material.validate();
    return delta_phase * material.wavelength_um / (kTwoPi * (material.refractive_index - 1.0));
}

std::string to_csv(const ProbeSeries& series, const std::optional<MaterialParams>& material)
{
    series.validate();
    std::string out = material ? "time_s,probe_name,phase_rad,thickness_um\n"
                               : "time_s,probe_name,phase_rad\n";
    for (std::size_t t = 0; t < series.times.size(); ++t) {
        for (std::size_t p = 0; p < series.probes.size(); ++p) {
            const double v = series.values[p][t];
            out += format_double(series.times[t]) + "," + series.probes[p].name + "," +
                   format_double(v);
            if (material)
                out += "," + format_double(thickness_from_phase(v, *material));
            out += "\n";
        }
    }
    return out;
}

std::vector<Probe> parse_probes(std::string_view text, const std::string& source)
{
    std::vector<Probe> probes;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const auto words = split_words(line);
        if (words.empty())
            continue;
        const auto x = words.size() == 3 ? parse_integer(words[1]) : std::nullopt;
        const auto y = words.size() == 3 ? parse_integer(words[2]) : std::nullopt;
        if (!x || !y)
            throw DataError(fmt::format("{}:{}: expected 'name x y'", source, line_no));
        if (words[0].find(',') != std::string_view::npos)
            throw DataError(fmt::format("{}:{}: probe names may not contain commas", source, line_no));
        for (const auto& p : probes)
            if (p.name == words[0])
                throw DataError(fmt::format("{}:{}: duplicate probe '{}'", source, line_no, p.name));
        probes.push_back({std::string(words[0]), static_cast<int>(*x), static_cast<int>(*y)});
    }
    if (probes.empty())
        throw DataError(source + ": no probes defined");
    return probes;
}

} // namespace qpi::dynamics

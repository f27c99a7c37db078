#include "qpi/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "qpi/error.hpp"
#include "qpi/phase.hpp"

namespace qpi::forward {
namespace {

constexpr std::uint64_t splitmix_step(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-seeded SplitMix64; cheap enough to key one stream per pixel.
class PixelEngine {
public:
    using result_type = std::uint64_t;

    PixelEngine(std::uint64_t seed, std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel)
    {
        std::uint64_t s = seed;
        state_ = splitmix_step(s);
        state_ ^= frame * 0xd1b54a32d192ed03ULL;
        state_ = splitmix_step(state_);
        state_ ^= (channel << 56) ^ pixel;
        splitmix_step(state_);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return splitmix_step(state_); }

private:
    std::uint64_t state_ = 0;
};

double lerp_row(int y, const Roi& region, double top, double bottom)
{
    if (region.height <= 1)
        return top;
    const double s = static_cast<double>(y - region.y0) / (region.height - 1);
    return top + (bottom - top) * s;
}

} // namespace

double detection_rate(double sample_phase, double loss, double global_phase, double visibility)
{
    if (!(loss >= 0.0 && loss <= 1.0))
        throw ValidationError("loss must lie in [0, 1]");
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw ValidationError("visibility must lie in [0, 1]");
    return 1.0 + visibility * (1.0 - loss) * std::cos(sample_phase + global_phase);
}

QuadratureFrame simulate_frame(const ComplexSample& sample, const SystemParams& params,
                               double global_phase_base, double exposure_s, std::uint64_t seed,
                               std::uint64_t frame_index)
{
    sample.validate();
    params.validate();
    if (!(exposure_s > 0.0))
        throw ValidationError("exposure must be positive");

    const FieldGeometry& g = sample.geometry();
    const auto phase = sample.phase.values();
    const auto loss = sample.loss.values();

    auto make_channel = [&](int k) {
        ScalarField ch(g);
        auto out = ch.values();
        const double global = global_phase_base + k * (kPi / 2.0);
        const double scale = params.channel_gains[k] * params.base_rate;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double rate =
                scale * detection_rate(phase[i], loss[i], global, params.system_visibility) +
                params.channel_offsets[k];
            if (params.noise == NoiseModel::none) {
                out[i] = rate;
                continue;
            }
            const double mean = rate * exposure_s;
            if (mean <= 0.0) {
                out[i] = 0.0;
                continue;
            }
            PixelEngine engine(seed, frame_index, static_cast<std::uint64_t>(k), i);
            std::poisson_distribution<long long> poisson(mean);
            out[i] = static_cast<double>(poisson(engine)) / exposure_s;
        }
        return ch;
    };

    QuadratureFrame frame{{make_channel(0), make_channel(1), make_channel(2), make_channel(3)},
                          exposure_s, 0.0, std::nullopt};
    return frame;
}

std::vector<QuadratureFrame> simulate_delay_sweep(const SystemParams& params,
                                                  const ComplexSample& sample,
                                                  std::span<const double> delays,
                                                  double exposure_s)
{
    if (delays.empty())
        throw ValidationError("delay sweep needs at least one delay");
    const double kappa = params.effective_delay_to_phase();
    std::vector<QuadratureFrame> frames;
    frames.reserve(delays.size());
    for (std::size_t i = 0; i < delays.size(); ++i) {
        if (!std::isfinite(delays[i]))
            throw ValidationError("delays must be finite");
        QuadratureFrame f =
            simulate_frame(sample, params, kappa * delays[i], exposure_s, params.rng_seed, i);
        f.timestamp_s = static_cast<double>(i) * exposure_s;
        f.delay_um = delays[i];
        frames.push_back(std::move(f));
    }
    return frames;
}

double thickness_to_phase(double thickness_um, double refractive_index, double wavelength_um)
{
    return kTwoPi * (refractive_index - 1.0) * thickness_um / wavelength_um;
}

double MaskSpec::thickness_of_step(int step) const
{
    const int n = step_count();
    if (n == 1)
        return thickness_min_um;
    return thickness_min_um + (thickness_max_um - thickness_min_um) * step / (n - 1);
}

void MaskSpec::validate() const
{
    if (rows <= 0 || cols <= 0)
        throw ValidationError("mask grid must have at least one cell");
    if (!(cell_size_um > 0.0))
        throw ValidationError("mask cell size must be positive");
    if (!(thickness_min_um > 0.0) || !(thickness_max_um >= thickness_min_um))
        throw ValidationError("mask thicknesses need thickness_max >= thickness_min > 0");
    if (!(effective_index > 1.0))
        throw ValidationError("mask effective index must exceed 1");
    if (!(idler_wavelength_um > 0.0))
        throw ValidationError("idler wavelength must be positive");
}

int mask_step_at(const MaskSpec& spec, int row, int col)
{
    if (spec.layout == MaskLayout::serpentine)
        return row * spec.cols + (row % 2 == 0 ? col : spec.cols - 1 - col);

    // Walk the clockwise spiral until the requested cell comes up.
    int top = 0, bottom = spec.rows - 1, left = 0, right = spec.cols - 1;
    int step = 0;
    while (top <= bottom && left <= right) {
        for (int c = left; c <= right; ++c, ++step)
            if (row == top && col == c)
                return step;
        for (int r = top + 1; r <= bottom; ++r, ++step)
            if (row == r && col == right)
                return step;
        if (top < bottom)
            for (int c = right - 1; c >= left; --c, ++step)
                if (row == bottom && col == c)
                    return step;
        if (left < right)
            for (int r = bottom - 1; r > top; --r, ++step)
                if (row == r && col == left)
                    return step;
        ++top;
        --bottom;
        ++left;
        --right;
    }
    throw ValidationError("mask cell outside the grid");
}

PhaseMask make_phase_mask(const MaskSpec& spec, const FieldGeometry& g)
{
    spec.validate();
    g.validate();

    const int cell_px = static_cast<int>(std::lround(spec.cell_size_um / g.pitch_um));
    if (cell_px < 1)
        throw ValidationError("mask cells are smaller than one pixel");
    const int mask_w = cell_px * spec.cols;
    const int mask_h = cell_px * spec.rows;
    if (mask_w > g.width || mask_h > g.height)
        throw ValidationError("mask grid of " + std::to_string(mask_w) + "x" +
                              std::to_string(mask_h) + " px exceeds the field");

    PhaseMask mask{ComplexSample::blank(g), {}, Roi::centered(g, mask_w, mask_h), std::nullopt};
    auto to_phase = [&](double t) {
        return thickness_to_phase(t, spec.effective_index, spec.idler_wavelength_um);
    };

    mask.plateaus.resize(static_cast<std::size_t>(spec.step_count()));
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            const int step = mask_step_at(spec, r, c);
            const Roi cell{mask.footprint.x0 + c * cell_px, mask.footprint.y0 + r * cell_px,
                           cell_px, cell_px};
            const double t = spec.thickness_of_step(step);
            mask.plateaus[static_cast<std::size_t>(step)] = {step, r, c, cell, t, to_phase(t)};
            for (int y = cell.y0; y < cell.y0 + cell.height; ++y)
                for (int x = cell.x0; x < cell.x0 + cell.width; ++x)
                    mask.sample.phase(x, y) = to_phase(t);
        }
    }

    if (spec.marker) {
        const int size = std::max(2, cell_px / 4);
        const Roi marker{mask.footprint.x0 - 2 * size,
                         mask.footprint.y0 + (mask_h - size) / 2, size, size};
        if (!marker.fits(g.width, g.height))
            throw ValidationError("orientation marker does not fit left of the mask");
        const double phase = to_phase(spec.thickness_max_um);
        for (int y = marker.y0; y < marker.y0 + marker.height; ++y)
            for (int x = marker.x0; x < marker.x0 + marker.width; ++x)
                mask.sample.phase(x, y) = phase;
        mask.marker = marker;
    }
    return mask;
}

double DryingFilm::initial_phase_at_row(int y) const
{
    return lerp_row(y, region, phase_top, phase_bottom);
}

double DryingFilm::rate_at_row(int y) const
{
    return lerp_row(y, region, rate_top, rate_bottom);
}

void TimelineSpec::validate() const
{
    if (frames < 1)
        throw ValidationError("timeline needs at least one frame");
    if (!(frame_interval_s > 0.0))
        throw ValidationError("frame interval must be positive");
    if (kind == TimelineKind::drying_film) {
        if (drying.rate_top < 0.0 || drying.rate_bottom < 0.0)
            throw ValidationError("evaporation rates must be non-negative");
        if (drying.phase_top < 0.0 || drying.phase_bottom < 0.0)
            throw ValidationError("initial film phase must be non-negative");
    } else if (scripted_deltas.size() != static_cast<std::size_t>(frames)) {
        throw ValidationError("scripted timeline needs one delta field per frame");
    }
}

std::vector<ComplexSample> make_timeline(const TimelineSpec& spec, const ComplexSample& base)
{
    spec.validate();
    base.validate();
    const FieldGeometry& g = base.geometry();

    std::vector<ComplexSample> out;
    out.reserve(static_cast<std::size_t>(spec.frames));
    if (spec.kind == TimelineKind::scripted) {
        for (const auto& delta : spec.scripted_deltas) {
            if (delta.width() != g.width || delta.height() != g.height)
                throw ValidationError("scripted delta does not match the base sample");
            ComplexSample s = base;
            auto p = s.phase.values();
            const auto d = delta.values();
            for (std::size_t i = 0; i < p.size(); ++i)
                p[i] += d[i];
            out.push_back(std::move(s));
        }
        return out;
    }

    const DryingFilm& film = spec.drying;
    film.region.require_inside(g.width, g.height);
    for (int f = 0; f < spec.frames; ++f) {
        const double t = spec.time_of(f);
        ComplexSample s = base;
        for (int y = film.region.y0; y < film.region.y0 + film.region.height; ++y) {
            const double film_phase =
                std::max(0.0, film.initial_phase_at_row(y) - film.rate_at_row(y) * t);
            for (int x = film.region.x0; x < film.region.x0 + film.region.width; ++x)
                s.phase(x, y) += film_phase;
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace qpi::forward

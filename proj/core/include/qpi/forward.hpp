#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qpi/field.hpp"

namespace qpi::forward {

/// Relative signal detection rate 1 + V(1-L)cos(phase + global_phase).
/// Throws ValidationError for loss or visibility outside [0, 1].
double detection_rate(double sample_phase, double loss, double global_phase, double visibility);

/// Channel k sees global phase `global_phase_base + k*pi/2`. Its value is
/// gain_k * base_rate * detection_rate + offset_k in counts/s; with Poisson
/// noise the expected count over `exposure_s` is sampled and converted back
/// to a rate. Each pixel draws from its own stream keyed by
/// (seed, frame_index, channel, pixel), so output is reproducible.
QuadratureFrame simulate_frame(const ComplexSample& sample, const SystemParams& params,
                               double global_phase_base, double exposure_s, std::uint64_t seed,
                               std::uint64_t frame_index = 0);

/// One frame per delay with global phase delay_to_phase * delay. Frame i is
/// stamped at i * exposure_s and uses params.rng_seed with frame index i.
std::vector<QuadratureFrame> simulate_delay_sweep(const SystemParams& params,
                                                  const ComplexSample& sample,
                                                  std::span<const double> delays,
                                                  double exposure_s = 0.5);

/// 2*pi*(n - 1)*t / lambda.
double thickness_to_phase(double thickness_um, double refractive_index, double wavelength_um);

enum class MaskLayout {
    serpentine, // steps run left-to-right, then right-to-left on the next row
    spiral,     // clockwise from the top-left cell inwards
};

struct MaskSpec {
    int rows = 3;
    int cols = 3;
    double cell_size_um = 1500.0;
    double thickness_min_um = 1.56;
    double thickness_max_um = 2.87;
    // Chosen so that adjacent steps differ by 0.3*pi at the idler wavelength.
    double effective_index = 1.0 + 0.15 * 1.557 / ((2.87 - 1.56) / 8.0);
    double idler_wavelength_um = 1.557;
    bool marker = false;
    MaskLayout layout = MaskLayout::serpentine;

    int step_count() const { return rows * cols; }
    double thickness_of_step(int step) const;
    void validate() const;
};

struct Plateau {
    int step = 0;
    int row = 0;
    int col = 0;
    Roi cell;
    double thickness_um = 0.0;
    double phase_rad = 0.0;
};

struct PhaseMask {
    ComplexSample sample;
    std::vector<Plateau> plateaus; // ordered by step
    Roi footprint;                 // the plateau grid, marker excluded
    std::optional<Roi> marker;
};

/// Step index of grid cell (row, col) under the given layout.
int mask_step_at(const MaskSpec& spec, int row, int col);

/// Stepped phase-only object centred in a field of geometry `g`. Cell size in
/// pixels is cell_size_um / pitch, rounded. Loss is zero everywhere.
PhaseMask make_phase_mask(const MaskSpec& spec, const FieldGeometry& g);

enum class TimelineKind { drying_film, scripted };

/// Film on `region` whose phase falls linearly in time until depleted. The
/// initial phase and the depletion rate vary linearly from the region's top
/// row to its bottom row.
struct DryingFilm {
    Roi region;
    double phase_top = 0.0;     // rad
    double phase_bottom = 0.0;  // rad
    double rate_top = 0.0;      // rad/s
    double rate_bottom = 0.0;   // rad/s

    double initial_phase_at_row(int y) const;
    double rate_at_row(int y) const;
};

struct TimelineSpec {
    TimelineKind kind = TimelineKind::drying_film;
    int frames = 1;
    double frame_interval_s = 0.5;
    DryingFilm drying;
    std::vector<ScalarField> scripted_deltas; // one phase delta per frame

    double time_of(int frame) const { return frame * frame_interval_s; }
    void validate() const;
};

/// Per-frame samples. drying_film adds max(0, initial - rate*t) on the film
/// region; scripted adds the user-provided delta field.
std::vector<ComplexSample> make_timeline(const TimelineSpec& spec, const ComplexSample& base);

} // namespace qpi::forward

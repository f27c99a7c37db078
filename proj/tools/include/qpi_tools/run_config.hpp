#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "qpi/dynamics.hpp"
#include "qpi/field.hpp"
#include "qpi/forward.hpp"
#include "qpi/phase.hpp"

namespace qpi::cli {

enum class Scene { blank, mask, drying, sweep };

/// Everything a run needs. Every key has a default, so an empty file is a
/// valid configuration.
struct RunConfig {
    FieldGeometry geometry;
    SystemParams system; // system.rng_seed is the "seed" key
    double exposure_s = 0.5;
    int frames = 1;
    double frame_interval_s = 0.5;
    double drift_std_rad = 0.0; // per-frame step of a random global phase walk

    Scene scene = Scene::blank;
    forward::MaskSpec mask;
    forward::DryingFilm film{{64, 64, 128, 128}, 5.0 * kPi, 10.0 * kPi,
                             0.5, 0.5};
    double sweep_start_um = 0.0;
    double sweep_step_um = 0.0; // 0 selects 1/16 of a fringe period

    std::optional<Roi> calib_roi;
    bool kappa_search = false;

    double sigma = 1.5;
    double validity_threshold = 1e-6;
    std::optional<Roi> reference_roi;
    int probe_window = 5;
    dynamics::MaterialParams material;

    /// Throws ValidationError on out-of-range values.
    void validate() const;
    double sweep_step() const;
};

/// Unknown keys and malformed values raise DataError naming the source and line.
RunConfig parse_run_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// All keys in a fixed order; parse_run_config(serialize(c)) reproduces c.
std::string serialize(const RunConfig& config);

/// "x0 y0 width height", commas also accepted as separators.
std::optional<Roi> parse_roi(std::string_view text);

} // namespace qpi::cli

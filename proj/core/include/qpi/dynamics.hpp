#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qpi/calib.hpp"
#include "qpi/field.hpp"
#include "qpi/recon.hpp"

namespace qpi::dynamics {

/// Keeps the first sample and rebuilds the rest from wrapped successive
/// differences, so consecutive outputs differ by a value in (-pi, pi].
std::vector<double> temporal_unwrap(std::span<const double> series);

struct Probe {
    std::string name;
    int x = 0;
    int y = 0;
};

struct ProbeSeries {
    std::vector<Probe> probes;
    std::vector<double> times;                // seconds, strictly increasing
    std::vector<std::vector<double>> values;  // [probe][time], referenced and unwrapped [rad]

    void validate() const;
};

struct TrackOptions {
    int probe_window = 5; // square window side, pixels
    Roi reference_roi;
    double sigma = recon::kDefaultSigma;
    double validity_threshold = recon::kDefaultValidityThreshold;
};

/// Per frame: reconstruct the wrapped phase, take the circular mean over
/// each probe window and subtract the circular mean of the reference roi.
/// Each probe's series is then unwrapped in time. Frames must be in strictly
/// increasing timestamp order.
ProbeSeries track_probes(std::span<const QuadratureFrame> frames,
                         const calib::ChannelCalibration& calibration,
                         std::span<const Probe> probes, const TrackOptions& options);

struct MaterialParams {
    double refractive_index = 1.366;
    double wavelength_um = 1.557;

    void validate() const;
};

/// t = delta_phase * lambda / (2*pi*(n - 1)).
double thickness_from_phase(double delta_phase, const MaterialParams& material);

/// "time_s,probe_name,phase_rad[,thickness_um]", one row per (time, probe).
/// The thickness column converts each referenced phase value.
std::string to_csv(const ProbeSeries& series, const std::optional<MaterialParams>& material = {});

/// Lines "name x y" with '#' comments.
std::vector<Probe> parse_probes(std::string_view text, const std::string& source = "<probes>");

} // namespace qpi::dynamics

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qpi/affine.hpp"
#include "qpi/field.hpp"

namespace qpi::calib {

/// Per-channel roi means over a delay sweep, sorted by delay.
struct Interferogram {
    std::vector<double> delays;
    std::array<std::vector<double>, kChannelCount> means;

    std::size_t size() const { return delays.size(); }
    void validate() const;
};

/// I(d) = offset + amplitude * cos(kappa * d + phase_origin).
struct SinusoidFit {
    double offset = 1.0;
    double amplitude = 0.0;
    double phase_origin = 0.0; // (-pi, pi]
    double visibility = 0.0;   // amplitude / offset, clamped to [0, 1]
    double residual_rms = 0.0;
    double kappa = 0.0;        // rad/um used for the fit

    double evaluate(double delay) const;
};

struct ChannelCalibration {
    struct Channel {
        Roi roi;       // crop region registered onto the common grid
        Roi sweep_roi; // region averaged for the interferogram
        AffineTransform affine; // crop pixels -> reference grid pixels
        double alpha = 1.0;
        double beta = 0.0;
        SinusoidFit fit;
    };

    std::array<Channel, kChannelCount> channels;
    // Size of the camera frames the crops refer to; 0 accepts any size.
    int frame_width = 0;
    int frame_height = 0;

    /// Full-frame crop, centred 100x100 sweep roi (clipped to the frame),
    /// identity transform and correction.
    static ChannelCalibration identity(const FieldGeometry& g);
    void validate() const;
};

struct QualityReport {
    double r_squared = 0.0;
    double visibility_mean = 0.0;
    double visibility_std = 0.0;
};

struct Corrections {
    std::array<double, kChannelCount> alpha{};
    std::array<double, kChannelCount> beta{};
};

/// Throws DataError when a frame lacks delay metadata or two frames share a delay.
Interferogram extract_interferogram(std::span<const QuadratureFrame> frames,
                                    const std::array<Roi, kChannelCount>& rois);

/// Linear least squares in (A0, B, C) for I = A0 + B cos(kd) + C sin(kd).
/// Needs at least three samples spanning half a period; throws DataError
/// when the design is rank deficient or the fitted offset is not positive.
SinusoidFit fit_sinusoid(std::span<const double> delays, std::span<const double> means,
                         double delay_to_phase);

/// Grid search of kappa over nominal*(1 +/- relative_span) in `steps`
/// steps, keeping the fit with the smallest residual.
SinusoidFit fit_sinusoid_search(std::span<const double> delays, std::span<const double> means,
                                double nominal_delay_to_phase, double relative_span = 0.1,
                                int steps = 101);

/// Maps every channel onto the mean offset and mean amplitude of the four
/// fits: alpha_k = mean(A1) / A1_k, beta_k = mean(A0) - alpha_k * A0_k.
Corrections derive_corrections(const std::array<SinusoidFit, kChannelCount>& fits);

/// Phase of the corrected roi means versus delay (r^2 of a linear fit after
/// unwrapping along delay) and the spread of their visibility.
QualityReport quality_report(std::span<const QuadratureFrame> frames,
                             const ChannelCalibration& calibration);

struct CalibrationOptions {
    double delay_to_phase = 0.0;
    bool kappa_search = false;
    std::array<Roi, kChannelCount> sweep_rois{};
    std::array<Roi, kChannelCount> crop_rois{};
    std::array<AffineTransform, kChannelCount> affines{};
};

/// extract_interferogram + fit_sinusoid + derive_corrections.
ChannelCalibration calibrate(std::span<const QuadratureFrame> sweep, const CalibrationOptions& options);

std::string serialize(const ChannelCalibration& calibration);
ChannelCalibration parse_calibration(std::string_view text, const std::string& source = "<calib>");
void save(const std::filesystem::path& path, const ChannelCalibration& calibration);
ChannelCalibration load(const std::filesystem::path& path);

} // namespace qpi::calib

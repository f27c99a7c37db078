#pragma once

#include <array>
#include <optional>

#include "qpi/calib.hpp"
#include "qpi/field.hpp"

namespace qpi::recon {

using Channels = std::array<ScalarField, kChannelCount>;

struct MaskedField {
    ScalarField values;
    Mask valid;
};

struct AlignedChannels {
    Channels channels;
    Mask valid; // false where any channel sampled outside its source crop
};

inline constexpr double kDefaultValidityThreshold = 1e-6;
inline constexpr double kDefaultSigma = 1.5;

/// Bilinear resampling of `src` onto an out_width x out_height grid;
/// `to_output` maps source pixel coordinates to output pixel coordinates.
/// Output pixels whose preimage leaves the source are set to 0 and cleared
/// in `valid`.
ScalarField warp_affine(const ScalarField& src, const AffineTransform& to_output, int out_width,
                        int out_height, Mask& valid);

/// Crops each channel to its roi and warps it onto channel 0's roi grid.
AlignedChannels register_channels(const QuadratureFrame& frame,
                                  const calib::ChannelCalibration& calibration);

/// alpha_k * value + beta_k per channel.
Channels correct_channels(const Channels& aligned, const calib::ChannelCalibration& calibration);

/// atan2(P3 - P1, P0 - P2) on (-pi, pi]. A pixel is invalid when the
/// modulation magnitude falls below `threshold` times the channel sum or the
/// sum is not positive; invalid pixels hold 0.
MaskedField quadrature_phase(const ScalarField& p0, const ScalarField& p1, const ScalarField& p2,
                             const ScalarField& p3,
                             double threshold = kDefaultValidityThreshold);

/// 2*sqrt((P3 - P1)^2 + (P2 - P0)^2) / (P0 + P1 + P2 + P3). Pixels with a
/// non-positive sum hold 0 and are flagged invalid.
MaskedField quadrature_visibility(const ScalarField& p0, const ScalarField& p1,
                                  const ScalarField& p2, const ScalarField& p3);

/// Separable Gaussian, radius ceil(3*sigma), unit-sum kernel, half-sample
/// symmetric padding (edge pixel repeated). sigma == 0 is the identity.
ScalarField gaussian_blur(const ScalarField& f, double sigma);

/// Subtracts the mean over the roi (valid pixels only when a mask is given).
ScalarField reference_to_region(const ScalarField& f, const Roi& roi);
ScalarField reference_to_region(const ScalarField& f, const Roi& roi, const Mask& valid);

struct ReconOptions {
    double sigma = kDefaultSigma;
    double validity_threshold = kDefaultValidityThreshold;
    bool unwrap = false;
    std::optional<Roi> reference_roi; // applied to the unwrapped phase
};

struct ReconResult {
    ScalarField phase;      // wrapped
    ScalarField visibility;
    Mask valid;
    std::optional<ScalarField> unwrapped;
};

/// register -> correct -> blur channels -> phase/visibility -> unwrap -> reference.
ReconResult reconstruct(const QuadratureFrame& frame, const calib::ChannelCalibration& calibration,
                        const ReconOptions& options = {});

} // namespace qpi::recon

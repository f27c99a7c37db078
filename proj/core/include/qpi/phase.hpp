#pragma once

#include <numbers>
#include <span>

namespace qpi {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Maps a finite angle onto (-pi, pi]. Throws ValidationError on NaN/Inf.
double wrap_phase(double x);

/// Argument of the summed unit phasors. Throws DataError on an empty input.
double circular_mean(std::span<const double> phases);

} // namespace qpi

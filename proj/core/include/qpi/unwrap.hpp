#pragma once

#include "qpi/field.hpp"

namespace qpi::recon {

/// Per-pixel reliability: the inverse root-sum-square of the wrapped second
/// differences along the horizontal, vertical and both diagonal directions.
/// Differences touching an invalid or out-of-field neighbour are left out; a
/// pixel with none left gets reliability 0.
ScalarField unwrap_reliability(const ScalarField& wrapped, const Mask& valid);

/// Reliability-sorted, noncontinuous-path unwrapping. Edges between valid
/// 4-neighbours are merged in descending order of summed reliability (ties by
/// row-major edge index); each merge shifts the smaller group by the multiple
/// of 2*pi that minimises the wrapped mismatch across the edge. Every
/// connected region keeps the wrapped value at its most reliable pixel.
/// Invalid pixels are copied through. Throws DataError without valid pixels.
ScalarField unwrap_2d(const ScalarField& wrapped, const Mask& valid);

} // namespace qpi::recon

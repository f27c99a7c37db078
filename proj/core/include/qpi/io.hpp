#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qpi/field.hpp"

namespace qpi::io {

namespace fs = std::filesystem;

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const fs::path& path, std::string_view bytes);

std::string read_file(const fs::path& path);

// Real-valued raster: one ASCII line "width height pitch\n", then
// width*height little-endian IEEE-754 float32 values in row-major order.
void write_f32r(const fs::path& path, const ScalarField& field);
ScalarField read_f32r(const fs::path& path);

/// 16-bit binary PGM (P5, maxval 65535). Values are rounded to the nearest
/// integer; anything outside [0, 65535] is rejected. The pitch travels in a
/// "# pitch <um>" header comment.
void write_pgm16(const fs::path& path, const ScalarField& counts);

/// Reads 8- or 16-bit P5 images; pitch defaults to 1 without the comment.
ScalarField read_pgm(const fs::path& path);

/// 8-bit P5, 255 for valid pixels and 0 otherwise.
void write_mask_pgm(const fs::path& path, const Mask& mask);
Mask read_mask_pgm(const fs::path& path);

enum class ChannelEncoding {
    rates,  // chK.f32r holding counts/s
    counts, // chK.pgm holding integer counts over the exposure
};

/// Frame directory: ch0..ch3 images plus meta.txt (exposure_s, timestamp_s,
/// optional delay_um).
void write_frame(const fs::path& dir, const QuadratureFrame& frame, ChannelEncoding encoding);

/// Channel files are read as .pgm (counts, divided by the exposure) or
/// .f32r (rates); a directory holding both kinds for one channel is rejected.
QuadratureFrame read_frame(const fs::path& dir);

/// Sorted subdirectories named frame_NNNN.
std::vector<fs::path> list_frame_dirs(const fs::path& root);

std::string frame_dir_name(std::size_t index);

} // namespace qpi::io

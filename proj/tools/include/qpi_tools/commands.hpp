#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "qpi/calib.hpp"
#include "qpi_tools/run_config.hpp"

namespace qpi::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2 };

/// Writes frame_NNNN directories (channels, meta.txt, truth_phase.f32r,
/// truth_loss.f32r), plateaus.csv for mask scenes, and manifest.txt.
void cmd_simulate(const RunConfig& config, const fs::path& out_dir);

/// Fits the sweep under `sweep_dir`, writes the calibration file and
/// returns the quality report of the corrected sweep.
calib::QualityReport cmd_calibrate(const fs::path& sweep_dir, const RunConfig& config,
                                   const fs::path& out_file);

/// phase.f32r, visibility.f32r, mask.pgm and, when unwrapping,
/// unwrapped_phase.f32r. config.reference_roi applies to the unwrapped phase.
void cmd_reconstruct(const fs::path& frame_dir, const fs::path& calib_file, const RunConfig& config,
                     bool unwrap, const fs::path& out_dir);

/// Probe series CSV for every frame under `frames_dir`.
void cmd_track(const fs::path& frames_dir, const fs::path& calib_file, const fs::path& probes_file,
               const RunConfig& config, bool with_thickness, const fs::path& out_csv);

/// truth_phase.f32r, thickness.f32r and plateaus.csv of the configured mask.
void cmd_maskgen(const RunConfig& config, const fs::path& out_dir);

/// Parses argv and dispatches. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qpi::cli

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qpi {

struct FieldGeometry {
    int width = 256;
    int height = 256;
    double pitch_um = 43.0;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    void validate() const;
    bool operator==(const FieldGeometry&) const = default;
};

/// Row-major raster of real values with a pixel pitch.
///
/// Pitch is metadata only: every algorithm in this library works in pixel
/// units, physical units enter only through thickness and delay conversions.
class ScalarField {
public:
    explicit ScalarField(FieldGeometry geometry, double fill = 0.0);
    ScalarField(int width, int height, double pitch_um = 1.0, double fill = 0.0);

    /// Takes ownership of `values`; rejects a size mismatch or any non-finite value.
    static ScalarField from_values(FieldGeometry geometry, std::vector<double> values);

    int width() const { return geometry_.width; }
    int height() const { return geometry_.height; }
    double pitch() const { return geometry_.pitch_um; }
    const FieldGeometry& geometry() const { return geometry_; }
    std::size_t size() const { return values_.size(); }

    double operator()(int x, int y) const { return values_[index(x, y)]; }
    double& operator()(int x, int y) { return values_[index(x, y)]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::span<const double> row(int y) const;

    bool all_finite() const;
    bool same_shape(const ScalarField& other) const;

private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * geometry_.width + x;
    }

    FieldGeometry geometry_;
    std::vector<double> values_;
};

/// Boolean raster; `true` marks a valid pixel.
class Mask {
public:
    Mask(int width, int height, bool fill = true);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return bits_.size(); }

    bool operator()(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }
    bool at(std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }

    std::size_t count() const;
    bool matches(const ScalarField& field) const;

    /// Pixel-wise AND.
    Mask& operator&=(const Mask& other);

private:
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

struct Roi {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;

    static Roi full(const FieldGeometry& g) { return {0, 0, g.width, g.height}; }
    /// Roi of the given size centred in `g` (rounded towards the top-left).
    static Roi centered(const FieldGeometry& g, int width, int height);

    bool fits(int field_width, int field_height) const;
    bool fits(const ScalarField& f) const { return fits(f.width(), f.height()); }
    bool contains(int x, int y) const
    {
        return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height;
    }
    std::size_t area() const { return static_cast<std::size_t>(width) * height; }

    /// Throws ValidationError unless the roi is non-empty and inside a field of this size.
    void require_inside(int field_width, int field_height) const;

    bool operator==(const Roi&) const = default;
};

/// Phase [rad] and loss [0, 1] imprinted by the object on the idler.
struct ComplexSample {
    ScalarField phase;
    ScalarField loss;

    static ComplexSample blank(const FieldGeometry& g);
    const FieldGeometry& geometry() const { return phase.geometry(); }
    void validate() const;
};

inline constexpr int kChannelCount = 4;

/// Four simultaneously acquired images at global phases k*pi/2, in counts/s.
struct QuadratureFrame {
    std::array<ScalarField, kChannelCount> channels;
    double exposure_s = 0.5;
    double timestamp_s = 0.0;
    std::optional<double> delay_um;

    const FieldGeometry& geometry() const { return channels[0].geometry(); }
    void validate() const;
};

enum class NoiseModel { none, poisson };

struct SystemParams {
    double base_rate = 2.0e4;        // counts/s at unit gain
    double system_visibility = 0.67; // no-sample fringe contrast
    double signal_wavelength_um = 0.808;
    double idler_wavelength_um = 1.557;
    double delay_to_phase = 0.0;     // rad/um; 0 selects 2*pi/signal_wavelength
    std::array<double, kChannelCount> channel_gains{1.0, 1.0, 1.0, 1.0};
    std::array<double, kChannelCount> channel_offsets{0.0, 0.0, 0.0, 0.0};
    NoiseModel noise = NoiseModel::none;
    std::uint64_t rng_seed = 0;

    double effective_delay_to_phase() const;
    void validate() const;
};

struct FieldStats {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
};

FieldStats field_stats(const ScalarField& f, const Roi& roi);

/// Statistics over the valid pixels of `roi`; throws DataError when none are valid.
FieldStats field_stats(const ScalarField& f, const Roi& roi, const Mask& valid);

} // namespace qpi

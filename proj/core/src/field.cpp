#include "qpi/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qpi/error.hpp"
#include "qpi/phase.hpp"

namespace qpi {

void FieldGeometry::validate() const
{
    if (width <= 0 || height <= 0)
        throw ValidationError("field dimensions must be positive, got " + std::to_string(width) +
                              "x" + std::to_string(height));
    if (!(pitch_um > 0.0) || !std::isfinite(pitch_um))
        throw ValidationError("pixel pitch must be positive and finite");
}

ScalarField::ScalarField(FieldGeometry geometry, double fill)
    : geometry_(geometry)
{
    geometry_.validate();
    values_.assign(geometry_.pixel_count(), fill);
}

ScalarField::ScalarField(int width, int height, double pitch_um, double fill)
    : ScalarField(FieldGeometry{width, height, pitch_um}, fill)
{
}

ScalarField ScalarField::from_values(FieldGeometry geometry, std::vector<double> values)
{
    geometry.validate();
    if (values.size() != geometry.pixel_count())
        throw ValidationError("raster holds " + std::to_string(values.size()) +
                              " values, expected " + std::to_string(geometry.pixel_count()));
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }))
        throw ValidationError("raster contains non-finite values");
    ScalarField f(geometry);
    f.values_ = std::move(values);
    return f;
}

std::span<const double> ScalarField::row(int y) const
{
    return std::span<const double>(values_).subspan(index(0, y), geometry_.width);
}

bool ScalarField::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool ScalarField::same_shape(const ScalarField& other) const
{
    return geometry_ == other.geometry_;
}

Mask::Mask(int width, int height, bool fill)
    : width_(width), height_(height)
{
    if (width <= 0 || height <= 0)
        throw ValidationError("mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t Mask::count() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool Mask::matches(const ScalarField& field) const
{
    return width_ == field.width() && height_ == field.height();
}

Mask& Mask::operator&=(const Mask& other)
{
    if (other.width_ != width_ || other.height_ != height_)
        throw ValidationError("mask dimension mismatch");
    for (std::size_t i = 0; i < bits_.size(); ++i)
        bits_[i] = bits_[i] & other.bits_[i];
    return *this;
}

Roi Roi::centered(const FieldGeometry& g, int width, int height)
{
    return {(g.width - width) / 2, (g.height - height) / 2, width, height};
}

bool Roi::fits(int field_width, int field_height) const
{
    return width > 0 && height > 0 && x0 >= 0 && y0 >= 0 &&
           x0 + width <= field_width && y0 + height <= field_height;
}

void Roi::require_inside(int field_width, int field_height) const
{
    if (!fits(field_width, field_height))
        throw ValidationError("roi (" + std::to_string(x0) + ", " + std::to_string(y0) + ", " +
                              std::to_string(width) + "x" + std::to_string(height) +
                              ") does not fit a " + std::to_string(field_width) + "x" +
                              std::to_string(field_height) + " field");
}

ComplexSample ComplexSample::blank(const FieldGeometry& g)
{
    return {ScalarField(g, 0.0), ScalarField(g, 0.0)};
}

void ComplexSample::validate() const
{
    if (!phase.same_shape(loss))
        throw ValidationError("sample phase and loss fields differ in shape or pitch");
    if (!phase.all_finite())
        throw ValidationError("sample phase contains non-finite values");
    for (double l : loss.values())
        if (!(l >= 0.0 && l <= 1.0))
            throw ValidationError("sample loss outside [0, 1]");
}

void QuadratureFrame::validate() const
{
    for (int k = 1; k < kChannelCount; ++k)
        if (!channels[k].same_shape(channels[0]))
            throw ValidationError("quadrature channels differ in shape or pitch");
    if (!(exposure_s > 0.0) || !std::isfinite(exposure_s))
        throw ValidationError("exposure must be positive");
    if (!std::isfinite(timestamp_s))
        throw ValidationError("timestamp must be finite");
    if (delay_um && !std::isfinite(*delay_um))
        throw ValidationError("delay must be finite");
    for (const auto& ch : channels)
        for (double v : ch.values())
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ValidationError("channel values must be finite and non-negative");
}

double SystemParams::effective_delay_to_phase() const
{
    return delay_to_phase > 0.0 ? delay_to_phase : kTwoPi / signal_wavelength_um;
}

void SystemParams::validate() const
{
    if (!(base_rate > 0.0) || !std::isfinite(base_rate))
        throw ValidationError("base_rate must be positive");
    if (!(system_visibility >= 0.0 && system_visibility <= 1.0))
        throw ValidationError("system_visibility must lie in [0, 1]");
    if (!(signal_wavelength_um > 0.0) || !(idler_wavelength_um > 0.0))
        throw ValidationError("wavelengths must be positive");
    if (delay_to_phase < 0.0 || !std::isfinite(delay_to_phase))
        throw ValidationError("delay_to_phase must be positive (or 0 for the default)");
    for (int k = 0; k < kChannelCount; ++k) {
        if (!(channel_gains[k] > 0.0) || !std::isfinite(channel_gains[k]))
            throw ValidationError("channel gains must be positive");
        if (!(channel_offsets[k] >= 0.0) || !std::isfinite(channel_offsets[k]))
            throw ValidationError("channel offsets must be non-negative");
    }
}

FieldStats field_stats(const ScalarField& f, const Roi& roi)
{
    return field_stats(f, roi, Mask(f.width(), f.height(), true));
}

FieldStats field_stats(const ScalarField& f, const Roi& roi, const Mask& valid)
{
    roi.require_inside(f.width(), f.height());
    if (!valid.matches(f))
        throw ValidationError("mask does not match field dimensions");

    // Two passes: the mean first, then squared deviations, to keep the
    // variance accurate for large offsets.
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = roi.y0; y < roi.y0 + roi.height; ++y)
        for (int x = roi.x0; x < roi.x0 + roi.width; ++x)
            if (valid(x, y)) {
                sum += f(x, y);
                ++n;
            }
    if (n == 0)
        throw DataError("roi contains no valid pixels");
    const double mean = sum / static_cast<double>(n);

    double ss = 0.0;
    for (int y = roi.y0; y < roi.y0 + roi.height; ++y)
        for (int x = roi.x0; x < roi.x0 + roi.width; ++x)
            if (valid(x, y)) {
                const double d = f(x, y) - mean;
                ss += d * d;
            }
    return {mean, std::sqrt(ss / static_cast<double>(n))};
}

} // namespace qpi

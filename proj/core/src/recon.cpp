#include "qpi/recon.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "qpi/error.hpp"
#include "qpi/phase.hpp"
#include "qpi/unwrap.hpp"

namespace qpi {

AffineTransform AffineTransform::inverse() const
{
    const double det = determinant();
    if (!(std::abs(det) > 1e-12) || !std::isfinite(det))
        throw ValidationError("affine transform is singular");
    const double a = m[4] / det;
    const double b = -m[1] / det;
    const double d = -m[3] / det;
    const double e = m[0] / det;
    return {{a, b, -(a * m[2] + b * m[5]), d, e, -(d * m[2] + e * m[5])}};
}

} // namespace qpi

namespace qpi::recon {
namespace {

void require_same_shape(const ScalarField& p0, const ScalarField& p1, const ScalarField& p2,
                        const ScalarField& p3)
{
    if (!p0.same_shape(p1) || !p0.same_shape(p2) || !p0.same_shape(p3))
        throw ValidationError("quadrature channels differ in shape");
}

ScalarField crop(const ScalarField& f, const Roi& roi)
{
    roi.require_inside(f.width(), f.height());
    ScalarField out(roi.width, roi.height, f.pitch());
    for (int y = 0; y < roi.height; ++y)
        for (int x = 0; x < roi.width; ++x)
            out(x, y) = f(roi.x0 + x, roi.y0 + y);
    return out;
}

// Half-sample symmetric extension: ... c b a | a b c ... | c b a ...
int reflect_index(int i, int n)
{
    const int period = 2 * n;
    int m = i % period;
    if (m < 0)
        m += period;
    return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma)
{
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k)
        w /= sum;
    return k;
}

} // namespace

ScalarField warp_affine(const ScalarField& src, const AffineTransform& to_output, int out_width,
                        int out_height, Mask& valid)
{
    if (valid.width() != out_width || valid.height() != out_height)
        throw ValidationError("validity mask does not match the warp output");
    const AffineTransform back = to_output.inverse();
    const int w = src.width();
    const int h = src.height();
    ScalarField out(out_width, out_height, src.pitch());

    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const auto [sx, sy] = back.apply(x, y);
            // Snap rounding noise so integer-valued preimages sample exactly.
            const double rx = std::round(sx);
            const double ry = std::round(sy);
            const double u = std::abs(sx - rx) < 1e-9 ? rx : sx;
            const double v = std::abs(sy - ry) < 1e-9 ? ry : sy;
            if (!(u >= 0.0 && v >= 0.0 && u <= w - 1 && v <= h - 1)) {
                valid.set(x, y, false);
                continue;
            }
            const int x0 = static_cast<int>(std::floor(u));
            const int y0 = static_cast<int>(std::floor(v));
            const double fx = u - x0;
            const double fy = v - y0;
            const int x1 = fx > 0.0 ? x0 + 1 : x0;
            const int y1 = fy > 0.0 ? y0 + 1 : y0;
            const double top = fx > 0.0 ? src(x0, y0) * (1.0 - fx) + src(x1, y0) * fx : src(x0, y0);
            const double bottom =
                fx > 0.0 ? src(x0, y1) * (1.0 - fx) + src(x1, y1) * fx : src(x0, y1);
            out(x, y) = fy > 0.0 ? top * (1.0 - fy) + bottom * fy : top;
        }
    }
    return out;
}

AlignedChannels register_channels(const QuadratureFrame& frame,
                                  const calib::ChannelCalibration& calibration)
{
    frame.validate();
    const FieldGeometry g = frame.geometry();
    if (calibration.frame_width > 0 &&
        (g.width != calibration.frame_width || g.height != calibration.frame_height))
        throw DataError(fmt::format("frame is {}x{} but the calibration was made on {}x{} frames",
                                    g.width, g.height, calibration.frame_width,
                                    calibration.frame_height));
    const Roi& reference = calibration.channels[0].roi;
    reference.require_inside(frame.geometry().width, frame.geometry().height);

    Mask valid(reference.width, reference.height, true);
    auto align = [&](int k) {
        const auto& ch = calibration.channels[k];
        const ScalarField cropped = crop(frame.channels[k], ch.roi);
        return warp_affine(cropped, ch.affine, reference.width, reference.height, valid);
    };
    Channels channels{align(0), align(1), align(2), align(3)};
    return {std::move(channels), std::move(valid)};
}

Channels correct_channels(const Channels& aligned, const calib::ChannelCalibration& calibration)
{
    Channels out = aligned;
    for (int k = 0; k < kChannelCount; ++k) {
        const double alpha = calibration.channels[k].alpha;
        const double beta = calibration.channels[k].beta;
        if (!std::isfinite(alpha) || !std::isfinite(beta))
            throw ValidationError("channel corrections must be finite");
        for (double& v : out[k].values())
            v = alpha * v + beta;
    }
    return out;
}

MaskedField quadrature_phase(const ScalarField& p0, const ScalarField& p1, const ScalarField& p2,
                             const ScalarField& p3, double threshold)
{
    require_same_shape(p0, p1, p2, p3);
    MaskedField out{ScalarField(p0.geometry()), Mask(p0.width(), p0.height(), true)};
    const auto a = p0.values();
    const auto b = p1.values();
    const auto c = p2.values();
    const auto d = p3.values();
    auto phase = out.values.values();
    for (std::size_t i = 0; i < phase.size(); ++i) {
        const double num = d[i] - b[i];
        const double den = a[i] - c[i];
        const double sum = a[i] + b[i] + c[i] + d[i];
        if (!(sum > 0.0) || std::hypot(num, den) < threshold * sum) {
            out.valid.set(i, false);
            continue;
        }
        const double p = std::atan2(num, den);
        phase[i] = p <= -kPi ? kPi : p;
    }
    return out;
}

MaskedField quadrature_visibility(const ScalarField& p0, const ScalarField& p1,
                                  const ScalarField& p2, const ScalarField& p3)
{
    require_same_shape(p0, p1, p2, p3);
    MaskedField out{ScalarField(p0.geometry()), Mask(p0.width(), p0.height(), true)};
    const auto a = p0.values();
    const auto b = p1.values();
    const auto c = p2.values();
    const auto d = p3.values();
    auto vis = out.values.values();
    for (std::size_t i = 0; i < vis.size(); ++i) {
        const double sum = a[i] + b[i] + c[i] + d[i];
        if (!(sum > 0.0)) {
            out.valid.set(i, false);
            continue;
        }
        vis[i] = 2.0 * std::hypot(d[i] - b[i], c[i] - a[i]) / sum;
    }
    return out;
}

ScalarField gaussian_blur(const ScalarField& f, double sigma)
{
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw ValidationError("blur sigma must be non-negative");
    if (sigma == 0.0)
        return f;

    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = f.width();
    const int h = f.height();

    ScalarField tmp(f.geometry());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] * f(reflect_index(x + i, w), y);
            tmp(x, y) = acc;
        }
    }
    ScalarField out(f.geometry());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(x, reflect_index(y + i, h));
            out(x, y) = acc;
        }
    }
    return out;
}

ScalarField reference_to_region(const ScalarField& f, const Roi& roi)
{
    return reference_to_region(f, roi, Mask(f.width(), f.height(), true));
}

ScalarField reference_to_region(const ScalarField& f, const Roi& roi, const Mask& valid)
{
    const double mean = field_stats(f, roi, valid).mean;
    ScalarField out = f;
    for (double& v : out.values())
        v -= mean;
    return out;
}

ReconResult reconstruct(const QuadratureFrame& frame, const calib::ChannelCalibration& calibration,
                        const ReconOptions& options)
{
    AlignedChannels aligned = register_channels(frame, calibration);
    Channels corrected = correct_channels(aligned.channels, calibration);
    for (auto& ch : corrected)
        ch = gaussian_blur(ch, options.sigma);

    MaskedField phase = quadrature_phase(corrected[0], corrected[1], corrected[2], corrected[3],
                                         options.validity_threshold);
    MaskedField vis =
        quadrature_visibility(corrected[0], corrected[1], corrected[2], corrected[3]);

    Mask valid = aligned.valid;
    valid &= phase.valid;
    valid &= vis.valid;
    for (std::size_t i = 0; i < valid.size(); ++i)
        if (!valid.at(i)) {
            phase.values.values()[i] = 0.0;
            vis.values.values()[i] = 0.0;
        }

    ReconResult result{std::move(phase.values), std::move(vis.values), std::move(valid),
                       std::nullopt};
    if (options.unwrap) {
        ScalarField unwrapped = unwrap_2d(result.phase, result.valid);
        if (options.reference_roi)
            unwrapped = reference_to_region(unwrapped, *options.reference_roi, result.valid);
        for (std::size_t i = 0; i < result.valid.size(); ++i)
            if (!result.valid.at(i))
                unwrapped.values()[i] = 0.0;
        result.unwrapped = std::move(unwrapped);
    } else if (options.reference_roi) {
        throw ValidationError("referencing requires unwrapping");
    }
    return result;
}

} // namespace qpi::recon

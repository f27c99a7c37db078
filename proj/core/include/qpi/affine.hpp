#pragma once

#include <array>

namespace qpi {

/// 2x3 affine map: x' = a*x + b*y + c, y' = d*x + e*y + f.
struct AffineTransform {
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(double dx, double dy) { return {{1.0, 0.0, dx, 0.0, 1.0, dy}}; }
    /// Uniform scale about (cx, cy).
    static AffineTransform scaling(double s, double cx, double cy)
    {
        return {{s, 0.0, cx - s * cx, 0.0, s, cy - s * cy}};
    }

    std::array<double, 2> apply(double x, double y) const
    {
        return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]};
    }

    double determinant() const { return m[0] * m[4] - m[1] * m[3]; }

    /// Throws ValidationError for a singular map.
    AffineTransform inverse() const;

    bool operator==(const AffineTransform&) const = default;
};

} // namespace qpi

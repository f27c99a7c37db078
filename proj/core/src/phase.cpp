#include "qpi/phase.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "qpi/error.hpp"

namespace qpi {

double wrap_phase(double x)
{
    if (!std::isfinite(x))
        throw ValidationError("cannot wrap a non-finite phase");
    double r = std::remainder(x, kTwoPi);
    // remainder() yields [-pi, pi]; a result at -pi (up to rounding of the
    // reduction) belongs to the +pi end of the half-open interval.
    const double tol = 4.0 * DBL_EPSILON * std::max(1.0, std::abs(x));
    if (r <= -kPi + tol)
        r = std::min(r + kTwoPi, kPi);
    return r;
}

double circular_mean(std::span<const double> phases)
{
    if (phases.empty())
        throw DataError("circular mean of an empty set");
    double s = 0.0;
    double c = 0.0;
    for (double p : phases) {
        s += std::sin(p);
        c += std::cos(p);
    }
    return std::atan2(s, c);
}

} // namespace qpi

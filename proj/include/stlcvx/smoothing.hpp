#pragma once

#include <cmath>

namespace stlcvx {

// Smoothed min/max surrogates with gain kappa >= 0.
//
// Outside the band |a - b| < kappa the exact extremum is returned; inside,
// the quadratic blend g_min/g_max. kappa = 0 degenerates to the exact
// extremum with ties broken toward the first argument. Note that
// smax(a, b, k) != -smin(a, b, k); the correct identity is
// smax(a, b, k) == -smin(-a, -b, k).

struct SmoothGrad {
    double da = 0.0;
    double db = 0.0;
};

inline double smin(double a, double b, double kappa) {
    const double d = a - b;
    if (d <= -kappa) return a;
    if (d >= kappa) return b;
    const double h = 0.5 + d / (2.0 * kappa);
    return a * (1.0 - h) + h * b - kappa * h * (1.0 - h);
}

inline double smax(double a, double b, double kappa) {
    const double d = b - a;
    if (d <= -kappa) return a;
    if (d >= kappa) return b;
    const double h = 0.5 + (a - b) / (2.0 * kappa);
    return b * (1.0 - h) + h * a + kappa * h * (1.0 - h);
}

// Interior partials are (1-h, h): the chain terms through h cancel exactly
// when differentiating g_min, so these are the true analytic derivatives,
// not a dropped-term approximation. Verified against central differences in
// the test suite. At kappa = 0 the one-hot subgradient of the selected
// argument is returned, ties selecting the first argument.

inline SmoothGrad smin_grad(double a, double b, double kappa) {
    const double d = a - b;
    if (d <= -kappa) return {1.0, 0.0};
    if (d >= kappa) return {0.0, 1.0};
    const double h = 0.5 + d / (2.0 * kappa);
    return {1.0 - h, h};
}

inline SmoothGrad smax_grad(double a, double b, double kappa) {
    const double d = b - a;
    if (d <= -kappa) return {1.0, 0.0};
    if (d >= kappa) return {0.0, 1.0};
    const double h = 0.5 + (a - b) / (2.0 * kappa);
    return {h, 1.0 - h};
}

// Signed distance from the switching surfaces |a - b| = kappa; positive
// means the evaluation is safely inside one region. Used by finite-difference
// checks to reject samples near the non-smooth seams.
inline double smooth_region_margin(double a, double b, double kappa) {
    return std::abs(std::abs(a - b) - kappa);
}

}  // namespace stlcvx

#pragma once

#include <algorithm>
#include <cmath>

namespace granular::detail {

// 1-D quadratic deposition weights about the nearest node; s in [-1/2, 1/2].
// Reproduces sums of 1, x and x^2 exactly (transpose of quadratic Lagrange
// interpolation); the outer weights change sign at s = 0.
inline void quad_weights(double s, double* w) {
  w[0] = 0.5 * s * (s - 1.0);
  w[1] = 1.0 - s * s;
  w[2] = 0.5 * s * (s + 1.0);
}

// Quadratic Lagrange stencil for an absolute target g (grid units), with the
// 3-node window clamped into [0, N-1]. Any 3 consecutive nodes reproduce
// 1, x, x^2 exactly, so clamping keeps the moment identities while letting
// boundary-node targets deposit instead of being dropped. Returns false only
// when g lies outside the hull.
inline bool clamped_stencil(double g, int N, int& corner, double* w) {
  if (g < -1e-9 || g > N - 1 + 1e-9) return false;
  const int b = static_cast<int>(std::nearbyint(g));
  corner = std::clamp(b - 1, 0, N - 3);
  const double p = g - corner;
  w[0] = 0.5 * (p - 1.0) * (p - 2.0);
  w[1] = p * (2.0 - p);
  w[2] = 0.5 * p * (p - 1.0);
  return true;
}

}  // namespace granular::detail

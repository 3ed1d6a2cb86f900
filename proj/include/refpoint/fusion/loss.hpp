#pragma once

#include <cstddef>
#include <span>

namespace refpoint::fusion {

/// Cosine clamp used for the arccos derivative.
inline constexpr double kCosClamp = 1.0 - 1e-7;

/// Mean angle (radians) between prediction rows and truth rows, both batch x 3.
/// When d_pred is non-empty it receives d loss / d pred. Throws
/// Errc::ZeroPrediction for a prediction row with norm < 1e-12 and
/// Errc::ZeroVector for a zero truth row.
template <typename T>
double mad_loss(std::span<const T> pred, std::span<const T> truth, std::span<T> d_pred = {});

/// Per-row angles in radians.
template <typename T>
void angular_distances(std::span<const T> pred, std::span<const T> truth, std::span<double> out);

}  // namespace refpoint::fusion

#pragma once

#include <functional>
#include <span>

#include "relstance/random.hpp"

namespace relstance {

/// Central-difference probe of `loss` at random coordinates of `params`.
/// A probe picks a non-empty block uniformly, then a coordinate within it, so
/// small blocks are checked as often as large ones. Parameters are restored.
/// `loss` may evaluate in extended precision. Returns max |analytic − numeric| / max(1e-8, |numeric|).
double max_relative_gradient_error(std::span<const std::span<double>> params,
                                   std::span<const std::span<const double>> analytic,
                                   const std::function<long double()>& loss, std::size_t probe_count, double eps,
                                   Rng& rng);

}  // namespace relstance

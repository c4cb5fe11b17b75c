#include "relstance/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace relstance {

double max_relative_gradient_error(std::span<const std::span<double>> params,
                                   std::span<const std::span<const double>> analytic,
                                   const std::function<long double()>& loss, std::size_t probe_count, double eps,
                                   Rng& rng) {
  if (params.size() != analytic.size()) throw std::invalid_argument("gradient layout mismatch");
  std::vector<std::size_t> candidates;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != analytic[b].size()) throw std::invalid_argument("gradient block size mismatch");
    if (!params[b].empty()) candidates.push_back(b);
  }
  if (candidates.empty()) return 0.0;

  double worst = 0.0;
  for (std::size_t p = 0; p < probe_count; ++p) {
    const std::size_t b = candidates[rng.index(candidates.size())];
    const std::size_t i = rng.index(params[b].size());
    double& x = params[b][i];
    const double saved = x;
    const double hi = saved + eps;
    const double lo = saved - eps;
    x = hi;
    const long double up = loss();
    x = lo;
    const long double down = loss();
    x = saved;
    const auto numeric = static_cast<double>((up - down) / static_cast<long double>(hi - lo));
    const double err = std::abs(analytic[b][i] - numeric) / std::max(1e-8, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace relstance

// Growth-optimal weights in a volatility-stabilized market with many small assets.
#include <cstdio>
#include <vector>

#include "hjacobi.hpp"

int main() {
  using namespace hjacobi;
  const std::size_t d = 500;
  const double gamma_star = 1.0;
  const auto p = ModelParams::volatility_stabilized(d, gamma_star);

  // 499 assets at 5% would overflow the simplex, so park the rest in one name
  std::vector<double> x(d, 0.05 / 499.0);
  x[0] = 0.05;
  x[1] = 1.0 - 0.05 - 498 * (0.05 / 499.0);
  const SimplexVec state(x);

  const auto g = growth_exists(p, d - 1);
  std::printf("growth-optimal strategy exists: %s\n", g.exists ? "yes" : "no");
  const auto theta = hat_theta_named(state, p, d - 1);
  for (std::size_t i : {0u, 1u, 2u})
    std::printf("asset %zu: weight %.4f  pi = %.6f\n", i + 1, x[i], theta[i] * x[i]);
}

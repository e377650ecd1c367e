// Poisson-Dirichlet moments from stick breaking against the exact recursion.
#include <cstdio>

#include "hjacobi.hpp"

int main() {
  using namespace hjacobi;
  const double theta = 1.0;
  const auto sets = multisets_up_to(6);
  std::vector<RunningStats> acc(sets.size());
  for_each_pd_draw(PDConfig{theta, {}, 10000}, 50000, 21, [&](std::span<const double> y, double) {
    for (std::size_t s = 0; s < sets.size(); ++s) {
      double v = 1.0;
      for (int m : sets[s]) v *= phi_m(y, m);
      acc[s].add(v);
    }
  });
  const MomentRecursion rec(theta);
  for (std::size_t s = 0; s < sets.size(); ++s)
    std::printf("%-10s exact %.6f  mc %.6f +- %.6f\n", multiset_id(sets[s]).c_str(), rec.expect(sets[s]),
                acc[s].mean(), acc[s].stderr_mean());
}

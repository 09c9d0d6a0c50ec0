#include "bfc/oracle.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>

namespace bfc {

OracleResult brute_force_oracle(const ReducedProblem& problem, const ControlSpace& space, int levels) {
  const int n = space.size();
  if (n > 4) throw ValidationError(fmt::format("oracle supports at most 4 parameters, got {}", n));
  if (levels < 2 || levels > 9) throw ValidationError(fmt::format("oracle levels must lie in [2, 9], got {}", levels));
  long combos = 1;
  for (int i = 0; i < n; ++i) combos *= levels;
  if (combos > 10000) throw ValidationError(fmt::format("oracle would need {} solves (limit 10^4)", combos));

  OracleResult result;
  result.table.reserve(static_cast<std::size_t>(combos));
  std::vector<int> index(n, 0);
  for (long c = 0; c < combos; ++c) {
    long rest = c;
    for (int i = n - 1; i >= 0; --i) {
      index[i] = static_cast<int>(rest % levels);
      rest /= levels;
    }
    Eigen::VectorXd theta(n);
    for (int i = 0; i < n; ++i) {
      const double lo = space.lower()[i], hi = space.upper()[i];
      theta[i] = index[i] == levels - 1 ? hi : lo + (hi - lo) * index[i] / (levels - 1);
    }
    const double J = problem.cost(space.expand(theta));
    result.table.push_back({theta, J});
    if (c == 0 || J < result.best_J) {
      result.best_J = J;
      result.best_index = static_cast<int>(c);
    }
  }
  result.best_theta = result.table[result.best_index].theta;
  return result;
}

}  // namespace bfc

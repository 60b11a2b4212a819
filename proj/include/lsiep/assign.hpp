#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "lsiep/errors.hpp"
#include "lsiep/vec_ops.hpp"

namespace lsiep {

// Which m of the n ascending eigenvalues pair with the m ascending targets.
// indices are strictly increasing positions into the spectrum.
struct Assignment {
  std::vector<std::size_t> indices;
  double cost = 0.0;
};

namespace detail {

inline void check_assign_inputs(std::span<const double> spectrum, std::span<const double> targets) {
  require(!targets.empty(), "assign: empty target list");
  require(targets.size() <= spectrum.size(), "assign: more targets than eigenvalues");
  require(std::is_sorted(spectrum.begin(), spectrum.end()), "assign: spectrum not ascending");
  require(std::is_sorted(targets.begin(), targets.end()), "assign: targets not ascending");
}

}  // namespace detail

// Minimum-cost order-preserving assignment by dynamic programming.  Both
// sequences are sorted, so some optimal injective assignment is monotone and
// the DP over cost(i,j) = min(cost(i,j-1), cost(i-1,j-1) + (lambda_j - t_i)^2)
// is exact.  Ties prefer skipping, which lands on the smallest index vector.
inline Assignment assign_monotone_dp(std::span<const double> spectrum,
                                     std::span<const double> targets) {
  detail::check_assign_inputs(spectrum, targets);
  const std::size_t n = spectrum.size(), m = targets.size();
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> prev(n + 1, 0.0), cur(n + 1, inf);
  std::vector<char> take((m + 1) * (n + 1), 0);
  for (std::size_t i = 1; i <= m; ++i) {
    std::fill(cur.begin(), cur.end(), inf);
    for (std::size_t j = i; j <= n; ++j) {
      const double d = spectrum[j - 1] - targets[i - 1];
      const double with = prev[j - 1] + d * d;
      const double without = cur[j - 1];
      if (with < without) {
        cur[j] = with;
        take[i * (n + 1) + j] = 1;
      } else {
        cur[j] = without;
      }
    }
    std::swap(prev, cur);
  }

  Assignment out;
  out.cost = prev[n];
  out.indices.resize(m);
  std::size_t i = m, j = n;
  while (i > 0) {
    if (take[i * (n + 1) + j]) {
      out.indices[i - 1] = j - 1;
      --i;
    }
    --j;
  }
  return out;
}

// Cost of the best assignment that differs from the optimum, +inf when the
// optimum is the only assignment (m == n).  Paths through the DP are in
// bijection with index vectors, so a two-slot min-plus recursion is exact.
inline double assign_second_best_cost(std::span<const double> spectrum,
                                      std::span<const double> targets) {
  detail::check_assign_inputs(spectrum, targets);
  const std::size_t n = spectrum.size(), m = targets.size();
  const double inf = std::numeric_limits<double>::infinity();
  struct Two {
    double best, second;
  };
  std::vector<Two> prev(n + 1, {0.0, inf}), cur(n + 1);
  for (std::size_t i = 1; i <= m; ++i) {
    cur.assign(n + 1, Two{inf, inf});
    for (std::size_t j = i; j <= n; ++j) {
      const double d = spectrum[j - 1] - targets[i - 1];
      const double dd = d * d;
      double cand[4] = {cur[j - 1].best, cur[j - 1].second, prev[j - 1].best + dd,
                        prev[j - 1].second + dd};
      std::sort(cand, cand + 4);
      cur[j] = {cand[0], cand[1]};
    }
    std::swap(prev, cur);
  }
  return prev[n].second;
}

// Brute-force oracle: every strictly increasing index subset, first-found
// kept on ties so the result is the lexicographically smallest optimum.
// Within a subset the monotone pairing is optimal for sorted targets.
inline Assignment assign_exhaustive(std::span<const double> spectrum,
                                    std::span<const double> targets) {
  detail::check_assign_inputs(spectrum, targets);
  require(spectrum.size() <= 20, "assign_exhaustive: n > 20");
  const std::size_t n = spectrum.size(), m = targets.size();

  std::vector<std::size_t> pick(m);
  for (std::size_t i = 0; i < m; ++i) pick[i] = i;
  Assignment best;
  best.cost = std::numeric_limits<double>::infinity();
  for (;;) {
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = spectrum[pick[i]] - targets[i];
      c += d * d;
    }
    if (c < best.cost) {
      best.cost = c;
      best.indices = pick;
    }
    // next combination
    std::size_t i = m;
    while (i > 0) {
      --i;
      if (pick[i] != i + n - m) {
        ++pick[i];
        for (std::size_t k = i + 1; k < m; ++k) pick[k] = pick[k - 1] + 1;
        break;
      }
      if (i == 0) return best;
    }
  }
}

}  // namespace lsiep

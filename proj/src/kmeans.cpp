#include "curate/kmeans.hpp"

#include <cmath>
#include <limits>

#include "curate/error.hpp"
#include "curate/parallel.hpp"

namespace curate {

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> kmeanspp_seeds(const std::vector<Vector>& points, std::size_t k,
                                        std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<std::size_t> seeds;
  std::vector<bool> chosen(n, false);
  std::size_t first = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
  if (first >= n) first = n - 1;
  seeds.push_back(first);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], points[first]);

  while (seeds.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit_uniform(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        // Rounding left the target at the very end of the range.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    seeds.push_back(pick);
    chosen[pick] = true;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], points[pick]));
    }
  }
  return seeds;
}

KMeansResult kmeans(const std::vector<Vector>& points, const KMeansOptions& options) {
  const std::size_t n = points.size();
  const std::size_t k = options.k;
  if (k == 0) throw PreconditionError("kmeans: K must be >= 1");
  if (k > n) {
    throw PreconditionError("kmeans: K=" + std::to_string(k) + " exceeds point count " +
                            std::to_string(n));
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw PreconditionError("kmeans: points have mixed dimensions");
  }

  std::mt19937_64 rng(options.seed);
  KMeansResult result;
  for (std::size_t idx : kmeanspp_seeds(points, k, rng)) result.centroids.push_back(points[idx]);
  result.initial_centroids = result.centroids;
  result.assignments.assign(n, 0);

  const std::size_t chunk = 1024;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    parallel_map(n_chunks, options.workers, [&](std::size_t c) {
      const std::size_t end = std::min(n, (c + 1) * chunk);
      for (std::size_t i = c * chunk; i < end; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          const double d = squared_distance(points[i], result.centroids[j]);
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        result.assignments[i] = best;
      }
      return 0;
    });

    std::vector<Vector> sums(k, Vector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[result.assignments[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[result.assignments[i]];
    }
    double max_shift = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (auto& v : sums[j]) v /= static_cast<double>(counts[j]);
      max_shift = std::max(max_shift, std::sqrt(squared_distance(sums[j], result.centroids[j])));
      result.centroids[j] = std::move(sums[j]);
    }
    ++result.iterations;
    if (options.record_history) {
      result.history.push_back(KMeansStep{result.assignments, result.centroids, max_shift});
    }
    if (max_shift <= options.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace curate

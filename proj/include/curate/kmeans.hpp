#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace curate {

using Vector = std::vector<double>;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-9;  // stop once no centroid moves farther than this
  std::size_t workers = 1;
  bool record_history = false;
};

struct KMeansStep {
  std::vector<std::size_t> assignments;
  std::vector<Vector> centroids;  // after the update of this step
  double max_shift = 0.0;
};

struct KMeansResult {
  std::vector<Vector> initial_centroids;
  std::vector<Vector> centroids;
  std::vector<std::size_t> assignments;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<KMeansStep> history;  // filled when record_history is set
};

/// k-means++ seeding followed by Lloyd iterations.
///
/// Seeding draws u = unit_uniform(rng) from mt19937_64(seed): the first
/// centre is point floor(u * n); each further centre is the first point
/// whose running sum of squared distances to the chosen centres exceeds
/// u * total (the lowest unchosen index if total is zero). Each iteration
/// assigns every point to its nearest centroid (lowest id on ties), then
/// moves each centroid to the mean of its members, summed in point order;
/// an empty cluster keeps its centroid. Iteration stops when the largest
/// centroid move is <= tol or after max_iters steps.
///
/// Throws PreconditionError on k == 0, k > n, or ragged dimensions.
KMeansResult kmeans(const std::vector<Vector>& points, const KMeansOptions& options);

/// Indices of the k-means++ seeds, in pick order.
std::vector<std::size_t> kmeanspp_seeds(const std::vector<Vector>& points, std::size_t k,
                                        std::mt19937_64& rng);

double squared_distance(const Vector& a, const Vector& b);

}  // namespace curate

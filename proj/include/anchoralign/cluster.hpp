#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "anchoralign/matrix.hpp"

namespace anchoralign {

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Matrix centroids;
  std::vector<std::size_t> sizes;
  double inertia = 0.0;
  // Inertia after every assignment step, in iteration order.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding (Euclidean). Distance ties go to
// the lower centroid index. A cluster that empties is re-seeded with the point
// farthest from its current centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300);

// Greedy farthest-point traversal over the centroids of `candidate_ids`.
// First pick: largest size (ties -> lowest id). Each next pick maximizes the
// minimum distance to the centroids already picked (ties -> lowest id).
std::vector<std::size_t> farthest_cluster_selection(const Matrix& centroids,
                                                    std::span<const std::size_t> candidate_ids,
                                                    std::span<const std::size_t> sizes,
                                                    std::size_t m);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace anchoralign

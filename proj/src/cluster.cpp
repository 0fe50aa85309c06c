#include "anchoralign/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "anchoralign/error.hpp"
#include "anchoralign/rng.hpp"

namespace anchoralign {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);

  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          acc += d2[i];
          pick = i;
          if (acc > target) break;
        }
      } else {
        // Every point coincides with a chosen centroid; take the first unused row.
        pick = 0;
        while (pick < n && chosen[pick]) ++pick;
        if (pick == n) pick = 0;
      }
    }
    chosen[pick] = true;
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter) {
  const std::size_t n = points.rows();
  if (k == 0 || k > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "kmeans needs 1 <= k <= n, got k=" + std::to_string(k) +
                    " n=" + std::to_string(n));
  }
  if (max_iter < 1) throw Error(ErrorCode::kInvalidArgument, "kmeans max_iter must be >= 1");

  Rng rng(seed);
  KMeansResult r;
  r.centroids = seed_plus_plus(points, k, rng);
  r.assignments.assign(n, k);  // sentinel: nothing assigned yet
  std::vector<double> dist(n, 0.0);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points.row(i), r.centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignments[i] != best) changed = true;
      r.assignments[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    r.inertia_history.push_back(inertia);
    r.inertia = inertia;
    r.iterations = iter + 1;
    if (!changed) {
      r.converged = true;
      break;
    }
    if (iter + 1 == max_iter) break;

    Matrix sums(k, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(r.assignments[i]);
      auto p = points.row(i);
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += p[j];
      ++counts[r.assignments[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      auto centroid = r.centroids.row(c);
      if (counts[c] > 0) {
        auto s = sums.row(c);
        for (std::size_t j = 0; j < s.size(); ++j) centroid[j] = s[j] / double(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point worst served by its centroid.
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      if (far < n) {
        taken[far] = true;
        dist[far] = 0.0;
        std::copy(points.row(far).begin(), points.row(far).end(), centroid.begin());
      }
    }
  }

  r.sizes.assign(k, 0);
  for (std::size_t a : r.assignments) ++r.sizes[a];
  return r;
}

std::vector<std::size_t> farthest_cluster_selection(const Matrix& centroids,
                                                    std::span<const std::size_t> candidate_ids,
                                                    std::span<const std::size_t> sizes,
                                                    std::size_t m) {
  if (m > candidate_ids.size()) {
    throw Error(ErrorCode::kInsufficientClusters,
                "requested " + std::to_string(m) + " clusters but only " +
                    std::to_string(candidate_ids.size()) + " candidates");
  }
  for (std::size_t id : candidate_ids) {
    if (id >= centroids.rows() || id >= sizes.size()) {
      throw Error(ErrorCode::kInvalidArgument, "candidate id " + std::to_string(id) + " out of range");
    }
  }
  std::vector<std::size_t> pool(candidate_ids.begin(), candidate_ids.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (m > pool.size()) {
    throw Error(ErrorCode::kInsufficientClusters, "candidate ids contain duplicates");
  }

  std::vector<std::size_t> picked;
  if (m == 0) return picked;
  picked.reserve(m);

  // pool is ascending, so strict comparisons keep the lowest id on ties.
  std::size_t first = pool[0];
  for (std::size_t id : pool)
    if (sizes[id] > sizes[first]) first = id;
  picked.push_back(first);

  std::vector<double> min_d(pool.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> used(pool.size(), false);
  while (picked.size() < m) {
    const std::size_t last = picked.back();
    std::size_t best = pool.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i] == last) used[i] = true;
      if (used[i]) continue;
      min_d[i] = std::min(min_d[i], std::sqrt(squared_distance(centroids.row(pool[i]),
                                                               centroids.row(last))));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    picked.push_back(pool[best]);
  }
  return picked;
}

}  // namespace anchoralign

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpb/o2o.hpp"

namespace cpb {

class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(size_t n) : n_(n), d_(n * n, 0.0) {}

  size_t size() const { return n_; }
  double at(size_t i, size_t j) const { return d_[i * n_ + j]; }
  void set(size_t i, size_t j, double v) {
    d_[i * n_ + j] = v;
    d_[j * n_ + i] = v;
  }

 private:
  size_t n_ = 0;
  std::vector<double> d_;
};

// 1 - cosine similarity between rows, clamped to [0, 1]. A zero row is at
// distance 1 from every other row.
DistanceMatrix cosine_distances(const std::vector<std::vector<double>>& rows);
DistanceMatrix cosine_distances(const O2OMatrix& o2o);

// O2O rows scaled to unit L2 norm; zero rows stay zero.
std::vector<std::vector<double>> normalized_rows(const O2OMatrix& o2o);

enum class ClusterMode { partition, neighborhoods };

// Clusters hold org indices, each sorted ascending.
struct ClusterAssignment {
  std::vector<std::vector<size_t>> clusters;
  ClusterMode mode = ClusterMode::partition;
  size_t n = 0;

  // Union of all clusters containing `org`, without `org` itself.
  std::vector<size_t> collaborators(size_t org) const;
};

// Average-linkage bottom-up merging until k clusters remain. Ties merge the
// lexicographically smallest pair of clusters (ordered by smallest member).
ClusterAssignment agglomerative(const DistanceMatrix& dist, size_t k);

// ceil(p/100 * N)-th smallest value, at least the first.
double nearest_rank_percentile(std::vector<double> values, double percentile);

// Indices of values not above their nearest-rank percentile.
std::vector<size_t> threshold_members(const std::vector<double>& distances, double percentile);

struct KMeansOptions {
  size_t k = 5;
  // Per-cluster centroid-distance cutoff; nullopt disables thresholding.
  std::optional<double> threshold_percentile = 40.0;
  uint64_t seed = 1;
  size_t max_iterations = 300;
  double tolerance = 1e-9;
};

struct KMeansResult {
  // Dropped members appear as singleton clusters.
  ClusterAssignment assignment;
  // Lloyd output before thresholding.
  std::vector<std::vector<size_t>> clusters;
  std::vector<size_t> labels;
  std::vector<std::vector<double>> centroids;
  std::vector<double> inertia_history;
  std::vector<size_t> dropped;
  size_t iterations = 0;
};

// Lloyd's algorithm with farthest-first seeding; the first center is drawn
// from a generator seeded by options.seed.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, const KMeansOptions& options);

struct KnnResult {
  ClusterAssignment assignment;
  // Per org: itself plus its k nearest others, and that set's mean pairwise distance.
  std::vector<std::vector<size_t>> neighborhoods;
  std::vector<double> strength;
  std::vector<bool> retained;
  double cutoff = 0.0;
};

// Neighborhoods of each org and its k nearest others (ties by index).
// Neighborhoods weaker than the global percentile cutoff are discarded.
KnnResult knn_neighborhoods(const DistanceMatrix& dist, size_t k, std::optional<double> threshold_percentile = 40.0);

}  // namespace cpb

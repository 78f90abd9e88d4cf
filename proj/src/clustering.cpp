#include "cpb/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cpb/random.hpp"

namespace cpb {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void sort_clusters(std::vector<std::vector<size_t>>& clusters) {
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end());
}

}  // namespace

DistanceMatrix cosine_distances(const std::vector<std::vector<double>>& rows) {
  const size_t n = rows.size();
  DistanceMatrix out(n);
  std::vector<double> norms(n);
  for (size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(rows[i], rows[i]));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double d = 1.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) d = 1.0 - dot(rows[i], rows[j]) / (norms[i] * norms[j]);
      out.set(i, j, std::clamp(d, 0.0, 1.0));
    }
  }
  return out;
}

DistanceMatrix cosine_distances(const O2OMatrix& o2o) {
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < o2o.size(); ++i) rows.push_back(o2o.row(i));
  return cosine_distances(rows);
}

std::vector<std::vector<double>> normalized_rows(const O2OMatrix& o2o) {
  std::vector<std::vector<double>> out;
  for (size_t i = 0; i < o2o.size(); ++i) {
    auto r = o2o.row(i);
    const double norm = std::sqrt(dot(r, r));
    if (norm > 0.0) {
      for (double& x : r) x /= norm;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<size_t> ClusterAssignment::collaborators(size_t org) const {
  std::set<size_t> out;
  for (const auto& c : clusters) {
    if (std::find(c.begin(), c.end(), org) == c.end()) continue;
    out.insert(c.begin(), c.end());
  }
  out.erase(org);
  return {out.begin(), out.end()};
}

ClusterAssignment agglomerative(const DistanceMatrix& dist, size_t k) {
  const size_t n = dist.size();
  if (k < 1 || k > n) throw std::invalid_argument("agglomerative: k must be in [1, n]");

  std::vector<std::vector<size_t>> clusters(n);
  for (size_t i = 0; i < n; ++i) clusters[i] = {i};
  // Linkage between live clusters, indexed by position in `clusters`.
  std::vector<std::vector<double>> link(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) link[i][j] = dist.at(i, j);
  }

  while (clusters.size() > k) {
    size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < clusters.size(); ++a) {
      for (size_t b = a + 1; b < clusters.size(); ++b) {
        if (link[a][b] < best) {
          best = link[a][b];
          best_a = a;
          best_b = b;
        }
      }
    }
    const double wa = static_cast<double>(clusters[best_a].size());
    const double wb = static_cast<double>(clusters[best_b].size());
    for (size_t c = 0; c < clusters.size(); ++c) {
      if (c == best_a || c == best_b) continue;
      const double merged = (wa * link[best_a][c] + wb * link[best_b][c]) / (wa + wb);
      link[best_a][c] = link[c][best_a] = merged;
    }
    clusters[best_a].insert(clusters[best_a].end(), clusters[best_b].begin(), clusters[best_b].end());
    std::sort(clusters[best_a].begin(), clusters[best_a].end());
    // best_b > best_a, and clusters stay ordered by smallest member.
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    link.erase(link.begin() + static_cast<std::ptrdiff_t>(best_b));
    for (auto& row : link) row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  ClusterAssignment out{std::move(clusters), ClusterMode::partition, n};
  sort_clusters(out.clusters);
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw std::invalid_argument("percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const double exact = percentile * static_cast<double>(values.size()) / 100.0;
  size_t rank = static_cast<size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::vector<size_t> threshold_members(const std::vector<double>& distances, double percentile) {
  if (distances.empty()) return {};
  const double cutoff = nearest_rank_percentile(distances, percentile);
  std::vector<size_t> out;
  for (size_t i = 0; i < distances.size(); ++i) {
    if (distances[i] <= cutoff) out.push_back(i);
  }
  return out;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, const KMeansOptions& options) {
  const size_t n = points.size();
  const size_t k = options.k;
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: k must be in [1, n]");

  SimRng rng(options.seed);
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.below(n)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    for (size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points[i], centers.back()));
    size_t pick = 0;
    for (size_t i = 1; i < n; ++i) {
      if (nearest[i] > nearest[pick]) pick = i;
    }
    centers.push_back(points[pick]);
  }

  KMeansResult out;
  std::vector<size_t> labels(n, 0);
  for (size_t iter = 0; iter < options.max_iterations; ++iter) {
    double inertia = 0.0;
    for (size_t i = 0; i < n; ++i) {
      size_t best = 0;
      double best_d = squared_distance(points[i], centers[0]);
      for (size_t c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      labels[i] = best;
      inertia += best_d;
    }
    out.inertia_history.push_back(inertia);
    out.iterations = iter + 1;

    double movement = 0.0;
    for (size_t c = 0; c < k; ++c) {
      std::vector<double> mean(centers[c].size(), 0.0);
      size_t count = 0;
      for (size_t i = 0; i < n; ++i) {
        if (labels[i] != c) continue;
        for (size_t f = 0; f < mean.size(); ++f) mean[f] += points[i][f];
        ++count;
      }
      if (count == 0) continue;
      for (double& x : mean) x /= static_cast<double>(count);
      movement = std::max(movement, std::sqrt(squared_distance(mean, centers[c])));
      centers[c] = std::move(mean);
    }
    if (movement < options.tolerance) break;
  }

  out.labels = labels;
  out.centroids = centers;
  out.clusters.assign(k, {});
  for (size_t i = 0; i < n; ++i) out.clusters[labels[i]].push_back(i);

  auto& result = out.assignment;
  result.mode = ClusterMode::partition;
  result.n = n;
  for (size_t c = 0; c < k; ++c) {
    const auto& members = out.clusters[c];
    if (members.empty()) continue;
    if (!options.threshold_percentile) {
      result.clusters.push_back(members);
      continue;
    }
    std::vector<double> d;
    for (size_t i : members) d.push_back(std::sqrt(squared_distance(points[i], centers[c])));
    std::vector<size_t> kept;
    std::vector<bool> keep(members.size(), false);
    for (size_t idx : threshold_members(d, *options.threshold_percentile)) keep[idx] = true;
    for (size_t m = 0; m < members.size(); ++m) {
      if (keep[m]) {
        kept.push_back(members[m]);
      } else {
        out.dropped.push_back(members[m]);
        result.clusters.push_back({members[m]});
      }
    }
    result.clusters.push_back(std::move(kept));
  }
  std::sort(out.dropped.begin(), out.dropped.end());
  sort_clusters(result.clusters);
  return out;
}

KnnResult knn_neighborhoods(const DistanceMatrix& dist, size_t k, std::optional<double> threshold_percentile) {
  const size_t n = dist.size();
  if (k < 1 || k >= n) throw std::invalid_argument("knn: k must be in [1, n)");

  KnnResult out;
  out.assignment.mode = ClusterMode::neighborhoods;
  out.assignment.n = n;
  for (size_t i = 0; i < n; ++i) {
    std::vector<size_t> others;
    for (size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    std::stable_sort(others.begin(), others.end(), [&](size_t a, size_t b) { return dist.at(i, a) < dist.at(i, b); });
    std::vector<size_t> hood(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
    hood.push_back(i);
    std::sort(hood.begin(), hood.end());
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t a = 0; a < hood.size(); ++a) {
      for (size_t b = a + 1; b < hood.size(); ++b) {
        sum += dist.at(hood[a], hood[b]);
        ++pairs;
      }
    }
    out.neighborhoods.push_back(std::move(hood));
    out.strength.push_back(sum / static_cast<double>(pairs));
  }

  out.cutoff = threshold_percentile ? nearest_rank_percentile(out.strength, *threshold_percentile)
                                    : std::numeric_limits<double>::infinity();
  std::set<std::vector<size_t>> kept;
  for (size_t i = 0; i < n; ++i) {
    const bool keep = out.strength[i] <= out.cutoff;
    out.retained.push_back(keep);
    if (keep) kept.insert(out.neighborhoods[i]);
  }
  out.assignment.clusters.assign(kept.begin(), kept.end());
  return out;
}

}  // namespace cpb

#include "cpb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "cpb/sharing.hpp"

namespace cpb {

namespace {

std::vector<OrgLog> window_logs(const ExperimentWindow& window) {
  std::vector<OrgLog> out;
  for (const auto& org : window.orgs) {
    auto it = window.logs.find(org);
    out.push_back(it == window.logs.end() ? OrgLog{org, {}} : it->second);
  }
  return out;
}

// Column-group pool for row group g: column groups whose block density
// exceeds the matrix mean.
std::vector<bool> dense_column_groups(const CoClustering& cc, const std::vector<std::vector<double>>& density,
                                      uint32_t g, double mean) {
  std::vector<bool> out(cc.l, false);
  for (uint32_t j = 0; j < cc.l; ++j) out[j] = density[g][j] > mean;
  return out;
}

std::unordered_set<Subnet24> pool_sources(const CoClustering& cc, const VictimAttackerMatrix& m,
                                          const std::vector<std::vector<double>>& density, uint32_t g) {
  const auto dense = dense_column_groups(cc, density, g, m.density());
  std::unordered_set<Subnet24> out;
  for (size_t c = 0; c < m.cols(); ++c) {
    if (dense[cc.col_groups[c]]) out.insert(m.sources()[c]);
  }
  return out;
}

BaselineOutput finish(const ExperimentWindow& window, const std::vector<OrgLog>& logs,
                      std::map<OrgId, std::vector<AttackEvent>> extra, std::map<OrgId, size_t> collaborators,
                      const ForecastParams& params) {
  BaselineOutput out;
  for (const auto& log : logs) {
    auto& e = extra[log.org];
    out.blacklists[log.org] = predict_blacklist(log, e, window.train_days, params);
    out.collaborators[log.org] = collaborators[log.org];
  }
  out.extra = std::move(extra);
  return out;
}

}  // namespace

BaselineOutput ts_predict(const ExperimentWindow& window, const ForecastParams& params) {
  const auto logs = window_logs(window);
  return finish(window, logs, {}, {}, params);
}

std::map<OrgId, std::vector<AttackEvent>> ts_ca_extra(const std::vector<OrgLog>& logs, const CoClustering& cc,
                                                       const VictimAttackerMatrix& m) {
  const auto density = cc.block_density(m);
  std::map<OrgId, std::vector<AttackEvent>> out;
  for (size_t x = 0; x < logs.size(); ++x) {
    const uint32_t g = cc.row_groups[x];
    const auto pool = pool_sources(cc, m, density, g);
    auto& extra = out[logs[x].org];
    for (size_t y = 0; y < logs.size(); ++y) {
      if (y == x || cc.row_groups[y] != g) continue;
      for (const auto& e : logs[y].events) {
        if (pool.count(e.source)) extra.push_back(e);
      }
    }
  }
  return out;
}

BaselineOutput ts_ca_predict(const ExperimentWindow& window, const ForecastParams& params) {
  const auto logs = window_logs(window);
  const auto m = VictimAttackerMatrix::from_logs(logs);
  std::map<OrgId, std::vector<AttackEvent>> extra;
  std::map<OrgId, size_t> collaborators;
  if (m.cols() > 0) {
    const auto cc = cross_associate(m);
    extra = ts_ca_extra(logs, cc, m);
    for (size_t x = 0; x < logs.size(); ++x) {
      collaborators[logs[x].org] =
          static_cast<size_t>(std::count(cc.row_groups.begin(), cc.row_groups.end(), cc.row_groups[x])) - 1;
    }
  }
  return finish(window, logs, std::move(extra), std::move(collaborators), params);
}

std::vector<std::vector<size_t>> nearest_victims(const VictimAttackerMatrix& m, size_t k) {
  const size_t n = m.rows();
  if (k >= n) throw std::invalid_argument("k-NN needs k < number of organizations");
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = a + 1; b < n; ++b) {
      const auto& ra = m.row(a);
      const auto& rb = m.row(b);
      size_t common = 0;
      auto i = ra.begin(), j = rb.begin();
      while (i != ra.end() && j != rb.end()) {
        if (*i < *j) {
          ++i;
        } else if (*j < *i) {
          ++j;
        } else {
          ++common;
          ++i;
          ++j;
        }
      }
      double d = 1.0;
      if (!ra.empty() && !rb.empty()) {
        d = 1.0 - static_cast<double>(common) / std::sqrt(static_cast<double>(ra.size()) * static_cast<double>(rb.size()));
      }
      dist[a][b] = dist[b][a] = std::max(0.0, d);
    }
  }
  std::vector<std::vector<size_t>> out(n);
  for (size_t a = 0; a < n; ++a) {
    std::vector<size_t> others;
    for (size_t b = 0; b < n; ++b) {
      if (b != a) others.push_back(b);
    }
    std::stable_sort(others.begin(), others.end(), [&](size_t x, size_t y) { return dist[a][x] < dist[a][y]; });
    out[a].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

BaselineOutput ts_ca_knn_predict(const ExperimentWindow& window, size_t k, const ForecastParams& params) {
  const auto logs = window_logs(window);
  const size_t n = logs.size();
  if (k >= n) throw std::invalid_argument("k-NN needs k < number of organizations");
  const auto neighbors = nearest_victims(VictimAttackerMatrix::from_logs(logs), k);

  std::vector<OrgLog> pooled;
  for (size_t x = 0; x < n; ++x) {
    OrgLog p = logs[x];
    for (size_t y : neighbors[x]) p.events.insert(p.events.end(), logs[y].events.begin(), logs[y].events.end());
    pooled.push_back(std::move(p));
  }
  const auto m = VictimAttackerMatrix::from_logs(pooled);
  std::map<OrgId, std::vector<AttackEvent>> extra;
  std::map<OrgId, size_t> collaborators;
  if (m.cols() == 0) return finish(window, logs, {}, {}, params);
  const auto cc = cross_associate(m);
  const auto density = cc.block_density(m);

  for (size_t x = 0; x < n; ++x) {
    std::vector<bool> full(n, false), partial(n, false);
    for (size_t y : neighbors[x]) full[y] = true;
    const uint32_t g = cc.row_groups[x];
    for (size_t mate = 0; mate < n; ++mate) {
      if (cc.row_groups[mate] != g) continue;
      partial[mate] = true;
      for (size_t y : neighbors[mate]) partial[y] = true;
    }
    const auto pool = pool_sources(cc, m, density, g);
    auto& e = extra[logs[x].org];
    size_t contributors = 0;
    for (size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      if (full[y]) {
        e.insert(e.end(), logs[y].events.begin(), logs[y].events.end());
        ++contributors;
      } else if (partial[y]) {
        for (const auto& ev : logs[y].events) {
          if (pool.count(ev.source)) e.push_back(ev);
        }
        ++contributors;
      }
    }
    collaborators[logs[x].org] = contributors;
  }
  return finish(window, logs, std::move(extra), std::move(collaborators), params);
}

std::vector<size_t> PairSelection::partners(size_t org) const {
  std::vector<size_t> out;
  for (const auto& [a, b] : pairs) {
    if (a == org) out.push_back(b);
    if (b == org) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

PairSelection select_pairs_global(const O2OMatrix& o2o, double percent) {
  if (!(percent >= 0.0 && percent <= 100.0)) throw std::invalid_argument("percent must be in [0, 100]");
  const size_t n = o2o.size();
  std::vector<std::pair<size_t, size_t>> all;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  }
  std::stable_sort(all.begin(), all.end(),
                   [&](const auto& a, const auto& b) { return o2o.at(a.first, a.second) > o2o.at(b.first, b.second); });
  const double exact = percent * static_cast<double>(all.size()) / 100.0;
  const size_t keep = std::min(all.size(), static_cast<size_t>(std::ceil(exact - 1e-9)));
  PairSelection out;
  out.mode = PairMode::global_percent;
  out.n = n;
  out.pairs.insert(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

PairSelection select_pairs_local(const O2OMatrix& o2o, size_t x) {
  const size_t n = o2o.size();
  PairSelection out;
  out.mode = PairMode::local_top_x;
  out.n = n;
  for (size_t i = 0; i < n; ++i) {
    std::vector<size_t> others;
    for (size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    std::stable_sort(others.begin(), others.end(), [&](size_t a, size_t b) { return o2o.at(i, a) > o2o.at(i, b); });
    for (size_t t = 0; t < std::min(x, others.size()); ++t) out.pairs.emplace(std::min(i, others[t]), std::max(i, others[t]));
  }
  return out;
}

BaselineOutput pairwise_predict(const ExperimentWindow& window, const PairSelection& selection,
                                const ForecastParams& params) {
  const auto logs = window_logs(window);
  std::map<OrgId, std::vector<AttackEvent>> extra;
  std::map<OrgId, size_t> collaborators;
  for (size_t i = 0; i < logs.size(); ++i) {
    std::vector<const OrgLog*> peers;
    for (size_t j : selection.partners(i)) peers.push_back(&logs.at(j));
    extra[logs[i].org] = intersection_extra(logs[i], peers);
    collaborators[logs[i].org] = peers.size();
  }
  return finish(window, logs, std::move(extra), std::move(collaborators), params);
}

}  // namespace cpb

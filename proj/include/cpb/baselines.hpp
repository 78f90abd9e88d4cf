#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cpb/corpus.hpp"
#include "cpb/cross_association.hpp"
#include "cpb/o2o.hpp"
#include "cpb/predictor.hpp"

namespace cpb {

// Per-org predictions plus the extra events that produced them.
struct BaselineOutput {
  std::map<OrgId, Blacklist> blacklists;
  std::map<OrgId, std::vector<AttackEvent>> extra;
  // Orgs whose events an org drew on, excluding itself.
  std::map<OrgId, size_t> collaborators;
};

// Local EWMA prediction on each org's own log.
BaselineOutput ts_predict(const ExperimentWindow& window, const ForecastParams& params);

// For each org: sources in column groups whose block with the org's row group
// is denser than the whole matrix. Group-mates' events for those sources are
// pooled into the org's series.
std::map<OrgId, std::vector<AttackEvent>> ts_ca_extra(const std::vector<OrgLog>& logs, const CoClustering& cc,
                                                       const VictimAttackerMatrix& m);

BaselineOutput ts_ca_predict(const ExperimentWindow& window, const ForecastParams& params);

// Each org's log is pooled with its k nearest victims (cosine over matrix rows,
// ties by index) before co-clustering. Throws if k >= number of orgs.
BaselineOutput ts_ca_knn_predict(const ExperimentWindow& window, size_t k, const ForecastParams& params);

// Indices of the k nearest rows to each row under cosine distance.
std::vector<std::vector<size_t>> nearest_victims(const VictimAttackerMatrix& m, size_t k);

enum class PairMode { global_percent, local_top_x };

struct PairSelection {
  std::set<std::pair<size_t, size_t>> pairs;
  PairMode mode = PairMode::global_percent;
  size_t n = 0;

  std::vector<size_t> partners(size_t org) const;
};

inline size_t candidate_pairs(size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

// (A) top ceil(percent% of all pairs) by common-attack count, ties by index.
PairSelection select_pairs_global(const O2OMatrix& o2o, double percent);
// (B) each org's x highest-count partners, deduplicated as unordered pairs.
PairSelection select_pairs_local(const O2OMatrix& o2o, size_t x);

// Pairwise intersection sharing along selected pairs only.
BaselineOutput pairwise_predict(const ExperimentWindow& window, const PairSelection& selection,
                                const ForecastParams& params);

}  // namespace cpb

#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "cpb/corpus.hpp"
#include "cpb/random.hpp"

namespace fixtures {

using cpb::AttackEvent;
using cpb::OrgLog;
using cpb::Subnet24;

inline Subnet24 s24(uint32_t v) { return Subnet24(v); }

inline OrgLog make_log(const std::string& org, const std::vector<std::pair<int32_t, uint32_t>>& day_source) {
  OrgLog log{org, {}};
  for (const auto& [d, s] : day_source) log.events.push_back({d, org, Subnet24(s)});
  return log;
}

// Random log over a small source pool so that orgs overlap.
inline OrgLog random_log(cpb::SimRng& rng, const std::string& org, size_t events, uint32_t pool, int32_t days = 5,
                         int32_t first_day = 0) {
  OrgLog log{org, {}};
  for (size_t i = 0; i < events; ++i) {
    log.events.push_back(
        {first_day + static_cast<int32_t>(rng.below(static_cast<uint64_t>(days))), org,
         Subnet24(static_cast<uint32_t>(rng.below(pool)))});
  }
  return log;
}

inline std::vector<std::tuple<int32_t, std::string, uint32_t>> canonical(const std::vector<AttackEvent>& events) {
  std::vector<std::tuple<int32_t, std::string, uint32_t>> out;
  for (const auto& e : events) out.emplace_back(e.day, e.victim, e.source.value());
  std::sort(out.begin(), out.end());
  return out;
}

// Window with the given logs over train days 0..4, test day 5.
inline cpb::ExperimentWindow make_window(const std::vector<OrgLog>& logs,
                                         const std::vector<std::vector<uint32_t>>& truth = {}) {
  cpb::ExperimentWindow w;
  w.train_days = {0, 1, 2, 3, 4};
  w.test_day = 5;
  for (size_t i = 0; i < logs.size(); ++i) {
    w.orgs.push_back(logs[i].org);
    w.logs[logs[i].org] = logs[i];
    auto& t = w.truth[logs[i].org];
    if (i < truth.size()) {
      for (uint32_t s : truth[i]) t.insert(Subnet24(s));
    }
  }
  w.qualifying = logs.size();
  return w;
}

}  // namespace fixtures

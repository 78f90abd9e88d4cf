#include "cpb/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace cpb {

void ForecastParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be non-negative");
}

double ewma_forecast(std::span<const double> series, double alpha) {
  if (series.empty()) throw std::invalid_argument("ewma_forecast: empty series");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ewma_forecast: alpha must lie in (0,1)");
  // Horner form of the weighted sum; the most recent day has weight alpha.
  double acc = 0.0;
  for (double r : series) acc = acc * (1.0 - alpha) + alpha * r;
  return acc;
}

std::vector<std::pair<Subnet24, std::vector<double>>> daily_series(const OrgLog& base,
                                                                   std::span<const AttackEvent> extra,
                                                                   std::span<const int32_t> train_days,
                                                                   SeriesMode mode) {
  if (train_days.empty()) throw std::invalid_argument("daily_series: empty training window");
  const int32_t first = train_days.front();
  const size_t length = train_days.size();
  for (size_t i = 1; i < length; ++i) {
    if (train_days[i] != first + static_cast<int32_t>(i)) {
      throw std::invalid_argument("daily_series: training days must be consecutive");
    }
  }
  std::unordered_map<Subnet24, std::vector<double>> series;
  auto add = [&](const AttackEvent& e) {
    const int64_t pos = static_cast<int64_t>(e.day) - first;
    if (pos < 0 || pos >= static_cast<int64_t>(length)) {
      throw std::invalid_argument("daily_series: event on day " + std::to_string(e.day) +
                                  " lies outside the training window");
    }
    auto& s = series[e.source];
    if (s.empty()) s.assign(length, 0.0);
    auto& slot = s[static_cast<size_t>(pos)];
    slot = mode == SeriesMode::binary ? 1.0 : slot + 1.0;
  };
  for (const auto& e : base.events) add(e);
  for (const auto& e : extra) add(e);

  std::vector<std::pair<Subnet24, std::vector<double>>> out(series.begin(), series.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

Blacklist predict_blacklist(const OrgLog& base, std::span<const AttackEvent> extra,
                            std::span<const int32_t> train_days, const ForecastParams& params) {
  params.validate();
  Blacklist bl{base.org, {}};
  for (const auto& [source, values] : daily_series(base, extra, train_days, params.series)) {
    if (ewma_forecast(values, params.alpha) > params.tau) bl.predicted.insert(bl.predicted.end(), source);
  }
  return bl;
}

Counts score(const Blacklist& blacklist, const SubnetSet& truth) {
  Counts c;
  for (const auto& s : blacklist.predicted) {
    if (truth.count(s)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = truth.size() - c.tp;
  return c;
}

PredictionMetrics metrics(const Counts& counts) {
  PredictionMetrics m{counts, {}, {}, {}};
  const auto tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fn > 0) m.tpr = tp / static_cast<double>(counts.tp + counts.fn);
  if (counts.tp + counts.fp > 0) m.ppv = tp / static_cast<double>(counts.tp + counts.fp);
  if (m.tpr && m.ppv) {
    const double denom = *m.ppv + *m.tpr;
    m.f1 = denom > 0.0 ? 2.0 * *m.ppv * *m.tpr / denom : 0.0;
  }
  return m;
}

namespace {

std::optional<double> relative(uint64_t before, uint64_t after) {
  if (before == 0) return std::nullopt;
  return (static_cast<double>(after) - static_cast<double>(before)) / static_cast<double>(before);
}

}  // namespace

RelativeMetrics relative_metrics(const Counts& baseline, const Counts& collaborative) {
  return {relative(baseline.tp, collaborative.tp), relative(baseline.fp, collaborative.fp),
          relative(baseline.fn, collaborative.fn)};
}

}  // namespace cpb

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpb/corpus.hpp"

namespace cpb {

enum class SeriesMode { binary, counts };

struct ForecastParams {
  double alpha = 0.9;
  double tau = 0.5;
  SeriesMode series = SeriesMode::binary;

  void validate() const;
};

// r~(t+1) = sum_{t'=1..t} alpha (1-alpha)^(t-t') r(t'). No normalization.
double ewma_forecast(std::span<const double> series, double alpha);

struct Blacklist {
  OrgId org;
  SubnetSet predicted;
};

// Daily series for every source in `base` plus `extra`, indexed by position in
// `train_days`. Events outside the training days are rejected.
std::vector<std::pair<Subnet24, std::vector<double>>> daily_series(const OrgLog& base,
                                                                   std::span<const AttackEvent> extra,
                                                                   std::span<const int32_t> train_days,
                                                                   SeriesMode mode);

Blacklist predict_blacklist(const OrgLog& base, std::span<const AttackEvent> extra,
                            std::span<const int32_t> train_days, const ForecastParams& params);

struct Counts {
  uint64_t tp = 0;
  uint64_t fp = 0;
  uint64_t fn = 0;

  bool operator==(const Counts&) const = default;
};

Counts score(const Blacklist& blacklist, const SubnetSet& truth);

struct PredictionMetrics {
  Counts counts;
  std::optional<double> tpr;
  std::optional<double> ppv;
  std::optional<double> f1;
};

PredictionMetrics metrics(const Counts& counts);

// Relative change; nullopt stands for an undefined ratio (zero baseline).
struct RelativeMetrics {
  std::optional<double> tp_impr;
  std::optional<double> fp_incr;
  std::optional<double> fn_incr;
};

RelativeMetrics relative_metrics(const Counts& baseline, const Counts& collaborative);

// Mean over defined values only.
class MeanAccumulator {
 public:
  void add(std::optional<double> v) {
    if (v) {
      sum_ += *v;
      ++n_;
    }
  }
  std::optional<double> mean() const {
    if (n_ == 0) return std::nullopt;
    return sum_ / static_cast<double>(n_);
  }
  size_t count() const { return n_; }

 private:
  double sum_ = 0.0;
  size_t n_ = 0;
};

}  // namespace cpb

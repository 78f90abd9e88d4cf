#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cpb/config.hpp"
#include "cpb/corpus.hpp"
#include "cpb/group.hpp"
#include "cpb/o2o.hpp"
#include "cpb/predictor.hpp"
#include "cpb/sharing.hpp"

namespace cpb {

enum class Method { agglomerative, kmeans, knn, ts, ts_ca, ts_ca_knn, freud_a, freud_b };

std::string to_string(Method method);
Method parse_method(const std::string& name);
bool is_clustering(Method method);

enum class Ip2IpMode { exact, sketch };

struct ExperimentConfig {
  // Log file to load; the synthetic spec is used when unset.
  std::optional<std::filesystem::path> corpus_path;
  CorpusSpec synthetic;
  // Upper bound on windows evaluated, 0 for all.
  size_t max_windows = 0;

  std::vector<Method> methods = {Method::agglomerative};
  // Cluster count for clustering methods, neighbors for knn and TS-CA-kNN,
  // partners per org for FREUD-B.
  std::vector<size_t> k_values = {5};
  // Percent of all pairs for FREUD-A.
  std::vector<double> freud_percents = {1.0};
  std::vector<SharingStrategy> strategies = {SharingStrategy::intersection};
  O2OBackend backend = O2OBackend::plaintext;
  GroupId group = GroupId::ristretto255;
  ForecastParams forecast;
  // Min-multiplicity O2O and intersection sharing on the plaintext back-end.
  bool multiset = false;
  // Cluster-distance cutoff for kmeans and knn; nullopt disables it.
  std::optional<double> percentile = 40.0;
  Ip2IpMode ip2ip_mode = Ip2IpMode::exact;

  std::filesystem::path out_dir = "results";
  uint64_t seed = 1;
  size_t workers = 1;
  bool dump_o2o = false;
  bool gnuplot = false;

  void validate() const;

  // Keys: corpus, max_windows, methods, k, freud_percent, strategies, backend,
  // group, alpha, tau, series, multiset, percentile, ip2ip_mode, out, seed,
  // workers, dump_o2o, gnuplot. Synthetic generator keys take a `synthetic.`
  // prefix (synthetic.n_orgs, synthetic.seed, ...).
  static ExperimentConfig from_config(const KeyValueConfig& kv);
  // CPB_OUT_DIR and CPB_WORKERS override the file.
  void apply_environment();
};

struct ResultRow {
  int32_t window = 0;
  OrgId org;
  std::string method;
  std::string k;
  std::string strategy;
  std::string backend;
  Counts counts;
  PredictionMetrics metrics;
  RelativeMetrics relative;
  size_t cluster_size = 1;
  size_t collaborators = 0;
};

struct SummaryRow {
  std::string method;
  std::string k;
  std::string strategy;
  std::string backend;
  size_t windows = 0;
  std::optional<double> tp, fp, fn, tpr, ppv, f1, tp_impr, fp_incr, fn_incr, cluster_size, collaborators;
};

inline constexpr const char* kResultColumns =
    "window,org,method,k,strategy,backend,tp,fp,fn,tpr,ppv,f1,tp_impr,fp_incr,fn_incr,cluster_size,collaborators";
inline constexpr const char* kSummaryColumns =
    "method,k,strategy,backend,windows,tp,fp,fn,tpr,ppv,f1,tp_impr,fp_incr,fn_incr,cluster_size,collaborators";

// Per-org mean within each window, then mean over windows; undefined values
// are skipped.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, const std::string& header_comment);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, const std::string& header_comment);

struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<std::string> skipped;
  size_t windows = 0;
};

// Runs every window without touching the filesystem.
RunOutput run_experiment(const ExperimentConfig& config, const std::vector<ExperimentWindow>& windows);
// Loads or generates the corpus, runs, and writes results.csv and summary.csv.
RunOutput run(const ExperimentConfig& config);

std::vector<ExperimentWindow> load_windows(const ExperimentConfig& config);

}  // namespace cpb

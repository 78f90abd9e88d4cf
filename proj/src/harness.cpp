#include "cpb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cpb/baselines.hpp"
#include "cpb/clustering.hpp"
#include "cpb/psi.hpp"
#include "cpb/server_aided.hpp"

namespace cpb {

std::string to_string(Method method) {
  switch (method) {
    case Method::agglomerative:
      return "agglomerative";
    case Method::kmeans:
      return "kmeans";
    case Method::knn:
      return "knn";
    case Method::ts:
      return "TS";
    case Method::ts_ca:
      return "TS-CA";
    case Method::ts_ca_knn:
      return "TS-CA-kNN";
    case Method::freud_a:
      return "FREUD-A";
    case Method::freud_b:
      return "FREUD-B";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string n;
  for (char c : name) n += static_cast<char>(c == '-' ? '_' : std::tolower(static_cast<unsigned char>(c)));
  if (n == "agglomerative") return Method::agglomerative;
  if (n == "kmeans" || n == "k_means") return Method::kmeans;
  if (n == "knn") return Method::knn;
  if (n == "ts") return Method::ts;
  if (n == "ts_ca") return Method::ts_ca;
  if (n == "ts_ca_knn") return Method::ts_ca_knn;
  if (n == "freud_a") return Method::freud_a;
  if (n == "freud_b") return Method::freud_b;
  throw std::invalid_argument("unknown method '" + name +
                              "'; expected agglomerative, kmeans, knn, TS, TS-CA, TS-CA-kNN, FREUD-A or FREUD-B");
}

bool is_clustering(Method method) {
  return method == Method::agglomerative || method == Method::kmeans || method == Method::knn;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw std::invalid_argument("methods must not be empty");
  if (strategies.empty()) throw std::invalid_argument("strategies must not be empty");
  if (k_values.empty()) throw std::invalid_argument("k must not be empty");
  for (size_t k : k_values) {
    if (k == 0) throw std::invalid_argument("k values must be positive");
  }
  if (std::count(methods.begin(), methods.end(), Method::freud_a) && freud_percents.empty()) {
    throw std::invalid_argument("freud_percent must not be empty");
  }
  for (double p : freud_percents) {
    if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("freud_percent values must be in (0, 100]");
  }
  if (percentile && !(*percentile > 0.0 && *percentile <= 100.0)) {
    throw std::invalid_argument("percentile must be in (0, 100]");
  }
  if (workers == 0) throw std::invalid_argument("workers must be positive");
  forecast.validate();
  if (!corpus_path) synthetic.validate();
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv) {
  static const std::set<std::string> keys = {
      "corpus", "max_windows", "methods",    "k",    "freud_percent", "strategies", "backend",
      "group",  "alpha",       "tau",        "series", "multiset",    "percentile", "ip2ip_mode",
      "out",    "seed",        "workers",    "dump_o2o", "gnuplot"};
  KeyValueConfig synthetic;
  for (const auto& [key, value] : kv.values()) {
    if (key.rfind("synthetic.", 0) == 0) {
      synthetic.set(key.substr(10), value);
    } else if (!keys.count(key)) {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }

  ExperimentConfig c;
  if (auto p = kv.get("corpus")) c.corpus_path = *p;
  std::stringstream spec_text;
  for (const auto& [key, value] : synthetic.values()) spec_text << key << '=' << value << '\n';
  c.synthetic = load_corpus_spec(spec_text);
  c.max_windows = kv.get_uint("max_windows", c.max_windows);

  if (kv.contains("methods")) {
    c.methods.clear();
    for (const auto& m : kv.get_list("methods")) c.methods.push_back(parse_method(m));
  }
  if (kv.contains("k")) {
    c.k_values.clear();
    for (const auto& k : kv.get_list("k")) {
      // Ranges as lo..hi.
      const auto dots = k.find("..");
      if (dots != std::string::npos) {
        const size_t lo = std::stoul(k.substr(0, dots)), hi = std::stoul(k.substr(dots + 2));
        for (size_t v = lo; v <= hi; ++v) c.k_values.push_back(v);
      } else {
        c.k_values.push_back(std::stoul(k));
      }
    }
  }
  if (kv.contains("freud_percent")) {
    c.freud_percents.clear();
    for (const auto& p : kv.get_list("freud_percent")) c.freud_percents.push_back(std::stod(p));
  }
  if (kv.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : kv.get_list("strategies")) c.strategies.push_back(parse_sharing_strategy(s));
  }
  if (auto b = kv.get("backend")) c.backend = parse_o2o_backend(*b);
  if (auto g = kv.get("group")) c.group = parse_group_id(*g);
  c.forecast.alpha = kv.get_double("alpha", c.forecast.alpha);
  c.forecast.tau = kv.get_double("tau", c.forecast.tau);
  if (auto s = kv.get("series")) {
    if (*s == "binary") {
      c.forecast.series = SeriesMode::binary;
    } else if (*s == "counts") {
      c.forecast.series = SeriesMode::counts;
    } else {
      throw std::invalid_argument("series must be binary or counts");
    }
  }
  c.multiset = kv.get_bool("multiset", c.multiset);
  if (auto p = kv.get("percentile")) {
    if (*p == "none" || *p == "off") {
      c.percentile.reset();
    } else {
      c.percentile = std::stod(*p);
    }
  }
  if (auto m = kv.get("ip2ip_mode")) {
    if (*m == "exact") {
      c.ip2ip_mode = Ip2IpMode::exact;
    } else if (*m == "sketch") {
      c.ip2ip_mode = Ip2IpMode::sketch;
    } else {
      throw std::invalid_argument("ip2ip_mode must be exact or sketch");
    }
  }
  if (auto o = kv.get("out")) c.out_dir = *o;
  c.seed = kv.get_uint("seed", c.seed);
  c.workers = kv.get_uint("workers", c.workers);
  c.dump_o2o = kv.get_bool("dump_o2o", c.dump_o2o);
  c.gnuplot = kv.get_bool("gnuplot", c.gnuplot);
  c.validate();
  return c;
}

void ExperimentConfig::apply_environment() {
  if (const char* out = std::getenv("CPB_OUT_DIR"); out && *out) out_dir = out;
  if (const char* w = std::getenv("CPB_WORKERS"); w && *w) {
    const long n = std::strtol(w, nullptr, 10);
    if (n <= 0) throw std::invalid_argument("CPB_WORKERS must be a positive integer");
    workers = static_cast<size_t>(n);
  }
}

std::vector<ExperimentWindow> load_windows(const ExperimentConfig& config) {
  std::vector<AttackEvent> events;
  int32_t days = 0;
  if (config.corpus_path) {
    std::ifstream in(*config.corpus_path);
    if (!in) throw std::runtime_error("cannot open corpus " + config.corpus_path->string());
    auto parsed = parse_logs(in);
    if (parsed.rejects || parsed.invalid_ip) {
      std::clog << "corpus: skipped " << parsed.rejects << " malformed and " << parsed.invalid_ip
                << " non-routable lines\n";
    }
    events = std::move(parsed.events);
    for (const auto& e : events) days = std::max(days, e.day + 1);
  } else {
    events = generate_synthetic(config.synthetic);
    days = config.synthetic.n_days;
  }
  auto windows = build_windows(events, days);
  if (config.max_windows && windows.size() > config.max_windows) windows.resize(config.max_windows);
  return windows;
}

namespace {

// Runs fn(i) for i in [0, n) on at most `workers` threads. Exceptions are
// returned per index.
std::vector<std::exception_ptr> parallel_for(size_t n, size_t workers, const std::function<void(size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const size_t threads = std::min(workers, n);
  if (threads <= 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> pool;
  for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return errors;
}

std::string message_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  uint64_t z = seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xC2B2AE3D27D4EB4Full);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct WindowState {
  const ExperimentWindow* window = nullptr;
  std::vector<OrgLog> logs;
  std::vector<Counts> local;
  std::optional<O2OMatrix> o2o;
  // Server-aided back-end only.
  std::optional<StaBuffer> sta;
  std::vector<RecordKeyStore> keys;
};

WindowState prepare_window(const ExperimentConfig& config, const ExperimentWindow& window, bool need_o2o) {
  WindowState s;
  s.window = &window;
  for (const auto& org : window.orgs) {
    auto it = window.logs.find(org);
    s.logs.push_back(it == window.logs.end() ? OrgLog{org, {}} : it->second);
  }
  for (const auto& log : s.logs) {
    const auto bl = predict_blacklist(log, {}, window.train_days, config.forecast);
    s.local.push_back(score(bl, window.truth.at(log.org)));
  }
  if (!need_o2o) return s;
  const uint64_t seed = mix_seed(config.seed, static_cast<uint64_t>(window.test_day), 1);
  if (config.backend == O2OBackend::server_aided) {
    Drbg rng(seed);
    const PrpKey key = PrpKey::generate(rng);
    StaServer sta;
    for (const auto& log : s.logs) {
      auto ds = encrypt_dataset(log, key);
      sta.submit(std::move(ds.submission));
      s.keys.push_back(std::move(ds.keys));
    }
    s.sta = sta.compute();
    s.o2o = s.sta->o2o;
  } else {
    O2OOptions options{config.multiset, config.group, seed};
    s.o2o = build_o2o(window, config.backend, options);
  }
  return s;
}

ResultRow make_row(const ExperimentWindow& window, const OrgId& org, const std::string& method, const std::string& k,
                   const std::string& strategy, const std::string& backend, const Counts& counts, const Counts& local,
                   size_t group_size) {
  ResultRow r;
  r.window = window.test_day;
  r.org = org;
  r.method = method;
  r.k = k;
  r.strategy = strategy;
  r.backend = backend;
  r.counts = counts;
  r.metrics = metrics(counts);
  r.relative = relative_metrics(local, counts);
  r.cluster_size = group_size;
  r.collaborators = group_size - 1;
  return r;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string format_k(double v) {
  if (v == static_cast<double>(static_cast<int64_t>(v))) return std::to_string(static_cast<int64_t>(v));
  return format_number(v);
}

// Intersection events delivered through PSI with data transfer: the peer's
// days for each common source travel as the record bound to that source.
std::vector<AttackEvent> psi_intersection(const OrgLog& recipient, const OrgLog& peer, const ExperimentConfig& config,
                                          uint64_t seed) {
  std::map<Subnet24, std::vector<int32_t>> days;
  for (const auto& e : peer.events) days[e.source].push_back(e.day);
  PsiRecords records;
  for (const auto& [source, list] : days) {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(list.size()));
    for (int32_t d : list) w.u32(static_cast<uint32_t>(d));
    records[source.value()] = w.take();
  }
  std::vector<PsiElement> own;
  for (const Subnet24 s : recipient.unique_sources()) own.push_back(s.value());
  const auto outcome = psi_dt(own, records, PsiOptions{config.group, seed});
  std::vector<AttackEvent> out;
  for (const auto& [element, bytes] : outcome.records) {
    ByteReader r(bytes);
    const uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
      out.push_back({static_cast<int32_t>(r.u32()), peer.org, Subnet24(static_cast<uint32_t>(element))});
    }
  }
  return out;
}

class ClusterCell {
 public:
  ClusterCell(const ExperimentConfig& config, const WindowState& state, Method method, size_t k)
      : config_(config), state_(state), method_(method), k_(k) {}

  std::vector<ResultRow> run() {
    const size_t n = state_.logs.size();
    const ClusterAssignment assignment = cluster();
    std::vector<ResultRow> rows;
    for (const SharingStrategy strategy : config_.strategies) {
      for (size_t i = 0; i < n; ++i) {
        std::vector<size_t> group = assignment.collaborators(i);
        group.push_back(i);
        std::sort(group.begin(), group.end());
        const auto extra = extra_for(strategy, i, group);
        const auto bl = predict_blacklist(state_.logs[i], extra, state_.window->train_days, config_.forecast);
        const auto counts = score(bl, state_.window->truth.at(state_.logs[i].org));
        rows.push_back(make_row(*state_.window, state_.logs[i].org, to_string(method_), std::to_string(k_),
                                to_string(strategy), to_string(config_.backend), counts, state_.local[i],
                                group.size()));
      }
    }
    return rows;
  }

 private:
  ClusterAssignment cluster() const {
    const O2OMatrix& o2o = *state_.o2o;
    switch (method_) {
      case Method::agglomerative:
        return agglomerative(cosine_distances(o2o), k_);
      case Method::kmeans: {
        KMeansOptions options;
        options.k = k_;
        options.threshold_percentile = config_.percentile;
        options.seed = mix_seed(config_.seed, static_cast<uint64_t>(state_.window->test_day), k_);
        return kmeans(normalized_rows(o2o), options).assignment;
      }
      case Method::knn:
        return knn_neighborhoods(cosine_distances(o2o), k_, config_.percentile).assignment;
      default:
        throw std::logic_error("not a clustering method");
    }
  }

  std::vector<AttackEvent> intersection(size_t i, const std::vector<size_t>& group) {
    std::vector<AttackEvent> out;
    if (group.size() < 2) return out;
    if (config_.backend == O2OBackend::server_aided) {
      const auto delivery = deliver(*state_.sta, group, i);
      return log_sharing(decode_delivery(encode_delivery(delivery)), state_.keys[i]);
    }
    std::vector<const OrgLog*> peers;
    for (size_t j : group) {
      if (j != i) peers.push_back(&state_.logs[j]);
    }
    if (config_.backend == O2OBackend::psi_ca) {
      for (const OrgLog* peer : peers) {
        const size_t j = static_cast<size_t>(peer - state_.logs.data());
        const uint64_t seed = mix_seed(config_.seed, static_cast<uint64_t>(state_.window->test_day), i * 100003 + j);
        auto got = psi_intersection(state_.logs[i], *peer, config_, seed);
        out.insert(out.end(), got.begin(), got.end());
      }
      return out;
    }
    return intersection_extra(state_.logs[i], peers, config_.multiset);
  }

  const IP2IPMatrix& ip2ip(const std::vector<size_t>& group) {
    auto it = ip2ip_cache_.find(group);
    if (it != ip2ip_cache_.end()) return it->second;
    std::vector<OrgLog> members;
    for (size_t j : group) members.push_back(state_.logs[j]);
    const auto hh = heavy_hitters(members);
    IP2IPMatrix m;
    if (config_.ip2ip_mode == Ip2IpMode::sketch) {
      Drbg rng(mix_seed(config_.seed, static_cast<uint64_t>(state_.window->test_day), 0x5eed));
      m = build_ip2ip_sketch(members, hh, size_sketch(0.01, 0.01, kHeavyHitters), SketchHash::from_seed(config_.seed),
                             rng);
    } else {
      m = build_ip2ip(members, hh);
    }
    return ip2ip_cache_.emplace(group, std::move(m)).first->second;
  }

  std::vector<AttackEvent> extra_for(SharingStrategy strategy, size_t i, const std::vector<size_t>& group) {
    const int32_t last_day = state_.window->last_train_day();
    switch (strategy) {
      case SharingStrategy::local:
        return {};
      case SharingStrategy::global: {
        std::vector<const OrgLog*> peers;
        for (size_t j : group) {
          if (j != i) peers.push_back(&state_.logs[j]);
        }
        return global_extra(state_.logs[i], peers);
      }
      case SharingStrategy::intersection:
        return intersection(i, group);
      case SharingStrategy::ip2ip:
        if (group.size() < 2) return {};
        return ip2ip_extra(state_.logs[i], ip2ip(group), last_day);
      case SharingStrategy::ip2ip_and_intersection: {
        if (group.size() < 2) return {};
        auto out = intersection(i, group);
        const auto more = ip2ip_extra(state_.logs[i], ip2ip(group), last_day);
        out.insert(out.end(), more.begin(), more.end());
        return out;
      }
    }
    return {};
  }

  const ExperimentConfig& config_;
  const WindowState& state_;
  Method method_;
  size_t k_;
  std::map<std::vector<size_t>, IP2IPMatrix> ip2ip_cache_;
};

std::vector<ResultRow> baseline_rows(const ExperimentConfig& config, const WindowState& state, Method method,
                                     double param) {
  const auto& window = *state.window;
  BaselineOutput out;
  std::string strategy = "pooled";
  std::string backend = "plaintext";
  switch (method) {
    case Method::ts:
      out = ts_predict(window, config.forecast);
      strategy = "local";
      break;
    case Method::ts_ca:
      out = ts_ca_predict(window, config.forecast);
      break;
    case Method::ts_ca_knn:
      out = ts_ca_knn_predict(window, static_cast<size_t>(param), config.forecast);
      break;
    case Method::freud_a:
    case Method::freud_b: {
      const auto selection = method == Method::freud_a ? select_pairs_global(*state.o2o, param)
                                                       : select_pairs_local(*state.o2o, static_cast<size_t>(param));
      out = pairwise_predict(window, selection, config.forecast);
      strategy = "pairwise_intersection";
      backend = to_string(config.backend);
      break;
    }
    default:
      throw std::logic_error("not a baseline method");
  }
  std::vector<ResultRow> rows;
  for (size_t i = 0; i < state.logs.size(); ++i) {
    const auto& org = state.logs[i].org;
    const auto counts = score(out.blacklists.at(org), window.truth.at(org));
    rows.push_back(make_row(window, org, to_string(method), format_k(param), strategy, backend, counts, state.local[i],
                            out.collaborators[org] + 1));
  }
  return rows;
}

struct Cell {
  size_t window;
  Method method;
  double param;
};

void write_optional(std::ostream& out, const std::optional<double>& v) {
  if (v) {
    out << format_number(*v);
  } else {
    out << "NA";
  }
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  constexpr size_t kFields = 11;
  std::vector<Key> order;
  // key -> window -> per-field accumulators
  std::map<Key, std::map<int32_t, std::array<MeanAccumulator, kFields>>> acc;
  for (const auto& r : rows) {
    const Key key{r.method, r.k, r.strategy, r.backend};
    if (!acc.count(key)) order.push_back(key);
    auto& a = acc[key][r.window];
    const std::array<std::optional<double>, kFields> values = {
        static_cast<double>(r.counts.tp), static_cast<double>(r.counts.fp), static_cast<double>(r.counts.fn),
        r.metrics.tpr, r.metrics.ppv, r.metrics.f1, r.relative.tp_impr, r.relative.fp_incr, r.relative.fn_incr,
        static_cast<double>(r.cluster_size), static_cast<double>(r.collaborators)};
    for (size_t f = 0; f < kFields; ++f) a[f].add(values[f]);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    std::array<MeanAccumulator, kFields> across;
    const auto& windows = acc.at(key);
    for (const auto& [w, fields] : windows) {
      for (size_t f = 0; f < kFields; ++f) across[f].add(fields[f].mean());
    }
    SummaryRow s;
    std::tie(s.method, s.k, s.strategy, s.backend) = key;
    s.windows = windows.size();
    std::optional<double>* targets[kFields] = {&s.tp,      &s.fp,      &s.fn,      &s.tpr,          &s.ppv,
                                               &s.f1,      &s.tp_impr, &s.fp_incr, &s.fn_incr, &s.cluster_size,
                                               &s.collaborators};
    for (size_t f = 0; f < kFields; ++f) *targets[f] = across[f].mean();
    out.push_back(std::move(s));
  }
  return out;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows, const std::string& header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << kResultColumns << '\n';
  for (const auto& r : rows) {
    out << r.window << ',' << r.org << ',' << r.method << ',' << r.k << ',' << r.strategy << ',' << r.backend << ','
        << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',';
    write_optional(out, r.metrics.tpr);
    out << ',';
    write_optional(out, r.metrics.ppv);
    out << ',';
    write_optional(out, r.metrics.f1);
    out << ',';
    write_optional(out, r.relative.tp_impr);
    out << ',';
    write_optional(out, r.relative.fp_incr);
    out << ',';
    write_optional(out, r.relative.fn_incr);
    out << ',' << r.cluster_size << ',' << r.collaborators << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, const std::string& header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << kSummaryColumns << '\n';
  for (const auto& s : rows) {
    out << s.method << ',' << s.k << ',' << s.strategy << ',' << s.backend << ',' << s.windows;
    for (const auto* v : {&s.tp, &s.fp, &s.fn, &s.tpr, &s.ppv, &s.f1, &s.tp_impr, &s.fp_incr, &s.fn_incr,
                          &s.cluster_size, &s.collaborators}) {
      out << ',';
      write_optional(out, *v);
    }
    out << '\n';
  }
}

RunOutput run_experiment(const ExperimentConfig& config, const std::vector<ExperimentWindow>& windows) {
  config.validate();
  bool need_o2o = false;
  for (Method m : config.methods) need_o2o |= is_clustering(m) || m == Method::freud_a || m == Method::freud_b;

  RunOutput result;
  result.windows = windows.size();
  std::vector<std::optional<WindowState>> states(windows.size());
  const auto prep_errors = parallel_for(windows.size(), config.workers, [&](size_t w) {
    states[w] = prepare_window(config, windows[w], need_o2o);
  });
  for (size_t w = 0; w < windows.size(); ++w) {
    if (prep_errors[w]) {
      result.skipped.push_back("window " + std::to_string(windows[w].test_day) + ": " + message_of(prep_errors[w]));
    }
  }

  std::vector<Cell> cells;
  for (size_t w = 0; w < windows.size(); ++w) {
    if (!states[w]) continue;
    for (Method m : config.methods) {
      switch (m) {
        case Method::ts:
        case Method::ts_ca:
          cells.push_back({w, m, 0.0});
          break;
        case Method::freud_a:
          for (double p : config.freud_percents) cells.push_back({w, m, p});
          break;
        default:
          for (size_t k : config.k_values) cells.push_back({w, m, static_cast<double>(k)});
      }
    }
  }

  std::vector<std::vector<ResultRow>> outputs(cells.size());
  const auto cell_errors = parallel_for(cells.size(), config.workers, [&](size_t c) {
    const Cell& cell = cells[c];
    const WindowState& state = *states[cell.window];
    if (is_clustering(cell.method)) {
      outputs[c] = ClusterCell(config, state, cell.method, static_cast<size_t>(cell.param)).run();
    } else {
      outputs[c] = baseline_rows(config, state, cell.method, cell.param);
    }
  });

  for (size_t c = 0; c < cells.size(); ++c) {
    if (cell_errors[c]) {
      result.skipped.push_back("window " + std::to_string(windows[cells[c].window].test_day) + " " +
                               to_string(cells[c].method) + " " + format_k(cells[c].param) + ": " +
                               message_of(cell_errors[c]));
      continue;
    }
    result.rows.insert(result.rows.end(), outputs[c].begin(), outputs[c].end());
  }
  for (const auto& s : result.skipped) std::clog << "skipped " << s << '\n';
  result.summary = summarize(result.rows);
  return result;
}

RunOutput run(const ExperimentConfig& config) {
  const auto windows = load_windows(config);
  auto result = run_experiment(config, windows);

  std::filesystem::create_directories(config.out_dir);
  std::ostringstream header;
  header << "seed=" << config.seed << " backend=" << to_string(config.backend)
         << " alpha=" << format_number(config.forecast.alpha) << " tau=" << format_number(config.forecast.tau)
         << " series=" << (config.forecast.series == SeriesMode::binary ? "binary" : "counts")
         << " corpus=" << (config.corpus_path ? config.corpus_path->string() : "synthetic:" + std::to_string(config.synthetic.seed));
  {
    std::ofstream out(config.out_dir / "results.csv");
    write_results_csv(out, result.rows, header.str());
  }
  {
    std::ofstream out(config.out_dir / "summary.csv");
    write_summary_csv(out, result.summary, header.str());
  }
  if (config.gnuplot) {
    std::ofstream out(config.out_dir / "summary.dat");
    std::ostringstream csv;
    write_summary_csv(csv, result.summary, header.str());
    std::string line;
    std::istringstream in(csv.str());
    while (std::getline(in, line)) {
      if (line.rfind("# ", 0) != 0 && line.rfind("method", 0) == 0) line = "# " + line;
      std::replace(line.begin(), line.end(), ',', ' ');
      size_t pos;
      while ((pos = line.find(" NA")) != std::string::npos) line.replace(pos, 3, " NaN");
      out << line << '\n';
    }
  }
  if (config.dump_o2o) {
    const bool need = std::any_of(config.methods.begin(), config.methods.end(),
                                  [](Method m) { return is_clustering(m) || m == Method::freud_a || m == Method::freud_b; });
    if (need) {
      for (const auto& w : windows) {
        std::ofstream out(config.out_dir / ("o2o_" + std::to_string(w.test_day) + ".csv"));
        O2OOptions options{config.multiset, config.group, mix_seed(config.seed, static_cast<uint64_t>(w.test_day), 1)};
        build_o2o(w, config.backend, options).write_csv(out);
      }
    }
  }
  return result;
}

}  // namespace cpb

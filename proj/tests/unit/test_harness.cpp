#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpb/harness.hpp"
#include "fixtures.hpp"

using namespace cpb;

namespace {

// Small synthetic corpus with clear group structure.
std::vector<ExperimentWindow> small_windows(uint64_t seed = 3, int32_t days = 7) {
  CorpusSpec spec;
  spec.n_orgs = 12;
  spec.n_days = days;
  spec.attacker_groups = 3;
  spec.base_rate = 6;
  spec.noise_rate = 4;
  spec.extra_events = 1.0;
  spec.seed = seed;
  return build_windows(generate_synthetic(spec), spec.n_days);
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.methods = {Method::agglomerative, Method::knn};
  c.k_values = {3};
  c.strategies = {SharingStrategy::local, SharingStrategy::global, SharingStrategy::intersection,
                  SharingStrategy::ip2ip, SharingStrategy::ip2ip_and_intersection};
  return c;
}

std::string results_csv(const RunOutput& out) {
  std::ostringstream s;
  write_results_csv(s, out.rows, "seed=1");
  return s.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cpb_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void check_same_except_backend(const RunOutput& a, const RunOutput& b) {
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    auto x = a.rows[i], y = b.rows[i];
    x.backend = y.backend = "";
    CHECK(x.window == y.window);
    CHECK(x.org == y.org);
    CHECK(x.method == y.method);
    CHECK(x.strategy == y.strategy);
    CHECK(x.counts == y.counts);
    CHECK(x.cluster_size == y.cluster_size);
  }
}

}  // namespace

TEST_CASE("method names") {
  for (auto m : {Method::agglomerative, Method::kmeans, Method::knn, Method::ts, Method::ts_ca, Method::ts_ca_knn,
                 Method::freud_a, Method::freud_b}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK(parse_method("ts-ca-knn") == Method::ts_ca_knn);
  CHECK(parse_method("FREUD_A") == Method::freud_a);
  CHECK(is_clustering(Method::knn));
  CHECK_FALSE(is_clustering(Method::freud_b));
  CHECK_THROWS(parse_method("spectral"));
}

TEST_CASE("config parsing") {
  std::istringstream in(
      "methods = kmeans, knn, TS-CA\n"
      "k = 2..4, 7\n"
      "strategies = intersection, ip2ip+intersection\n"
      "backend = sta\n"
      "percentile = none\n"
      "synthetic.n_orgs = 20\n"
      "synthetic.seed = 5\n"
      "alpha = 0.8\n"
      "series = counts\n"
      "workers = 3\n");
  const auto c = ExperimentConfig::from_config(KeyValueConfig::parse(in));
  CHECK(c.methods == std::vector<Method>{Method::kmeans, Method::knn, Method::ts_ca});
  CHECK(c.k_values == std::vector<size_t>{2, 3, 4, 7});
  CHECK(c.strategies.back() == SharingStrategy::ip2ip_and_intersection);
  CHECK(c.backend == O2OBackend::server_aided);
  CHECK_FALSE(c.percentile.has_value());
  CHECK(c.synthetic.n_orgs == 20);
  CHECK(c.synthetic.seed == 5);
  CHECK(c.forecast.alpha == 0.8);
  CHECK(c.forecast.series == SeriesMode::counts);
  CHECK(c.workers == 3);
}

TEST_CASE("config rejects bad values") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return ExperimentConfig::from_config(KeyValueConfig::parse(in));
  };
  CHECK_THROWS_WITH(parse("colour=red\n"), doctest::Contains("colour"));
  CHECK_THROWS(parse("synthetic.colour=red\n"));
  CHECK_THROWS(parse("k=0\n"));
  CHECK_THROWS(parse("alpha=1.5\n"));
  CHECK_THROWS(parse("percentile=0\n"));
  CHECK_THROWS(parse("workers=0\n"));
  CHECK_THROWS(parse("ip2ip_mode=fuzzy\n"));
  CHECK_THROWS(parse("freud_percent=150\n"));
}

TEST_CASE("environment overrides") {
  ExperimentConfig c;
  ::setenv("CPB_OUT_DIR", "/tmp/elsewhere", 1);
  ::setenv("CPB_WORKERS", "5", 1);
  c.apply_environment();
  CHECK(c.out_dir == "/tmp/elsewhere");
  CHECK(c.workers == 5);
  ::setenv("CPB_WORKERS", "zero", 1);
  CHECK_THROWS(c.apply_environment());
  ::unsetenv("CPB_OUT_DIR");
  ::unsetenv("CPB_WORKERS");
}

TEST_CASE("summary averages per window first") {
  auto row = [](int32_t window, uint64_t tp, std::optional<double> f1) {
    ResultRow r;
    r.window = window;
    r.method = "m";
    r.k = "1";
    r.strategy = "s";
    r.backend = "b";
    r.counts.tp = tp;
    r.metrics.f1 = f1;
    return r;
  };
  // Window 0: tp 1, 3 -> 2. Window 1: tp 10 -> 10. Mean 6, not 14/3.
  const auto s = summarize({row(0, 1, 0.5), row(0, 3, std::nullopt), row(1, 10, std::nullopt)});
  REQUIRE(s.size() == 1);
  CHECK(s[0].windows == 2);
  CHECK(*s[0].tp == doctest::Approx(6.0));
  CHECK(*s[0].f1 == doctest::Approx(0.5));
  CHECK_FALSE(s[0].fp_incr.has_value());
}

TEST_CASE("CSV formatting") {
  ResultRow r;
  r.window = 5;
  r.org = "o1";
  r.method = "knn";
  r.k = "3";
  r.strategy = "intersection";
  r.backend = "plaintext";
  r.counts = {1, 2, 0};
  r.metrics = metrics(r.counts);
  r.relative.tp_impr = 0.1;
  r.cluster_size = 4;
  r.collaborators = 3;
  std::ostringstream out;
  write_results_csv(out, {r}, "seed=7");
  std::istringstream lines(out.str());
  std::string header, columns, data;
  std::getline(lines, header);
  std::getline(lines, columns);
  std::getline(lines, data);
  CHECK(header == "# seed=7");
  CHECK(columns == kResultColumns);
  CHECK(data == "5,o1,knn,3,intersection,plaintext,1,2,0,1,0.333333333333333,0.5,0.1,NA,NA,4,3");
}

TEST_CASE("local strategy rows match the per-org baseline") {
  const auto windows = small_windows();
  auto c = base_config();
  c.strategies = {SharingStrategy::local};
  const auto out = run_experiment(c, windows);
  CHECK(out.skipped.empty());
  for (const auto& r : out.rows) {
    CHECK(*r.relative.tp_impr == 0.0);
  }
}

TEST_CASE("server-aided rows equal plaintext multiset rows") {
  const auto windows = small_windows();
  auto c = base_config();
  c.multiset = true;
  const auto plain = run_experiment(c, windows);
  c.backend = O2OBackend::server_aided;
  const auto sta = run_experiment(c, windows);
  CHECK(sta.skipped.empty());
  check_same_except_backend(plain, sta);
  CHECK(sta.rows.front().backend == "server_aided");
}

TEST_CASE("PSI rows equal plaintext set-mode rows") {
  auto windows = small_windows(4, 6);
  auto c = base_config();
  c.methods = {Method::agglomerative};
  c.strategies = {SharingStrategy::intersection, SharingStrategy::ip2ip_and_intersection};
  const auto plain = run_experiment(c, windows);
  c.backend = O2OBackend::psi_ca;
  const auto psi = run_experiment(c, windows);
  CHECK(psi.skipped.empty());
  check_same_except_backend(plain, psi);
}

TEST_CASE("results are reproducible and independent of worker count") {
  const auto windows = small_windows();
  auto c = base_config();
  c.methods = {Method::kmeans, Method::ts, Method::freud_a, Method::freud_b};
  c.freud_percents = {5, 20};
  const auto a = results_csv(run_experiment(c, windows));
  const auto b = results_csv(run_experiment(c, windows));
  c.workers = 4;
  const auto d = results_csv(run_experiment(c, windows));
  CHECK(a == b);
  CHECK(a == d);
}

TEST_CASE("every method produces one row per org and strategy") {
  const auto windows = small_windows();
  auto c = base_config();
  c.methods = {Method::agglomerative, Method::kmeans, Method::knn, Method::ts, Method::ts_ca, Method::ts_ca_knn,
               Method::freud_a, Method::freud_b};
  c.strategies = {SharingStrategy::intersection};
  c.k_values = {2};
  const auto out = run_experiment(c, windows);
  CHECK(out.skipped.empty());
  size_t orgs = 0;
  for (const auto& w : windows) orgs += w.orgs.size();
  CHECK(out.rows.size() == 8 * orgs);
  for (const auto& r : out.rows) {
    if (r.method == "TS") CHECK(r.strategy == "local");
    if (r.method == "TS-CA" || r.method == "TS-CA-kNN") CHECK(r.strategy == "pooled");
    if (r.method == "FREUD-A") CHECK(r.strategy == "pairwise_intersection");
    CHECK(r.cluster_size == r.collaborators + 1);
  }
}

TEST_CASE("failing cells are skipped, not fatal") {
  const auto windows = small_windows();
  auto c = base_config();
  c.methods = {Method::knn, Method::agglomerative};
  c.k_values = {3, 500};
  c.strategies = {SharingStrategy::intersection};
  const auto out = run_experiment(c, windows);
  CHECK(out.skipped.size() == 2 * windows.size());
  CHECK_FALSE(out.rows.empty());
  for (const auto& r : out.rows) CHECK(r.k == "3");
}

TEST_CASE("failing windows are skipped") {
  auto windows = small_windows();
  windows[0].truth.erase(windows[0].orgs.front());
  auto c = base_config();
  const auto out = run_experiment(c, windows);
  CHECK(out.skipped.size() == 1);
  for (const auto& r : out.rows) CHECK(r.window != windows[0].test_day);
}

TEST_CASE("run writes results, summary, gnuplot data and O2O dumps") {
  auto c = base_config();
  c.synthetic.n_orgs = 10;
  c.synthetic.n_days = 6;
  c.synthetic.attacker_groups = 2;
  c.synthetic.base_rate = 5;
  c.synthetic.noise_rate = 3;
  c.out_dir = temp_dir("run");
  c.gnuplot = true;
  c.dump_o2o = true;
  const auto out = run(c);
  CHECK(out.windows == 1);
  const auto results = slurp(c.out_dir / "results.csv");
  CHECK(results.rfind("# seed=1", 0) == 0);
  CHECK(slurp(c.out_dir / "summary.csv").find(kSummaryColumns) != std::string::npos);
  const auto dat = slurp(c.out_dir / "summary.dat");
  CHECK(dat.find(',') == std::string::npos);
  CHECK(std::filesystem::exists(c.out_dir / "o2o_5.csv"));
  // Same seed, same bytes.
  const auto again = c.out_dir / "again";
  c.out_dir = again;
  run(c);
  CHECK(slurp(again / "results.csv") == results);
  std::filesystem::remove_all(again.parent_path());
}

TEST_CASE("corpus file input") {
  const auto dir = temp_dir("corpus");
  std::filesystem::create_directories(dir);
  CorpusSpec spec;
  spec.n_orgs = 8;
  spec.n_days = 6;
  spec.base_rate = 5;
  spec.noise_rate = 2;
  {
    std::ofstream out(dir / "logs.csv");
    write_logs(out, generate_synthetic(spec), *parse_iso_date(spec.start_date));
  }
  ExperimentConfig c;
  c.corpus_path = dir / "logs.csv";
  const auto windows = load_windows(c);
  CHECK(windows.size() == 1);
  c.corpus_path = dir / "missing.csv";
  CHECK_THROWS(load_windows(c));
  std::filesystem::remove_all(dir);
}

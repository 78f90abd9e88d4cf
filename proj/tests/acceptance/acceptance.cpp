// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "cpb/baselines.hpp"
#include "cpb/bench.hpp"
#include "cpb/clustering.hpp"
#include "cpb/cross_association.hpp"
#include "cpb/harness.hpp"
#include "cpb/o2o.hpp"
#include "cpb/predictor.hpp"
#include "cpb/psi.hpp"
#include "cpb/random.hpp"
#include "cpb/server_aided.hpp"
#include "cpb/sketch.hpp"

using namespace cpb;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1: PSI against plaintext --------------------------------------------

std::vector<PsiElement> random_set(SimRng& rng, size_t n) {
  std::set<PsiElement> s;
  // 24-bit elements; a pool of 2n keeps the expected overlap substantial.
  const uint64_t pool = std::min<uint64_t>(uint64_t{1} << 24, std::max<uint64_t>(2 * n, 16));
  while (s.size() < n) s.insert(rng.below(pool));
  return {s.begin(), s.end()};
}

Outcome psi_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  SimRng rng(1001);
  for (int i = 0; i < 100 && o.pass; ++i) {
    const size_t na = i == 0 ? 4000 : rng.below(4001), nb = i == 0 ? 4000 : rng.below(4001);
    const auto a = random_set(rng, na), b = random_set(rng, nb);
    std::vector<PsiElement> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    const auto r = psi_ca(a, b, PsiOptions{GroupId::ristretto255, static_cast<uint64_t>(i)});
    o.require(r.cardinality == common.size(), "psi_ca instance " + std::to_string(i) + " differs");
  }
  for (int i = 0; i < 100 && o.pass; ++i) {
    const size_t na = i == 0 ? 4000 : rng.below(4001), nb = i == 0 ? 4000 : rng.below(4001);
    const auto a = random_set(rng, na);
    PsiRecords server;
    for (auto e : random_set(rng, nb)) {
      Bytes data(1 + rng.below(8));
      for (auto& x : data) x = static_cast<uint8_t>(rng.next());
      server.emplace(e, std::move(data));
    }
    PsiRecords expected;
    for (auto e : a) {
      auto it = server.find(e);
      if (it != server.end()) expected.insert(*it);
    }
    const auto r = psi_dt(a, server, PsiOptions{GroupId::ristretto255, static_cast<uint64_t>(1000 + i)});
    o.require(r.records == expected, "psi_dt instance " + std::to_string(i) + " differs");
  }
  const double s = seconds_since(t0);
  o.require(s < 300.0, "took " + fmt("%.1f", s) + " s");
  if (o.pass) o.detail = "200 instances, " + fmt("%.1f", s) + " s";
  return o;
}

// ---- 2: server-aided end to end -------------------------------------------

std::vector<AttackEvent> oracle_share(const OrgLog& recipient, const OrgLog& peer) {
  std::map<Subnet24, size_t> mine;
  for (const auto& e : recipient.events) ++mine[e.source];
  std::vector<size_t> order(peer.events.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return peer.events[x].day < peer.events[y].day; });
  std::map<Subnet24, size_t> used;
  std::vector<AttackEvent> out;
  for (size_t i : order) {
    const auto& e = peer.events[i];
    auto it = mine.find(e.source);
    if (it != mine.end() && used[e.source] < it->second) {
      ++used[e.source];
      out.push_back(e);
    }
  }
  return out;
}

std::vector<std::tuple<int32_t, std::string, uint32_t>> canonical(const std::vector<AttackEvent>& events) {
  std::vector<std::tuple<int32_t, std::string, uint32_t>> out;
  for (const auto& e : events) out.emplace_back(e.day, e.victim, e.source.value());
  std::sort(out.begin(), out.end());
  return out;
}

Outcome server_aided_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  SimRng rng(2002);
  for (int f = 0; f < 100 && o.pass; ++f) {
    const size_t n = f == 0 ? 20 : 2 + rng.below(19);
    const uint32_t pool = static_cast<uint32_t>(50 + rng.below(3000));
    std::vector<OrgLog> logs;
    for (size_t i = 0; i < n; ++i) {
      OrgLog log{"org" + std::to_string(i), {}};
      const size_t events = f == 0 ? 2000 : rng.below(2001);
      for (size_t e = 0; e < events; ++e) {
        log.events.push_back({static_cast<int32_t>(rng.below(5)), log.org, Subnet24(static_cast<uint32_t>(rng.below(pool)))});
      }
      logs.push_back(std::move(log));
    }
    Drbg drbg(static_cast<uint64_t>(f));
    const auto key = PrpKey::generate(drbg);
    std::vector<LabeledSet> submissions;
    std::vector<RecordKeyStore> keys;
    for (const auto& log : logs) {
      auto ds = encrypt_dataset(log, key);
      submissions.push_back(std::move(ds.submission));
      keys.push_back(std::move(ds.keys));
    }
    const auto sta = sta_o2o(std::move(submissions));
    o.require(sta.o2o == o2o_from_logs(logs, true), "fixture " + std::to_string(f) + ": O2O differs");
    std::vector<size_t> cluster(n);
    std::iota(cluster.begin(), cluster.end(), 0);
    for (size_t i = 0; i < n && o.pass; ++i) {
      const auto got = log_sharing(deliver(sta, cluster, i), keys[i]);
      std::vector<AttackEvent> expected;
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto e = oracle_share(logs[i], logs[j]);
        expected.insert(expected.end(), e.begin(), e.end());
      }
      o.require(canonical(got) == canonical(expected), "fixture " + std::to_string(f) + ": shared events differ");
    }
  }
  const double s = seconds_since(t0);
  o.require(s < 120.0, "took " + fmt("%.1f", s) + " s");
  if (o.pass) o.detail = "100 fixtures, " + fmt("%.1f", s) + " s";
  return o;
}

// ---- 3: complexity shape --------------------------------------------------

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return (*hi - *lo) / *lo;
}

Outcome complexity_shape() {
  Outcome o;
  BenchConfig sa;
  sa.protocol = BenchProtocol::server_aided;
  sa.sizes = {2000};
  sa.orgs = {10, 50, 100, 200};
  sa.repeats = 9;
  // Warm-up pass so the first point is not measured on cold caches.
  BenchConfig warm = sa;
  warm.orgs = {10};
  warm.repeats = 3;
  bench(warm);
  std::vector<double> sa_time, sa_bytes;
  for (const auto& r : bench(sa)) {
    sa_time.push_back(r.org_seconds);
    sa_bytes.push_back(r.org_bytes);
  }
  const double time_spread = spread(sa_time), bytes_spread = spread(sa_bytes);
  o.require(time_spread < 0.2, "server-aided per-org time varies by " + fmt("%.1f%%", 100 * time_spread));
  o.require(bytes_spread < 0.2, "server-aided per-org bytes vary by " + fmt("%.1f%%", 100 * bytes_spread));

  BenchConfig psi;
  psi.protocol = BenchProtocol::psi_ca;
  psi.sizes = {64};
  psi.orgs = {10, 50, 100, 200};
  psi.repeats = 3;
  std::vector<double> n, t, b;
  for (const auto& r : bench(psi)) {
    n.push_back(static_cast<double>(r.orgs));
    t.push_back(r.org_seconds);
    b.push_back(r.org_bytes);
  }
  const auto ft = fit_line(n, t), fb = fit_line(n, b);
  o.require(ft.r2 > 0.99, "psi_ca per-org time R2 " + fmt("%.4f", ft.r2));
  o.require(fb.r2 > 0.99, "psi_ca per-org bytes R2 " + fmt("%.4f", fb.r2));
  if (o.pass) {
    o.detail = "server-aided spread time " + fmt("%.1f%%", 100 * time_spread) + " bytes " +
               fmt("%.1f%%", 100 * bytes_spread) + "; psi_ca R2 time " + fmt("%.4f", ft.r2) + " bytes " +
               fmt("%.4f", fb.r2);
  }
  return o;
}

// ---- 4, 5: Count-Min ------------------------------------------------------

Outcome sketch_sizing() {
  Outcome o;
  const auto big = size_sketch(0.01, 0.01, uint64_t{1} << 24);
  const auto small = size_sketch(0.01, 0.01, 1000);
  o.require(big.cells() == 10336, "L(2^24) = " + std::to_string(big.cells()));
  o.require(small.cells() == 4896, "L(1000) = " + std::to_string(small.cells()));
  if (o.pass) o.detail = "L = 10336 and 4896";
  return o;
}

Outcome sketch_bound() {
  Outcome o;
  const auto t0 = Clock::now();
  const double eps = 0.01, delta = 0.01;
  const uint64_t distinct = 10000, total = 100000;
  double worst = 0.0;
  for (uint64_t stream = 0; stream < 20 && o.pass; ++stream) {
    SimRng rng(5000 + stream);
    // Items are random 48-bit identifiers; counts are a random split of N.
    std::set<uint64_t> ids;
    while (ids.size() < distinct) ids.insert(rng.next() >> 16);
    std::vector<uint64_t> items(ids.begin(), ids.end());
    std::vector<uint64_t> counts(distinct, 1);
    for (uint64_t extra = distinct; extra < total; ++extra) {
      // Skewed toward low indices.
      const double u = rng.uniform();
      ++counts[static_cast<size_t>(static_cast<double>(distinct) * u * u)];
    }
    CountMinSketch cms(size_sketch(eps, delta, uint64_t{1} << 48), SketchHash::from_seed(stream));
    for (size_t i = 0; i < distinct; ++i) cms.update(items[i], counts[i]);
    o.require(cms.total() == total, "stream total mismatch");
    size_t violations = 0;
    for (size_t i = 0; i < distinct; ++i) {
      const uint64_t est = cms.query(items[i]);
      o.require(est >= counts[i], "underestimate in stream " + std::to_string(stream));
      if (static_cast<double>(est) > static_cast<double>(counts[i]) + eps * static_cast<double>(total)) ++violations;
    }
    const double frac = static_cast<double>(violations) / static_cast<double>(distinct);
    worst = std::max(worst, frac);
    o.require(frac <= 2 * delta, "violation fraction " + fmt("%.4f", frac) + " in stream " + std::to_string(stream));
  }
  const double s = seconds_since(t0);
  o.require(s < 60.0, "took " + fmt("%.1f", s) + " s");
  if (o.pass) o.detail = "worst violation fraction " + fmt("%.4f", worst) + ", " + fmt("%.1f", s) + " s";
  return o;
}

// ---- 6, 7: forecaster and metrics -----------------------------------------

Outcome ewma_checks() {
  Outcome o;
  auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-12; };
  o.require(close(ewma_forecast(std::vector<double>{0, 0, 0, 0, 1}, 0.9), 0.9), "[0,0,0,0,1]");
  o.require(close(ewma_forecast(std::vector<double>{0, 0, 0, 0, 0}, 0.9), 0.0), "[0,0,0,0,0]");
  o.require(close(ewma_forecast(std::vector<double>{1, 0, 1}, 0.5), 0.625), "[1,0,1]");
  for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    for (size_t t = 1; t <= 30; ++t) {
      const std::vector<double> ones(t, 1.0);
      const double expected = 1.0 - std::pow(1.0 - alpha, static_cast<double>(t));
      o.require(close(ewma_forecast(ones, alpha), expected), "constant series T=" + std::to_string(t));
    }
  }
  if (o.pass) o.detail = "3 examples and 180 constant series within 1e-12";
  return o;
}

Outcome metric_checks() {
  Outcome o;
  SimRng rng(7007);
  for (int i = 0; i < 1000 && o.pass; ++i) {
    const uint64_t tp = rng.below(50), fp = rng.below(50), fn = rng.below(50);
    // Disjoint id ranges realize the tuple as sets.
    Blacklist bl{"x", {}};
    SubnetSet truth;
    for (uint32_t s = 0; s < tp; ++s) {
      bl.predicted.insert(Subnet24(s));
      truth.insert(Subnet24(s));
    }
    for (uint32_t s = 0; s < fp; ++s) bl.predicted.insert(Subnet24(1000 + s));
    for (uint32_t s = 0; s < fn; ++s) truth.insert(Subnet24(2000 + s));
    const Counts c = score(bl, truth);
    o.require(c.tp == tp && c.fp == fp && c.fn == fn, "score mismatch at tuple " + std::to_string(i));

    const auto m = metrics(c);
    const double dtp = static_cast<double>(tp);
    const std::optional<double> tpr = tp + fn ? std::optional(dtp / static_cast<double>(tp + fn)) : std::nullopt;
    const std::optional<double> ppv = tp + fp ? std::optional(dtp / static_cast<double>(tp + fp)) : std::nullopt;
    std::optional<double> f1;
    if (tpr && ppv) f1 = *tpr + *ppv > 0 ? 2 * *ppv * *tpr / (*ppv + *tpr) : 0.0;
    o.require(m.tpr == tpr && m.ppv == ppv && m.f1 == f1, "metrics mismatch at tuple " + std::to_string(i));

    const Counts base{rng.below(50), rng.below(50), rng.below(50)};
    const auto rel = relative_metrics(base, c);
    auto ratio = [](uint64_t before, uint64_t after) -> std::optional<double> {
      if (before == 0) return std::nullopt;
      return (static_cast<double>(after) - static_cast<double>(before)) / static_cast<double>(before);
    };
    o.require(rel.tp_impr == ratio(base.tp, tp) && rel.fp_incr == ratio(base.fp, fp) &&
                  rel.fn_incr == ratio(base.fn, fn),
              "relative metrics mismatch at tuple " + std::to_string(i));
  }
  if (o.pass) o.detail = "1000 tuples exact";
  return o;
}

// ---- 8: directional study -------------------------------------------------

Outcome directional() {
  Outcome o;
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.methods = {Method::kmeans};
  c.k_values = {5};
  c.strategies = {SharingStrategy::local, SharingStrategy::global, SharingStrategy::intersection,
                  SharingStrategy::ip2ip, SharingStrategy::ip2ip_and_intersection};
  c.forecast.alpha = 0.9;
  c.forecast.tau = 0.5;
  c.seed = 1;
  if (const char* w = std::getenv("CPB_WORKERS")) c.workers = std::max(1, std::atoi(w));
  const auto windows = load_windows(c);
  o.require(windows.size() == 10, "expected 10 windows, got " + std::to_string(windows.size()));
  const auto out = run_experiment(c, windows);
  o.require(out.skipped.empty(), "skipped cells");
  std::map<std::string, SummaryRow> by;
  for (const auto& s : out.summary) by[s.strategy] = s;
  auto get = [&](const std::string& strategy, std::optional<double> SummaryRow::*field) -> double {
    auto it = by.find(strategy);
    if (it == by.end() || !(it->second.*field)) {
      o.require(false, "missing summary value for " + strategy);
      return std::nan("");
    }
    return *(it->second.*field);
  };
  const double f1_int = get("intersection", &SummaryRow::f1), f1_glob = get("global", &SummaryRow::f1);
  const double fp_glob = get("global", &SummaryRow::fp_incr), fp_int = get("intersection", &SummaryRow::fp_incr);
  const double tp_both = get("ip2ip_and_intersection", &SummaryRow::tp_impr),
               tp_int = get("intersection", &SummaryRow::tp_impr);
  const double tpr_int = get("intersection", &SummaryRow::tpr), tpr_loc = get("local", &SummaryRow::tpr);
  if (!o.pass) return o;
  o.require(f1_int > f1_glob, "(a) F1 intersection " + fmt("%.4f", f1_int) + " <= global " + fmt("%.4f", f1_glob));
  o.require(fp_glob >= 2 * fp_int && fp_glob > fp_int,
            "(b) FP_incr global " + fmt("%.4f", fp_glob) + " vs intersection " + fmt("%.4f", fp_int));
  o.require(tp_both >= tp_int, "(c) TP_impr ip2ip+intersection " + fmt("%.4f", tp_both) + " < intersection " +
                                   fmt("%.4f", tp_int));
  o.require(tpr_int > tpr_loc, "(d) TPR intersection " + fmt("%.4f", tpr_int) + " <= local " + fmt("%.4f", tpr_loc));
  const double s = seconds_since(t0);
  o.require(s < 600.0, "took " + fmt("%.1f", s) + " s");
  if (o.pass) {
    o.detail = "F1 " + fmt("%.3f", f1_int) + ">" + fmt("%.3f", f1_glob) + ", FP_incr " + fmt("%.3f", fp_glob) + " vs " +
               fmt("%.3f", fp_int) + ", TP_impr " + fmt("%.4f", tp_both) + ">=" + fmt("%.4f", tp_int) + ", TPR " +
               fmt("%.3f", tpr_int) + ">" + fmt("%.3f", tpr_loc) + ", " + fmt("%.1f", s) + " s";
  }
  return o;
}

// ---- 9: cross-association -------------------------------------------------

Outcome cross_association() {
  Outcome o;
  size_t runs = 0;
  for (uint64_t seed = 0; seed < 10 && o.pass; ++seed) {
    SimRng rng(9000 + seed);
    // Perfect blocks with random split sizes and a random permutation of rows
    // and columns.
    const size_t r_split = 5 + rng.below(11), c_split = 5 + rng.below(11);
    std::vector<size_t> rperm(20), cperm(20);
    std::iota(rperm.begin(), rperm.end(), 0);
    std::iota(cperm.begin(), cperm.end(), 0);
    rng.shuffle(rperm);
    rng.shuffle(cperm);
    std::vector<std::vector<uint32_t>> rows(20);
    for (size_t r = 0; r < 20; ++r) {
      for (size_t c = 0; c < 20; ++c) {
        const bool diag = (rperm[r] < r_split) == (cperm[c] < c_split);
        if (diag) rows[r].push_back(static_cast<uint32_t>(c));
      }
    }
    const VictimAttackerMatrix m(20, rows);
    const auto cc = cross_associate(m);
    ++runs;
    for (size_t i = 1; i < cc.history.size(); ++i) {
      o.require(cc.history[i] < cc.history[i - 1], "codelength rose in seed " + std::to_string(seed));
    }
    o.require(cc.k == 2 && cc.l == 2, "seed " + std::to_string(seed) + ": found " + std::to_string(cc.k) + "x" +
                                          std::to_string(cc.l) + " groups");
    for (size_t r = 0; r < 20 && o.pass; ++r) {
      o.require((cc.row_groups[r] == cc.row_groups[0]) == ((rperm[r] < r_split) == (rperm[0] < r_split)),
                "seed " + std::to_string(seed) + ": row partition differs");
    }
    for (size_t c = 0; c < 20 && o.pass; ++c) {
      o.require((cc.col_groups[c] == cc.col_groups[0]) == ((cperm[c] < c_split) == (cperm[0] < c_split)),
                "seed " + std::to_string(seed) + ": column partition differs");
    }
    if (o.pass) {
      for (const auto& row : cc.block_density(m)) {
        for (double v : row) o.require(v == 0.0 || v == 1.0, "seed " + std::to_string(seed) + ": impure block");
      }
    }
  }
  // Monotonicity on unstructured matrices as well.
  SimRng rng(9100);
  for (int i = 0; i < 20 && o.pass; ++i) {
    std::vector<std::vector<uint32_t>> rows(5 + rng.below(30));
    const size_t cols = 5 + rng.below(60);
    const double p = 0.02 + 0.5 * rng.uniform();
    for (auto& r : rows) {
      for (size_t c = 0; c < cols; ++c) {
        if (rng.bernoulli(p)) r.push_back(static_cast<uint32_t>(c));
      }
    }
    const VictimAttackerMatrix m(cols, rows);
    if (m.ones() == 0) continue;
    const auto cc = cross_associate(m);
    ++runs;
    for (size_t h = 1; h < cc.history.size(); ++h) o.require(cc.history[h] < cc.history[h - 1], "codelength rose");
  }
  if (o.pass) o.detail = "10 planted fixtures recovered, monotone on " + std::to_string(runs) + " runs";
  return o;
}

// ---- 10: clustering -------------------------------------------------------

Outcome clustering() {
  Outcome o;
  SimRng rng(10010);
  DistanceMatrix d(9);
  for (size_t i = 0; i < 9; ++i) {
    for (size_t j = i + 1; j < 9; ++j) d.set(i, j, rng.uniform());
  }
  const auto one = agglomerative(d, 1);
  o.require(one.clusters.size() == 1 && one.clusters[0].size() == 9, "k=1 is not a single cluster");
  const auto all = agglomerative(d, 9);
  o.require(all.clusters.size() == 9, "k=n is not all singletons");
  for (const auto& c : all.clusters) o.require(c.size() == 1, "k=n is not all singletons");

  // Two planted victim groups with disjoint attacker pools.
  ExperimentWindow w;
  w.train_days = {0, 1, 2, 3, 4};
  w.test_day = 5;
  for (size_t i = 0; i < 8; ++i) {
    OrgLog log{"g" + std::to_string(i), {}};
    const uint32_t base = i < 4 ? 1000 : 5000;
    for (int e = 0; e < 40; ++e) {
      log.events.push_back({static_cast<int32_t>(rng.below(5)), log.org, Subnet24(base + static_cast<uint32_t>(rng.below(60)))});
    }
    w.orgs.push_back(log.org);
    w.logs[log.org] = log;
    w.truth[log.org] = {};
  }
  const std::vector<std::vector<size_t>> planted = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  for (auto backend : {O2OBackend::plaintext, O2OBackend::psi_ca, O2OBackend::server_aided}) {
    O2OOptions options;
    options.seed = 11;
    const auto o2o = build_o2o(w, backend, options);
    auto agg = agglomerative(cosine_distances(o2o), 2).clusters;
    std::sort(agg.begin(), agg.end());
    o.require(agg == planted, "agglomerative on " + to_string(backend) + " missed the planted groups");
    KMeansOptions km;
    km.k = 2;
    km.threshold_percentile.reset();
    auto kc = kmeans(normalized_rows(o2o), km).assignment.clusters;
    std::sort(kc.begin(), kc.end());
    o.require(kc == planted, "kmeans on " + to_string(backend) + " missed the planted groups");
    const auto knn = knn_neighborhoods(cosine_distances(o2o), 3, std::nullopt);
    for (const auto& hood : knn.assignment.clusters) {
      const bool left = hood.front() < 4;
      for (size_t m : hood) o.require((m < 4) == left, "knn on " + to_string(backend) + " crossed groups");
    }
  }

  const std::vector<double> dist = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  o.require(threshold_members(dist, 40) == std::vector<size_t>{0, 1, 2, 3}, "percentile fixture");
  std::vector<double> shuffled = dist;
  rng.shuffle(shuffled);
  std::vector<size_t> expected;
  for (size_t i = 0; i < shuffled.size(); ++i) {
    if (shuffled[i] <= 4) expected.push_back(i);
  }
  o.require(threshold_members(shuffled, 40) == expected, "percentile fixture (shuffled)");
  if (o.pass) o.detail = "trivial partitions, planted groups on 3 back-ends, 4 of 10 retained";
  return o;
}

// ---- 11: pair counting and determinism ------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome pairs_and_determinism() {
  Outcome o;
  o.require(candidate_pairs(100) == 4950, "candidate_pairs(100) = " + std::to_string(candidate_pairs(100)));
  std::vector<OrgId> orgs;
  for (int i = 0; i < 100; ++i) orgs.push_back("o" + std::to_string(100 + i));
  O2OMatrix m(orgs);
  o.require(select_pairs_global(m, 100.0).pairs.size() == 4950, "all-pairs selection size");

  ExperimentConfig c;
  c.synthetic.n_orgs = 30;
  c.synthetic.n_days = 8;
  c.methods = {Method::agglomerative, Method::kmeans, Method::knn, Method::freud_a};
  c.k_values = {3};
  c.strategies = {SharingStrategy::intersection, SharingStrategy::ip2ip_and_intersection};
  const auto root = std::filesystem::temp_directory_path() / ("cpb_acceptance_" + std::to_string(::getpid()));
  c.out_dir = root / "a";
  run(c);
  c.out_dir = root / "b";
  c.workers = 4;
  run(c);
  const auto a = slurp(root / "a" / "results.csv"), b = slurp(root / "b" / "results.csv");
  o.require(!a.empty() && a == b, "results.csv differs between runs");
  o.require(slurp(root / "a" / "summary.csv") == slurp(root / "b" / "summary.csv"), "summary.csv differs");
  std::filesystem::remove_all(root);
  if (o.pass) o.detail = "4950 pairs; identical CSV (" + std::to_string(a.size()) + " bytes)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"PSI outputs equal plaintext oracles", psi_equivalence},
      {"server-aided sharing equals min-multiplicity oracle", server_aided_equivalence},
      {"per-org complexity shape", complexity_shape},
      {"Count-Min sizing", sketch_sizing},
      {"Count-Min error bound", sketch_bound},
      {"EWMA closed forms", ewma_checks},
      {"metric formulas", metric_checks},
      {"directional study", directional},
      {"cross-association", cross_association},
      {"clustering sanity", clustering},
      {"pair counting and determinism", pairs_and_determinism},
  };
  // Optional criterion numbers on the command line select a subset.
  std::set<size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<size_t>(std::atoi(argv[i])));

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << ": " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}

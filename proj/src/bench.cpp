#include "cpb/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "cpb/cpu_clock.hpp"
#include "cpb/psi.hpp"
#include "cpb/random.hpp"
#include "cpb/server_aided.hpp"

namespace cpb {

std::string to_string(BenchProtocol protocol) {
  switch (protocol) {
    case BenchProtocol::psi_ca:
      return "psi_ca";
    case BenchProtocol::psi_dt:
      return "psi_dt";
    case BenchProtocol::server_aided:
      return "server_aided";
    case BenchProtocol::sta:
      return "sta";
  }
  return "unknown";
}

BenchProtocol parse_bench_protocol(const std::string& name) {
  if (name == "psi_ca") return BenchProtocol::psi_ca;
  if (name == "psi_dt") return BenchProtocol::psi_dt;
  if (name == "server_aided") return BenchProtocol::server_aided;
  if (name == "sta") return BenchProtocol::sta;
  throw std::invalid_argument("unknown protocol: " + name);
}

namespace {

using Clock = ThreadCpuClock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sources drawn from a pool four times the set size, so the expected overlap
// between two organizations does not depend on how many there are.
std::vector<PsiElement> random_set(SimRng& rng, size_t size) {
  std::vector<PsiElement> out;
  const uint64_t pool = 4 * size;
  while (out.size() < size) {
    out.push_back(rng.below(pool));
    if (out.size() == size) {
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  }
  return out;
}

OrgLog random_log(SimRng& rng, const OrgId& org, size_t events) {
  OrgLog log{org, {}};
  const uint64_t pool = 4 * events;
  for (size_t i = 0; i < events; ++i) {
    log.events.push_back({static_cast<int32_t>(rng.below(5)), org, Subnet24(static_cast<uint32_t>(rng.below(pool)))});
  }
  return log;
}

struct Sample {
  double org_seconds = 0.0;
  double org_bytes = 0.0;
  double sta_seconds = 0.0;
  double sta_bytes = 0.0;
};

Sample psi_sample(BenchProtocol protocol, size_t n, size_t size, GroupId group, SimRng& rng, uint64_t seed) {
  Sample s;
  const auto own = random_set(rng, size);
  PsiRecords own_records;
  for (PsiElement e : own) own_records[e] = Bytes(7, 0);
  for (size_t peer = 1; peer < n; ++peer) {
    const auto other = random_set(rng, size);
    const PsiOptions options{group, seed + peer};
    RunCost as_client, as_server;
    if (protocol == BenchProtocol::psi_ca) {
      const auto r = mutual_psi_ca(own, other, options);
      as_client = r.a_as_client;
      as_server = r.b_as_client;
    } else {
      PsiRecords other_records;
      for (PsiElement e : other) other_records[e] = Bytes(7, 0);
      const auto r = mutual_psi_dt(own_records, other_records, options);
      as_client = r.a_as_client;
      as_server = r.b_as_client;
    }
    s.org_seconds += as_client.client.seconds + as_server.server.seconds;
    s.org_bytes += static_cast<double>(as_client.client.bytes_sent + as_client.client.bytes_received +
                                       as_server.server.bytes_sent + as_server.server.bytes_received);
  }
  return s;
}

Sample server_aided_sample(size_t n, size_t size, size_t cluster_size, SimRng& rng, uint64_t seed) {
  std::vector<OrgLog> logs;
  for (size_t i = 0; i < n; ++i) logs.push_back(random_log(rng, "org" + std::to_string(i), size));
  Drbg drbg(seed);
  const PrpKey key = PrpKey::generate(drbg);

  Sample s;
  StaServer sta;
  std::vector<RecordKeyStore> keys;
  double encrypt_seconds = 0.0, submit_bytes = 0.0;
  for (const auto& log : logs) {
    const auto start = Clock::now();
    auto ds = encrypt_dataset(log, key);
    const Frame frame = encode_submission(ds.submission);
    encrypt_seconds += seconds_since(start);
    submit_bytes += static_cast<double>(frame.wire_size());
    keys.push_back(std::move(ds.keys));
    sta.submit(decode_submission(frame));
  }

  auto start = Clock::now();
  const StaBuffer buffer = sta.compute();
  s.sta_seconds = seconds_since(start);

  // Consecutive clusters of cluster_size; every member decrypts its delivery.
  double delivery_bytes = 0.0, decrypt_seconds = 0.0;
  for (size_t base = 0; base < n; base += cluster_size) {
    std::vector<size_t> cluster;
    for (size_t i = base; i < std::min(n, base + cluster_size); ++i) cluster.push_back(i);
    for (size_t i : cluster) {
      start = Clock::now();
      const Frame frame = encode_delivery(deliver(buffer, cluster, i));
      s.sta_seconds += seconds_since(start);
      delivery_bytes += static_cast<double>(frame.wire_size());
      start = Clock::now();
      const auto events = log_sharing(decode_delivery(frame), keys[i]);
      decrypt_seconds += seconds_since(start);
    }
  }
  const double orgs = static_cast<double>(n);
  s.org_seconds = (encrypt_seconds + decrypt_seconds) / orgs;
  s.org_bytes = (submit_bytes + delivery_bytes) / orgs;
  s.sta_bytes = submit_bytes + delivery_bytes;
  return s;
}

}  // namespace

std::vector<BenchRow> bench(const BenchConfig& config) {
  if (config.repeats == 0) throw std::invalid_argument("repeats must be positive");
  for (size_t n : config.orgs) {
    if (n < 2) throw std::invalid_argument("benchmarks need at least two organizations");
  }
  struct Point {
    size_t size, n;
    std::vector<double> org_s, org_b, sta_s, sta_b;
  };
  std::vector<Point> points;
  for (size_t size : config.sizes) {
    for (size_t n : config.orgs) points.push_back({size, n, {}, {}, {}, {}});
  }
  // Repeats run round-robin over the points so that drift in machine speed
  // affects every point alike.
  for (size_t rep = 0; rep < config.repeats; ++rep) {
    for (auto& p : points) {
      const uint64_t seed = config.seed * 1000003u + rep * 7919u + p.n * 31u + p.size;
      SimRng rng(seed);
      Sample s;
      if (config.protocol == BenchProtocol::psi_ca || config.protocol == BenchProtocol::psi_dt) {
        s = psi_sample(config.protocol, p.n, p.size, config.group, rng, seed);
      } else {
        s = server_aided_sample(p.n, p.size, config.cluster_size, rng, seed);
      }
      p.org_s.push_back(s.org_seconds);
      p.org_b.push_back(s.org_bytes);
      p.sta_s.push_back(s.sta_seconds);
      p.sta_b.push_back(s.sta_bytes);
    }
  }
  std::vector<BenchRow> rows;
  for (const auto& p : points) {
    BenchRow row;
    row.protocol = to_string(config.protocol);
    row.group = config.protocol == BenchProtocol::psi_ca || config.protocol == BenchProtocol::psi_dt
                    ? to_string(config.group)
                    : "aes128";
    row.orgs = p.n;
    row.set_size = p.size;
    row.repeats = config.repeats;
    row.org_seconds = median(p.org_s);
    row.org_bytes = median(p.org_b);
    row.sta_seconds = median(p.sta_s);
    row.sta_bytes = median(p.sta_b);
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchColumns << '\n';
  for (const auto& r : rows) {
    out << r.protocol << ',' << r.group << ',' << r.orgs << ',' << r.set_size << ',' << r.repeats << ','
        << r.org_seconds << ',' << r.org_bytes << ',' << r.sta_seconds << ',' << r.sta_bytes << '\n';
  }
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace cpb

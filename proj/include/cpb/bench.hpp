#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cpb/group.hpp"

namespace cpb {

enum class BenchProtocol { psi_ca, psi_dt, server_aided, sta };

std::string to_string(BenchProtocol protocol);
BenchProtocol parse_bench_protocol(const std::string& name);

struct BenchConfig {
  BenchProtocol protocol = BenchProtocol::server_aided;
  std::vector<size_t> sizes = {1000};
  std::vector<size_t> orgs = {10, 50, 100, 200};
  size_t repeats = 3;
  GroupId group = GroupId::ristretto255;
  // Cluster size used for buffer delivery in the server-aided runs.
  size_t cluster_size = 10;
  uint64_t seed = 1;
};

struct BenchRow {
  std::string protocol;
  std::string group;
  size_t orgs = 0;
  size_t set_size = 0;
  size_t repeats = 0;
  // Medians over repeats, in thread CPU seconds. Per-org figures are for one
  // organization; the STA figures cover the whole server-aided run.
  double org_seconds = 0.0;
  double org_bytes = 0.0;
  double sta_seconds = 0.0;
  double sta_bytes = 0.0;
};

inline constexpr const char* kBenchColumns =
    "protocol,group,orgs,set_size,repeats,org_seconds,org_bytes,sta_seconds,sta_bytes";

// psi_ca / psi_dt: one organization runs the mutual protocol with each of the
// other n-1 organizations. server_aided: encrypting and submitting a log plus
// decrypting the delivery, averaged over organizations. sta: the STA's
// matching and buffering.
std::vector<BenchRow> bench(const BenchConfig& config);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cpb

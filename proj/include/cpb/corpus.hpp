#pragma once

#include <cstdint>
#include <compare>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace cpb {

using OrgId = std::string;

// Top 24 bits of an IPv4 address.
class Subnet24 {
 public:
  static constexpr uint32_t kDomainSize = 1u << 24;

  constexpr Subnet24() = default;
  explicit Subnet24(uint32_t value);

  static Subnet24 from_ipv4(uint32_t address) { return Subnet24(address >> 8); }

  constexpr uint32_t value() const { return value_; }
  constexpr uint32_t network_address() const { return value_ << 8; }
  std::string to_string() const;

  auto operator<=>(const Subnet24&) const = default;

 private:
  uint32_t value_ = 0;
};

// Zeroes the host byte of an IPv4 address.
constexpr uint32_t to_subnet24(uint32_t ipv4) { return ipv4 & 0xFFFFFF00u; }

std::optional<uint32_t> parse_ipv4(std::string_view text);

// True for addresses excluded from the corpus: 0/8, 10/8, 127/8, 172.16/12,
// 192.168/16, 224/4 and 240/4.
bool is_non_routable(uint32_t ipv4);

using SubnetSet = std::set<Subnet24>;

struct AttackEvent {
  int32_t day = 0;
  OrgId victim;
  Subnet24 source;

  bool operator==(const AttackEvent&) const = default;
};

struct OrgLog {
  OrgId org;
  std::vector<AttackEvent> events;

  SubnetSet unique_sources() const;
};

struct ExperimentWindow {
  std::vector<int32_t> train_days;
  int32_t test_day = 0;
  std::vector<OrgId> orgs;
  std::map<OrgId, OrgLog> logs;
  std::map<OrgId, SubnetSet> truth;
  // Set when fewer than 31 contributors qualified.
  bool underpopulated = false;
  size_t qualifying = 0;

  int32_t last_train_day() const { return train_days.back(); }
  const OrgLog& log(const OrgId& org) const { return logs.at(org); }
};

struct ParseResult {
  std::vector<AttackEvent> events;
  size_t rejects = 0;
  size_t invalid_ip = 0;
  // Day 0 as days since 1970-01-01.
  int64_t epoch = 0;
};

// Parses `date,contributor_id,source_ip[,source_port,target_port]` lines.
// Day indices are relative to `epoch` (days since 1970-01-01) when given,
// otherwise to the earliest date in the stream.
ParseResult parse_logs(std::istream& in, std::optional<int64_t> epoch = std::nullopt);

// Days since 1970-01-01 for an ISO date, or nullopt if malformed.
std::optional<int64_t> parse_iso_date(std::string_view text);
std::string format_iso_date(int64_t days_since_1970);

void write_logs(std::ostream& out, const std::vector<AttackEvent>& events, int64_t epoch);

inline constexpr int32_t kTrainDays = 5;

// One window per test day t in [5, total_days).
std::vector<ExperimentWindow> build_windows(const std::vector<AttackEvent>& events,
                                            int32_t total_days);

// Selected contributors for a window, given ranked qualifiers.
std::vector<OrgId> select_contributors(const std::vector<OrgId>& ranked);

struct CorpusSpec {
  int32_t n_orgs = 70;
  int32_t n_days = 15;
  int32_t attacker_groups = 10;
  // org index -> group ids. Empty means org i belongs to group i % attacker_groups.
  std::vector<std::vector<int32_t>> group_membership;
  double persistence = 0.8;
  double base_rate = 200.0;
  double noise_rate = 150.0;
  // Probability that a new group attacker targets a given group member.
  double target_prob = 0.5;
  // Probability that an active attacker hits a given target on a given day.
  double hit_prob = 0.7;
  // Mean number of additional events per (attacker, victim, day) hit.
  double extra_events = 5.5;
  uint64_t seed = 1;
  std::string start_date = "2024-01-01";

  void validate() const;
  std::vector<std::vector<int32_t>> membership() const;
  static OrgId org_name(int32_t index);
};

std::vector<AttackEvent> generate_synthetic(const CorpusSpec& spec);

// key=value text; unknown keys are rejected.
CorpusSpec load_corpus_spec(std::istream& in);

}  // namespace cpb

template <>
struct std::hash<cpb::Subnet24> {
  size_t operator()(const cpb::Subnet24& s) const noexcept { return std::hash<uint32_t>{}(s.value()); }
};

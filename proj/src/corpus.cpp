#include "cpb/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <iostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "cpb/config.hpp"
#include "cpb/random.hpp"

namespace cpb {

Subnet24::Subnet24(uint32_t value) : value_(value) {
  if (value >= kDomainSize) throw std::out_of_range("Subnet24 value out of range: " + std::to_string(value));
}

std::string Subnet24::to_string() const {
  return std::to_string(value_ >> 16) + "." + std::to_string((value_ >> 8) & 0xFF) + "." +
         std::to_string(value_ & 0xFF) + ".0/24";
}

SubnetSet OrgLog::unique_sources() const {
  SubnetSet out;
  for (const auto& e : events) out.insert(e.source);
  return out;
}

std::optional<uint32_t> parse_ipv4(std::string_view text) {
  uint32_t address = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    if (p == end || *p < '0' || *p > '9') return std::nullopt;
    unsigned value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || value > 255 || next - p > 3) return std::nullopt;
    address = (address << 8) | value;
    p = next;
  }
  if (p != end) return std::nullopt;
  return address;
}

bool is_non_routable(uint32_t ipv4) {
  const uint32_t a = ipv4 >> 24;
  const uint32_t b = (ipv4 >> 16) & 0xFF;
  if (a == 0 || a == 10 || a == 127) return true;
  if (a >= 224) return true;
  if (a == 172 && (b & 0xF0) == 16) return true;
  if (a == 192 && b == 168) return true;
  return false;
}

std::optional<int64_t> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto field = [&](size_t pos, size_t len) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc() || ptr != text.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = field(0, 4), m = field(5, 2), d = field(8, 2);
  if (!y || !m || !d) return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days(ymd).time_since_epoch().count();
}

std::string format_iso_date(int64_t days_since_1970) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{days_since_1970}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

namespace {

struct RawEvent {
  int64_t date;
  OrgId victim;
  Subnet24 source;
};

bool valid_port(std::string_view text) {
  if (text.empty()) return false;
  unsigned v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  return ec == std::errc() && ptr == text.data() + text.size() && v <= 65535;
}

}  // namespace

ParseResult parse_logs(std::istream& in, std::optional<int64_t> epoch) {
  if (!in) throw std::runtime_error("log stream is not readable");
  ParseResult result;
  std::vector<RawEvent> raw;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = std::vector<std::string_view>{};
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 3 && fields.size() != 5) {
      ++result.rejects;
      continue;
    }
    auto date = parse_iso_date(fields[0]);
    if (!date || fields[1].empty()) {
      ++result.rejects;
      continue;
    }
    if (fields.size() == 5 && (!valid_port(fields[3]) || !valid_port(fields[4]))) {
      ++result.rejects;
      continue;
    }
    auto ip = parse_ipv4(fields[2]);
    if (!ip) {
      ++result.rejects;
      continue;
    }
    if (is_non_routable(*ip)) {
      ++result.invalid_ip;
      continue;
    }
    raw.push_back({*date, OrgId(fields[1]), Subnet24::from_ipv4(*ip)});
  }
  if (in.bad()) throw std::runtime_error("error while reading log stream");

  if (epoch) {
    result.epoch = *epoch;
  } else if (!raw.empty()) {
    result.epoch = std::min_element(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
                     return a.date < b.date;
                   })->date;
  }
  result.events.reserve(raw.size());
  for (auto& r : raw) {
    const int64_t day = r.date - result.epoch;
    if (day < 0) {
      ++result.rejects;
      continue;
    }
    result.events.push_back({static_cast<int32_t>(day), std::move(r.victim), r.source});
  }
  return result;
}

void write_logs(std::ostream& out, const std::vector<AttackEvent>& events, int64_t epoch) {
  int32_t cached_day = -1;
  std::string cached_date;
  for (const auto& e : events) {
    if (e.day != cached_day) {
      cached_day = e.day;
      cached_date = format_iso_date(epoch + e.day);
    }
    const uint32_t v = e.source.value();
    // Host byte 1 keeps the written address inside the /24.
    out << cached_date << ',' << e.victim << ',' << (v >> 16) << '.' << ((v >> 8) & 0xFF) << '.'
        << (v & 0xFF) << ".1\n";
  }
}

std::vector<OrgId> select_contributors(const std::vector<OrgId>& ranked) {
  const size_t q = ranked.size();
  size_t first = 0;
  size_t last = 0;
  if (q >= 100) {
    first = 10;
    last = 80;
  } else {
    first = q / 10;
    last = q - (q * 20) / 100;
  }
  if (first >= last) return {};
  return {ranked.begin() + static_cast<std::ptrdiff_t>(first),
          ranked.begin() + static_cast<std::ptrdiff_t>(last)};
}

std::vector<ExperimentWindow> build_windows(const std::vector<AttackEvent>& events, int32_t total_days) {
  if (total_days < kTrainDays + 1) {
    throw std::invalid_argument("build_windows: need at least 6 days, got " + std::to_string(total_days));
  }
  // Bucket events by day once.
  std::vector<std::vector<const AttackEvent*>> by_day(static_cast<size_t>(total_days));
  for (const auto& e : events) {
    if (e.day >= 0 && e.day < total_days) by_day[static_cast<size_t>(e.day)].push_back(&e);
  }

  std::vector<ExperimentWindow> windows;
  for (int32_t test_day = kTrainDays; test_day < total_days; ++test_day) {
    ExperimentWindow w;
    for (int32_t d = test_day - kTrainDays; d < test_day; ++d) w.train_days.push_back(d);
    w.test_day = test_day;

    std::unordered_map<OrgId, std::pair<int, std::unordered_set<uint32_t>>> stats;
    for (int32_t d : w.train_days) {
      std::unordered_set<OrgId> seen_today;
      for (const auto* e : by_day[static_cast<size_t>(d)]) {
        auto& s = stats[e->victim];
        if (seen_today.insert(e->victim).second) ++s.first;
        s.second.insert(e->source.value());
      }
    }
    std::vector<std::pair<size_t, OrgId>> qualifiers;
    for (const auto& [org, s] : stats) {
      if (s.first == kTrainDays) qualifiers.emplace_back(s.second.size(), org);
    }
    std::sort(qualifiers.begin(), qualifiers.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<OrgId> ranked;
    ranked.reserve(qualifiers.size());
    for (auto& q : qualifiers) ranked.push_back(q.second);
    if (ranked.size() > 100) ranked.resize(100);

    w.qualifying = qualifiers.size();
    w.underpopulated = qualifiers.size() < 31;
    if (w.underpopulated) {
      std::clog << "warning: window with test day " << test_day << " has only " << qualifiers.size()
                << " qualifying contributors\n";
    }
    w.orgs = select_contributors(ranked);
    std::sort(w.orgs.begin(), w.orgs.end());

    for (const auto& org : w.orgs) {
      w.logs[org].org = org;
      w.truth[org];
    }
    for (int32_t d : w.train_days) {
      for (const auto* e : by_day[static_cast<size_t>(d)]) {
        auto it = w.logs.find(e->victim);
        if (it != w.logs.end()) it->second.events.push_back(*e);
      }
    }
    for (const auto* e : by_day[static_cast<size_t>(test_day)]) {
      auto it = w.truth.find(e->victim);
      if (it != w.truth.end()) it->second.insert(e->source);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

void CorpusSpec::validate() const {
  if (n_orgs <= 0 || n_days <= 0 || attacker_groups <= 0) {
    throw std::invalid_argument("CorpusSpec: counts must be positive");
  }
  for (double p : {persistence, target_prob, hit_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("CorpusSpec: probabilities must lie in [0,1]");
  }
  if (base_rate < 0 || noise_rate < 0 || extra_events < 0) {
    throw std::invalid_argument("CorpusSpec: rates must be non-negative");
  }
  if (!group_membership.empty()) {
    if (group_membership.size() != static_cast<size_t>(n_orgs)) {
      throw std::invalid_argument("CorpusSpec: group_membership must list every org");
    }
    for (const auto& groups : group_membership) {
      for (int32_t g : groups) {
        if (g < 0 || g >= attacker_groups) throw std::invalid_argument("CorpusSpec: unknown group id");
      }
    }
  }
  if (!parse_iso_date(start_date)) throw std::invalid_argument("CorpusSpec: bad start_date");
}

std::vector<std::vector<int32_t>> CorpusSpec::membership() const {
  if (!group_membership.empty()) return group_membership;
  std::vector<std::vector<int32_t>> out(static_cast<size_t>(n_orgs));
  for (int32_t i = 0; i < n_orgs; ++i) out[static_cast<size_t>(i)] = {i % attacker_groups};
  return out;
}

OrgId CorpusSpec::org_name(int32_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "org%03d", index);
  return buf;
}

namespace {

class SourceAllocator {
 public:
  explicit SourceAllocator(SimRng& rng) : rng_(rng) {}

  Subnet24 fresh() {
    while (true) {
      const auto v = static_cast<uint32_t>(rng_.below(Subnet24::kDomainSize));
      if (is_non_routable(v << 8)) continue;
      if (used_.insert(v).second) return Subnet24(v);
    }
  }

 private:
  SimRng& rng_;
  std::unordered_set<uint32_t> used_;
};

struct Attacker {
  Subnet24 source;
  std::vector<int32_t> targets;
};

}  // namespace

std::vector<AttackEvent> generate_synthetic(const CorpusSpec& spec) {
  spec.validate();
  SimRng rng(spec.seed);
  SourceAllocator sources(rng);
  const auto membership = spec.membership();

  std::vector<std::vector<int32_t>> members(static_cast<size_t>(spec.attacker_groups));
  for (int32_t org = 0; org < spec.n_orgs; ++org) {
    for (int32_t g : membership[static_cast<size_t>(org)]) members[static_cast<size_t>(g)].push_back(org);
  }
  std::vector<OrgId> names;
  for (int32_t org = 0; org < spec.n_orgs; ++org) names.push_back(CorpusSpec::org_name(org));

  auto new_attacker = [&](const std::vector<int32_t>& group) {
    Attacker a{sources.fresh(), {}};
    for (int32_t org : group) {
      if (rng.bernoulli(spec.target_prob)) a.targets.push_back(org);
    }
    if (a.targets.empty()) a.targets.push_back(group[rng.below(group.size())]);
    return a;
  };

  std::vector<AttackEvent> events;
  auto emit = [&](int32_t day, int32_t org, Subnet24 source) {
    const uint64_t n = 1 + rng.poisson(spec.extra_events);
    for (uint64_t i = 0; i < n; ++i) events.push_back({day, names[static_cast<size_t>(org)], source});
  };

  std::vector<std::vector<Attacker>> active(static_cast<size_t>(spec.attacker_groups));
  for (int32_t day = 0; day < spec.n_days; ++day) {
    for (size_t g = 0; g < members.size(); ++g) {
      const auto& group = members[g];
      if (group.empty()) continue;
      auto& pool = active[g];
      double arrivals = spec.base_rate;
      if (day == 0 && spec.persistence < 1.0) {
        // Start from the stationary pool size.
        arrivals = spec.base_rate / (1.0 - spec.persistence);
      } else {
        std::vector<Attacker> kept;
        kept.reserve(pool.size());
        for (auto& a : pool) {
          if (rng.bernoulli(spec.persistence)) kept.push_back(std::move(a));
        }
        pool = std::move(kept);
      }
      const uint64_t fresh = rng.poisson(arrivals);
      for (uint64_t i = 0; i < fresh; ++i) pool.push_back(new_attacker(group));

      for (const auto& a : pool) {
        bool any = false;
        for (int32_t org : a.targets) {
          if (rng.bernoulli(spec.hit_prob)) {
            emit(day, org, a.source);
            any = true;
          }
        }
        // An active attacker always attacks someone.
        if (!any) emit(day, a.targets[rng.below(a.targets.size())], a.source);
      }
    }
    for (int32_t org = 0; org < spec.n_orgs; ++org) {
      const uint64_t noise = rng.poisson(spec.noise_rate);
      for (uint64_t i = 0; i < noise; ++i) emit(day, org, sources.fresh());
    }
  }
  return events;
}

CorpusSpec load_corpus_spec(std::istream& in) {
  auto kv = KeyValueConfig::parse(in);
  kv.reject_unknown({"n_orgs", "n_days", "attacker_groups", "persistence", "base_rate", "noise_rate",
                     "target_prob", "hit_prob", "extra_events", "seed", "start_date", "group_membership"});
  CorpusSpec spec;
  spec.n_orgs = static_cast<int32_t>(kv.get_int("n_orgs", spec.n_orgs));
  spec.n_days = static_cast<int32_t>(kv.get_int("n_days", spec.n_days));
  spec.attacker_groups = static_cast<int32_t>(kv.get_int("attacker_groups", spec.attacker_groups));
  spec.persistence = kv.get_double("persistence", spec.persistence);
  spec.base_rate = kv.get_double("base_rate", spec.base_rate);
  spec.noise_rate = kv.get_double("noise_rate", spec.noise_rate);
  spec.target_prob = kv.get_double("target_prob", spec.target_prob);
  spec.hit_prob = kv.get_double("hit_prob", spec.hit_prob);
  spec.extra_events = kv.get_double("extra_events", spec.extra_events);
  spec.seed = kv.get_uint("seed", spec.seed);
  spec.start_date = kv.get_or("start_date", spec.start_date);
  // group_membership = 0|1;1;2   (one entry per org, groups separated by '|')
  if (auto gm = kv.get("group_membership")) {
    for (const auto& entry : split_list(*gm, ';')) {
      std::vector<int32_t> groups;
      for (const auto& g : split_list(entry, '|')) groups.push_back(std::stoi(g));
      spec.group_membership.push_back(std::move(groups));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace cpb

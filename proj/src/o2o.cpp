#include "cpb/o2o.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "cpb/psi.hpp"
#include "cpb/server_aided.hpp"

namespace cpb {

O2OMatrix::O2OMatrix(std::vector<OrgId> orgs) : orgs_(std::move(orgs)), counts_(orgs_.size() * orgs_.size(), 0) {}

void O2OMatrix::set(size_t i, size_t j, uint64_t value) {
  const size_t n = orgs_.size();
  counts_[i * n + j] = value;
  counts_[j * n + i] = value;
}

void O2OMatrix::increment(size_t i, size_t j) {
  const size_t n = orgs_.size();
  ++counts_[i * n + j];
  if (i != j) ++counts_[j * n + i];
}

std::vector<double> O2OMatrix::row(size_t i) const {
  const size_t n = orgs_.size();
  std::vector<double> out(n);
  for (size_t j = 0; j < n; ++j) out[j] = static_cast<double>(counts_[i * n + j]);
  return out;
}

bool O2OMatrix::is_symmetric() const {
  for (size_t i = 0; i < size(); ++i) {
    for (size_t j = i + 1; j < size(); ++j) {
      if (at(i, j) != at(j, i)) return false;
    }
  }
  return true;
}

void O2OMatrix::write_csv(std::ostream& out) const {
  for (size_t j = 0; j < size(); ++j) out << (j ? "," : "") << orgs_[j];
  out << '\n';
  for (size_t i = 0; i < size(); ++i) {
    for (size_t j = 0; j < size(); ++j) out << (j ? "," : "") << at(i, j);
    out << '\n';
  }
}

std::string to_string(O2OBackend backend) {
  switch (backend) {
    case O2OBackend::plaintext:
      return "plaintext";
    case O2OBackend::psi_ca:
      return "psi_ca";
    case O2OBackend::server_aided:
      return "server_aided";
  }
  return "unknown";
}

O2OBackend parse_o2o_backend(const std::string& name) {
  if (name == "plaintext") return O2OBackend::plaintext;
  if (name == "psi_ca" || name == "psi") return O2OBackend::psi_ca;
  if (name == "server_aided" || name == "sta") return O2OBackend::server_aided;
  throw std::invalid_argument("unknown O2O back-end: " + name);
}

namespace {

// Occurrence counts per source.
std::unordered_map<Subnet24, uint64_t> multiplicities(const OrgLog& log) {
  std::unordered_map<Subnet24, uint64_t> out;
  for (const auto& e : log.events) ++out[e.source];
  return out;
}

std::vector<PsiElement> psi_elements(const OrgLog& log) {
  std::vector<PsiElement> out;
  for (const Subnet24 s : log.unique_sources()) out.push_back(s.value());
  return out;
}

std::vector<OrgLog> window_logs(const ExperimentWindow& window) {
  std::vector<OrgLog> logs;
  logs.reserve(window.orgs.size());
  for (const auto& org : window.orgs) {
    auto it = window.logs.find(org);
    logs.push_back(it == window.logs.end() ? OrgLog{org, {}} : it->second);
  }
  return logs;
}

O2OMatrix psi_ca_o2o(const std::vector<OrgLog>& logs, const O2OOptions& options) {
  std::vector<OrgId> orgs;
  std::vector<std::vector<PsiElement>> sets;
  for (const auto& log : logs) {
    orgs.push_back(log.org);
    sets.push_back(psi_elements(log));
  }
  O2OMatrix out(orgs);
  const size_t n = logs.size();
  uint64_t pair_index = 0;
  for (size_t i = 0; i < n; ++i) {
    out.set(i, i, sets[i].size());
    for (size_t j = i + 1; j < n; ++j, ++pair_index) {
      PsiOptions psi_options{options.group, std::nullopt};
      if (options.seed) psi_options.seed = *options.seed * 1000003u + pair_index;
      try {
        out.set(i, j, psi_ca(sets[i], sets[j], psi_options).cardinality);
      } catch (const std::exception& e) {
        throw std::runtime_error("PSI-CA between " + orgs[i] + " and " + orgs[j] + " failed: " + e.what());
      }
    }
  }
  return out;
}

O2OMatrix server_aided_o2o(const std::vector<OrgLog>& logs, const O2OOptions& options) {
  Drbg rng = options.seed ? Drbg(*options.seed) : Drbg();
  const PrpKey key = PrpKey::generate(rng);
  StaServer sta;
  for (const auto& log : logs) sta.submit(encrypt_dataset(log, key).submission);
  return sta.compute().o2o;
}

}  // namespace

O2OMatrix o2o_from_logs(const std::vector<OrgLog>& logs, bool multiset) {
  std::vector<OrgId> orgs;
  for (const auto& log : logs) orgs.push_back(log.org);
  O2OMatrix out(orgs);
  const size_t n = logs.size();
  if (multiset) {
    std::vector<std::unordered_map<Subnet24, uint64_t>> counts;
    for (const auto& log : logs) counts.push_back(multiplicities(log));
    for (size_t i = 0; i < n; ++i) {
      out.set(i, i, logs[i].events.size());
      for (size_t j = i + 1; j < n; ++j) {
        uint64_t common = 0;
        for (const auto& [s, c] : counts[i]) {
          auto it = counts[j].find(s);
          if (it != counts[j].end()) common += std::min(c, it->second);
        }
        out.set(i, j, common);
      }
    }
    return out;
  }
  std::vector<std::vector<Subnet24>> sets;
  for (const auto& log : logs) {
    const auto u = log.unique_sources();
    sets.emplace_back(u.begin(), u.end());
  }
  for (size_t i = 0; i < n; ++i) {
    out.set(i, i, sets[i].size());
    for (size_t j = i + 1; j < n; ++j) {
      size_t common = 0;
      auto a = sets[i].begin(), b = sets[j].begin();
      while (a != sets[i].end() && b != sets[j].end()) {
        if (*a < *b) {
          ++a;
        } else if (*b < *a) {
          ++b;
        } else {
          ++common;
          ++a;
          ++b;
        }
      }
      out.set(i, j, common);
    }
  }
  return out;
}

O2OMatrix build_o2o(const ExperimentWindow& window, O2OBackend backend, const O2OOptions& options) {
  if (window.orgs.size() < 2) throw std::invalid_argument("O2O needs at least two organizations");
  const auto logs = window_logs(window);
  switch (backend) {
    case O2OBackend::plaintext:
      return o2o_from_logs(logs, options.multiset);
    case O2OBackend::psi_ca:
      return psi_ca_o2o(logs, options);
    case O2OBackend::server_aided:
      return server_aided_o2o(logs, options);
  }
  throw std::invalid_argument("unknown O2O back-end");
}

}  // namespace cpb

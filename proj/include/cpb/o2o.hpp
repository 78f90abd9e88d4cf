#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "cpb/corpus.hpp"
#include "cpb/group.hpp"

namespace cpb {

// Organization-to-organization common-attack counts. counts(i, i) is the size
// of org i's own set.
class O2OMatrix {
 public:
  O2OMatrix() = default;
  explicit O2OMatrix(std::vector<OrgId> orgs);

  size_t size() const { return orgs_.size(); }
  const std::vector<OrgId>& orgs() const { return orgs_; }
  uint64_t at(size_t i, size_t j) const { return counts_[i * orgs_.size() + j]; }
  // Sets both (i, j) and (j, i).
  void set(size_t i, size_t j, uint64_t value);
  void increment(size_t i, size_t j);

  std::vector<double> row(size_t i) const;
  bool is_symmetric() const;

  // Header row of org ids, then one row of counts per org.
  void write_csv(std::ostream& out) const;

  bool operator==(const O2OMatrix&) const = default;

 private:
  std::vector<OrgId> orgs_;
  std::vector<uint64_t> counts_;
};

enum class O2OBackend { plaintext, psi_ca, server_aided };

std::string to_string(O2OBackend backend);
O2OBackend parse_o2o_backend(const std::string& name);

struct O2OOptions {
  // Plaintext only: min-multiplicity multiset intersection over occurrences
  // instead of unique-set intersection. server_aided always uses it.
  bool multiset = false;
  GroupId group = GroupId::ristretto255;
  std::optional<uint64_t> seed;
};

O2OMatrix build_o2o(const ExperimentWindow& window, O2OBackend backend, const O2OOptions& options = {});

// Plaintext unique-set counts over explicit logs.
O2OMatrix o2o_from_logs(const std::vector<OrgLog>& logs, bool multiset = false);

}  // namespace cpb

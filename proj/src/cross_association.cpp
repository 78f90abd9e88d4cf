#include "cpb/cross_association.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <stdexcept>

namespace cpb {

VictimAttackerMatrix::VictimAttackerMatrix(size_t cols, std::vector<std::vector<uint32_t>> rows)
    : row_cols_(std::move(rows)), col_rows_(cols) {
  for (size_t r = 0; r < row_cols_.size(); ++r) {
    auto& row = row_cols_[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (uint32_t c : row) {
      if (c >= cols) throw std::out_of_range("column index out of range");
      col_rows_[c].push_back(static_cast<uint32_t>(r));
    }
    ones_ += row.size();
  }
}

VictimAttackerMatrix VictimAttackerMatrix::from_logs(const std::vector<OrgLog>& logs) {
  SubnetSet all;
  for (const auto& log : logs) {
    for (const auto& e : log.events) all.insert(e.source);
  }
  std::vector<Subnet24> sources(all.begin(), all.end());
  std::vector<std::vector<uint32_t>> rows;
  for (const auto& log : logs) {
    std::vector<uint32_t> row;
    for (const Subnet24 s : log.unique_sources()) {
      row.push_back(static_cast<uint32_t>(std::lower_bound(sources.begin(), sources.end(), s) - sources.begin()));
    }
    rows.push_back(std::move(row));
  }
  VictimAttackerMatrix m(sources.size(), std::move(rows));
  m.sources_ = std::move(sources);
  return m;
}

double VictimAttackerMatrix::density() const {
  const double cells = static_cast<double>(rows()) * static_cast<double>(cols());
  return cells > 0 ? static_cast<double>(ones_) / cells : 0.0;
}

bool VictimAttackerMatrix::at(size_t r, size_t c) const {
  const auto& row = row_cols_.at(r);
  return std::binary_search(row.begin(), row.end(), static_cast<uint32_t>(c));
}

double log_star(double x) {
  double total = 0.0;
  double term = std::log2(x);
  while (term > 0.0) {
    total += term;
    term = std::log2(term);
  }
  return total;
}

namespace {

double entropy_bits(double ones, double cells) {
  if (cells <= 0.0 || ones <= 0.0 || ones >= cells) return 0.0;
  const double zeros = cells - ones;
  return -ones * std::log2(ones / cells) - zeros * std::log2(zeros / cells);
}

std::vector<double> group_sizes(const std::vector<uint32_t>& groups, uint32_t count) {
  std::vector<double> out(count, 0.0);
  for (uint32_t g : groups) out[g] += 1.0;
  return out;
}

// ones[i][j] for row group i, column group j.
std::vector<std::vector<double>> block_ones(const VictimAttackerMatrix& m, const std::vector<uint32_t>& rg, uint32_t k,
                                            const std::vector<uint32_t>& cg, uint32_t l) {
  std::vector<std::vector<double>> out(k, std::vector<double>(l, 0.0));
  for (size_t r = 0; r < m.rows(); ++r) {
    for (uint32_t c : m.row(r)) out[rg[r]][cg[c]] += 1.0;
  }
  return out;
}

double partition_cost(std::vector<double> sizes) {
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  const size_t k = sizes.size();
  double suffix = 0.0;
  std::vector<double> tail(k + 1, 0.0);
  for (size_t i = k; i-- > 0;) {
    suffix += sizes[i];
    tail[i] = suffix;
  }
  double bits = 0.0;
  for (size_t i = 0; i + 1 < k; ++i) {
    const double abar = tail[i] - static_cast<double>(k) + static_cast<double>(i + 1);
    if (abar > 1.0) bits += std::ceil(std::log2(abar));
  }
  return bits;
}

// Relabels groups to 0..count-1 in order of first appearance; drops empties.
uint32_t compact(std::vector<uint32_t>& groups) {
  std::map<uint32_t, uint32_t> relabel;
  for (uint32_t& g : groups) {
    auto [it, inserted] = relabel.emplace(g, static_cast<uint32_t>(relabel.size()));
    g = it->second;
  }
  return static_cast<uint32_t>(std::max<size_t>(relabel.size(), 1));
}

struct State {
  std::vector<uint32_t> rg;
  std::vector<uint32_t> cg;
  uint32_t k = 1;
  uint32_t l = 1;
  double cost = 0.0;
};

// Reassigns every line (row or column) to the group that encodes it in the
// fewest bits under the current block densities.
void regroup_lines(const std::vector<std::vector<uint32_t>>& lines, std::vector<uint32_t>& own, uint32_t own_count,
                   const std::vector<uint32_t>& other, uint32_t other_count,
                   const std::vector<std::vector<double>>& ones_by_own) {
  const auto own_sizes = group_sizes(own, own_count);
  const auto other_sizes = group_sizes(other, other_count);
  std::vector<std::vector<double>> l1(own_count, std::vector<double>(other_count));
  std::vector<std::vector<double>> l0(own_count, std::vector<double>(other_count));
  std::vector<double> base(own_count, 0.0);
  for (uint32_t i = 0; i < own_count; ++i) {
    for (uint32_t j = 0; j < other_count; ++j) {
      const double cells = own_sizes[i] * other_sizes[j];
      const double p = (ones_by_own[i][j] + 0.5) / (cells + 1.0);
      l1[i][j] = -std::log2(p);
      l0[i][j] = -std::log2(1.0 - p);
      base[i] += other_sizes[j] * l0[i][j];
    }
  }
  std::vector<double> hits(other_count, 0.0);
  std::vector<uint32_t> touched;
  std::vector<uint32_t> next(own.size());
  for (size_t x = 0; x < lines.size(); ++x) {
    touched.clear();
    for (uint32_t y : lines[x]) {
      const uint32_t j = other[y];
      if (hits[j] == 0.0) touched.push_back(j);
      hits[j] += 1.0;
    }
    uint32_t best = own[x];
    double best_cost = 0.0;
    for (uint32_t i = 0; i <= own_count; ++i) {
      const uint32_t g = i == 0 ? own[x] : i - 1;
      double c = base[g];
      for (uint32_t j : touched) c += hits[j] * (l1[g][j] - l0[g][j]);
      if (i == 0 || c < best_cost - 1e-12) {
        best_cost = c;
        best = g;
      }
    }
    next[x] = best;
    for (uint32_t j : touched) hits[j] = 0.0;
  }
  own = std::move(next);
}

std::vector<std::vector<double>> transpose(const std::vector<std::vector<double>>& a, size_t cols) {
  std::vector<std::vector<double>> out(cols, std::vector<double>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < cols; ++j) out[j][i] = a[i][j];
  }
  return out;
}

std::vector<std::vector<uint32_t>> all_rows(const VictimAttackerMatrix& m) {
  std::vector<std::vector<uint32_t>> out;
  for (size_t r = 0; r < m.rows(); ++r) out.push_back(m.row(r));
  return out;
}

std::vector<std::vector<uint32_t>> all_cols(const VictimAttackerMatrix& m) {
  std::vector<std::vector<uint32_t>> out;
  for (size_t c = 0; c < m.cols(); ++c) out.push_back(m.col(c));
  return out;
}

struct Lines {
  std::vector<std::vector<uint32_t>> rows;
  std::vector<std::vector<uint32_t>> cols;
};

State regroup(const VictimAttackerMatrix& m, const Lines& lines, State s) {
  s.cost = codelength(m, s.rg, s.k, s.cg, s.l);
  State best = s;
  for (int iter = 0; iter < 30; ++iter) {
    regroup_lines(lines.rows, s.rg, s.k, s.cg, s.l, block_ones(m, s.rg, s.k, s.cg, s.l));
    s.k = compact(s.rg);
    regroup_lines(lines.cols, s.cg, s.l, s.rg, s.k, transpose(block_ones(m, s.rg, s.k, s.cg, s.l), s.l));
    s.l = compact(s.cg);
    s.cost = codelength(m, s.rg, s.k, s.cg, s.l);
    if (s.cost < best.cost - 1e-9) {
      best = s;
    } else {
      break;
    }
  }
  return best;
}

// Splits the group of `own` with the highest per-line entropy: the line
// farthest from the group centroid seeds a new group, and every line closer to
// that seed than to the centroid follows it. Returns false if nothing moved.
bool split_group(const std::vector<std::vector<uint32_t>>& lines, size_t other_size, std::vector<uint32_t>& own,
                 uint32_t& own_count, const std::vector<double>& entropy_per_line) {
  const auto sizes = group_sizes(own, own_count);
  int64_t target = -1;
  for (uint32_t g = 0; g < own_count; ++g) {
    if (sizes[g] < 2.0) continue;
    if (target < 0 || entropy_per_line[g] > entropy_per_line[static_cast<size_t>(target)]) target = g;
  }
  if (target < 0) return false;
  const auto group = static_cast<uint32_t>(target);

  std::vector<double> freq(other_size, 0.0);
  double group_ones = 0.0;
  for (size_t x = 0; x < lines.size(); ++x) {
    if (own[x] != group) continue;
    for (uint32_t y : lines[x]) freq[y] += 1.0;
    group_ones += static_cast<double>(lines[x].size());
  }
  const double a = sizes[group];
  const double mu_total = group_ones / a;
  auto centroid_distance = [&](size_t x) {
    double d = mu_total;
    for (uint32_t y : lines[x]) d += 1.0 - 2.0 * freq[y] / a;
    return d;
  };
  size_t seed = lines.size();
  double seed_d = -1.0;
  for (size_t x = 0; x < lines.size(); ++x) {
    if (own[x] != group) continue;
    const double d = centroid_distance(x);
    if (d > seed_d + 1e-12) {
      seed_d = d;
      seed = x;
    }
  }
  if (seed_d <= 1e-12) return false;

  const auto& s = lines[seed];
  auto hamming = [&](size_t x) {
    std::vector<uint32_t> common;
    std::set_intersection(lines[x].begin(), lines[x].end(), s.begin(), s.end(), std::back_inserter(common));
    return static_cast<double>(lines[x].size() + s.size() - 2 * common.size());
  };
  const uint32_t fresh = own_count;
  size_t moved = 0;
  for (size_t x = 0; x < lines.size(); ++x) {
    if (own[x] != group) continue;
    if (x == seed || hamming(x) < centroid_distance(x)) {
      own[x] = fresh;
      ++moved;
    }
  }
  if (moved == 0 || static_cast<double>(moved) == a) {
    for (auto& g : own) {
      if (g == fresh) g = group;
    }
    return false;
  }
  ++own_count;
  return true;
}

std::vector<double> row_entropy(const VictimAttackerMatrix& m, const State& s) {
  const auto ones = block_ones(m, s.rg, s.k, s.cg, s.l);
  const auto rs = group_sizes(s.rg, s.k), cs = group_sizes(s.cg, s.l);
  std::vector<double> out(s.k, 0.0);
  for (uint32_t i = 0; i < s.k; ++i) {
    for (uint32_t j = 0; j < s.l; ++j) out[i] += entropy_bits(ones[i][j], rs[i] * cs[j]);
    out[i] /= rs[i];
  }
  return out;
}

std::vector<double> col_entropy(const VictimAttackerMatrix& m, const State& s) {
  const auto ones = block_ones(m, s.rg, s.k, s.cg, s.l);
  const auto rs = group_sizes(s.rg, s.k), cs = group_sizes(s.cg, s.l);
  std::vector<double> out(s.l, 0.0);
  for (uint32_t j = 0; j < s.l; ++j) {
    for (uint32_t i = 0; i < s.k; ++i) out[j] += entropy_bits(ones[i][j], rs[i] * cs[j]);
    out[j] /= cs[j];
  }
  return out;
}

}  // namespace

double codelength(const VictimAttackerMatrix& m, const std::vector<uint32_t>& row_groups, uint32_t k,
                  const std::vector<uint32_t>& col_groups, uint32_t l) {
  const auto rs = group_sizes(row_groups, k);
  const auto cs = group_sizes(col_groups, l);
  const auto ones = block_ones(m, row_groups, k, col_groups, l);
  double bits = log_star(k) + log_star(l) + partition_cost(rs) + partition_cost(cs);
  for (uint32_t i = 0; i < k; ++i) {
    for (uint32_t j = 0; j < l; ++j) {
      const double cells = rs[i] * cs[j];
      bits += std::ceil(std::log2(cells + 1.0));
      bits += entropy_bits(ones[i][j], cells);
    }
  }
  return bits;
}

std::vector<std::vector<double>> CoClustering::block_density(const VictimAttackerMatrix& m) const {
  auto ones = block_ones(m, row_groups, k, col_groups, l);
  const auto rs = group_sizes(row_groups, k), cs = group_sizes(col_groups, l);
  for (uint32_t i = 0; i < k; ++i) {
    for (uint32_t j = 0; j < l; ++j) {
      const double cells = rs[i] * cs[j];
      ones[i][j] = cells > 0 ? ones[i][j] / cells : 0.0;
    }
  }
  return ones;
}

CoClustering cross_associate(const VictimAttackerMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("cross-association needs a non-empty matrix");
  const Lines lines{all_rows(m), all_cols(m)};
  State cur;
  cur.rg.assign(m.rows(), 0);
  cur.cg.assign(m.cols(), 0);
  cur.cost = codelength(m, cur.rg, 1, cur.cg, 1);

  CoClustering out;
  out.history.push_back(cur.cost);
  const size_t max_moves = 4 * (m.rows() + m.cols());
  for (size_t move = 0; move < max_moves; ++move) {
    bool accepted = false;
    for (int proposal = 0; proposal < 3 && !accepted; ++proposal) {
      State cand = cur;
      bool split = false;
      if (proposal == 0 || proposal == 2) split |= split_group(lines.rows, m.cols(), cand.rg, cand.k, row_entropy(m, cur));
      if (proposal == 1 || proposal == 2) split |= split_group(lines.cols, m.rows(), cand.cg, cand.l, col_entropy(m, cur));
      if (!split) continue;
      cand = regroup(m, lines, std::move(cand));
      if (cand.cost < cur.cost - 1e-9) {
        cur = std::move(cand);
        accepted = true;
      }
    }
    if (!accepted) break;
    if (cur.cost > out.history.back()) throw std::logic_error("cross-association codelength increased");
    out.history.push_back(cur.cost);
  }
  out.row_groups = cur.rg;
  out.col_groups = cur.cg;
  out.k = cur.k;
  out.l = cur.l;
  out.codelength = cur.cost;
  return out;
}

}  // namespace cpb

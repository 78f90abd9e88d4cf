#pragma once

#include <cstdint>
#include <vector>

#include "cpb/corpus.hpp"

namespace cpb {

// Binary victims x attackers matrix, stored sparsely both ways.
class VictimAttackerMatrix {
 public:
  VictimAttackerMatrix() = default;
  // rows[r] lists the column indices set in row r.
  VictimAttackerMatrix(size_t cols, std::vector<std::vector<uint32_t>> rows);

  static VictimAttackerMatrix from_logs(const std::vector<OrgLog>& logs);

  size_t rows() const { return row_cols_.size(); }
  size_t cols() const { return col_rows_.size(); }
  size_t ones() const { return ones_; }
  double density() const;
  const std::vector<uint32_t>& row(size_t r) const { return row_cols_[r]; }
  const std::vector<uint32_t>& col(size_t c) const { return col_rows_[c]; }
  bool at(size_t r, size_t c) const;

  // Column index -> source, when built from logs.
  const std::vector<Subnet24>& sources() const { return sources_; }

 private:
  std::vector<std::vector<uint32_t>> row_cols_;
  std::vector<std::vector<uint32_t>> col_rows_;
  std::vector<Subnet24> sources_;
  size_t ones_ = 0;
};

struct CoClustering {
  std::vector<uint32_t> row_groups;
  std::vector<uint32_t> col_groups;
  uint32_t k = 1;
  uint32_t l = 1;
  double codelength = 0.0;
  // Total codelength after the start and after every accepted move.
  std::vector<double> history;

  // Ones in block (i, j) divided by its cell count.
  std::vector<std::vector<double>> block_density(const VictimAttackerMatrix& m) const;
};

// log2(x) + log2(log2(x)) + ... over the positive terms.
double log_star(double x);

// Model description plus block data cost, in bits.
double codelength(const VictimAttackerMatrix& m, const std::vector<uint32_t>& row_groups, uint32_t k,
                  const std::vector<uint32_t>& col_groups, uint32_t l);

// Parameter-free MDL co-clustering: grows the number of row/column groups by
// split proposals, re-assigning rows and columns after each, and keeps a
// proposal only if the total codelength strictly decreases.
CoClustering cross_associate(const VictimAttackerMatrix& m);

}  // namespace cpb

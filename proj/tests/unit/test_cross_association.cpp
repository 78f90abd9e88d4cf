#include <doctest.h>

#include <cmath>
#include <set>

#include "cpb/cross_association.hpp"
#include "fixtures.hpp"

using namespace cpb;
using fixtures::make_log;

namespace {

VictimAttackerMatrix dense(const std::vector<std::vector<int>>& bits) {
  std::vector<std::vector<uint32_t>> rows;
  for (const auto& r : bits) {
    std::vector<uint32_t> cols;
    for (size_t c = 0; c < r.size(); ++c) {
      if (r[c]) cols.push_back(static_cast<uint32_t>(c));
    }
    rows.push_back(cols);
  }
  return VictimAttackerMatrix(bits.empty() ? 0 : bits[0].size(), rows);
}

double oracle_log_star(double x) {
  double t = std::log2(x), s = 0.0;
  while (t > 0.0) {
    s += t;
    t = std::log2(t);
  }
  return s;
}

double oracle_index_cost(std::vector<double> sizes) {
  std::sort(sizes.rbegin(), sizes.rend());
  const double k = static_cast<double>(sizes.size());
  double bits = 0.0;
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    double rest = 0.0;
    for (size_t t = i; t < sizes.size(); ++t) rest += sizes[t];
    const double abar = rest - k + static_cast<double>(i) + 1.0;
    if (abar > 1.0) bits += std::ceil(std::log2(abar));
  }
  return bits;
}

// Codelength from a dense walk over every cell.
double oracle_codelength(const std::vector<std::vector<int>>& bits, const std::vector<uint32_t>& rg, uint32_t k,
                         const std::vector<uint32_t>& cg, uint32_t l) {
  std::vector<double> rs(k), cs(l);
  for (auto g : rg) rs[g] += 1;
  for (auto g : cg) cs[g] += 1;
  double total = oracle_log_star(k) + oracle_log_star(l) + oracle_index_cost(rs) + oracle_index_cost(cs);
  for (uint32_t i = 0; i < k; ++i) {
    for (uint32_t j = 0; j < l; ++j) {
      double n = 0, n1 = 0;
      for (size_t r = 0; r < bits.size(); ++r) {
        for (size_t c = 0; c < bits[r].size(); ++c) {
          if (rg[r] == i && cg[c] == j) {
            n += 1;
            n1 += bits[r][c];
          }
        }
      }
      total += std::ceil(std::log2(n + 1));
      if (n1 > 0 && n1 < n) total += -n1 * std::log2(n1 / n) - (n - n1) * std::log2((n - n1) / n);
    }
  }
  return total;
}

std::vector<std::vector<int>> random_bits(SimRng& rng, size_t r, size_t c, double p) {
  std::vector<std::vector<int>> out(r, std::vector<int>(c));
  for (auto& row : out) {
    for (auto& x : row) x = rng.bernoulli(p);
  }
  return out;
}

}  // namespace

TEST_CASE("log star values") {
  CHECK(log_star(1) == 0.0);
  CHECK(log_star(2) == doctest::Approx(1.0));
  CHECK(log_star(16) == doctest::Approx(7.0));
  CHECK(log_star(3) == doctest::Approx(oracle_log_star(3)));
}

TEST_CASE("codelength worked example") {
  // One block of four cells with two ones: 3 bits for the count, 4 for the data.
  const std::vector<std::vector<int>> bits = {{1, 0}, {0, 1}};
  CHECK(codelength(dense(bits), {0, 0}, 1, {0, 0}, 1) == doctest::Approx(7.0));
  // Pure blocks cost nothing beyond their counts and the model.
  CHECK(codelength(dense(bits), {0, 1}, 2, {0, 1}, 2) == doctest::Approx(oracle_codelength(bits, {0, 1}, 2, {0, 1}, 2)));
}

TEST_CASE("codelength matches the dense oracle") {
  SimRng rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t r = 1 + rng.below(8), c = 1 + rng.below(8);
    const auto bits = random_bits(rng, r, c, rng.uniform());
    const uint32_t k = static_cast<uint32_t>(1 + rng.below(r)), l = static_cast<uint32_t>(1 + rng.below(c));
    std::vector<uint32_t> rg(r), cg(c);
    for (size_t i = 0; i < r; ++i) rg[i] = static_cast<uint32_t>(i < k ? i : rng.below(k));
    for (size_t j = 0; j < c; ++j) cg[j] = static_cast<uint32_t>(j < l ? j : rng.below(l));
    CHECK(codelength(dense(bits), rg, k, cg, l) == doctest::Approx(oracle_codelength(bits, rg, k, cg, l)));
  }
}

TEST_CASE("matrix from logs") {
  const std::vector<OrgLog> logs = {make_log("a", {{0, 5}, {1, 5}, {1, 7}}), make_log("b", {{0, 7}})};
  const auto m = VictimAttackerMatrix::from_logs(logs);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m.ones() == 3);
  CHECK(m.density() == doctest::Approx(0.75));
  CHECK(m.sources() == std::vector<Subnet24>{Subnet24(5), Subnet24(7)});
  CHECK(m.at(0, 0));
  CHECK_FALSE(m.at(1, 0));
  CHECK(m.col(1) == std::vector<uint32_t>{0, 1});
}

TEST_CASE("cross-association history never increases") {
  SimRng rng(82);
  for (int trial = 0; trial < 15; ++trial) {
    const auto bits = random_bits(rng, 3 + rng.below(15), 3 + rng.below(30), 0.05 + 0.5 * rng.uniform());
    const auto m = dense(bits);
    if (m.ones() == 0) continue;
    const auto cc = cross_associate(m);
    REQUIRE_FALSE(cc.history.empty());
    for (size_t i = 1; i < cc.history.size(); ++i) CHECK(cc.history[i] < cc.history[i - 1]);
    CHECK(cc.codelength == doctest::Approx(cc.history.back()));
    CHECK(cc.codelength == doctest::Approx(codelength(m, cc.row_groups, cc.k, cc.col_groups, cc.l)));
    CHECK(cc.codelength <= codelength(m, std::vector<uint32_t>(m.rows(), 0), 1, std::vector<uint32_t>(m.cols(), 0), 1) + 1e-9);
    std::set<uint32_t> used(cc.row_groups.begin(), cc.row_groups.end());
    CHECK(used.size() == cc.k);
  }
}

TEST_CASE("cross-association recovers planted blocks") {
  std::vector<std::vector<int>> bits(12, std::vector<int>(24, 0));
  for (size_t r = 0; r < 12; ++r) {
    for (size_t c = 0; c < 24; ++c) bits[r][c] = (r < 6) == (c < 12);
  }
  const auto cc = cross_associate(dense(bits));
  CHECK(cc.k == 2);
  CHECK(cc.l == 2);
  for (size_t r = 0; r < 12; ++r) CHECK((cc.row_groups[r] == cc.row_groups[0]) == (r < 6));
  for (size_t c = 0; c < 24; ++c) CHECK((cc.col_groups[c] == cc.col_groups[0]) == (c < 12));
  const auto density = cc.block_density(dense(bits));
  CHECK(density[cc.row_groups[0]][cc.col_groups[0]] == 1.0);
  CHECK(density[cc.row_groups[0]][cc.col_groups[23]] == 0.0);
}

TEST_CASE("cross-association rejects an empty matrix") {
  CHECK_THROWS(cross_associate(VictimAttackerMatrix(0, {{}, {}})));
}

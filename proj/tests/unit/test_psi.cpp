#include <doctest.h>

#include <algorithm>
#include <thread>

#include "cpb/psi.hpp"
#include "cpb/random.hpp"

using namespace cpb;

namespace {

std::vector<PsiElement> random_set(SimRng& rng, size_t n, uint64_t pool) {
  std::vector<PsiElement> out;
  for (size_t i = 0; i < n; ++i) out.push_back(rng.below(pool));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

size_t intersection_size(const std::vector<PsiElement>& a, const std::vector<PsiElement>& b) {
  std::vector<PsiElement> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out.size();
}

std::array<uint8_t, 8> be(PsiElement e) {
  std::array<uint8_t, 8> out;
  for (int i = 0; i < 8; ++i) out[static_cast<size_t>(i)] = static_cast<uint8_t>(e >> (56 - 8 * i));
  return out;
}

bool contains(const Bytes& hay, const Bytes& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

TEST_CASE("PSI-CA cardinality matches set intersection") {
  SimRng rng(21);
  for (GroupId g : {GroupId::ristretto255, GroupId::modp2048}) {
    for (int trial = 0; trial < (g == GroupId::modp2048 ? 3 : 15); ++trial) {
      const auto a = random_set(rng, rng.below(30), 60);
      const auto b = random_set(rng, rng.below(30), 60);
      const auto r = psi_ca(a, b, PsiOptions{g, static_cast<uint64_t>(trial)});
      CHECK(r.cardinality == intersection_size(a, b));
    }
  }
}

TEST_CASE("PSI-CA degenerate inputs") {
  CHECK(psi_ca({}, {1, 2}).cardinality == 0);
  CHECK(psi_ca({1, 2}, {}).cardinality == 0);
  CHECK(psi_ca({5, 5, 5}, {5}).cardinality == 1);
  CHECK(psi_ca({1, 2, 3}, {1, 2, 3}).cardinality == 3);
}

TEST_CASE("mutual PSI-CA is symmetric") {
  const auto r = mutual_psi_ca({1, 2, 3, 4}, {3, 4, 5}, PsiOptions{GroupId::ristretto255, 3});
  CHECK(r.a_learns == 2);
  CHECK(r.b_learns == 2);
  CHECK(r.a_as_client.total_bytes() > 0);
}

TEST_CASE("PSI-DT returns exactly the intersecting records") {
  SimRng rng(22);
  for (int trial = 0; trial < 15; ++trial) {
    const auto a = random_set(rng, rng.below(25), 50);
    PsiRecords server;
    for (auto e : random_set(rng, rng.below(25), 50)) server[e] = Bytes(rng.below(12), static_cast<uint8_t>(e));
    const auto r = psi_dt(a, server, PsiOptions{GroupId::ristretto255, static_cast<uint64_t>(trial)});
    PsiRecords expected;
    for (auto e : a) {
      if (server.count(e)) expected[e] = server.at(e);
    }
    CHECK(r.records == expected);
  }
}

TEST_CASE("PSI-DT on the modp group") {
  PsiRecords server = {{7, {1, 2}}, {9, {3}}};
  const auto r = psi_dt({7, 8}, server, PsiOptions{GroupId::modp2048, 1});
  CHECK(r.records == PsiRecords{{7, {1, 2}}});
}

TEST_CASE("seeded runs are reproducible") {
  std::vector<Frame> t1, t2;
  for (auto* t : {&t1, &t2}) {
    Drbg cr(5), sr(6);
    const auto g = make_group(GroupId::ristretto255);
    PsiCaClient c({1, 2, 3}, g, cr);
    PsiCaServer s({2, 3, 4}, g, sr);
    run_in_process(c, s, t);
  }
  CHECK(t1 == t2);
}

TEST_CASE("transcripts do not reveal raw elements or their hashes") {
  const auto g = make_group(GroupId::ristretto255);
  const std::vector<PsiElement> client_set = {0x1111222233334444ull, 0x5555666677778888ull};
  const std::vector<PsiElement> server_set = {0x1111222233334444ull, 0x0000999900009999ull};
  Drbg cr(1), sr(2);
  PsiCaClient c(client_set, g, cr);
  PsiCaServer s(server_set, g, sr);
  std::vector<Frame> transcript;
  run_in_process(c, s, &transcript);
  for (const auto& f : transcript) {
    for (auto e : client_set) {
      const auto raw = be(e);
      CHECK_FALSE(contains(f.payload, Bytes(raw.begin(), raw.end())));
      CHECK_FALSE(contains(f.payload, g->hash_to_group(raw)));
    }
    for (auto e : server_set) CHECK_FALSE(contains(f.payload, g->hash_to_group(be(e))));
  }
  CHECK(c.cardinality() == 1);
  CHECK(s.peer_set_size() == 2);
  CHECK(c.peer_set_size() == 2);
}

TEST_CASE("out-of-order frames abort") {
  const auto g = make_group(GroupId::ristretto255);
  Drbg rng(1);
  PsiCaServer s({1}, g, rng);
  try {
    s.handle(Frame{MessageType::blinded_batch, {}});
    FAIL("expected abort");
  } catch (const ProtocolAbort& e) {
    CHECK(e.reason == AbortReason::unexpected_message);
  }
  PsiCaClient c({1}, g, rng);
  c.start();
  CHECK_THROWS_AS(c.start(), ProtocolAbort);
  CHECK_THROWS_AS(c.cardinality(), std::logic_error);
}

TEST_CASE("group and protocol mismatches abort") {
  Drbg rng(1);
  PsiCaClient c({1}, make_group(GroupId::ristretto255), rng);
  PsiCaServer s({1}, make_group(GroupId::modp2048), rng);
  const auto hello = c.start().at(0);
  try {
    s.handle(hello);
    FAIL("expected abort");
  } catch (const ProtocolAbort& e) {
    CHECK(e.reason == AbortReason::group_mismatch);
  }
  PsiDtServer dt({}, make_group(GroupId::ristretto255), rng);
  try {
    dt.handle(hello);
    FAIL("expected abort");
  } catch (const ProtocolAbort& e) {
    CHECK(e.reason == AbortReason::protocol_mismatch);
  }
}

TEST_CASE("malformed and invalid elements abort") {
  const auto g = make_group(GroupId::ristretto255);
  Drbg rng(1);
  PsiCaClient c({1}, g, rng);
  PsiCaServer s({1}, g, rng);
  s.handle(c.start().at(0));
  CHECK_THROWS_AS(s.handle(Frame{MessageType::blinded_batch, {0, 0}}), ProtocolAbort);

  PsiCaClient c2({1}, g, rng);
  PsiCaServer s2({1}, g, rng);
  s2.handle(c2.start().at(0));
  ByteWriter w;
  w.u32(1).raw(Bytes(g->element_size(), 0xFF));
  try {
    s2.handle(Frame{MessageType::blinded_batch, w.take()});
    FAIL("expected abort");
  } catch (const ProtocolAbort& e) {
    CHECK(e.reason == AbortReason::crypto_failure);
  }
}

TEST_CASE("peer abort is surfaced") {
  const auto g = make_group(GroupId::ristretto255);
  Drbg rng(1);
  PsiCaClient c({1}, g, rng);
  c.start();
  CHECK_THROWS_WITH_AS(c.handle(make_abort(AbortReason::crypto_failure, "boom")), doctest::Contains("boom"),
                       ProtocolAbort);
}

TEST_CASE("drive runs both roles over sockets") {
  auto [ta, tb] = make_socket_pair();
  const auto g = make_group(GroupId::ristretto255);
  Drbg cr(1), sr(2);
  PsiDtClient c({1, 2, 3}, g, cr);
  PsiDtServer s({{2, {0xAB}}, {4, {0xCD}}}, g, sr);
  std::thread server([&, &tb = tb] { drive(s, *tb); });
  drive(c, *ta);
  server.join();
  CHECK(c.records() == PsiRecords{{2, {0xAB}}});
}

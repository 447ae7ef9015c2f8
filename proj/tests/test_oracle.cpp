#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "gaz/oracle.hpp"

using namespace gaz;

namespace {

// independent of jsspExact: walk every multiset permutation of job ids
Real enumerateJssp(const JsspInstance& inst) {
  std::vector<Real> c(inst.m, 0), e(inst.k, 0);
  std::vector<int> nxt(inst.k, 0);
  Real best = 1e18;
  auto rec = [&](auto&& self, int placed) -> void {
    if (placed == inst.k * inst.m) {
      best = std::min(best, *std::max_element(c.begin(), c.end()));
      return;
    }
    for (int i = 0; i < inst.k; ++i) {
      if (nxt[i] >= inst.m) continue;
      int op = nxt[i];
      int mach = inst.machineOrder(i, op) - 1;
      Real oc = c[mach], oe = e[i];
      Real start = std::max(oc, oe);
      c[mach] = e[i] = start + inst.times(i, op);
      nxt[i] = op + 1;
      self(self, placed + 1);
      c[mach] = oc;
      e[i] = oe;
      nxt[i] = op;
    }
  };
  rec(rec, 0);
  return best;
}

}  // namespace

TEST_CASE("Held-Karp solves the unit square") {
  TspInstance inst;
  inst.nodes.resize(4, 2);
  inst.nodes << 0, 0, 1, 0, 1, 1, 0, 1;
  CHECK(heldKarp(inst) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("Held-Karp matches brute force on random instances") {
  for (uint64_t seed = 0; seed < 12; ++seed) {
    auto inst = tspGenerate(8, seed);
    CHECK(heldKarp(inst) == doctest::Approx(bruteForceTsp(inst)).epsilon(1e-12));
  }
  for (uint64_t seed = 50; seed < 56; ++seed) {
    auto inst = tspGenerate(2 + int(seed % 5), seed);
    CHECK(heldKarp(inst) == doctest::Approx(bruteForceTsp(inst)).epsilon(1e-12));
  }
}

TEST_CASE("Held-Karp rejects instances over the memory cap") {
  CHECK_THROWS_WITH((void)heldKarp(tspGenerate(19, 1)), "Held-Karp cap is n <= 18");
}

TEST_CASE("nearest neighbor walks collinear points end to end") {
  TspInstance inst;
  inst.nodes.resize(5, 2);
  for (int i = 0; i < 5; ++i) {
    inst.nodes(i, 0) = 0.25 * i;
    inst.nodes(i, 1) = 0.5;
  }
  CHECK(nearestNeighborTsp(inst) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("nearest neighbor never beats the optimum") {
  for (uint64_t seed = 100; seed < 110; ++seed) {
    auto inst = tspGenerate(10, seed);
    CHECK(nearestNeighborTsp(inst) >= heldKarp(inst) - 1e-9);
  }
}

TEST_CASE("single-job and single-machine schedules are trivially exact") {
  auto one = jsspGenerate(1, 4, 3);
  auto r = jsspExact(one);
  CHECK(r.proven);
  CHECK(r.makespan == doctest::Approx(one.times.sum()).epsilon(1e-12));
  CHECK(sptJssp(one) == doctest::Approx(one.times.sum()).epsilon(1e-12));

  auto serial = jsspGenerate(2, 1, 4);
  CHECK(jsspExact(serial).makespan == doctest::Approx(serial.times.sum()).epsilon(1e-12));
}

TEST_CASE("branch and bound matches plain enumeration") {
  for (uint64_t seed = 0; seed < 12; ++seed) {
    auto inst = jsspGenerate(3, 3, seed);
    auto r = jsspExact(inst);
    CHECK(r.proven);
    CHECK(r.makespan == doctest::Approx(enumerateJssp(inst)).epsilon(1e-12));
  }
  for (uint64_t seed = 20; seed < 26; ++seed) {
    auto inst = jsspGenerate(2, 4, seed);
    CHECK(jsspExact(inst).makespan == doctest::Approx(enumerateJssp(inst)).epsilon(1e-12));
  }
}

TEST_CASE("above the cap a node budget is required") {
  auto inst = jsspGenerate(4, 4, 5);
  CHECK_THROWS(jsspExact(inst));
  auto r = jsspExact(inst, 200000);
  CHECK(r.makespan > 0);
  CHECK(r.makespan <= sptJssp(inst) + 1e-12);
  if (r.proven) {
    auto spt = sptJssp(inst);
    CHECK(r.makespan <= spt + 1e-12);
  }
}

TEST_CASE("SPT dispatching is deterministic and feasible") {
  auto inst = jsspGenerate(5, 4, 6);
  Real a = sptJssp(inst);
  CHECK(a == sptJssp(inst));
  CHECK(a >= jsspExact(inst, 500000).makespan - 1e-12);
}

TEST_CASE("gap arithmetic matches the published table") {
  CHECK(gap(3.84, 3.84) == doctest::Approx(0.0));
  CHECK(gap(1547.4, 1228.9) == doctest::Approx(0.2592).epsilon(5e-4));
  CHECK_THROWS(gap(1.0, 0.0));

  auto rep = gapReport("x", 1547.4, 1228.9, false);
  CHECK(!rep.anomaly);
  auto bad = gapReport("y", 1200.0, 1228.9, true);
  CHECK(bad.anomaly);
  auto ok = gapReport("z", 1231.0, 1228.9, true);
  CHECK(!ok.anomaly);
}

TEST_CASE("paired-game identities hold on random toy problems") {
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    auto mdp = TabularMdp::random(rng, 3, 3, 3);
    auto pi = TabularPolicy::random(mdp, rng);
    auto mu = TabularPolicy::random(mdp, rng);
    auto pt = TabularPolicy::random(mdp, rng);
    auto rep = lemma1Check(mdp, pi, mu, pt);
    CHECK(rep.pass);
    CHECK(rep.maxDeviation <= 1e-12);
    CHECK(rep.checks > 0);
  }
}

TEST_CASE("identical policies tie the paired game from any shared state") {
  Rng rng(7);
  auto mdp = TabularMdp::random(rng, 3, 2, 2);
  auto pi = TabularPolicy::random(mdp, rng);
  PolicyFn<int> f = [&](int s) { return pi(s); };
  for (int s = 0; s < mdp.stateCount(); ++s)
    CHECK(std::abs(exactPairedValue(mdp, f, f, s, s)) <= 1e-12);
}

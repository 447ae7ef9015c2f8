#include "gaz/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gaz {

Real heldKarp(const TspInstance& inst) {
  int n = inst.n();
  require(n >= 2, "TSP instance needs n >= 2");
  require(n <= 18, "Held-Karp cap is n <= 18");
  int r = n - 1;  // nodes 1..n-1; tours anchored at node 0
  std::vector<Real> dist0(r), d(size_t(r) * r);
  for (int i = 0; i < r; ++i) {
    dist0[i] = inst.dist(0, i + 1);
    for (int j = 0; j < r; ++j) d[size_t(i) * r + j] = inst.dist(i + 1, j + 1);
  }
  size_t full = size_t(1) << r;
  const Real inf = 1e18;
  std::vector<Real> dp(full * r, inf);
  for (int j = 0; j < r; ++j) dp[(size_t(1) << j) * r + j] = dist0[j];
  for (size_t S = 1; S < full; ++S) {
    for (int j = 0; j < r; ++j) {
      Real cur = dp[S * r + j];
      if (cur >= inf || !(S >> j & 1)) continue;
      for (int t = 0; t < r; ++t) {
        if (S >> t & 1) continue;
        size_t S2 = S | (size_t(1) << t);
        Real cand = cur + d[size_t(j) * r + t];
        if (cand < dp[S2 * r + t]) dp[S2 * r + t] = cand;
      }
    }
  }
  Real best = inf;
  for (int j = 0; j < r; ++j) best = std::min(best, dp[(full - 1) * r + j] + dist0[j]);
  return best;
}

Real bruteForceTsp(const TspInstance& inst) {
  int n = inst.n();
  require(n <= 10, "brute force cap is n <= 10");
  std::vector<int> perm(n - 1);
  std::iota(perm.begin(), perm.end(), 1);
  Real best = 1e18;
  do {
    Real len = inst.dist(0, perm.front()) + inst.dist(perm.back(), 0);
    for (size_t i = 0; i + 1 < perm.size(); ++i) len += inst.dist(perm[i], perm[i + 1]);
    best = std::min(best, len);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Real nearestNeighborTsp(const TspInstance& inst) {
  int n = inst.n();
  std::vector<bool> used(n, false);
  used[0] = true;
  int cur = 0;
  Real len = 0;
  for (int step = 1; step < n; ++step) {
    int best = -1;
    Real bd = 1e18;
    for (int j = 0; j < n; ++j)
      if (!used[j] && inst.dist(cur, j) < bd) {
        bd = inst.dist(cur, j);
        best = j;
      }
    used[best] = true;
    len += bd;
    cur = best;
  }
  return len + inst.dist(cur, 0);
}

namespace {

struct BnB {
  const JsspInstance& inst;
  uint64_t budget;  // 0 = unlimited
  uint64_t nodes = 0;
  bool exhausted = false;
  Real best = 1e18;
  std::vector<Real> jobTail;   // remaining processing time per job, updated on the fly
  std::vector<Real> machWork;  // remaining work per machine

  explicit BnB(const JsspInstance& i, uint64_t b) : inst(i), budget(b) {
    jobTail.assign(inst.k, 0);
    machWork.assign(inst.m, 0);
    for (int i2 = 0; i2 < inst.k; ++i2)
      for (int j = 0; j < inst.m; ++j) {
        jobTail[i2] += inst.times(i2, j);
        machWork[inst.machineOrder(i2, j) - 1] += inst.times(i2, j);
      }
  }

  Real lowerBound(const Vec& c, const Vec& e, const VecI& nxt) const {
    Real lb = 0;
    for (int i = 0; i < inst.k; ++i)
      if (nxt[i] < inst.m) lb = std::max(lb, e[i] + jobTail[i]);
    for (int l = 0; l < inst.m; ++l)
      if (machWork[l] > 0) lb = std::max(lb, c[l] + machWork[l]);
    for (int l = 0; l < inst.m; ++l) lb = std::max(lb, c[l]);
    for (int i = 0; i < inst.k; ++i) lb = std::max(lb, e[i]);
    return lb;
  }

  void dfs(Vec c, Vec e, VecI nxt, int scheduled) {
    if (budget && nodes >= budget) {
      exhausted = true;
      return;
    }
    ++nodes;
    if (scheduled == inst.k * inst.m) {
      best = std::min(best, c.maxCoeff());
      return;
    }
    if (lowerBound(c, e, nxt) >= best) return;
    // Giffler-Thompson branching: find the earliest possible completion C*
    // and branch on the conflict set of its machine.
    Real cStar = 1e18;
    int mStar = -1;
    for (int i = 0; i < inst.k; ++i) {
      if (nxt[i] >= inst.m) continue;
      int mach = inst.machineOrder(i, nxt[i]) - 1;
      Real done = std::max(c[mach], e[i]) + inst.times(i, nxt[i]);
      if (done < cStar) {
        cStar = done;
        mStar = mach;
      }
    }
    std::vector<std::pair<Real, int>> conflict;  // (earliest completion, job)
    for (int i = 0; i < inst.k; ++i) {
      if (nxt[i] >= inst.m) continue;
      int mach = inst.machineOrder(i, nxt[i]) - 1;
      if (mach != mStar) continue;
      Real start = std::max(c[mach], e[i]);
      if (start < cStar) conflict.emplace_back(start + inst.times(i, nxt[i]), i);
    }
    std::sort(conflict.begin(), conflict.end());
    for (auto& [done, i] : conflict) {
      int op = nxt[i];
      Real p = inst.times(i, op);
      Real start = std::max(c[mStar], e[i]);
      Vec c2 = c, e2 = e;
      VecI n2 = nxt;
      c2[mStar] = start + p;
      e2[i] = start + p;
      n2[i] = op + 1;
      jobTail[i] -= p;
      machWork[mStar] -= p;
      dfs(std::move(c2), std::move(e2), std::move(n2), scheduled + 1);
      jobTail[i] += p;
      machWork[mStar] += p;
      if (exhausted) return;
    }
  }
};

}  // namespace

JsspExactResult jsspExact(const JsspInstance& inst, uint64_t nodeBudget) {
  require(inst.k * inst.m <= 12 || nodeBudget > 0,
          "instance above the enumeration cap requires a branch-and-bound node budget");
  BnB bnb(inst, nodeBudget);
  bnb.best = sptJssp(inst);
  bnb.dfs(Vec::Zero(inst.m), Vec::Zero(inst.k), VecI::Zero(inst.k), 0);
  JsspExactResult res;
  res.makespan = bnb.best;
  res.proven = !bnb.exhausted;
  res.nodes = bnb.nodes;
  return res;
}

Real sptJssp(const JsspInstance& inst) {
  JsspEnv env(inst);
  auto s = env.initialState();
  while (!env.isTerminal(s)) {
    int best = -1;
    Real bp = 1e18;
    for (int i : env.feasibleActions(s)) {
      Real p = inst.times(i, s.nextOp[i]);
      if (p < bp) {
        bp = p;
        best = i;
      }
    }
    s = env.transition(s, best);
  }
  return s.c.maxCoeff();
}

Real gap(Real method, Real reference) {
  require(reference > 0, "gap reference must be positive");
  return method / reference - 1.0;
}

GapReport gapReport(const std::string& id, Real method, Real reference, bool referenceExact) {
  GapReport r;
  r.id = id;
  r.method = method;
  r.reference = reference;
  r.gap = gap(method, reference);
  r.anomaly = referenceExact && r.gap < -1e-9;
  return r;
}

Lemma1Report lemma1Check(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                         const TabularPolicy& piTilde, Real tolerance) {
  Lemma1Report rep;
  PolicyFn<int> fpi = [&](int s) { return pi(s); };
  PolicyFn<int> fmu = [&](int s) { return mu(s); };
  PolicyFn<int> fpt = [&](int s) { return piTilde(s); };
  auto touch = [&](Real dev) {
    rep.maxDeviation = std::max(rep.maxDeviation, std::abs(dev));
    rep.checks++;
  };
  for (int s = 0; s < mdp.stateCount(); ++s) {
    Real vs = exactStateValue(mdp, fpi, s);
    Real vst = exactStateValue(mdp, fpt, s);
    for (int sp = 0; sp < mdp.stateCount(); ++sp) {
      Real vmu = exactStateValue(mdp, fmu, sp);
      Real pairedV = exactPairedValue(mdp, fpi, fmu, s, sp);
      // paired value factorizes: V^{pi,mu}(s,s') = V^pi(s) - V^mu(s')
      touch(pairedV - (vs - vmu));
      // improvement identity: the paired-game gain of replacing pi by pi~
      // equals the single-player gain
      Real lhs = exactPairedValue(mdp, fpt, fmu, s, sp) - pairedV;
      touch(lhs - (vst - vs));
      if (mdp.isTerminal(s)) continue;
      Vec w = piTilde(s);
      auto acts = mdp.feasibleActions(s);
      Real mix = 0, pairedMix = 0;
      for (size_t i = 0; i < acts.size(); ++i) {
        // advantage equivalence: A^{pi,mu}(s,s';a) = A^pi(s,a)
        touch(exactPairedAdvantage(mdp, fpi, fmu, s, sp, acts[i]) -
              exactAdvantage(mdp, fpi, s, acts[i]));
        mix += w[i] * exactActionValue(mdp, fpi, s, acts[i]);
        pairedMix += w[i] * exactPairedActionValue(mdp, fpi, fmu, s, sp, acts[i]);
      }
      // mixture identity: any pi~-weighted Q sum keeps its margin over the
      // state value when both are moved into the paired game
      touch((mix - vs) - (pairedMix - pairedV));
    }
  }
  rep.pass = rep.maxDeviation <= tolerance;
  return rep;
}

}  // namespace gaz

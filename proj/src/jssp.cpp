#include "gaz/jssp.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace gaz {

JsspInstance jsspGenerate(int k, int m, uint64_t seed) {
  require(k >= 1 && m >= 1, "JSSP instance needs k,m >= 1");
  Rng rng = Rng::derive(seed, 0x6a73);
  JsspInstance inst;
  inst.k = k;
  inst.m = m;
  inst.seed = seed;
  inst.machineOrder.resize(k, m);
  inst.times.resize(k, m);
  for (int i = 0; i < k; ++i) {
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 1);
    for (int j = m - 1; j > 0; --j) std::swap(perm[j], perm[rng.uniformInt(j + 1)]);
    for (int j = 0; j < m; ++j) {
      inst.machineOrder(i, j) = perm[j];
      inst.times(i, j) = 1.0 - rng.uniform();  // (0, 1]
    }
  }
  return inst;
}

JsspState JsspEnv::transition(const JsspState& s, int job) const {
  require(job >= 0 && job < inst_.k, "JSSP job id out of range");
  require(s.nextOp[job] < inst_.m, "scheduling a finished job");
  int op = s.nextOp[job];
  int mach = inst_.machineOrder(job, op) - 1;
  Real p = inst_.times(job, op);
  JsspState nxt = s;
  Real start = std::max(s.c[mach], s.e[job]);
  nxt.c[mach] = start + p;
  nxt.e[job] = start + p;
  nxt.nextOp[job] = op + 1;
  nxt.t = s.t + 1;
  return nxt;
}

Real JsspEnv::episodicReward(const JsspState& s) const {
  require(isTerminal(s), "JSSP reward requested on non-terminal state");
  return -s.c.maxCoeff() / 100.0;
}

JsspAugmentation jsspRandomAugmentation(int m, Rng& rng) {
  JsspAugmentation aug;
  aug.scale = std::max(rng.uniformOpen(), 1e-3);
  aug.machinePerm.resize(m);
  std::iota(aug.machinePerm.begin(), aug.machinePerm.end(), 1);
  for (int j = m - 1; j > 0; --j) std::swap(aug.machinePerm[j], aug.machinePerm[rng.uniformInt(j + 1)]);
  return aug;
}

std::pair<JsspInstance, JsspState> jsspAugment(const JsspInstance& inst, const JsspState& s,
                                               const JsspAugmentation& aug) {
  require(aug.scale >= 1e-3 && aug.scale < 1.0 + 1e-12, "augmentation scale out of range");
  std::vector<int> perm = aug.machinePerm;
  if (perm.empty()) {
    perm.resize(inst.m);
    std::iota(perm.begin(), perm.end(), 1);
  }
  require((int)perm.size() == inst.m, "machine permutation arity mismatch");
  JsspInstance outInst = inst;
  outInst.times *= aug.scale;
  for (int i = 0; i < inst.k; ++i)
    for (int j = 0; j < inst.m; ++j) outInst.machineOrder(i, j) = perm[inst.machineOrder(i, j) - 1];
  JsspState outState = s;
  for (int l = 0; l < inst.m; ++l) outState.c[perm[l] - 1] = s.c[l] * aug.scale;
  outState.e = s.e * aug.scale;
  return {std::move(outInst), std::move(outState)};
}

static JsspInstance readLayout(const std::string& path, bool taillardIntegers) {
  std::ifstream f(path);
  require(f.good(), "cannot open: " + path);
  int k = 0, m = 0;
  require(bool(f >> k >> m), "malformed header in " + path);
  require(k >= 1 && m >= 1, "JSSP instance needs k,m >= 1");
  JsspInstance inst;
  inst.k = k;
  inst.m = m;
  inst.machineOrder.resize(k, m);
  inst.times.resize(k, m);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) {
      Real p;
      require(bool(f >> p), "truncated instance file: " + path);
      if (taillardIntegers) {
        require(p == std::floor(p) && p >= 1 && p <= 100, "processing time outside [1,100] in " + path);
        inst.times(i, j) = p / 100.0;
      } else {
        require(p > 0 && p <= 1, "processing time outside (0,1] in " + path);
        inst.times(i, j) = p;
      }
    }
  for (int i = 0; i < k; ++i) {
    std::vector<bool> seen(m, false);
    for (int j = 0; j < m; ++j) {
      int mm;
      require(bool(f >> mm), "truncated instance file: " + path);
      require(mm >= 1 && mm <= m && !seen[mm - 1], "machine row is not a permutation in " + path);
      seen[mm - 1] = true;
      inst.machineOrder(i, j) = mm;
    }
  }
  return inst;
}

JsspInstance parseTaillard(const std::string& path) { return readLayout(path, true); }
JsspInstance jsspRead(const std::string& path) { return readLayout(path, false); }

void jsspWrite(const JsspInstance& inst, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), "cannot open for writing: " + path);
  f << inst.k << " " << inst.m << "\n";
  char buf[48];
  for (int i = 0; i < inst.k; ++i) {
    for (int j = 0; j < inst.m; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", inst.times(i, j));
      f << buf << (j + 1 < inst.m ? " " : "\n");
    }
  }
  for (int i = 0; i < inst.k; ++i)
    for (int j = 0; j < inst.m; ++j) f << inst.machineOrder(i, j) << (j + 1 < inst.m ? " " : "\n");
  require(f.good(), "write failed: " + path);
}

ScheduleCheck validateSchedule(const JsspInstance& inst, const std::vector<int>& actions) {
  require((int)actions.size() == inst.k * inst.m, "action sequence must schedule every operation");
  ScheduleCheck out;
  std::vector<int> nxt(inst.k, 0);
  std::vector<Real> jobEnd(inst.k, 0);
  std::vector<std::vector<ScheduledOp>> byMachine(inst.m);
  for (int job : actions) {
    require(job >= 0 && job < inst.k && nxt[job] < inst.m, "invalid action in schedule");
    int op = nxt[job]++;
    int mach = inst.machineOrder(job, op) - 1;
    Real machEnd = byMachine[mach].empty() ? 0 : byMachine[mach].back().end;
    Real start = std::max(jobEnd[job], machEnd);
    ScheduledOp so{job, op, mach, start, start + inst.times(job, op)};
    jobEnd[job] = so.end;
    byMachine[mach].push_back(so);
    out.ops.push_back(so);
    out.makespan = std::max(out.makespan, so.end);
  }
  for (auto& tl : byMachine)
    for (size_t i = 1; i < tl.size(); ++i)
      require(tl[i].start >= tl[i - 1].end - 1e-12, "machine overlap in schedule");
  for (auto& so : out.ops)
    if (so.op > 0) {
      // precedence: the previous op of the same job must have finished
      for (auto& prev : out.ops)
        if (prev.job == so.job && prev.op == so.op - 1)
          require(so.start >= prev.end - 1e-12, "job precedence violated in schedule");
    }
  return out;
}

}  // namespace gaz

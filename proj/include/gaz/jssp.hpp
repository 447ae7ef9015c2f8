#pragma once

#include "gaz/common.hpp"

#include <string>
#include <vector>

namespace gaz {

struct JsspInstance {
  int k = 0;  // jobs
  int m = 0;  // machines
  Eigen::MatrixXi machineOrder;  // k x m, entries 1..m (one permutation per job)
  Mat times;                     // k x m, entries in (0,1]
  uint64_t seed = 0;
};

struct JsspState {
  Vec c;       // machine availability, length m
  Vec e;       // job availability, length k
  VecI nextOp;  // per-job next operation index, 0..m
  int t = 0;

  Real cMin() const { return c.minCoeff(); }
};

JsspInstance jsspGenerate(int k, int m, uint64_t seed);

class JsspEnv {
 public:
  using State = JsspState;
  using Instance = JsspInstance;

  explicit JsspEnv(JsspInstance inst) : inst_(std::move(inst)) {
    require(inst_.k >= 1 && inst_.m >= 1, "JSSP instance needs k,m >= 1");
  }

  const JsspInstance& instance() const { return inst_; }

  State initialState() const {
    State s;
    s.c = Vec::Zero(inst_.m);
    s.e = Vec::Zero(inst_.k);
    s.nextOp = VecI::Zero(inst_.k);
    return s;
  }

  int horizon() const { return inst_.k * inst_.m; }
  int stepIndex(const State& s) const { return s.t; }
  bool isTerminal(const State& s) const { return (s.nextOp.array() >= inst_.m).all(); }

  std::vector<int> feasibleActions(const State& s) const {
    std::vector<int> jobs;
    for (int i = 0; i < inst_.k; ++i)
      if (s.nextOp[i] < inst_.m) jobs.push_back(i);
    return jobs;
  }

  State transition(const State& s, int job) const;
  Real stepReward(const State&, int) const { return 0; }
  Real episodicReward(const State& s) const;

 private:
  JsspInstance inst_;
};

struct JsspAugmentation {
  Real scale = 1.0;            // shared scalar in (0,1), clamped >= 1e-3
  std::vector<int> machinePerm;  // new id (1-based) per old id; empty = identity
};

JsspAugmentation jsspRandomAugmentation(int m, Rng& rng);

std::pair<JsspInstance, JsspState> jsspAugment(const JsspInstance& inst, const JsspState& s,
                                               const JsspAugmentation& aug);

/// Taillard benchmark layout: "k m" header, k x m integer times in [1,100],
/// k x m machine matrix (1-indexed). Times are rescaled by 1/100 into (0,1].
JsspInstance parseTaillard(const std::string& path);

/// Generated-instance IO mirroring the Taillard layout with real-valued times.
void jsspWrite(const JsspInstance& inst, const std::string& path);
JsspInstance jsspRead(const std::string& path);

struct ScheduledOp {
  int job, op, machine;  // machine 0-indexed here
  Real start, end;
};

/// Independent schedule replay: rebuilds machine timelines for an action
/// sequence, asserts precedence and per-machine no-overlap, returns makespan.
struct ScheduleCheck {
  std::vector<ScheduledOp> ops;
  Real makespan = 0;
};
ScheduleCheck validateSchedule(const JsspInstance& inst, const std::vector<int>& actions);

}  // namespace gaz

#pragma once

#include "gaz/common.hpp"

#include <string>
#include <vector>

namespace gaz {

struct TspInstance {
  Mat nodes;  // n x 2, all coordinates in [0,1]^2
  uint64_t seed = 0;

  int n() const { return int(nodes.rows()); }
  Real dist(int a, int b) const { return (nodes.row(a) - nodes.row(b)).norm(); }
};

/// Relative partial-tour view. At t=0 no anchors exist (start = end = -1).
struct TspState {
  Real len = 0;              // unscaled Euclidean length of the visited path
  int start = -1;            // last visited node
  int end = -1;              // first visited node, eventual return target
  std::vector<int> unvisited;  // ascending node ids
  int t = 0;
};

TspInstance tspGenerate(int n, uint64_t seed);

class TspEnv {
 public:
  using State = TspState;
  using Instance = TspInstance;

  explicit TspEnv(TspInstance inst) : inst_(std::move(inst)) {
    require(inst_.n() >= 2, "TSP instance needs n >= 2");
  }

  const TspInstance& instance() const { return inst_; }

  State initialState() const {
    State s;
    s.unvisited.resize(inst_.n());
    for (int i = 0; i < inst_.n(); ++i) s.unvisited[i] = i;
    return s;
  }

  int horizon() const { return inst_.n(); }
  int stepIndex(const State& s) const { return s.t; }
  bool isTerminal(const State& s) const { return s.unvisited.empty(); }
  std::vector<int> feasibleActions(const State& s) const { return s.unvisited; }

  State transition(const State& s, int action) const;
  Real stepReward(const State&, int) const { return 0; }
  Real episodicReward(const State& s) const;

 private:
  TspInstance inst_;
};

struct TspAugmentation {
  int dihedral = 0;  // 0..7: rotations 0/90/180/270, then each mirrored
  Real scale = 1.0;  // in (0.5, 1.0], anchored at the square center
};

TspAugmentation tspRandomAugmentation(Rng& rng);

/// Applies one transform to the instance coordinates and the state's length.
/// Node ids (and hence the feasible action set) are preserved.
std::pair<TspInstance, TspState> tspAugment(const TspInstance& inst, const TspState& s,
                                            const TspAugmentation& aug);

void tspWrite(const TspInstance& inst, const std::string& path);
TspInstance tspRead(const std::string& path);

}  // namespace gaz

#include "gaz/tsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gaz {

TspInstance tspGenerate(int n, uint64_t seed) {
  require(n >= 2, "TSP instance needs n >= 2");
  Rng rng = Rng::derive(seed, 0x7370);
  TspInstance inst;
  inst.seed = seed;
  inst.nodes.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    inst.nodes(i, 0) = rng.uniform();
    inst.nodes(i, 1) = rng.uniform();
  }
  return inst;
}

TspState TspEnv::transition(const TspState& s, int action) const {
  auto it = std::find(s.unvisited.begin(), s.unvisited.end(), action);
  require(it != s.unvisited.end(), "TSP action already visited");
  TspState nxt = s;
  nxt.unvisited.erase(nxt.unvisited.begin() + (it - s.unvisited.begin()));
  nxt.t = s.t + 1;
  if (s.t == 0) {
    nxt.len = 0;
    nxt.start = action;
    nxt.end = action;
  } else {
    nxt.len = s.len + inst_.dist(s.start, action);
    nxt.start = action;
  }
  return nxt;
}

Real TspEnv::episodicReward(const TspState& s) const {
  require(s.unvisited.empty(), "TSP reward requested on non-terminal state");
  Real tour = s.len + inst_.dist(s.start, s.end);
  return -tour / (std::sqrt(2.0) * inst_.n());
}

TspAugmentation tspRandomAugmentation(Rng& rng) {
  TspAugmentation aug;
  aug.dihedral = rng.uniformInt(8);
  aug.scale = 1.0 - 0.5 * rng.uniform();  // (0.5, 1.0]
  return aug;
}

static void applyDihedral(Real& x, Real& y, int g) {
  // 4 rotations about the square center, optionally composed with a mirror
  if (g >= 4) x = 1.0 - x;
  switch (g & 3) {
    case 0: break;
    case 1: { Real t = x; x = 1.0 - y; y = t; break; }
    case 2: x = 1.0 - x; y = 1.0 - y; break;
    case 3: { Real t = x; x = y; y = 1.0 - t; break; }
  }
}

std::pair<TspInstance, TspState> tspAugment(const TspInstance& inst, const TspState& s,
                                            const TspAugmentation& aug) {
  require(aug.scale > 0 && aug.scale <= 1.0, "augmentation scale out of range");
  TspInstance out = inst;
  for (int i = 0; i < inst.n(); ++i) {
    Real x = inst.nodes(i, 0), y = inst.nodes(i, 1);
    applyDihedral(x, y, aug.dihedral);
    out.nodes(i, 0) = 0.5 + aug.scale * (x - 0.5);
    out.nodes(i, 1) = 0.5 + aug.scale * (y - 0.5);
  }
  TspState st = s;
  st.len = s.len * aug.scale;
  return {std::move(out), std::move(st)};
}

void tspWrite(const TspInstance& inst, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), "cannot open for writing: " + path);
  f << inst.n() << "\n";
  char buf[64];
  for (int i = 0; i < inst.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", inst.nodes(i, 0), inst.nodes(i, 1));
    f << buf;
  }
  require(f.good(), "write failed: " + path);
}

TspInstance tspRead(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open: " + path);
  int n = 0;
  require(bool(f >> n), "malformed header in " + path);
  require(n >= 2, "TSP instance needs n >= 2");
  TspInstance inst;
  inst.nodes.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    Real x, y;
    require(bool(f >> x >> y), "truncated instance file: " + path);
    require(x >= 0 && x <= 1 && y >= 0 && y <= 1, "coordinate out of [0,1]^2 in " + path);
    inst.nodes(i, 0) = x;
    inst.nodes(i, 1) = y;
  }
  return inst;
}

}  // namespace gaz

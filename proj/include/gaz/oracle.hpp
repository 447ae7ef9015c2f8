#pragma once

#include "gaz/jssp.hpp"
#include "gaz/mdp.hpp"
#include "gaz/tsp.hpp"

#include <optional>

namespace gaz {

/// Exact closed-tour optimum by subset dynamic programming. n <= 18.
Real heldKarp(const TspInstance& inst);

/// Exact optimum by enumerating all (n-1)! tours. Test oracle, n <= 10.
Real bruteForceTsp(const TspInstance& inst);

/// Tour built from node 0 by repeatedly visiting the nearest unvisited node.
Real nearestNeighborTsp(const TspInstance& inst);

struct JsspExactResult {
  Real makespan = 0;
  bool proven = false;     // true when search completed within the node budget
  uint64_t nodes = 0;
};

/// Exact minimum makespan over all job sequences: plain enumeration for
/// k*m <= 12, branch-and-bound within nodeBudget otherwise.
JsspExactResult jsspExact(const JsspInstance& inst, uint64_t nodeBudget = 0);

/// Shortest-processing-time dispatching; ties to the lowest job id.
Real sptJssp(const JsspInstance& inst);

struct GapReport {
  std::string id;
  Real method = 0;
  Real reference = 0;
  Real gap = 0;
  bool anomaly = false;  // method beat an exact reference beyond tolerance
};

Real gap(Real method, Real reference);
GapReport gapReport(const std::string& id, Real method, Real reference, bool referenceExact);

struct Lemma1Report {
  bool pass = false;
  Real maxDeviation = 0;
  int checks = 0;
};

/// Executable check of the paired-game value identities on an enumerable toy
/// MDP: advantage equivalence A^{pi,mu}(s,s';a) = A^pi(s,a) for every
/// reachable (s, s', a); the mixture identity
/// sum_a pi~(a|s) Q^{pi,mu}(s,s';a) - V^{pi,mu}(s,s') = sum_a pi~(a|s) Q^pi(s,a) - V^pi(s);
/// and the improvement identity
/// V^{pi~,mu}(s,s') - V^{pi,mu}(s,s') = V^{pi~}(s) - V^pi(s).
Lemma1Report lemma1Check(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                         const TabularPolicy& piTilde, Real tolerance = 1e-12);

}  // namespace gaz

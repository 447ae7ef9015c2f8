#pragma once

#include "gaz/common.hpp"
#include "gaz/jssp.hpp"
#include "gaz/nn/net.hpp"
#include "gaz/search.hpp"
#include "gaz/tsp.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace gaz {

using nn::Latent;
using nn::Tape;

/// Objective = -reward * scale maps the normalized episodic reward back to
/// tour length (TSP) or makespan in instance time units (JSSP).
inline Real envScale(const TspEnv& env) { return std::sqrt(2.0) * env.instance().n(); }
inline Real envScale(const JsspEnv&) { return 100.0; }

inline int argmaxIndex(const Vec& v) {
  require(v.size() > 0, "argmax of an empty vector");
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = int(i);
  return best;
}

inline int sampleIndex(const Vec& probs, Rng& rng) {
  Real u = rng.uniform();
  Real acc = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return int(i);
  }
  return int(probs.size() - 1);
}

template <class Env>
struct Rollout {
  std::vector<typename Env::State> states;  // T+1, terminal last
  std::vector<int> actions;                 // T environment action ids
  Real ret = 0;
};

/// Greedy argmax unroll of a policy net; every encoder pass bumps *evals.
template <class Env, class Net>
Rollout<Env> greedyRollout(const Env& env, const Net& net, long* evals = nullptr) {
  Rollout<Env> out;
  Tape<Real> t(false);
  auto s = env.initialState();
  while (!env.isTerminal(s)) {
    Latent l = net.encodeEval(t, env.instance(), s);
    if (evals) ++*evals;
    int idx = argmaxIndex(net.logitsFromLatent(t, l));
    auto feas = env.feasibleActions(s);
    out.states.push_back(s);
    out.actions.push_back(feas[size_t(idx)]);
    s = env.transition(s, feas[size_t(idx)]);
  }
  out.states.push_back(s);
  out.ret = env.episodicReward(out.states.back());
  return out;
}

/// Stochastic unroll: actions drawn from the policy softmax.
template <class Env, class Net>
Rollout<Env> sampleRollout(const Env& env, const Net& net, Rng& rng, long* evals = nullptr) {
  Rollout<Env> out;
  Tape<Real> t(false);
  auto s = env.initialState();
  while (!env.isTerminal(s)) {
    Latent l = net.encodeEval(t, env.instance(), s);
    if (evals) ++*evals;
    Vec logits = net.logitsFromLatent(t, l);
    int idx = sampleIndex(softmaxVec(logits), rng);
    auto feas = env.feasibleActions(s);
    out.states.push_back(s);
    out.actions.push_back(feas[size_t(idx)]);
    s = env.transition(s, feas[size_t(idx)]);
  }
  out.states.push_back(s);
  out.ret = env.episodicReward(out.states.back());
  return out;
}

}  // namespace gaz

#pragma once

#include "gaz/common.hpp"

#include <concepts>
#include <functional>
#include <map>

namespace gaz {

/// Deterministic episodic environment. All episodes from the initial state
/// have exactly horizon() steps; mid-episode rewards are representable via
/// stepReward but are 0 for the shipped environments.
template <class E>
concept Environment = requires(const E& e, const typename E::State& s, int a) {
  typename E::State;
  { e.initialState() } -> std::same_as<typename E::State>;
  { e.horizon() } -> std::convertible_to<int>;
  { e.stepIndex(s) } -> std::convertible_to<int>;
  { e.isTerminal(s) } -> std::convertible_to<bool>;
  { e.feasibleActions(s) } -> std::convertible_to<std::vector<int>>;
  { e.transition(s, a) } -> std::same_as<typename E::State>;
  { e.stepReward(s, a) } -> std::convertible_to<Real>;
  { e.episodicReward(s) } -> std::convertible_to<Real>;
};

template <class State>
struct Trajectory {
  std::vector<State> states;  // s_0 .. s_T
  std::vector<int> actions;   // a_0 .. a_{T-1}
  Real ret = 0;               // accumulated step rewards + episodic reward
};

template <class State>
using PolicyFn = std::function<Vec(const State&)>;  // probs aligned with feasibleActions(s)

enum class RolloutMode { Greedy, Sampled };

inline int samplePolicyIndex(const Vec& probs, RolloutMode mode, Rng& rng) {
  require(probs.size() > 0, "empty action distribution");
  require(probs.minCoeff() >= -1e-12, "negative probability");
  Real total = probs.sum();
  require(total > 1e-12, "degenerate policy");
  if (mode == RolloutMode::Greedy) {
    int best = 0;
    for (int i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    return best;
  }
  Real u = rng.uniform() * total;
  Real acc = 0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return int(probs.size()) - 1;
}

template <Environment E>
Trajectory<typename E::State> rollout(const E& env, const PolicyFn<typename E::State>& policy,
                                      typename E::State start, RolloutMode mode, Rng rng) {
  Trajectory<typename E::State> tr;
  tr.states.push_back(start);
  while (!env.isTerminal(tr.states.back())) {
    const auto& s = tr.states.back();
    auto acts = env.feasibleActions(s);
    require(!acts.empty(), "non-terminal state with no feasible actions");
    Vec probs = policy(s);
    require(probs.size() == (Eigen::Index)acts.size(), "policy/action arity mismatch");
    int idx = samplePolicyIndex(probs, mode, rng);
    int a = acts[idx];
    tr.ret += env.stepReward(s, a);
    tr.actions.push_back(a);
    tr.states.push_back(env.transition(s, a));
  }
  tr.ret += env.episodicReward(tr.states.back());
  return tr;
}

/// All trajectories reachable from `from` as (probability, return-to-go) pairs.
/// Return-to-go excludes rewards accumulated before `from`.
template <Environment E>
std::vector<std::pair<Real, Real>> enumerateTrajectories(const E& env,
                                                         const PolicyFn<typename E::State>& policy,
                                                         const typename E::State& from,
                                                         size_t cap = 100000) {
  std::vector<std::pair<Real, Real>> out;
  auto rec = [&](auto&& self, const typename E::State& s, Real prob, Real acc) -> void {
    if (env.isTerminal(s)) {
      require(out.size() < cap, "MDP too large for exact enumeration");
      out.emplace_back(prob, acc + env.episodicReward(s));
      return;
    }
    auto acts = env.feasibleActions(s);
    Vec probs = policy(s);
    require(probs.size() == (Eigen::Index)acts.size(), "policy/action arity mismatch");
    for (size_t i = 0; i < acts.size(); ++i) {
      if (probs[i] == 0.0) continue;
      self(self, env.transition(s, acts[i]), prob * probs[i], acc + env.stepReward(s, acts[i]));
    }
  };
  rec(rec, from, 1.0, 0.0);
  return out;
}

template <Environment E>
Real exactStateValue(const E& env, const PolicyFn<typename E::State>& policy,
                     const typename E::State& s, size_t cap = 100000) {
  Real v = 0;
  for (auto& [p, r] : enumerateTrajectories(env, policy, s, cap)) v += p * r;
  return v;
}

template <Environment E>
Real exactActionValue(const E& env, const PolicyFn<typename E::State>& policy,
                      const typename E::State& s, int a, size_t cap = 100000) {
  return env.stepReward(s, a) + exactStateValue(env, policy, env.transition(s, a), cap);
}

template <Environment E>
Real exactAdvantage(const E& env, const PolicyFn<typename E::State>& policy,
                    const typename E::State& s, int a, size_t cap = 100000) {
  return exactActionValue(env, policy, s, a, cap) - exactStateValue(env, policy, s, cap);
}

/// Paired-game value V^{pi,mu}(s, s') computed literally as the expected
/// return difference over the joint trajectory distribution (not via the
/// single-player difference identity, so the identity stays checkable).
template <Environment E>
Real exactPairedValue(const E& env, const PolicyFn<typename E::State>& pi,
                      const PolicyFn<typename E::State>& mu, const typename E::State& s,
                      const typename E::State& sp, size_t cap = 100000) {
  auto own = enumerateTrajectories(env, pi, s, cap);
  auto opp = enumerateTrajectories(env, mu, sp, cap);
  require(own.size() * opp.size() <= 10000000, "MDP too large for exact enumeration");
  Real v = 0;
  for (auto& [p, r] : own)
    for (auto& [q, r2] : opp) v += p * q * (r - r2);
  return v;
}

template <Environment E>
Real exactPairedActionValue(const E& env, const PolicyFn<typename E::State>& pi,
                            const PolicyFn<typename E::State>& mu, const typename E::State& s,
                            const typename E::State& sp, int a, size_t cap = 100000) {
  return env.stepReward(s, a) + exactPairedValue(env, pi, mu, env.transition(s, a), sp, cap);
}

template <Environment E>
Real exactPairedAdvantage(const E& env, const PolicyFn<typename E::State>& pi,
                          const PolicyFn<typename E::State>& mu, const typename E::State& s,
                          const typename E::State& sp, int a, size_t cap = 100000) {
  return exactPairedActionValue(env, pi, mu, s, sp, a, cap) -
         exactPairedValue(env, pi, mu, s, sp, cap);
}

/// Leveled tabular MDP for exact checks. Terminal states have no actions;
/// every path from the initial state has the same length.
class TabularMdp {
 public:
  struct Arc {
    Real reward;
    int next;
  };
  struct Node {
    std::vector<Arc> arcs;
    Real terminalReward = 0;
    int level = 0;
  };

  using State = int;

  TabularMdp(std::vector<Node> nodes, int init) : nodes_(std::move(nodes)), init_(init) {
    for (size_t i = 0; i < nodes_.size(); ++i)
      for (auto& arc : nodes_[i].arcs) {
        require(arc.next >= 0 && arc.next < (int)nodes_.size(), "arc out of range");
        require(nodes_[arc.next].level == nodes_[i].level + 1, "arcs must advance one level");
      }
    horizon_ = 0;
    for (auto& n : nodes_)
      if (n.arcs.empty()) {
        if (horizon_ == 0) horizon_ = n.level;
        require(n.level == horizon_, "all terminal states must share one level");
      }
  }

  State initialState() const { return init_; }
  int horizon() const { return horizon_ - nodes_[init_].level; }
  int stepIndex(State s) const { return nodes_[s].level; }
  bool isTerminal(State s) const { return nodes_[s].arcs.empty(); }
  std::vector<int> feasibleActions(State s) const {
    std::vector<int> a(nodes_[s].arcs.size());
    for (size_t i = 0; i < a.size(); ++i) a[i] = int(i);
    return a;
  }
  State transition(State s, int a) const { return nodes_[s].arcs.at(a).next; }
  Real stepReward(State s, int a) const { return nodes_[s].arcs.at(a).reward; }
  Real episodicReward(State s) const {
    require(isTerminal(s), "episodic reward on non-terminal state");
    return nodes_[s].terminalReward;
  }

  int stateCount() const { return int(nodes_.size()); }

  /// Random leveled DAG with arbitrary step and terminal rewards.
  static TabularMdp random(Rng& rng, int levels, int maxWidth, int maxActions) {
    require(levels >= 1 && maxWidth >= 1 && maxActions >= 1, "bad toy MDP shape");
    std::vector<Node> nodes;
    std::vector<std::vector<int>> byLevel(levels + 1);
    nodes.push_back({{}, 0, 0});
    byLevel[0] = {0};
    for (int l = 1; l <= levels; ++l) {
      int w = 1 + rng.uniformInt(maxWidth);
      for (int i = 0; i < w; ++i) {
        byLevel[l].push_back(int(nodes.size()));
        nodes.push_back({{}, 0, l});
      }
    }
    for (int l = 0; l < levels; ++l)
      for (int id : byLevel[l]) {
        int na = 1 + rng.uniformInt(maxActions);
        for (int a = 0; a < na; ++a) {
          int nxt = byLevel[l + 1][rng.uniformInt(int(byLevel[l + 1].size()))];
          nodes[id].arcs.push_back({rng.normal(), nxt});
        }
      }
    for (int id : byLevel[levels]) nodes[id].terminalReward = rng.normal();
    return TabularMdp(std::move(nodes), 0);
  }

 private:
  std::vector<Node> nodes_;
  int init_;
  int horizon_;
};

/// Policy table over a TabularMdp; also usable as a PolicyFn.
class TabularPolicy {
 public:
  explicit TabularPolicy(std::map<int, Vec> table) : table_(std::move(table)) {
    for (auto& [s, p] : table_) {
      require(p.minCoeff() >= 0, "negative policy entry");
      require(std::abs(p.sum() - 1.0) <= 1e-9, "policy must sum to 1");
    }
  }

  Vec operator()(int s) const {
    auto it = table_.find(s);
    require(it != table_.end(), "no policy entry for state");
    return it->second;
  }

  static TabularPolicy random(const TabularMdp& mdp, Rng& rng) {
    std::map<int, Vec> t;
    for (int s = 0; s < mdp.stateCount(); ++s) {
      if (mdp.isTerminal(s)) continue;
      int n = int(mdp.feasibleActions(s).size());
      Vec p(n);
      for (int i = 0; i < n; ++i) p[i] = -std::log(rng.uniformOpen());
      t[s] = p / p.sum();
    }
    return TabularPolicy(std::move(t));
  }

 private:
  std::map<int, Vec> table_;
};

}  // namespace gaz

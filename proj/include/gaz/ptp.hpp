#pragma once

#include "gaz/common.hpp"
#include "gaz/records.hpp"
#include "gaz/rollout.hpp"
#include "gaz/search.hpp"

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

namespace gaz {

using nn::isPtp;
using nn::Variant;

/// Game outcome from player 1's perspective. Ties go to player 1 so that
/// player -1 cannot profit from copying moves.
inline int gameOutcome(Real r1, Real rNeg1) {
  require(std::isfinite(r1) && std::isfinite(rNeg1), "game outcome needs finite returns");
  return r1 >= rNeg1 ? 1 : -1;
}

/// In-tree policy of the greedy actor: probabilities over the feasible-action
/// order of a state. Production wraps a policy net; tests can inject exact
/// distributions.
template <class Env, class Net>
class NetMuPolicy {
 public:
  NetMuPolicy(const Env& env, const Net& net) : env_(&env), net_(&net) {}

  Vec probs(const typename Env::State& s) const {
    Latent l = net_->encodeEval(tape_, env_->instance(), s);
    ++encodes_;
    return softmaxVec(net_->logitsFromLatent(tape_, l));
  }

  long encodes() const { return encodes_; }

 private:
  const Env* env_;
  const Net* net_;
  mutable Tape<Real> tape_{false};
  mutable long encodes_ = 0;
};

/// Greedy argmax unroll of an in-tree opponent policy.
template <class Env, class Mu>
Rollout<Env> muGreedyRollout(const Env& env, const Mu& mu) {
  Rollout<Env> out;
  auto s = env.initialState();
  while (!env.isTerminal(s)) {
    int idx = argmaxIndex(mu.probs(s));
    auto feas = env.feasibleActions(s);
    out.states.push_back(s);
    out.actions.push_back(feas[size_t(idx)]);
    s = env.transition(s, feas[size_t(idx)]);
  }
  out.states.push_back(s);
  out.ret = env.episodicReward(out.states.back());
  return out;
}

/// Precomputed latent cache for the greedy-tree variant: the learner encoder
/// applied once to every state of the opponent's greedy trajectory.
template <class Env, class Net>
std::vector<Latent> learnerLatents(const Env& env, const Net& net, const Rollout<Env>& r,
                                   long* evals = nullptr) {
  std::vector<Latent> out;
  Tape<Real> t(false);
  out.reserve(r.states.size());
  for (const auto& s : r.states) {
    out.push_back(net.encodeEval(t, env.instance(), s));
    if (evals) ++*evals;
  }
  return out;
}

/// Two-player game as a search domain from the learner's point of view.
/// Greedy-actor turns are collapsed into the environment transition: one
/// domain step applies the learner's action and then the opponent's in-tree
/// reply (sampled from mu, or the precomputed greedy move), so every node in
/// the tree is a learner decision and only learner evaluations are ever
/// backed up. The opponent state rides one move ahead of the learner when the
/// learner holds position -1.
template <class Env, class Net, class Mu>
class PtpDomain {
 public:
  using EnvState = typename Env::State;

  struct State {
    EnvState self;
    EnvState other;
    std::vector<int> otherPath;  // opponent's action history, identifies `other`
  };

  /// greedyTraj non-null selects greedy-tree mode: opponent replies come from
  /// the trajectory and its latents, and membership is asserted. Null selects
  /// sampled-tree mode with per-path mu caching.
  PtpDomain(const Env& env, const Net& learner, const Mu& mu, bool learnerIsP1,
            const Rollout<Env>* greedyTraj, const std::vector<Latent>* greedyLatents)
      : env_(&env),
        learner_(&learner),
        mu_(&mu),
        learnerIsP1_(learnerIsP1),
        traj_(greedyTraj),
        trajLatents_(greedyLatents) {
    require((traj_ == nullptr) == (trajLatents_ == nullptr),
            "greedy trajectory and latents must be supplied together");
    if (traj_)
      require(trajLatents_->size() == traj_->states.size(),
              "greedy trajectory and latents must be supplied together");
  }

  bool isTerminal(const State& s) const { return env_->isTerminal(s.self); }

  int actionCount(const State& s) const { return int(env_->feasibleActions(s.self).size()); }

  std::pair<State, Real> step(const State& s, int a, Rng& rng) const {
    auto feas = env_->feasibleActions(s.self);
    State nxt;
    nxt.self = env_->transition(s.self, feas[size_t(a)]);
    nxt.other = s.other;
    nxt.otherPath = s.otherPath;
    if (!env_->isTerminal(s.other)) {
      int oa = traj_ ? greedyReply(s) : sampleIndexToAction(s, rng);
      nxt.other = env_->transition(s.other, oa);
      nxt.otherPath.push_back(oa);
    }
    return {std::move(nxt), Real(0)};
  }

  Evaluation evaluate(const State& s) const {
    Latent self = learner_->encodeEval(tape_, env_->instance(), s.self);
    ++encodes_;
    Evaluation e;
    e.logits = learner_->logitsFromLatent(tape_, self);
    require(e.logits.allFinite(), "non-finite policy logits from network");
    e.value = learner_->valuePairEval(tape_, self, otherLatent(s));
    return e;
  }

  Real terminalValue(const State& s) const {
    require(env_->isTerminal(s.other), "game outcome before both players finished");
    Real rs = env_->episodicReward(s.self);
    Real ro = env_->episodicReward(s.other);
    return Real(learnerIsP1_ ? gameOutcome(rs, ro) : -gameOutcome(ro, rs));
  }

  long encodes() const { return encodes_; }

 private:
  int trajIndex(const State& s) const {
    int idx = env_->stepIndex(s.other);
    require(idx == int(s.otherPath.size()) && idx < int(traj_->states.size()) &&
                std::equal(s.otherPath.begin(), s.otherPath.end(), traj_->actions.begin()),
            "greedy-tree opponent state off the precomputed trajectory");
    return idx;
  }

  int greedyReply(const State& s) const { return traj_->actions[size_t(trajIndex(s))]; }

  int sampleIndexToAction(const State& s, Rng& rng) const {
    const Vec& p = muProbs(s);
    auto feas = env_->feasibleActions(s.other);
    return feas[size_t(sampleIndex(p, rng))];
  }

  const Vec& muProbs(const State& s) const {
    auto it = probs_.find(s.otherPath);
    if (it == probs_.end()) it = probs_.emplace(s.otherPath, mu_->probs(s.other)).first;
    return it->second;
  }

  const Latent& otherLatent(const State& s) const {
    if (traj_) return (*trajLatents_)[size_t(trajIndex(s))];
    auto it = latents_.find(s.otherPath);
    if (it == latents_.end()) {
      Latent l = learner_->encodeEval(tape_, env_->instance(), s.other);
      ++encodes_;
      it = latents_.emplace(s.otherPath, std::move(l)).first;
    }
    return it->second;
  }

  const Env* env_;
  const Net* learner_;
  const Mu* mu_;
  bool learnerIsP1_;
  const Rollout<Env>* traj_;
  const std::vector<Latent>* trajLatents_;
  mutable Tape<Real> tape_{false};
  mutable std::map<std::vector<int>, Vec> probs_;
  mutable std::map<std::vector<int>, Latent> latents_;
  mutable long encodes_ = 0;
};

struct PtpConfig {
  SearchConfig search;
  bool evalMode = false;  // learner fixed to player 1, opponent greedy in tree
};

template <class Env>
struct GameResult {
  int learnerPosition = 1;
  int z = 0;  // player-1 outcome
  Real learnerReturn = 0;
  Real greedyReturn = 0;
  EpisodeRecords<typename Env::State> records;
  std::vector<Real> rootValues;
  std::vector<int> learnerActions;  // environment action ids
  long sims = 0;
  long learnerEncodes = 0;  // learner-net encoder passes (search + precompute)
};

/// One full game: both players unroll from the same initial state, player 1
/// moving first inside each timestep. The greedy actor always plays argmax of
/// mu; sampling applies only to its in-tree stand-in under the sampled-tree
/// variant. Emits T policy records for the learner and 2T pairwise value
/// records, one per player perspective per step.
template <class Env, class Net, class Mu>
GameResult<Env> playPtpEpisode(const Env& env, const Net& learnerNet, const Mu& mu,
                               const PtpConfig& cfg, Rng& rng) {
  require(isPtp(learnerNet.variant()), "ptp episode requires a ptp-variant network");
  bool sampledTree = learnerNet.variant() == Variant::PtpSt && !cfg.evalMode;

  GameResult<Env> out;
  out.learnerPosition = cfg.evalMode ? 1 : (rng.uniformInt(2) == 0 ? 1 : -1);
  bool lp1 = out.learnerPosition == 1;

  Rollout<Env> oppo = muGreedyRollout(env, mu);
  std::vector<Latent> cache;
  if (!sampledTree) cache = learnerLatents(env, learnerNet, oppo, &out.learnerEncodes);

  PtpDomain<Env, Net, Mu> dom(env, learnerNet, mu, lp1, sampledTree ? nullptr : &oppo,
                              sampledTree ? nullptr : &cache);

  SearchConfig scfg = cfg.search;
  scfg.minmax = false;
  scfg.baselines = nullptr;

  int T = env.horizon();
  std::vector<typename Env::State> learnerStates;
  learnerStates.reserve(size_t(T) + 1);
  auto sl = env.initialState();
  std::vector<int> oPath;

  for (int t = 0; t < T; ++t) {
    if (!lp1) oPath.push_back(oppo.actions[size_t(t)]);
    typename PtpDomain<Env, Net, Mu>::State root{sl, oppo.states[oPath.size()], oPath};
    auto res = runSearch(dom, root, scfg, rng);
    out.records.policy.push_back({sl, res.policy});
    out.rootValues.push_back(res.rootValue);
    out.sims += res.simulations;
    learnerStates.push_back(sl);
    auto feas = env.feasibleActions(sl);
    int envAction = feas[size_t(res.action)];
    out.learnerActions.push_back(envAction);
    sl = env.transition(sl, envAction);
    if (lp1) oPath.push_back(oppo.actions[size_t(t)]);
  }
  learnerStates.push_back(sl);

  out.learnerReturn = env.episodicReward(sl);
  out.greedyReturn = oppo.ret;
  out.z = lp1 ? gameOutcome(out.learnerReturn, out.greedyReturn)
              : gameOutcome(out.greedyReturn, out.learnerReturn);

  const auto& p1s = lp1 ? learnerStates : oppo.states;
  const auto& pm1s = lp1 ? oppo.states : learnerStates;
  for (int t = 0; t < T; ++t) {
    out.records.pairValue.push_back({p1s[size_t(t)], pm1s[size_t(t)], Real(out.z)});
    out.records.pairValue.push_back({pm1s[size_t(t)], p1s[size_t(t) + 1], Real(-out.z)});
  }

  out.learnerEncodes += dom.encodes();
  return out;
}

template <class Env>
struct SolveResult {
  Real objective = 0;  // env units: tour length, or makespan in instance time
  Real learnerObjective = 0;
  Real greedyObjective = 0;
  long sims = 0;
};

/// Test-time solve. With a simulation budget the learner plays one game as
/// player 1 against the greedy unroll of muNet and the better of the two
/// trajectories is reported; without one the learner policy is unrolled
/// greedily with no search at all.
template <class Env, class Net>
SolveResult<Env> evalSolvePtp(const Env& env, const Net& learnerNet, const Net& muNet,
                              const SearchConfig& search, int nSim, uint64_t seed) {
  SolveResult<Env> out;
  if (nSim <= 0) {
    auto g = greedyRollout(env, learnerNet);
    out.objective = out.learnerObjective = out.greedyObjective = -g.ret * envScale(env);
    return out;
  }
  PtpConfig cfg;
  cfg.search = search;
  cfg.search.nSim = nSim;
  cfg.evalMode = true;
  NetMuPolicy<Env, Net> mu(env, muNet);
  Rng rng = Rng::derive(seed, 0x70747065);
  auto res = playPtpEpisode(env, learnerNet, mu, cfg, rng);
  out.learnerObjective = -res.learnerReturn * envScale(env);
  out.greedyObjective = -res.greedyReturn * envScale(env);
  out.objective = std::min(out.learnerObjective, out.greedyObjective);
  out.sims = res.sims;
  return out;
}

}  // namespace gaz

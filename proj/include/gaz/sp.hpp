#pragma once

#include "gaz/common.hpp"
#include "gaz/ptp.hpp"
#include "gaz/records.hpp"
#include "gaz/rollout.hpp"
#include "gaz/search.hpp"

#include <utility>
#include <vector>

namespace gaz {

/// Single-player search domain. The environment state is the search state;
/// values are full-episode return estimates (the states carry their past via
/// the accumulated length, so no return-to-go bookkeeping is needed), except
/// for the scalar-baseline variant whose value scale is the binary outcome
/// against the baseline R.
template <class Env, class Net>
class SpDomain {
 public:
  using State = typename Env::State;

  SpDomain(const Env& env, const Net& net, const Real* scalarR = nullptr)
      : env_(&env), net_(&net), scalarR_(scalarR) {}

  bool isTerminal(const State& s) const { return env_->isTerminal(s); }

  int actionCount(const State& s) const { return int(env_->feasibleActions(s).size()); }

  std::pair<State, Real> step(const State& s, int a, Rng&) const {
    auto feas = env_->feasibleActions(s);
    return {env_->transition(s, feas[size_t(a)]), env_->stepReward(s, feas[size_t(a)])};
  }

  Evaluation evaluate(const State& s) const {
    Latent l = net_->encodeEval(tape_, env_->instance(), s);
    ++encodes_;
    Evaluation e;
    e.logits = net_->logitsFromLatent(tape_, l);
    require(e.logits.allFinite(), "non-finite policy logits from network");
    e.value = scalarR_ ? net_->valueScalarEval(tape_, l, *scalarR_)
                       : net_->valueSingleEval(tape_, l);
    return e;
  }

  Real terminalValue(const State& s) const {
    Real r = env_->episodicReward(s);
    return scalarR_ ? Real(gameOutcome(r, *scalarR_)) : r;
  }

  long encodes() const { return encodes_; }

 private:
  const Env* env_;
  const Net* net_;
  const Real* scalarR_;
  mutable Tape<Real> tape_{false};
  mutable long encodes_ = 0;
};

struct SpConfig {
  SearchConfig search;
  int nStep = 20;     // bootstrap horizon of the n-step variant
  int tbSamples = 10; // rollout count for sampled timestep baselines
};

/// Per-step baselines from precollected opponent rollouts: b_t is the mean of
/// the learner value net over the rollouts' states at step t.
template <class Env, class Net>
std::vector<Real> tbBaselines(const Env& env, const Net& net,
                              const std::vector<Rollout<Env>>& rollouts) {
  require(!rollouts.empty(), "timestep baselines need at least one rollout");
  int T = env.horizon();
  std::vector<Real> b(size_t(T), 0);
  Tape<Real> t(false);
  for (const auto& r : rollouts) {
    require(int(r.states.size()) == T + 1, "rollout length does not match the horizon");
    for (int i = 0; i < T; ++i)
      b[size_t(i)] += net.valueSingleEval(t, net.encodeEval(t, env.instance(), r.states[size_t(i)]));
  }
  for (Real& v : b) v /= Real(rollouts.size());
  return b;
}

/// Convenience production path: one greedy rollout of the opponent net, or k
/// sampled ones.
template <class Env, class Net>
std::vector<Real> tbComputeBaselines(const Env& env, const Net& net, const Net& muNet,
                                     bool sampled, int k, Rng& rng) {
  std::vector<Rollout<Env>> rollouts;
  if (sampled) {
    require(k >= 1, "sampled baselines need k >= 1");
    for (int i = 0; i < k; ++i) rollouts.push_back(sampleRollout(env, muNet, rng));
  } else {
    rollouts.push_back(greedyRollout(env, muNet));
  }
  return tbBaselines(env, net, rollouts);
}

template <class Env>
struct SpResult {
  EpisodeRecords<typename Env::State> records;
  Real ret = 0;        // learner episode return
  Real baselineR = 0;  // greedy-rollout return, scalar variant only
  int z = 0;           // outcome against R, scalar variant only
  std::vector<Real> rootValues;
  std::vector<int> actions;  // environment action ids
  long sims = 0;
};

/// One single-player episode of the selected variant. Min-max normalization
/// is active for vanilla and n-step; the scalar variant conditions the value
/// net on the opponent's greedy return R; the timestep-baseline variants walk
/// the search advantages along a precomputed baseline vector.
template <class Env, class Net>
SpResult<Env> playSpEpisode(const Env& env, const Net& net, const Net& muNet,
                            const SpConfig& cfg, Rng& rng) {
  Variant v = net.variant();
  require(!isPtp(v), "single-player episode requires a single-player variant network");

  SpResult<Env> out;
  SearchConfig scfg = cfg.search;
  scfg.minmax = v == Variant::Vanilla || v == Variant::NStep;
  scfg.baselines = nullptr;
  scfg.rootStep = 0;

  Real R = 0;
  if (v == Variant::GreedyScalar) {
    R = greedyRollout(env, muNet).ret;
    out.baselineR = R;
  }
  std::vector<Real> baselines;
  if (v == Variant::TbGreedy || v == Variant::TbSampled) {
    baselines = tbComputeBaselines(env, net, muNet, v == Variant::TbSampled, cfg.tbSamples, rng);
    scfg.baselines = &baselines;
  }

  SpDomain<Env, Net> dom(env, net, v == Variant::GreedyScalar ? &R : nullptr);

  int T = env.horizon();
  std::vector<typename Env::State> states;
  states.reserve(size_t(T));
  auto s = env.initialState();
  for (int t = 0; t < T; ++t) {
    scfg.rootStep = t;
    auto res = runSearch(dom, s, scfg, rng);
    states.push_back(s);
    out.records.policy.push_back({s, res.policy});
    out.rootValues.push_back(res.rootValue);
    out.sims += res.simulations;
    auto feas = env.feasibleActions(s);
    out.actions.push_back(feas[size_t(res.action)]);
    s = env.transition(s, feas[size_t(res.action)]);
  }
  out.ret = env.episodicReward(s);

  switch (v) {
    case Variant::Vanilla:
    case Variant::TbGreedy:
    case Variant::TbSampled:
      for (int t = 0; t < T; ++t) out.records.value.push_back({states[size_t(t)], out.ret});
      break;
    case Variant::NStep:
      for (int t = 0; t < T; ++t) {
        Real target = t + cfg.nStep < T ? out.rootValues[size_t(t + cfg.nStep)] : out.ret;
        out.records.value.push_back({states[size_t(t)], target});
      }
      break;
    case Variant::GreedyScalar:
      out.z = gameOutcome(out.ret, R);
      for (int t = 0; t < T; ++t)
        out.records.scalarValue.push_back({states[size_t(t)], R, Real(out.z)});
      break;
    default:
      require(false, "unhandled single-player variant");
  }
  return out;
}

/// Test-time solve for the single-player variants. The scalar variant keeps
/// its max rule against the opponent's greedy return; the others report the
/// searched trajectory itself.
template <class Env, class Net>
SolveResult<Env> evalSolveSp(const Env& env, const Net& net, const Net& muNet,
                             const SpConfig& cfg, int nSim, uint64_t seed) {
  SolveResult<Env> out;
  if (nSim <= 0) {
    auto g = greedyRollout(env, net);
    out.objective = out.learnerObjective = out.greedyObjective = -g.ret * envScale(env);
    return out;
  }
  SpConfig c = cfg;
  c.search.nSim = nSim;
  Rng rng = Rng::derive(seed, 0x73706576);
  auto res = playSpEpisode(env, net, muNet, c, rng);
  out.learnerObjective = -res.ret * envScale(env);
  out.greedyObjective = net.variant() == Variant::GreedyScalar
                            ? -res.baselineR * envScale(env)
                            : out.learnerObjective;
  out.objective = std::min(out.learnerObjective, out.greedyObjective);
  out.sims = res.sims;
  return out;
}

}  // namespace gaz

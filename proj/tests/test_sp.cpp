#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gaz/sp.hpp"

using namespace gaz;
using namespace gaz::nn;

namespace {

NetConfig tinyCfg(uint64_t seed = 0) {
  NetConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.blocks = 1;
  cfg.jobBlocks = 1;
  cfg.initSeed = seed;
  return cfg;
}

void perturb(ParameterSet& ps, uint64_t seed, Real amp) {
  Rng rng = Rng::derive(seed, 0x70657274);
  for (int p = 0; p < ps.count(); ++p) {
    Mat& w = ps.tensor(p);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += amp * (2 * rng.uniform() - 1);
  }
}

SpConfig smallCfg(int nSim = 10) {
  SpConfig cfg;
  cfg.search.nSim = nSim;
  cfg.search.mRoot = 4;
  return cfg;
}

}  // namespace

TEST_CASE("vanilla episode stores the episode return at every step") {
  TspInstance inst = tspGenerate(6, 1200);
  TspEnv env(inst);
  TspNet net(tinyCfg(10), Variant::Vanilla);
  perturb(net.params, 11, 0.3);
  TspNet muNet(tinyCfg(12), Variant::Vanilla);
  perturb(muNet.params, 13, 0.3);

  SpConfig cfg = smallCfg();
  Rng r1(71), r2(71);
  auto a = playSpEpisode(env, net, muNet, cfg, r1);
  auto b = playSpEpisode(env, net, muNet, cfg, r2);

  int T = env.horizon();
  CHECK(int(a.records.policy.size()) == T);
  CHECK(int(a.records.value.size()) == T);
  CHECK(a.records.pairValue.empty());
  CHECK(a.records.scalarValue.empty());
  CHECK(int(a.actions.size()) == T);
  CHECK(int(a.rootValues.size()) == T);
  CHECK(a.baselineR == 0);
  CHECK(a.z == 0);

  TspState s = env.initialState();
  for (int t = 0; t < T; ++t) {
    const auto& pr = a.records.policy[size_t(t)];
    CHECK(pr.state.t == t);
    CHECK(pr.target.size() == Eigen::Index(env.feasibleActions(s).size()));
    CHECK(pr.target.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(a.records.value[size_t(t)].target == a.ret);
    s = env.transition(s, a.actions[size_t(t)]);
  }
  CHECK(env.isTerminal(s));
  CHECK(a.ret == env.episodicReward(s));

  CHECK(a.actions == b.actions);
  CHECK(a.ret == b.ret);
  for (int t = 0; t < T; ++t) CHECK(a.rootValues[size_t(t)] == b.rootValues[size_t(t)]);
}

TEST_CASE("n-step targets bootstrap from later root values") {
  TspInstance inst = tspGenerate(6, 1201);
  TspEnv env(inst);
  TspNet net(tinyCfg(14), Variant::NStep);
  perturb(net.params, 15, 0.3);
  TspNet muNet(tinyCfg(16), Variant::NStep);
  perturb(muNet.params, 17, 0.3);

  int T = env.horizon();
  SpConfig cfg = smallCfg();
  cfg.nStep = 1;
  Rng r1(72);
  auto a = playSpEpisode(env, net, muNet, cfg, r1);
  CHECK(int(a.records.value.size()) == T);
  for (int t = 0; t + 1 < T; ++t)
    CHECK(a.records.value[size_t(t)].target == a.rootValues[size_t(t + 1)]);
  CHECK(a.records.value[size_t(T - 1)].target == a.ret);

  cfg.nStep = 100;
  Rng r2(72);
  auto b = playSpEpisode(env, net, muNet, cfg, r2);
  CHECK(b.actions == a.actions);
  for (int t = 0; t < T; ++t) CHECK(b.records.value[size_t(t)].target == b.ret);
}

TEST_CASE("greedy scalar conditions on the opponent return and stores outcomes") {
  TspInstance inst = tspGenerate(6, 1202);
  TspEnv env(inst);
  TspNet net(tinyCfg(18), Variant::GreedyScalar);
  perturb(net.params, 19, 0.3);
  TspNet muNet(tinyCfg(20), Variant::GreedyScalar);
  perturb(muNet.params, 21, 0.3);

  Real R = greedyRollout(env, muNet).ret;
  SpConfig cfg = smallCfg();
  Rng rng(73);
  auto a = playSpEpisode(env, net, muNet, cfg, rng);

  int T = env.horizon();
  CHECK(a.baselineR == R);
  CHECK(a.z == gameOutcome(a.ret, R));
  CHECK(int(a.records.policy.size()) == T);
  CHECK(a.records.value.empty());
  CHECK(a.records.pairValue.empty());
  CHECK(int(a.records.scalarValue.size()) == T);
  for (const auto& rec : a.records.scalarValue) {
    CHECK(rec.baseline == R);
    CHECK(rec.z == Real(a.z));
  }
}

TEST_CASE("scalar-conditioned domain values are outcomes, plain domains return estimates") {
  TspInstance inst = tspGenerate(5, 1203);
  TspEnv env(inst);
  TspNet scalarNet(tinyCfg(22), Variant::GreedyScalar);
  perturb(scalarNet.params, 23, 0.3);
  TspNet plainNet(tinyCfg(24), Variant::Vanilla);
  perturb(plainNet.params, 25, 0.3);

  TspState s = env.initialState();
  Rng rng(74);
  while (!env.isTerminal(s)) {
    auto feas = env.feasibleActions(s);
    s = env.transition(s, feas[size_t(rng.uniformInt(uint64_t(feas.size())))]);
  }
  Real ret = env.episodicReward(s);

  Real above = ret + 0.25, below = ret - 0.25;
  SpDomain<TspEnv, TspNet> lose(env, scalarNet, &above);
  SpDomain<TspEnv, TspNet> win(env, scalarNet, &below);
  CHECK(lose.terminalValue(s) == Real(-1));
  CHECK(win.terminalValue(s) == Real(1));

  SpDomain<TspEnv, TspNet> plain(env, plainNet);
  CHECK(plain.terminalValue(s) == ret);

  TspState root = env.initialState();
  Evaluation ev = plain.evaluate(root);
  Tape<Real> t(false);
  Latent l = plainNet.encodeEval(t, inst, root);
  CHECK(ev.value == doctest::Approx(plainNet.valueSingleEval(t, l)).epsilon(1e-12));
  CHECK(ev.logits.size() == Eigen::Index(env.feasibleActions(root).size()));

  Evaluation evs = win.evaluate(root);
  Latent ls = scalarNet.encodeEval(t, inst, root);
  CHECK(evs.value == doctest::Approx(scalarNet.valueScalarEval(t, ls, below)).epsilon(1e-12));
  CHECK(std::abs(evs.value) <= 1.0);
}

TEST_CASE("greedy timestep baselines average the value net along the rollout") {
  TspInstance inst = tspGenerate(6, 1204);
  TspEnv env(inst);
  TspNet net(tinyCfg(26), Variant::TbGreedy);
  perturb(net.params, 27, 0.3);
  TspNet muNet(tinyCfg(28), Variant::TbGreedy);
  perturb(muNet.params, 29, 0.3);

  auto roll = greedyRollout(env, muNet);
  std::vector<Rollout<TspEnv>> rollouts{roll};
  auto b = tbBaselines(env, net, rollouts);

  int T = env.horizon();
  CHECK(int(b.size()) == T);
  Tape<Real> t(false);
  for (int i = 0; i < T; ++i) {
    Real v = net.valueSingleEval(t, net.encodeEval(t, inst, roll.states[size_t(i)]));
    CHECK(b[size_t(i)] == doctest::Approx(v).epsilon(1e-12));
  }

  Rng rng(75);
  auto viaCompute = tbComputeBaselines(env, net, muNet, false, 1, rng);
  for (int i = 0; i < T; ++i) CHECK(viaCompute[size_t(i)] == b[size_t(i)]);
}

TEST_CASE("sampled timestep baselines are the mean over sampled rollouts") {
  TspInstance inst = tspGenerate(6, 1205);
  TspEnv env(inst);
  TspNet net(tinyCfg(30), Variant::TbSampled);
  perturb(net.params, 31, 0.3);
  TspNet muNet(tinyCfg(32), Variant::TbSampled);
  perturb(muNet.params, 33, 0.3);

  int k = 3;
  Rng r1(76);
  auto b = tbComputeBaselines(env, net, muNet, true, k, r1);

  Rng r2(76);
  std::vector<Rollout<TspEnv>> rollouts;
  for (int i = 0; i < k; ++i) rollouts.push_back(sampleRollout(env, muNet, r2));
  CHECK(rollouts[0].actions != rollouts[1].actions);

  int T = env.horizon();
  Tape<Real> t(false);
  for (int i = 0; i < T; ++i) {
    Real acc = 0;
    for (const auto& r : rollouts)
      acc += net.valueSingleEval(t, net.encodeEval(t, inst, r.states[size_t(i)]));
    CHECK(b[size_t(i)] == doctest::Approx(acc / k).epsilon(1e-12));
  }

  CHECK_THROWS_WITH((void)tbBaselines(env, net, std::vector<Rollout<TspEnv>>{}),
                    "timestep baselines need at least one rollout");
}

TEST_CASE("episodes replicate a manual per-step search loop") {
  TspInstance inst = tspGenerate(6, 1206);
  TspEnv env(inst);
  TspNet muNet(tinyCfg(36), Variant::Vanilla);
  perturb(muNet.params, 37, 0.3);

  auto replicate = [&](Variant v, uint64_t seed) {
    TspNet net(tinyCfg(34), v);
    perturb(net.params, 35, 0.3);
    SpConfig cfg = smallCfg(8);

    Rng re(seed);
    auto ep = playSpEpisode(env, net, muNet, cfg, re);

    SearchConfig scfg = cfg.search;
    scfg.minmax = v == Variant::Vanilla;
    std::vector<Real> b;
    if (v == Variant::TbGreedy) {
      b = tbBaselines(env, net, {greedyRollout(env, muNet)});
      scfg.baselines = &b;
    }
    Real R = 0;
    if (v == Variant::GreedyScalar) R = greedyRollout(env, muNet).ret;
    SpDomain<TspEnv, TspNet> dom(env, net, v == Variant::GreedyScalar ? &R : nullptr);

    Rng rm(seed);
    TspState s = env.initialState();
    for (int t = 0; t < env.horizon(); ++t) {
      scfg.rootStep = t;
      auto res = runSearch(dom, s, scfg, rm);
      auto feas = env.feasibleActions(s);
      CHECK(feas[size_t(res.action)] == ep.actions[size_t(t)]);
      CHECK(res.rootValue == ep.rootValues[size_t(t)]);
      s = env.transition(s, feas[size_t(res.action)]);
    }
  };

  replicate(Variant::Vanilla, 77);
  replicate(Variant::TbGreedy, 78);
  replicate(Variant::GreedyScalar, 79);
}

TEST_CASE("jssp episode runs every single-player variant") {
  JsspInstance inst = jsspGenerate(3, 2, 1207);
  JsspEnv env(inst);
  JsspNet muNet(tinyCfg(40), Variant::Vanilla, 3, 2);
  perturb(muNet.params, 41, 0.3);

  for (Variant v : {Variant::Vanilla, Variant::NStep, Variant::GreedyScalar,
                    Variant::TbGreedy, Variant::TbSampled}) {
    JsspNet net(tinyCfg(42), v, 3, 2);
    perturb(net.params, 43, 0.3);
    SpConfig cfg = smallCfg(6);
    cfg.tbSamples = 2;
    Rng r1(80), r2(80);
    auto a = playSpEpisode(env, net, muNet, cfg, r1);
    auto b = playSpEpisode(env, net, muNet, cfg, r2);
    CHECK(a.actions == b.actions);
    CHECK(int(a.records.policy.size()) == env.horizon());
    CHECK(a.records.valueCount() == size_t(env.horizon()));
    CHECK(a.ret == b.ret);
  }
}

TEST_CASE("single-player episode rejects the two-player variants") {
  TspInstance inst = tspGenerate(5, 1208);
  TspEnv env(inst);
  TspNet net(tinyCfg(44), Variant::PtpGt);
  TspNet muNet(tinyCfg(45), Variant::Vanilla);
  SpConfig cfg = smallCfg(4);
  Rng rng(81);
  CHECK_THROWS_WITH((void)playSpEpisode(env, net, muNet, cfg, rng),
                    "single-player episode requires a single-player variant network");
}

TEST_CASE("solve reports the better of learner and scalar baseline") {
  TspInstance inst = tspGenerate(6, 1209);
  TspEnv env(inst);
  TspNet muNet(tinyCfg(48), Variant::GreedyScalar);
  perturb(muNet.params, 49, 0.3);

  TspNet vnet(tinyCfg(46), Variant::Vanilla);
  perturb(vnet.params, 47, 0.3);
  SpConfig cfg = smallCfg();

  auto g = evalSolveSp(env, vnet, muNet, cfg, 0, 90);
  CHECK(g.sims == 0);
  CHECK(g.objective == -greedyRollout(env, vnet).ret * envScale(env));
  CHECK(g.objective == g.learnerObjective);
  CHECK(g.objective == g.greedyObjective);

  auto sv = evalSolveSp(env, vnet, muNet, cfg, 6, 91);
  CHECK(sv.sims > 0);
  CHECK(sv.objective == sv.learnerObjective);
  CHECK(sv.greedyObjective == sv.learnerObjective);

  TspNet snet(tinyCfg(50), Variant::GreedyScalar);
  perturb(snet.params, 51, 0.3);
  auto ss = evalSolveSp(env, snet, muNet, cfg, 6, 92);
  Real refR = -greedyRollout(env, muNet).ret * envScale(env);
  CHECK(ss.greedyObjective == doctest::Approx(refR).epsilon(1e-12));
  CHECK(ss.objective == std::min(ss.learnerObjective, ss.greedyObjective));
}

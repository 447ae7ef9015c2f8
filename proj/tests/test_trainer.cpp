#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gaz/trainer.hpp"

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

EpisodeBundle<TspEnv> playBundle(uint64_t instSeed, const TspNet& learner, const TspNet& muNet,
                                 int nSim = 6, uint64_t epSeed = 7) {
  TspInstance inst = tspGenerate(5, instSeed);
  TspEnv env(inst);
  NetMuPolicy<TspEnv, TspNet> mu(env, muNet);
  PtpConfig cfg;
  cfg.search.nSim = nSim;
  cfg.search.mRoot = 4;
  Rng rng(epSeed);
  auto g = playPtpEpisode(env, learner, mu, cfg, rng);
  return {inst, std::move(g.records)};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("replay buffer evicts strictly oldest episodes") {
  TspNet net(tinyCfg(1), Variant::PtpGt);
  perturb(net.params, 2, 0.3);
  ReplayBuffer<TspEnv> buf(3);
  for (uint64_t i = 0; i < 5; ++i) buf.push(playBundle(100 + i, net, net));
  CHECK(buf.episodes() == 3);

  Rng rng(5);
  std::vector<uint64_t> seen;
  for (int i = 0; i < 200; ++i) {
    auto s = buf.samplePolicy(1, false, rng);
    seen.push_back(s[0].inst.seed);
  }
  for (uint64_t s : seen) CHECK(s >= 102);
}

TEST_CASE("record counts track pushes and evictions") {
  TspNet net(tinyCfg(1), Variant::PtpGt);
  perturb(net.params, 2, 0.3);
  ReplayBuffer<TspEnv> buf(2);
  auto a = playBundle(300, net, net);
  size_t pol = a.records.policy.size(), val = a.records.valueCount();
  buf.push(std::move(a));
  CHECK(buf.policyCount() == pol);
  CHECK(buf.valueCount() == val);
  buf.push(playBundle(301, net, net));
  buf.push(playBundle(302, net, net));
  CHECK(buf.episodes() == 2);
  CHECK(buf.policyCount() == 2 * pol);
  CHECK(buf.valueCount() == 2 * val);
}

TEST_CASE("sampling is uniform over records, not episodes") {
  TspNet net(tinyCfg(1), Variant::Vanilla);
  perturb(net.params, 2, 0.3);

  // hand-built bundles: one with a single policy record, one with three
  TspInstance small = tspGenerate(5, 400), big = tspGenerate(5, 401);
  TspEnv env(small);
  auto s0 = env.initialState();
  Vec t1 = Vec::Ones(5) / 5.0;
  EpisodeBundle<TspEnv> one{small, {}}, three{big, {}};
  one.records.policy.push_back({s0, t1});
  one.records.value.push_back({s0, 0.1});
  for (int i = 0; i < 3; ++i) three.records.policy.push_back({s0, t1});
  three.records.value.push_back({s0, 0.2});

  ReplayBuffer<TspEnv> buf(10);
  buf.push(one);
  buf.push(three);
  CHECK(buf.policyCount() == 4);

  Rng rng(9);
  int fromSmall = 0;
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) {
    auto s = buf.samplePolicy(1, false, rng);
    if (s[0].inst.seed == 400) ++fromSmall;
  }
  CHECK(fromSmall > 850);
  CHECK(fromSmall < 1150);
}

TEST_CASE("augmentation transforms states and spares targets") {
  TspNet net(tinyCfg(1), Variant::PtpGt);
  perturb(net.params, 2, 0.3);
  ReplayBuffer<TspEnv> buf(4);
  buf.push(playBundle(500, net, net));

  TspInstance ref = tspGenerate(5, 500);
  Rng r1(11);
  auto plain = buf.samplePolicy(8, false, r1);
  for (const auto& s : plain) {
    CHECK((s.inst.nodes - ref.nodes).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(s.target.sum() - 1.0) < 1e-9);
  }

  Rng r2(12);
  auto aug = buf.samplePolicy(8, true, r2);
  int changed = 0;
  for (const auto& s : aug) {
    if ((s.inst.nodes - ref.nodes).cwiseAbs().maxCoeff() > 0) ++changed;
    CHECK(std::abs(s.target.sum() - 1.0) < 1e-9);
    CHECK(s.state.unvisited.size() <= 5);
  }
  CHECK(changed > 0);
}

TEST_CASE("pair samples share one augmentation transform") {
  TspInstance inst = tspGenerate(6, 600);
  TspEnv env(inst);
  auto s = env.initialState();
  s = env.transition(s, 2);
  s = env.transition(s, 4);

  EpisodeBundle<TspEnv> ep{inst, {}};
  ep.records.pairValue.push_back({s, s, 1.0});
  ReplayBuffer<TspEnv> buf(2);
  buf.push(ep);

  Rng rng(13);
  auto out = buf.samplePair(6, true, rng);
  for (const auto& p : out) {
    CHECK(p.toMove.len == doctest::Approx(p.other.len).epsilon(1e-12));
    CHECK(p.toMove.unvisited == p.other.unvisited);
    CHECK(p.z == 1.0);
  }
}

TEST_CASE("chunked training step equals a single-tape batch") {
  TspNet net1(tinyCfg(20), Variant::PtpGt);
  perturb(net1.params, 21, 0.3);
  TspNet net2(tinyCfg(20), Variant::PtpGt);
  perturb(net2.params, 21, 0.3);

  ReplayBuffer<TspEnv> buf(16);
  for (uint64_t i = 0; i < 9; ++i) buf.push(playBundle(700 + i, net1, net1, 5, 19 + i));
  TrainConfig cfg;
  cfg.batchSize = 40;  // > one 32-record chunk
  cfg.augment = false;
  cfg.lr = 1e-3;

  Rng r1 = Rng::derive(3, gaz::detail::kLearnerStream);
  auto st = trainStep(net1, buf, cfg, r1);
  CHECK(std::isfinite(st.policyLoss));
  CHECK(st.gradNorm > 0);

  Rng r2 = Rng::derive(3, gaz::detail::kLearnerStream);
  int nP = int(std::min<size_t>(40, buf.policyCount()));
  int nV = int(std::min<size_t>(40, buf.valueCount()));
  auto pol = buf.samplePolicy(nP, false, r2);
  auto pv = buf.samplePair(nV, false, r2);

  Tape<Real> t(true);
  Bind b(t, net2.params);
  int sumKl = -1, sumSq = -1;
  for (const auto& s : pol) {
    auto enc = net2.encodeG(t, b, s.inst, s.state);
    Row target = s.target.transpose();
    int kl = t.klVsSoftmax(net2.policyG(t, b, enc), target);
    sumKl = sumKl < 0 ? kl : t.add(sumKl, kl);
  }
  for (const auto& s : pv) {
    auto e1 = net2.encodeG(t, b, s.inst, s.toMove);
    auto e2 = net2.encodeG(t, b, s.inst, s.other);
    int sq = t.squaredDiff(net2.valuePairG(t, b, e1.stilde, e2.stilde), s.z);
    sumSq = sumSq < 0 ? sq : t.add(sumSq, sq);
  }
  int loss = t.add(t.scale(sumKl, Real(1) / nP), t.scale(sumSq, Real(1) / nV));
  Real pLoss = t.val(t.scale(sumKl, Real(1) / nP))(0, 0);
  Real vLoss = t.val(t.scale(sumSq, Real(1) / nV))(0, 0);
  t.backward(loss);
  auto grads = b.collectGrads();
  net2.params.adamStep(grads, cfg.lr);

  CHECK(st.policyLoss == doctest::Approx(pLoss).epsilon(1e-9));
  CHECK(st.valueLoss == doctest::Approx(vLoss).epsilon(1e-9));
  for (int p = 0; p < net1.params.count(); ++p) {
    const Mat& w1 = net1.params.tensor(p);
    const Mat& w2 = net2.params.tensor(p);
    CHECK((w1 - w2).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("training step learns a fixed tiny buffer") {
  TspNet net(tinyCfg(30), Variant::PtpGt);
  perturb(net.params, 31, 0.3);
  ReplayBuffer<TspEnv> buf(4);
  buf.push(playBundle(800, net, net));

  TrainConfig cfg;
  cfg.batchSize = 16;
  cfg.augment = false;
  cfg.lr = 1e-3;
  Rng rA(33);
  StepStats first = trainStep(net, buf, cfg, rA);
  Rng mid(34);
  for (int i = 0; i < 120; ++i) (void)trainStep(net, buf, cfg, mid);
  Rng rB(33);  // same batch as the first step
  StepStats last = trainStep(net, buf, cfg, rB);
  CHECK(last.policyLoss + last.valueLoss < first.policyLoss + first.valueLoss);
}

TEST_CASE("identical parameters never win the arena") {
  TspNet net(tinyCfg(40), Variant::PtpGt);
  perturb(net.params, 41, 0.3);
  std::vector<TspInstance> set;
  for (uint64_t i = 0; i < 4; ++i) set.push_back(tspGenerate(5, 900 + i));
  auto out = arenaEvaluate<TspEnv>(set, net, net);
  CHECK(out.sumDiff == 0.0);
  CHECK(!out.replace);
}

TEST_CASE("train runs deterministically in single-worker mode") {
  auto gen = [](uint64_t seed) { return tspGenerate(5, seed); };
  auto makeNet = [] { return TspNet(tinyCfg(50), Variant::PtpGt); };

  TrainConfig cfg;
  cfg.episodes = 12;
  cfg.arenaPeriod = 5;
  cfg.arenaSize = 2;
  cfg.validationSize = 2;
  cfg.batchSize = 16;
  cfg.stepsPerEpisode = 0.5;
  cfg.checkpointPeriod = 2;
  cfg.replayCapacity = 10;
  cfg.seed = 77;
  cfg.search.nSim = 6;
  cfg.search.mRoot = 4;

  std::string m1 = "/tmp/gaz_metrics_a.csv", m2 = "/tmp/gaz_metrics_b.csv";
  std::string c1 = "/tmp/gaz_ckpt_a.bin";
  auto r1 = train<TspEnv, TspNet>(gen, makeNet, cfg, m1, c1);
  auto r2 = train<TspEnv, TspNet>(gen, makeNet, cfg, m2, "");

  CHECK(r1.episodes == 12);
  CHECK(r1.steps == 6);
  CHECK(r1.arena.size() == 2);
  CHECK(r1.validation.size() == 3);  // after episodes 5, 10, and the tail at 12
  CHECK(r1.bestValidationEpisode >= 0);
  CHECK(slurp(m1) == slurp(m2));

  std::string text = slurp(m1);
  long rows = std::count(text.begin(), text.end(), '\n');
  CHECK(rows == 1 + 12 + 6);
  CHECK(text.rfind("kind,id,variant,learner_return,greedy_return,z,sims,policy_loss,value_loss,"
                    "grad_norm\n",
                    0) == 0);

  auto loaded = ParameterSet::load(c1);
  CHECK(loaded.sameShape(r1.finalParams));
  std::remove(m1.c_str());
  std::remove(m2.c_str());
  std::remove(c1.c_str());
}

TEST_CASE("worker pool completes the same workload") {
  auto gen = [](uint64_t seed) { return tspGenerate(5, seed); };
  auto makeNet = [] { return TspNet(tinyCfg(50), Variant::PtpGt); };

  TrainConfig cfg;
  cfg.episodes = 8;
  cfg.arenaPeriod = 4;
  cfg.arenaSize = 2;
  cfg.validationSize = 2;
  cfg.batchSize = 8;
  cfg.stepsPerEpisode = 0.25;
  cfg.replayCapacity = 10;
  cfg.workers = 2;
  cfg.seed = 78;
  cfg.search.nSim = 5;
  cfg.search.mRoot = 4;

  std::string m = "/tmp/gaz_metrics_pool.csv";
  auto r = train<TspEnv, TspNet>(gen, makeNet, cfg, m, "");
  CHECK(r.episodes == 8);
  CHECK(r.steps == 2);
  std::string text = slurp(m);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 8 + 2);
  std::remove(m.c_str());
}

TEST_CASE("train covers the single-player variants on jssp") {
  auto gen = [](uint64_t seed) { return jsspGenerate(2, 2, seed); };
  auto makeNet = [] { return JsspNet(tinyCfg(60), Variant::Vanilla, 2, 2); };

  TrainConfig cfg;
  cfg.episodes = 6;
  cfg.arenaPeriod = 3;
  cfg.arenaSize = 2;
  cfg.validationSize = 2;
  cfg.batchSize = 8;
  cfg.stepsPerEpisode = 1;
  cfg.replayCapacity = 10;
  cfg.seed = 79;
  cfg.search.nSim = 5;
  cfg.search.mRoot = 4;

  std::string m = "/tmp/gaz_metrics_jssp.csv";
  auto r = train<JsspEnv, JsspNet>(gen, makeNet, cfg, m, "");
  CHECK(r.episodes == 6);
  CHECK(r.steps == 6);
  CHECK(r.validation.size() == 2);
  std::remove(m.c_str());
}

TEST_CASE("corrupted parameters abort the training step") {
  TspNet net(tinyCfg(70), Variant::PtpGt);
  perturb(net.params, 71, 0.3);
  ReplayBuffer<TspEnv> buf(2);
  buf.push(playBundle(950, net, net));
  net.params.tensor(0)(0, 0) = std::nan("");
  TrainConfig cfg;
  cfg.batchSize = 4;
  cfg.augment = false;
  Rng rng(72);
  CHECK_THROWS((void)trainStep(net, buf, cfg, rng));
}

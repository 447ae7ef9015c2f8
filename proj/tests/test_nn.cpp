#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "gaz/nn/gradcheck.hpp"
#include "gaz/nn/net.hpp"

using namespace gaz;
using namespace gaz::nn;

namespace {

NetConfig tinyCfg(int dim = 8, int heads = 2, int blocks = 1, uint64_t seed = 3) {
  NetConfig cfg;
  cfg.dim = dim;
  cfg.heads = heads;
  cfg.blocks = blocks;
  cfg.jobBlocks = blocks;
  cfg.initSeed = seed;
  return cfg;
}

TspState tspStateAfter(const TspInstance& inst, const std::vector<int>& moves) {
  TspEnv env(inst);
  TspState s = env.initialState();
  for (int a : moves) s = env.transition(s, a);
  return s;
}

JsspState jsspStateAfter(const JsspInstance& inst, const std::vector<int>& moves) {
  JsspEnv env(inst);
  JsspState s = env.initialState();
  for (int a : moves) s = env.transition(s, a);
  return s;
}

void perturb(ParameterSet& ps, uint64_t seed, Real amp) {
  Rng rng = Rng::derive(seed, 0x70657274);
  for (int p = 0; p < ps.count(); ++p) {
    Mat& w = ps.tensor(p);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += amp * (2 * rng.uniform() - 1);
  }
}

}  // namespace

TEST_CASE("tape forward matches hand arithmetic") {
  Tape<Real> t(true);
  Mat x(1, 2), w(1, 2), b(1, 1);
  x << 2, 3;
  w << 0.5, -1;
  b << 0.25;
  int y = t.linear(t.input(x), t.param(w), t.param(b));
  CHECK(t.val(y)(0, 0) == doctest::Approx(2 * 0.5 - 3 + 0.25).epsilon(1e-12));

  int z = t.tanh(y);
  CHECK(t.val(z)(0, 0) == doctest::Approx(std::tanh(-1.75)).epsilon(1e-12));
}

TEST_CASE("tape backward on a scalar quadratic matches the closed form") {
  Tape<Real> t(true);
  Mat w0(1, 1);
  w0 << 2.0;
  int w = t.param(w0);
  int loss = t.squaredDiff(w, 3.0);
  t.backward(loss);
  CHECK(t.val(loss)(0, 0) == doctest::Approx(1.0));
  CHECK(t.grad(w)(0, 0) == doctest::Approx(2 * (2.0 - 3.0)).epsilon(1e-12));
}

TEST_CASE("tape guards") {
  Tape<Real> fwd(false);
  Mat w0 = Mat::Ones(1, 1);
  int w = fwd.param(w0);
  CHECK_THROWS_WITH(fwd.backward(w), "backward on a forward-only tape");

  Tape<Real> t(true);
  Mat m = Mat::Ones(2, 2);
  int p = t.param(m);
  CHECK_THROWS_WITH(t.backward(p), "backward root must be scalar");
}

TEST_CASE("kl against softmax handles zero target mass") {
  Tape<Real> t(true);
  Mat logits(1, 3);
  logits << 1.0, 0.0, -1.0;
  Row target(3);
  target << 0.7, 0.3, 0.0;
  int kl = t.klVsSoftmax(t.input(logits), target);
  Real z = std::exp(1.0) + 1.0 + std::exp(-1.0);
  Real p0 = std::exp(1.0) / z, p1 = 1.0 / z;
  Real expect = 0.7 * std::log(0.7 / p0) + 0.3 * std::log(0.3 / p1);
  CHECK(t.val(kl)(0, 0) == doctest::Approx(expect).epsilon(1e-12));

  Row same(3);
  Mat l2(1, 3);
  l2 << 0.3, 0.3, 0.3;
  same << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  int kl2 = t.klVsSoftmax(t.input(l2), same);
  CHECK(std::abs(t.val(kl2)(0, 0)) < 1e-12);
}

TEST_CASE("normalization layers produce standardized statistics") {
  Tape<Real> t(true);
  Rng rng(11);
  Mat x(4, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Mat g = Mat::Ones(1, 6), b = Mat::Zero(1, 6);
  int ln = t.layerNorm(t.input(x), t.param(g), t.param(b));
  const Mat& y = t.val(ln);
  for (int r = 0; r < 4; ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-9);
    Real var = (y.row(r).array() - y.row(r).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
  int in = t.instNorm(t.input(x), t.param(g), t.param(b));
  const Mat& yi = t.val(in);
  for (int c = 0; c < 6; ++c) CHECK(std::abs(yi.col(c).mean()) < 1e-9);
}

TEST_CASE("parameter registration and fan-in bounds") {
  Rng rng(5);
  ParameterSet ps;
  int a = ps.add("w", 4, 16, Init::FanIn, rng);
  ps.add("g", 1, 4, Init::One, rng);
  CHECK_THROWS_WITH(ps.add("w", 1, 1, Init::Zero, rng), "duplicate parameter name: w");
  CHECK_THROWS_WITH(ps.id("nope"), "unknown parameter: nope");
  Real bound = std::sqrt(1.0 / 16.0);
  CHECK(ps.tensor(a).cwiseAbs().maxCoeff() <= bound);
  CHECK(ps.tensor("g").minCoeff() == 1.0);
}

TEST_CASE("adam step: zero gradients leave parameters unchanged, version advances") {
  Rng rng(7);
  ParameterSet ps;
  ps.add("w", 3, 3, Init::FanIn, rng);
  Mat before = ps.tensor(0);
  uint64_t v0 = ps.version();
  std::vector<Mat> g{Mat::Zero(3, 3)};
  ps.adamStep(g);
  CHECK((ps.tensor(0) == before));
  CHECK(ps.version() == v0 + 1);
}

TEST_CASE("adam step: norm-5 gradient equals the same gradient pre-scaled by 1/5") {
  Rng rng(9);
  ParameterSet a;
  a.add("w", 2, 2, Init::FanIn, rng);
  ParameterSet b = a;

  Mat g(2, 2);
  g << 3, 4, 0, 0;
  Real norm = g.norm();
  CHECK(norm == doctest::Approx(5.0));
  std::vector<Mat> ga{g};
  std::vector<Mat> gb{g / 5.0};
  a.adamStep(ga);
  b.adamStep(gb);
  CHECK((a.tensor(0) == b.tensor(0)));
}

TEST_CASE("adam step reduces a one-dimensional quadratic") {
  Rng rng(13);
  ParameterSet ps;
  ps.add("theta", 1, 1, Init::Zero, rng);
  ps.tensor(0)(0, 0) = 2.0;
  auto loss = [&]() { return (ps.tensor(0)(0, 0) - 3.0) * (ps.tensor(0)(0, 0) - 3.0); };
  Real before = loss();
  for (int i = 0; i < 50; ++i) {
    std::vector<Mat> g{Mat::Constant(1, 1, 2.0 * (ps.tensor(0)(0, 0) - 3.0))};
    ps.adamStep(g, 1e-2);
  }
  CHECK(loss() < before);
}

TEST_CASE("adam step rejects malformed gradients") {
  Rng rng(15);
  ParameterSet ps;
  ps.add("w", 2, 2, Init::FanIn, rng);
  std::vector<Mat> wrong{Mat::Zero(1, 2)};
  CHECK_THROWS_WITH(ps.adamStep(wrong), "gradient shape mismatch: w");
  std::vector<Mat> nan{Mat::Constant(2, 2, std::nan(""))};
  CHECK_THROWS_WITH(ps.adamStep(nan), "non-finite gradient: w");
  std::vector<Mat> none;
  CHECK_THROWS_WITH(ps.adamStep(none), "gradient/parameter arity mismatch");
}

TEST_CASE("checkpoint round-trips bit-exactly including optimizer state") {
  NetConfig cfg = tinyCfg();
  TspNet net(cfg, Variant::PtpGt);
  Rng rng(21);
  std::vector<Mat> g;
  for (int p = 0; p < net.params.count(); ++p) {
    Mat m(net.params.tensor(p).rows(), net.params.tensor(p).cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    g.push_back(m);
  }
  net.params.adamStep(g);
  net.params.adamStep(g);

  const char* path = "ckpt_roundtrip_tmp.bin";
  net.params.save(path);
  ParameterSet back = ParameterSet::load(path);
  std::remove(path);

  REQUIRE(back.count() == net.params.count());
  CHECK(back.version() == net.params.version());
  CHECK(back.stepCount() == net.params.stepCount());
  CHECK(back.configDigest() == net.params.configDigest());
  for (int p = 0; p < back.count(); ++p) {
    CHECK(back.name(p) == net.params.name(p));
    CHECK((back.tensor(p) == net.params.tensor(p)));
  }
}

TEST_CASE("checkpoint load continues adam identically") {
  NetConfig cfg = tinyCfg(8, 2, 1, 4);
  TspNet a(cfg, Variant::Vanilla);
  Rng rng(33);
  std::vector<Mat> g;
  for (int p = 0; p < a.params.count(); ++p) {
    Mat m(a.params.tensor(p).rows(), a.params.tensor(p).cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.01 * rng.normal();
    g.push_back(m);
  }
  a.params.adamStep(g);
  const char* path = "ckpt_continue_tmp.bin";
  a.params.save(path);
  ParameterSet b = ParameterSet::load(path);
  std::remove(path);
  a.params.adamStep(g);
  b.adamStep(g);
  for (int p = 0; p < a.params.count(); ++p) CHECK((a.params.tensor(p) == b.tensor(p)));
}

TEST_CASE("checkpoint rejects foreign files") {
  const char* path = "ckpt_bad_tmp.bin";
  FILE* f = std::fopen(path, "wb");
  std::fputs("definitely not a checkpoint", f);
  std::fclose(f);
  CHECK_THROWS_WITH(ParameterSet::load(path), "not a checkpoint file: ckpt_bad_tmp.bin");
  std::remove(path);
  CHECK_THROWS_AS(ParameterSet::load("missing_ckpt_tmp.bin"), std::runtime_error);
}

TEST_CASE("tsp encoder shape contract and determinism") {
  TspInstance inst = tspGenerate(6, 101);
  NetConfig cfg = tinyCfg();
  TspNet net(cfg, Variant::PtpGt);
  Tape<Real> t(false);

  TspState s0 = tspStateAfter(inst, {});
  Latent l0 = net.encodeEval(t, inst, s0);
  CHECK(l0.actions.rows() == 6);
  CHECK(l0.actions.cols() == cfg.dim);
  CHECK(l0.stilde.size() == cfg.dim);
  CHECK(l0.stilde.allFinite());
  CHECK(l0.actions.allFinite());

  TspState s2 = tspStateAfter(inst, {1, 4});
  Latent l2 = net.encodeEval(t, inst, s2);
  CHECK(l2.actions.rows() == 4);

  Latent again = net.encodeEval(t, inst, s2);
  CHECK((again.stilde == l2.stilde));
  CHECK((again.actions == l2.actions));

  TspState done = s2;
  TspEnv env(inst);
  while (!env.isTerminal(done)) done = env.transition(done, env.feasibleActions(done)[0]);
  Latent lt = net.encodeEval(t, inst, done);
  CHECK(lt.actions.rows() == 0);
  CHECK(lt.stilde.size() == cfg.dim);
  CHECK(lt.stilde.allFinite());
  CHECK_THROWS_WITH((void)net.logitsFromLatent(t, lt), "policy requested with no action tokens");
}

TEST_CASE("tsp policy logits bounded and mask contract holds") {
  TspInstance inst = tspGenerate(7, 102);
  NetConfig cfg = tinyCfg();
  for (Variant v : {Variant::PtpGt, Variant::Vanilla}) {
    TspNet net(cfg, v);
    perturb(net.params, 77, 0.5);
    Tape<Real> t(false);
    TspState s = tspStateAfter(inst, {2});
    Latent l = net.encodeEval(t, inst, s);
    Vec u = net.logitsFromLatent(t, l);
    REQUIRE(u.size() == 6);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      CHECK(u(i) <= 10.0);
      CHECK(u(i) >= -10.0);
    }
    std::vector<uint8_t> mask(6, 1);
    mask[3] = 0;
    Vec um = net.logitsFromLatent(t, l, mask);
    CHECK(um(3) == -std::numeric_limits<Real>::infinity());
    Row sm = Row::Zero(6);
    Real mx = -1e300;
    for (int i = 0; i < 6; ++i) mx = std::max(mx, um(i));
    Real z = 0;
    for (int i = 0; i < 6; ++i) z += std::exp(um(i) - mx);
    CHECK(std::exp(um(3) - mx) / z == 0.0);

    std::vector<uint8_t> allOff(6, 0);
    CHECK_THROWS_WITH((void)net.logitsFromLatent(t, l, allOff), "all actions masked");
  }
}

TEST_CASE("identical action tokens receive equal logits") {
  NetConfig cfg = tinyCfg();
  TspNet net(cfg, Variant::Vanilla);
  perturb(net.params, 31, 0.4);
  Tape<Real> t(false);
  Latent l;
  Rng rng(41);
  l.stilde = Vec::Zero(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) l.stilde(i) = rng.normal();
  l.actions = Mat::Zero(3, cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) l.actions(0, i) = rng.normal();
  l.actions.row(1) = l.actions.row(0);
  for (int i = 0; i < cfg.dim; ++i) l.actions(2, i) = rng.normal();
  Vec u = net.logitsFromLatent(t, l);
  CHECK(u(0) == doctest::Approx(u(1)).epsilon(1e-12));
}

TEST_CASE("tsp encoder is permutation-equivariant at d=16") {
  int n = 7;
  TspInstance inst = tspGenerate(n, 103);
  NetConfig cfg = tinyCfg(16, 2, 2, 5);
  TspNet net(cfg, Variant::PtpGt);
  perturb(net.params, 51, 0.3);
  Tape<Real> t(false);

  std::vector<int> perm{3, 0, 6, 2, 5, 1, 4};
  TspInstance pinst = inst;
  for (int i = 0; i < n; ++i) pinst.nodes.row(i) = inst.nodes.row(perm[i]);

  TspState s0 = tspStateAfter(inst, {});
  Latent a = net.encodeEval(t, inst, s0);
  Latent b = net.encodeEval(t, pinst, s0);
  Vec ua = net.logitsFromLatent(t, a);
  Vec ub = net.logitsFromLatent(t, b);
  CHECK((a.stilde - b.stilde).cwiseAbs().maxCoeff() < 1e-6);
  for (int i = 0; i < n; ++i) {
    CHECK((b.actions.row(i) - a.actions.row(perm[i])).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(ub(i) - ua(perm[i])) < 1e-6);
  }
}

TEST_CASE("jssp encoder shape contract and job permutation equivariance") {
  JsspInstance inst = jsspGenerate(4, 3, 104);
  NetConfig cfg = tinyCfg(16, 2, 1, 6);
  JsspNet net(cfg, Variant::PtpGt, 4, 3);
  perturb(net.params, 61, 0.3);
  Tape<Real> t(false);

  JsspState s0 = jsspStateAfter(inst, {});
  Latent l0 = net.encodeEval(t, inst, s0);
  CHECK(l0.actions.rows() == 4);
  CHECK(l0.stilde.allFinite());

  JsspState s2 = jsspStateAfter(inst, {0, 0, 0});
  Latent l2 = net.encodeEval(t, inst, s2);
  CHECK(l2.actions.rows() == 3);

  JsspState sDone = jsspStateAfter(inst, {0, 0, 0, 1, 1, 1});
  Latent l3 = net.encodeEval(t, inst, sDone);
  CHECK(l3.actions.rows() == 2);

  std::vector<int> perm{2, 0, 3, 1};
  JsspInstance pinst = inst;
  for (int i = 0; i < 4; ++i) {
    pinst.machineOrder.row(i) = inst.machineOrder.row(perm[i]);
    pinst.times.row(i) = inst.times.row(perm[i]);
  }
  Latent a = net.encodeEval(t, inst, s0);
  Latent b = net.encodeEval(t, pinst, s0);
  Vec ua = net.logitsFromLatent(t, a);
  Vec ub = net.logitsFromLatent(t, b);
  CHECK((a.stilde - b.stilde).cwiseAbs().maxCoeff() < 1e-6);
  for (int i = 0; i < 4; ++i) {
    CHECK((b.actions.row(i) - a.actions.row(perm[i])).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(ub(i) - ua(perm[i])) < 1e-6);
  }

  JsspEnv env(inst);
  JsspState term = s0;
  while (!env.isTerminal(term)) term = env.transition(term, env.feasibleActions(term)[0]);
  Latent lt = net.encodeEval(t, inst, term);
  CHECK(lt.actions.rows() == 0);
  CHECK(lt.stilde.allFinite());
  CHECK_THROWS_WITH((void)net.logitsFromLatent(t, lt), "policy requested with no action tokens");
}

TEST_CASE("value heads respect their output ranges and zero init") {
  TspInstance inst = tspGenerate(5, 105);
  NetConfig cfg = tinyCfg();
  Tape<Real> t(false);
  TspState s = tspStateAfter(inst, {0});
  TspState s2 = tspStateAfter(inst, {1});

  TspNet pair(cfg, Variant::PtpGt);
  Latent a = pair.encodeEval(t, inst, s), b = pair.encodeEval(t, inst, s2);
  CHECK(pair.valuePairEval(t, a, b) == 0.0);
  perturb(pair.params, 71, 1.0);
  Latent a2 = pair.encodeEval(t, inst, s), b2 = pair.encodeEval(t, inst, s2);
  Real v = pair.valuePairEval(t, a2, b2);
  CHECK(v > -1.0);
  CHECK(v < 1.0);

  TspNet scalar(cfg, Variant::GreedyScalar);
  Latent c = scalar.encodeEval(t, inst, s);
  CHECK(scalar.valueScalarEval(t, c, 0.37) == 0.0);
  perturb(scalar.params, 72, 1.0);
  Latent c2 = scalar.encodeEval(t, inst, s);
  Real vs = scalar.valueScalarEval(t, c2, 0.37);
  CHECK(vs > -1.0);
  CHECK(vs < 1.0);

  TspNet single(cfg, Variant::Vanilla);
  Latent d = single.encodeEval(t, inst, s);
  CHECK(single.valueSingleEval(t, d) == 0.0);
  CHECK_THROWS_WITH((void)single.valuePairEval(t, d, d),
                    "pair value head not present in this variant");
  CHECK_THROWS_WITH((void)pair.valueSingleEval(t, a2),
                    "single value head not present in this variant");

  perturb(single.params, 73, 2.0);
  Mat& outw = single.params.tensor(single.params.id("tsp.value.out.w"));
  outw.setConstant(50.0);
  Latent d2 = single.encodeEval(t, inst, s);
  Real unbounded = std::abs(single.valueSingleEval(t, d2));
  CHECK(unbounded > 1.0);
}

TEST_CASE("loss assembly worked example and empty-batch guard") {
  Tape<Real> t(true);
  Mat half(1, 1);
  half << 0.5;
  int pred = t.input(half);
  LossGraph g = buildLoss(t, {pred}, {1.0}, {});
  CHECK(t.val(g.root)(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(g.policyLoss == -1);

  Mat logits(1, 2);
  logits << 0.0, 0.0;
  Row target(2);
  target << 0.5, 0.5;
  int kl = t.klVsSoftmax(t.input(logits), target);
  LossGraph both = buildLoss(t, {pred}, {1.0}, {kl});
  CHECK(t.val(both.root)(0, 0) == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_WITH((void)buildLoss(t, {}, {}, {}), "empty batch");
}

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::PtpSt, Variant::PtpGt, Variant::Vanilla, Variant::NStep,
                    Variant::GreedyScalar, Variant::TbGreedy, Variant::TbSampled})
    CHECK(parseVariant(variantName(v)) == v);
  CHECK_THROWS_WITH((void)parseVariant("alphago"), "unknown variant: alphago");
}

TEST_CASE("gradients match central finite differences for every head variant") {
  TspInstance inst = tspGenerate(5, 106);
  JsspInstance jinst = jsspGenerate(3, 3, 107);
  TspState ts = tspStateAfter(inst, {2});
  TspState ts2 = tspStateAfter(inst, {0, 3});
  JsspState js = jsspStateAfter(jinst, {1});

  auto tspTarget = [](int m) {
    Row r = Row::Constant(m, 1.0 / m);
    r(0) += 0.1;
    r(1) -= 0.1;
    return r;
  };

  SUBCASE("ptp pair head on tsp") {
    NetConfig cfg = tinyCfg(8, 2, 1, 8);
    TspNet net(cfg, Variant::PtpGt);
    perturb(net.params, 81, 0.2);
    auto build = [&](Tape<Real>& t, Bind& b) {
      auto e1 = net.encodeG(t, b, inst, ts);
      auto e2 = net.encodeG(t, b, inst, ts2);
      int v = net.valuePairG(t, b, e1.stilde, e2.stilde);
      int kl = t.klVsSoftmax(net.policyG(t, b, e1), tspTarget(e1.m));
      return buildLoss(t, {v}, {1.0}, {kl}).root;
    };
    auto rep = gradCheck(net.params, build);
    INFO("max rel err ", rep.maxRelErr, " over ", rep.checked);
    CHECK(rep.pass);
  }

  SUBCASE("single head on tsp") {
    NetConfig cfg = tinyCfg(8, 2, 1, 9);
    TspNet net(cfg, Variant::Vanilla);
    perturb(net.params, 82, 0.2);
    auto build = [&](Tape<Real>& t, Bind& b) {
      auto e1 = net.encodeG(t, b, inst, ts);
      int v = net.valueSingleG(t, b, e1.stilde);
      int kl = t.klVsSoftmax(net.policyG(t, b, e1), tspTarget(e1.m));
      return buildLoss(t, {v}, {-0.8}, {kl}).root;
    };
    auto rep = gradCheck(net.params, build);
    INFO("max rel err ", rep.maxRelErr, " over ", rep.checked);
    CHECK(rep.pass);
  }

  SUBCASE("scalar head on jssp") {
    NetConfig cfg = tinyCfg(8, 2, 1, 10);
    JsspNet net(cfg, Variant::GreedyScalar, 3, 3);
    perturb(net.params, 83, 0.2);
    auto build = [&](Tape<Real>& t, Bind& b) {
      auto e1 = net.encodeG(t, b, jinst, js);
      int v = net.valueScalarG(t, b, e1.stilde, -0.42);
      int kl = t.klVsSoftmax(net.policyG(t, b, e1), tspTarget(e1.m));
      return buildLoss(t, {v}, {1.0}, {kl}).root;
    };
    auto rep = gradCheck(net.params, build, 1e-4, 1e-3, 1e-8, 12, 99);
    INFO("max rel err ", rep.maxRelErr, " over ", rep.checked);
    CHECK(rep.pass);
  }

  SUBCASE("ptp pair head on jssp") {
    NetConfig cfg = tinyCfg(8, 2, 1, 11);
    JsspNet net(cfg, Variant::PtpSt, 3, 3);
    perturb(net.params, 84, 0.2);
    JsspState js2 = jsspStateAfter(jinst, {1, 2});
    auto build = [&](Tape<Real>& t, Bind& b) {
      auto e1 = net.encodeG(t, b, jinst, js);
      auto e2 = net.encodeG(t, b, jinst, js2);
      int v = net.valuePairG(t, b, e1.stilde, e2.stilde);
      int kl = t.klVsSoftmax(net.policyG(t, b, e1), tspTarget(e1.m));
      return buildLoss(t, {v}, {-1.0}, {kl}).root;
    };
    auto rep = gradCheck(net.params, build, 1e-4, 1e-3, 1e-8, 12, 100);
    INFO("max rel err ", rep.maxRelErr, " over ", rep.checked);
    CHECK(rep.pass);
  }
}

TEST_CASE("eval latents agree with training-graph encodings") {
  TspInstance inst = tspGenerate(6, 108);
  NetConfig cfg = tinyCfg();
  TspNet net(cfg, Variant::PtpGt);
  perturb(net.params, 91, 0.3);
  TspState s = tspStateAfter(inst, {1});

  Tape<Real> fwd(false);
  Latent l = net.encodeEval(fwd, inst, s);
  Vec fast = net.logitsFromLatent(fwd, l);

  Tape<Real> t(true);
  Bind b(t, net.params);
  auto e = net.encodeG(t, b, inst, s);
  Vec slow = t.val(net.policyG(t, b, e)).row(0).transpose();
  CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
}

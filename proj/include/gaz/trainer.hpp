#pragma once

#include "gaz/ptp.hpp"
#include "gaz/sp.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <thread>
#include <tuple>

namespace gaz {

inline std::pair<TspInstance, TspState> augmentView(const TspInstance& inst, const TspState& s,
                                                    Rng& rng) {
  return tspAugment(inst, s, tspRandomAugmentation(rng));
}

inline std::pair<JsspInstance, JsspState> augmentView(const JsspInstance& inst, const JsspState& s,
                                                      Rng& rng) {
  return jsspAugment(inst, s, jsspRandomAugmentation(inst.m, rng));
}

/// Pair records keep both states consistent by sharing one transform.
inline std::tuple<TspInstance, TspState, TspState> augmentPairView(const TspInstance& inst,
                                                                   const TspState& a,
                                                                   const TspState& b, Rng& rng) {
  TspAugmentation aug = tspRandomAugmentation(rng);
  auto [i1, s1] = tspAugment(inst, a, aug);
  auto s2 = tspAugment(inst, b, aug).second;
  return {i1, s1, s2};
}

inline std::tuple<JsspInstance, JsspState, JsspState> augmentPairView(const JsspInstance& inst,
                                                                      const JsspState& a,
                                                                      const JsspState& b,
                                                                      Rng& rng) {
  JsspAugmentation aug = jsspRandomAugmentation(inst.m, rng);
  auto [i1, s1] = jsspAugment(inst, a, aug);
  auto s2 = jsspAugment(inst, b, aug).second;
  return {i1, s1, s2};
}

template <class Env>
struct EpisodeBundle {
  typename Env::Instance inst;
  EpisodeRecords<typename Env::State> records;
};

/// Ring of the latest `capacity` episodes. Sampling is uniform over the
/// stored records of the requested kind, not over episodes, so long episodes
/// weigh proportionally more.
template <class Env>
class ReplayBuffer {
 public:
  using Instance = typename Env::Instance;
  using State = typename Env::State;

  explicit ReplayBuffer(size_t capacity = 2000) : cap_(capacity) {
    require(capacity >= 1, "replay capacity must be positive");
  }

  void push(EpisodeBundle<Env> ep) {
    add(ep.records, 1);
    eps_.push_back(std::move(ep));
    if (eps_.size() > cap_) {
      add(eps_.front().records, -1);
      eps_.pop_front();
    }
  }

  size_t episodes() const { return eps_.size(); }
  size_t policyCount() const { return size_t(nPolicy_); }
  size_t valueCount() const { return size_t(nValue_ + nPair_ + nScalar_); }

  struct PolicySample {
    Instance inst;
    State state;
    Vec target;
  };
  struct ValueSample {
    Instance inst;
    State state;
    Real target = 0;
  };
  struct PairSample {
    Instance inst;
    State toMove;
    State other;
    Real z = 0;
  };
  struct ScalarSample {
    Instance inst;
    State state;
    Real baseline = 0;
    Real z = 0;
  };

  std::vector<PolicySample> samplePolicy(int n, bool augment, Rng& rng) const {
    require(nPolicy_ > 0, "sampling from an empty replay buffer");
    std::vector<PolicySample> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
      auto [ep, idx] = locate(rng.uniformInt(int(nPolicy_)),
                              [](const EpisodeBundle<Env>& e) { return e.records.policy.size(); });
      const auto& rec = ep->records.policy[idx];
      if (augment) {
        auto [ai, as] = augmentView(ep->inst, rec.state, rng);
        out.push_back({std::move(ai), std::move(as), rec.target});
      } else {
        out.push_back({ep->inst, rec.state, rec.target});
      }
    }
    return out;
  }

  std::vector<ValueSample> sampleValue(int n, bool augment, Rng& rng) const {
    require(nValue_ > 0, "sampling from an empty replay buffer");
    std::vector<ValueSample> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
      auto [ep, idx] = locate(rng.uniformInt(int(nValue_)),
                              [](const EpisodeBundle<Env>& e) { return e.records.value.size(); });
      const auto& rec = ep->records.value[idx];
      if (augment) {
        auto [ai, as] = augmentView(ep->inst, rec.state, rng);
        out.push_back({std::move(ai), std::move(as), rec.target});
      } else {
        out.push_back({ep->inst, rec.state, rec.target});
      }
    }
    return out;
  }

  std::vector<PairSample> samplePair(int n, bool augment, Rng& rng) const {
    require(nPair_ > 0, "sampling from an empty replay buffer");
    std::vector<PairSample> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
      auto [ep, idx] =
          locate(rng.uniformInt(int(nPair_)),
                 [](const EpisodeBundle<Env>& e) { return e.records.pairValue.size(); });
      const auto& rec = ep->records.pairValue[idx];
      if (augment) {
        auto [ai, s1, s2] = augmentPairView(ep->inst, rec.toMove, rec.other, rng);
        out.push_back({std::move(ai), std::move(s1), std::move(s2), rec.z});
      } else {
        out.push_back({ep->inst, rec.toMove, rec.other, rec.z});
      }
    }
    return out;
  }

  std::vector<ScalarSample> sampleScalar(int n, bool augment, Rng& rng) const {
    require(nScalar_ > 0, "sampling from an empty replay buffer");
    std::vector<ScalarSample> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
      auto [ep, idx] =
          locate(rng.uniformInt(int(nScalar_)),
                 [](const EpisodeBundle<Env>& e) { return e.records.scalarValue.size(); });
      const auto& rec = ep->records.scalarValue[idx];
      if (augment) {
        auto [ai, as] = augmentView(ep->inst, rec.state, rng);
        out.push_back({std::move(ai), std::move(as), rec.baseline, rec.z});
      } else {
        out.push_back({ep->inst, rec.state, rec.baseline, rec.z});
      }
    }
    return out;
  }

 private:
  void add(const EpisodeRecords<State>& r, long sign) {
    nPolicy_ += sign * long(r.policy.size());
    nValue_ += sign * long(r.value.size());
    nPair_ += sign * long(r.pairValue.size());
    nScalar_ += sign * long(r.scalarValue.size());
  }

  template <class CountFn>
  std::pair<const EpisodeBundle<Env>*, size_t> locate(long pick, CountFn count) const {
    for (const auto& ep : eps_) {
      long c = long(count(ep));
      if (pick < c) return {&ep, size_t(pick)};
      pick -= c;
    }
    require(false, "replay index out of range");
    return {nullptr, 0};
  }

  size_t cap_;
  std::deque<EpisodeBundle<Env>> eps_;
  long nPolicy_ = 0, nValue_ = 0, nPair_ = 0, nScalar_ = 0;
};

struct TrainConfig {
  int episodes = 1500;
  Real gamma = 0.2;           // probability the greedy actor follows current params
  int arenaPeriod = 400;      // episodes between arena comparisons
  int arenaSize = 64;
  int validationSize = 16;
  int batchSize = 256;
  Real stepsPerEpisode = 1;   // optimizer steps accrued per finished episode
  int checkpointPeriod = 100; // optimizer steps between snapshot publishes
  int workers = 1;            // 1 = synchronous deterministic mode
  size_t replayCapacity = 2000;
  bool augment = true;
  Real lr = 1e-4;
  uint64_t seed = 42;
  SearchConfig search;
  int nStep = 20;
  int tbSamples = 10;
};

inline void validateTrainConfig(const TrainConfig& c) {
  require(c.episodes >= 1, "episodes must be positive");
  require(c.gamma >= 0 && c.gamma < 1, "gamma must lie in [0, 1)");
  require(c.arenaPeriod >= 1 && c.checkpointPeriod >= 1, "periods must be >= 1");
  require(c.arenaSize >= 1 && c.validationSize >= 1, "evaluation sets must be non-empty");
  require(c.batchSize >= 1, "batch size must be positive");
  require(c.stepsPerEpisode >= 0, "steps per episode must be non-negative");
  require(c.workers >= 1, "worker count must be positive");
  require(c.lr > 0, "learning rate must be positive");
}

inline Real tspStepRatio(int n) { return 0.1 * n; }
inline Real jsspStepRatio(int k, int m) { return 0.02 * k * m; }

inline constexpr const char* kMetricsHeader =
    "kind,id,variant,learner_return,greedy_return,z,sims,policy_loss,value_loss,grad_norm";

/// Append-only run log. One fixed header; episode and optimizer-step rows
/// share it via the kind column, leaving the other kind's columns empty.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : out_(path) {
    require(out_.good(), "cannot open metrics file: " + path);
    out_ << kMetricsHeader << '\n';
    out_ << std::setprecision(12);
  }

  void episode(long id, const std::string& variant, Real learnerRet, Real greedyRet, int z,
               long sims) {
    out_ << "episode," << id << ',' << variant << ',' << learnerRet << ',' << greedyRet << ','
         << z << ',' << sims << ",,,\n";
    require(out_.good(), "metrics write failed");
  }

  void step(long id, Real policyLoss, Real valueLoss, Real gradNorm) {
    out_ << "step," << id << ",,,,,," << policyLoss << ',' << valueLoss << ',' << gradNorm
         << '\n';
    require(out_.good(), "metrics write failed");
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

struct StepStats {
  Real policyLoss = 0;
  Real valueLoss = 0;
  Real gradNorm = 0;  // global L2 norm before clipping
};

namespace detail {

inline void accumulateGrads(std::vector<Mat>& acc, const std::vector<Mat>& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace detail

/// One optimizer step: sample up to batchSize policy records and batchSize
/// value records, build KL + MSE means, and apply Adam. Graphs are built in
/// 32-record chunks whose gradients are summed in order, so the update is
/// identical to a single-tape batch while memory stays bounded.
template <class Env, class Net>
StepStats trainStep(Net& net, const ReplayBuffer<Env>& buf, const TrainConfig& cfg, Rng& rng) {
  Variant v = net.variant();
  int nP = int(std::min<size_t>(size_t(cfg.batchSize), buf.policyCount()));
  int nV = int(std::min<size_t>(size_t(cfg.batchSize), buf.valueCount()));
  require(nP > 0 && nV > 0, "training step before any records were stored");

  auto pol = buf.samplePolicy(nP, cfg.augment, rng);
  std::vector<typename ReplayBuffer<Env>::ValueSample> single;
  std::vector<typename ReplayBuffer<Env>::PairSample> pair;
  std::vector<typename ReplayBuffer<Env>::ScalarSample> scalar;
  if (nn::isPtp(v))
    pair = buf.samplePair(nV, cfg.augment, rng);
  else if (nn::isScalarHead(v))
    scalar = buf.sampleScalar(nV, cfg.augment, rng);
  else
    single = buf.sampleValue(nV, cfg.augment, rng);

  const int chunk = 32;
  std::vector<Mat> acc;
  StepStats st;

  for (int base = 0; base < nP; base += chunk) {
    Tape<Real> t(true);
    nn::Bind b(t, net.params);
    int sum = -1;
    for (int i = base; i < std::min(base + chunk, nP); ++i) {
      auto enc = net.encodeG(t, b, pol[size_t(i)].inst, pol[size_t(i)].state);
      Row target = pol[size_t(i)].target.transpose();
      int kl = t.klVsSoftmax(net.policyG(t, b, enc), target);
      sum = sum < 0 ? kl : t.add(sum, kl);
    }
    int scaled = t.scale(sum, Real(1) / Real(nP));
    st.policyLoss += t.val(scaled)(0, 0);
    t.backward(scaled);
    detail::accumulateGrads(acc, b.collectGrads());
  }

  for (int base = 0; base < nV; base += chunk) {
    Tape<Real> t(true);
    nn::Bind b(t, net.params);
    int sum = -1;
    for (int i = base; i < std::min(base + chunk, nV); ++i) {
      int sq;
      if (nn::isPtp(v)) {
        const auto& s = pair[size_t(i)];
        auto e1 = net.encodeG(t, b, s.inst, s.toMove);
        auto e2 = net.encodeG(t, b, s.inst, s.other);
        sq = t.squaredDiff(net.valuePairG(t, b, e1.stilde, e2.stilde), s.z);
      } else if (nn::isScalarHead(v)) {
        const auto& s = scalar[size_t(i)];
        auto e = net.encodeG(t, b, s.inst, s.state);
        sq = t.squaredDiff(net.valueScalarG(t, b, e.stilde, s.baseline), s.z);
      } else {
        const auto& s = single[size_t(i)];
        auto e = net.encodeG(t, b, s.inst, s.state);
        sq = t.squaredDiff(net.valueSingleG(t, b, e.stilde), s.target);
      }
      sum = sum < 0 ? sq : t.add(sum, sq);
    }
    int scaled = t.scale(sum, Real(1) / Real(nV));
    st.valueLoss += t.val(scaled)(0, 0);
    t.backward(scaled);
    detail::accumulateGrads(acc, b.collectGrads());
  }

  require(std::isfinite(st.policyLoss) && std::isfinite(st.valueLoss),
          "non-finite loss; aborting training");
  st.gradNorm = net.params.lastGradNorm(acc);
  net.params.adamStep(acc, cfg.lr);
  return st;
}

template <class Env, class Net>
Real greedyObjective(const Env& env, const Net& net) {
  return -greedyRollout(env, net).ret * envScale(env);
}

struct ArenaOutcome {
  Real sumDiff = 0;  // sum over the set of (return(theta) - return(thetaB))
  bool replace = false;
};

/// Greedy head-to-head on the fixed arena set; replacement needs a strictly
/// positive aggregate return difference.
template <class Env, class Net>
ArenaOutcome arenaEvaluate(const std::vector<typename Env::Instance>& set, const Net& theta,
                           const Net& thetaB) {
  ArenaOutcome out;
  for (const auto& inst : set) {
    Env env(inst);
    out.sumDiff += greedyRollout(env, theta).ret - greedyRollout(env, thetaB).ret;
  }
  out.replace = out.sumDiff > 0;
  return out;
}

template <class Env, class Net>
Real meanGreedyObjective(const std::vector<typename Env::Instance>& set, const Net& net) {
  require(!set.empty(), "evaluation set is empty");
  Real acc = 0;
  for (const auto& inst : set) acc += greedyObjective(Env(inst), net);
  return acc / Real(set.size());
}

struct ArenaRecord {
  long episode = 0;
  Real sumDiff = 0;
  bool replaced = false;
};

struct ValidationRecord {
  long episode = 0;
  Real meanObjective = 0;
};

struct TrainResult {
  nn::ParameterSet finalParams;  // validation-selected model
  nn::ParameterSet lastParams;   // theta at the end of training
  nn::ParameterSet bestParams;   // theta^B at the end of training
  std::vector<ArenaRecord> arena;
  std::vector<ValidationRecord> validation;
  long episodes = 0;
  long steps = 0;
  Real bestValidation = 0;
  long bestValidationEpisode = -1;
};

namespace detail {

template <class Env>
struct EpisodeOutcome {
  long id = 0;
  EpisodeBundle<Env> bundle;
  Real learnerReturn = 0;
  Real greedyReturn = 0;
  int z = 0;
  long sims = 0;
};

/// Parameter snapshot published to the playing side every checkpoint period.
struct Snapshot {
  nn::ParameterSet theta;
  nn::ParameterSet best;
  uint64_t version = 0;
};

constexpr uint64_t kInstanceStream = 0x10000000ull;
constexpr uint64_t kEpisodeStream = 0x20000000ull;
constexpr uint64_t kArenaStream = 0x30000000ull;
constexpr uint64_t kValidationStream = 0x40000000ull;
constexpr uint64_t kLearnerStream = 0x50000000ull;

/// Plays episode `id` against the snapshot. The gamma draw picks the greedy
/// actor's parameters: current theta with probability gamma, theta^B else.
template <class Env, class Net, class GenFn>
EpisodeOutcome<Env> playOne(long id, const GenFn& gen, Net& theta, Net& muNet,
                            const Snapshot& snap, const TrainConfig& cfg) {
  theta.params = snap.theta;
  Rng rng = Rng::derive(cfg.seed, kEpisodeStream + uint64_t(id));
  bool selfPlay = rng.uniform() < cfg.gamma;
  const nn::ParameterSet& muParams = selfPlay ? snap.theta : snap.best;

  typename Env::Instance inst =
      gen(Rng::derive(cfg.seed, kInstanceStream + uint64_t(id)).bits());
  Env env(inst);

  EpisodeOutcome<Env> out;
  out.id = id;
  Variant v = theta.variant();
  if (nn::isPtp(v)) {
    muNet.params = muParams;
    NetMuPolicy<Env, Net> mu(env, muNet);
    PtpConfig pcfg;
    pcfg.search = cfg.search;
    auto g = playPtpEpisode(env, theta, mu, pcfg, rng);
    out.bundle = {std::move(inst), std::move(g.records)};
    out.learnerReturn = g.learnerReturn;
    out.greedyReturn = g.greedyReturn;
    out.z = g.z;
    out.sims = g.sims;
  } else {
    muNet.params = muParams;
    SpConfig scfg;
    scfg.search = cfg.search;
    scfg.nStep = cfg.nStep;
    scfg.tbSamples = cfg.tbSamples;
    auto g = playSpEpisode(env, theta, muNet, scfg, rng);
    out.learnerReturn = g.ret;
    out.greedyReturn =
        v == Variant::GreedyScalar ? g.baselineR : greedyRollout(env, muNet).ret;
    out.z = v == Variant::GreedyScalar ? g.z : gameOutcome(g.ret, out.greedyReturn);
    out.sims = g.sims;
    out.bundle = {std::move(inst), std::move(g.records)};
  }
  return out;
}

}  // namespace detail

/// Generate/learn loop. `gen(seed)` supplies instances; `makeNet()` builds a
/// network of the trained shape (its parameters are overwritten). Episodes
/// play against the latest published snapshot; the learner owns the buffer
/// and parameters, refreshes theta^B through the arena, and tracks the best
/// validation model. workers == 1 runs everything inline and deterministic;
/// otherwise `workers` threads produce episodes through an ordered queue.
template <class Env, class Net, class GenFn, class MakeNetFn>
TrainResult train(const GenFn& gen, const MakeNetFn& makeNet, const TrainConfig& cfg,
                  const std::string& metricsPath, const std::string& checkpointPath) {
  validateTrainConfig(cfg);
  MetricsWriter metrics(metricsPath);

  Net net = makeNet();       // learner-owned theta
  Net bestNet = makeNet();   // theta^B, frozen between arenas
  bestNet.params = net.params;
  std::string variant = nn::variantName(net.variant());

  std::vector<typename Env::Instance> arenaSet, valSet;
  for (int i = 0; i < cfg.arenaSize; ++i)
    arenaSet.push_back(gen(Rng::derive(cfg.seed, detail::kArenaStream + uint64_t(i)).bits()));
  for (int i = 0; i < cfg.validationSize; ++i)
    valSet.push_back(gen(Rng::derive(cfg.seed, detail::kValidationStream + uint64_t(i)).bits()));

  ReplayBuffer<Env> buf(cfg.replayCapacity);
  Rng learnRng = Rng::derive(cfg.seed, detail::kLearnerStream);

  TrainResult res;
  res.finalParams = net.params;
  Real stepAcc = 0;

  std::mutex mu;
  auto snap = std::make_shared<detail::Snapshot>();
  snap->theta = net.params;
  snap->best = bestNet.params;
  auto publish = [&] {
    auto next = std::make_shared<detail::Snapshot>();
    next->theta = net.params;
    next->best = bestNet.params;
    std::lock_guard<std::mutex> lk(mu);
    next->version = snap->version + 1;
    snap = std::move(next);
  };

  auto validate = [&](long episode) {
    Real mean = meanGreedyObjective<Env>(valSet, net);
    res.validation.push_back({episode, mean});
    if (res.bestValidationEpisode < 0 || mean < res.bestValidation) {
      res.bestValidation = mean;
      res.bestValidationEpisode = episode;
      res.finalParams = net.params;
    }
  };

  auto process = [&](detail::EpisodeOutcome<Env> out) {
    buf.push(std::move(out.bundle));
    metrics.episode(out.id, variant, out.learnerReturn, out.greedyReturn, out.z, out.sims);
    ++res.episodes;

    stepAcc += cfg.stepsPerEpisode;
    while (stepAcc >= 1.0) {
      stepAcc -= 1.0;
      StepStats st = trainStep(net, buf, cfg, learnRng);
      ++res.steps;
      metrics.step(res.steps, st.policyLoss, st.valueLoss, st.gradNorm);
      if (res.steps % cfg.checkpointPeriod == 0) publish();
    }

    if (res.episodes % cfg.arenaPeriod == 0) {
      auto arena = arenaEvaluate<Env>(arenaSet, net, bestNet);
      res.arena.push_back({res.episodes, arena.sumDiff, arena.replace});
      if (arena.replace) bestNet.params = net.params;
      validate(res.episodes);
      publish();
      metrics.flush();
    }
  };

  if (cfg.workers == 1) {
    Net playTheta = makeNet();
    Net playMu = makeNet();
    for (long e = 0; e < cfg.episodes; ++e) {
      std::shared_ptr<const detail::Snapshot> s;
      {
        std::lock_guard<std::mutex> lk(mu);
        s = snap;
      }
      process(detail::playOne<Env>(e, gen, playTheta, playMu, *s, cfg));
    }
  } else {
    std::condition_variable cvPush, cvPop;
    std::deque<detail::EpisodeOutcome<Env>> queue;
    std::atomic<long> nextEpisode{0};
    std::exception_ptr error;
    bool stop = false;
    const size_t bound = size_t(cfg.workers) * 2;

    auto workerFn = [&] {
      Net playTheta = makeNet();
      Net playMu = makeNet();
      try {
        for (;;) {
          long e = nextEpisode.fetch_add(1);
          if (e >= cfg.episodes) return;
          std::shared_ptr<const detail::Snapshot> s;
          {
            std::lock_guard<std::mutex> lk(mu);
            s = snap;
          }
          auto out = detail::playOne<Env>(e, gen, playTheta, playMu, *s, cfg);
          std::unique_lock<std::mutex> lk(mu);
          cvPush.wait(lk, [&] { return queue.size() < bound || stop; });
          if (stop) return;
          queue.push_back(std::move(out));
          cvPop.notify_one();
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!error) error = std::current_exception();
        stop = true;
        cvPop.notify_all();
        cvPush.notify_all();
      }
    };

    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(workerFn);

    for (long received = 0; received < cfg.episodes; ++received) {
      detail::EpisodeOutcome<Env> out;
      {
        std::unique_lock<std::mutex> lk(mu);
        cvPop.wait(lk, [&] { return !queue.empty() || error; });
        if (error) break;
        out = std::move(queue.front());
        queue.pop_front();
        cvPush.notify_one();
      }
      process(std::move(out));
    }
    {
      std::lock_guard<std::mutex> lk(mu);
      stop = true;
      cvPush.notify_all();
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  if (res.episodes % cfg.arenaPeriod != 0) validate(res.episodes);

  res.lastParams = net.params;
  res.bestParams = bestNet.params;
  if (!checkpointPath.empty()) res.finalParams.save(checkpointPath);
  metrics.flush();
  return res;
}

}  // namespace gaz

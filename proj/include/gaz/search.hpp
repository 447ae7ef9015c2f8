#pragma once

#include "gaz/common.hpp"

#include <algorithm>
#include <concepts>
#include <limits>
#include <utility>

namespace gaz {

struct SearchConfig {
  int nSim = 50;
  int mRoot = 16;
  Real cVisit = 50.0;
  Real cScale = 1.0;
  bool minmax = false;
  /// Timestep-dependent baselines (one per environment step). When set, the
  /// advantage at in-tree depth d uses b[min(rootStep+d, T-1)] in place of
  /// the completed value estimate.
  const std::vector<Real>* baselines = nullptr;
  int rootStep = 0;
};

struct Evaluation {
  Vec logits;
  Real value = 0;
};

template <typename D>
concept SearchDomain = requires(D d, const typename D::State& s, int a, Rng& rng) {
  { d.isTerminal(s) } -> std::same_as<bool>;
  { d.actionCount(s) } -> std::same_as<int>;
  { d.step(s, a, rng) } -> std::same_as<std::pair<typename D::State, Real>>;
  { d.evaluate(s) } -> std::same_as<Evaluation>;
  { d.terminalValue(s) } -> std::same_as<Real>;
};

struct GumbelSample {
  int action;
  Real g;
  Real score;
};

/// Top-k actions by g(a) + logit(a) with the given per-action noise.
/// Sorted by score descending, ties to the lowest index.
inline std::vector<GumbelSample> gumbelTopK(const Vec& logits, const Vec& noise, int k) {
  require(noise.size() == logits.size(), "noise/logit arity mismatch");
  int finite = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (std::isfinite(logits(i))) ++finite;
  require(k >= 1 && k <= finite, "gumbel_top_k requires k within the finite-logit count");
  std::vector<GumbelSample> all;
  all.reserve(size_t(logits.size()));
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits(i))) continue;
    all.push_back({int(i), noise(i), noise(i) + logits(i)});
  }
  std::sort(all.begin(), all.end(), [](const GumbelSample& a, const GumbelSample& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.action < b.action;
  });
  all.resize(size_t(k));
  return all;
}

/// Same with i.i.d. standard Gumbel noise, equivalent to sampling k actions
/// without replacement from softmax(logits).
inline std::vector<GumbelSample> gumbelTopK(const Vec& logits, int k, Rng& rng) {
  Vec noise(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) noise(i) = rng.gumbel();
  return gumbelTopK(logits, noise, k);
}

struct HalvingPhase {
  int actions;
  int visits;
};

/// Sequential-halving schedule: ceil(log2 m_root) phases (at least one);
/// phase p keeps ceil(m_root/2^p) actions with floor(n_sim/(phases*m_p))
/// visits each, raised to 1 when the budget is too small to cover a full
/// sweep. Leftover budget is spent round-robin on the final phase's
/// survivors at run time, so scheduled totals never exceed n_sim.
inline std::vector<HalvingPhase> halvingSchedule(int nSim, int mRoot) {
  require(nSim >= 1 && mRoot >= 1, "halving schedule needs a positive budget and sample size");
  int phases = 0;
  while ((1 << phases) < mRoot) ++phases;
  phases = std::max(1, phases);
  std::vector<HalvingPhase> out;
  for (int p = 0; p < phases; ++p) {
    int mp = (mRoot + (1 << p) - 1) >> p;
    int vp = nSim / (phases * mp);
    out.push_back({mp, std::max(1, vp)});
  }
  return out;
}

/// Pure replay of the budget arithmetic used by runSearch: total simulations
/// spent and survivor count for a given budget and root sample size.
struct HalvingAudit {
  int total = 0;
  int survivors = 0;
};

inline HalvingAudit halvingAudit(int nSim, int mRoot) {
  auto schedule = halvingSchedule(nSim, mRoot);
  int budget = nSim;
  int alive = mRoot;
  for (size_t p = 0; p < schedule.size(); ++p) {
    alive = std::min(alive, schedule[p].actions);
    for (int a = 0; a < alive && budget > 0; ++a)
      for (int v = 0; v < schedule[p].visits && budget > 0; ++v) --budget;
    if (p + 1 == schedule.size())
      while (budget > 0) --budget;  // leftover round-robin on survivors
  }
  HalvingAudit audit;
  audit.total = nSim - budget;
  audit.survivors = 1;  // final ranking always selects exactly one
  return audit;
}

struct CompletedQ {
  Vec qHat;
  Real vHat = 0;
};

/// Visited actions keep their empirical Q; unvisited actions receive the
/// interpolated estimate mixing the node value with the visit-weighted,
/// prior-weighted mean of visited Q-values.
inline CompletedQ completedQ(const Vec& priors, const VecI& n, const Vec& qsum, Real v) {
  Eigen::Index m = priors.size();
  CompletedQ out;
  out.qHat = Vec::Zero(m);
  long sumN = 0;
  Real piVisited = 0, piQ = 0;
  for (Eigen::Index a = 0; a < m; ++a) {
    if (n(a) <= 0) continue;
    sumN += n(a);
    Real q = qsum(a) / Real(n(a));
    piVisited += priors(a);
    piQ += priors(a) * q;
  }
  if (sumN == 0 || piVisited <= 0) {
    out.vHat = v;
  } else {
    out.vHat = (v + (Real(sumN) / piVisited) * piQ) / (1 + Real(sumN));
  }
  for (Eigen::Index a = 0; a < m; ++a)
    out.qHat(a) = n(a) > 0 ? qsum(a) / Real(n(a)) : out.vHat;
  return out;
}

inline Real sigmaScale(Real q, int maxVisit, const SearchConfig& cfg) {
  return (cfg.cVisit + Real(maxVisit)) * cfg.cScale * q;
}

/// logit'(a) = logit(a) + sigma(qHat(a) - vHat); -inf logits stay -inf.
inline Vec improvedLogits(const Vec& logits, const Vec& qHat, Real vHat, int maxVisit,
                          const SearchConfig& cfg) {
  require(logits.size() == qHat.size(), "logit/Q arity mismatch");
  Vec out = logits;
  for (Eigen::Index a = 0; a < logits.size(); ++a) {
    if (!std::isfinite(logits(a))) continue;
    out(a) += sigmaScale(qHat(a) - vHat, maxVisit, cfg);
  }
  return out;
}

inline Vec softmaxVec(const Vec& logits) {
  Real mx = -std::numeric_limits<Real>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i) mx = std::max(mx, logits(i));
  require(std::isfinite(mx), "softmax needs at least one finite logit");
  Vec p = Vec::Zero(logits.size());
  Real z = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (std::isfinite(logits(i))) {
      p(i) = std::exp(logits(i) - mx);
      z += p(i);
    }
  }
  return p / z;
}

/// Running value bounds over empirical Q-values seen in the current tree.
struct MinMaxStats {
  Real lo = std::numeric_limits<Real>::infinity();
  Real hi = -std::numeric_limits<Real>::infinity();

  void update(Real v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  bool degenerate() const { return !(hi - lo >= 1e-9); }

  Real normalize(Real q) const { return degenerate() ? 0 : (q - lo) / (hi - lo); }
};

/// argmax_a [pi'(a) - N(a)/(1 + sum_b N(b))], lowest index on ties.
inline int nonrootSelect(const Vec& improved, const VecI& n) {
  Vec pi = softmaxVec(improved);
  Real sumN = Real(n.sum());
  int best = -1;
  Real bestScore = 0;
  for (Eigen::Index a = 0; a < pi.size(); ++a) {
    Real score = pi(a) - Real(n(a)) / (1 + sumN);
    if (best < 0 || score > bestScore) {
      best = int(a);
      bestScore = score;
    }
  }
  require(best >= 0, "empty action set in selection");
  return best;
}

struct SearchResult {
  Vec policy;
  int action = -1;
  Real rootValue = 0;
  int simulations = 0;
  int expansions = 0;
  VecI rootVisits;
};

namespace detail {

template <typename State>
struct SearchNode {
  State state;
  Vec logits;
  Vec qsum;
  VecI n;
  std::vector<int> child;
  Real v = 0;
  Real pathReward = 0;
  int depth = 0;
  int m = 0;
  bool terminal = false;
};

}  // namespace detail

/// Gumbel AlphaZero search. Samples min(cfg.mRoot, feasible) root actions by
/// Gumbel-Top-k, spends cfg.nSim simulations via sequential halving with
/// deterministic in-tree selection, and returns the softmax of the improved
/// root logits, the surviving action, and the completed-Q value of that
/// action. A single feasible action short-circuits to a point mass with zero
/// simulations. Advantages pass through min-max normalization when
/// cfg.minmax is set, and through the timestep baseline when cfg.baselines
/// is set; otherwise they are raw completed-Q minus the value estimate.
template <SearchDomain D>
SearchResult runSearch(D& dom, const typename D::State& rootState, const SearchConfig& cfg,
                       Rng& rng) {
  require(!dom.isTerminal(rootState), "search requires a non-terminal root");
  require(cfg.nSim >= 1 && cfg.mRoot >= 1, "search budget and root sample size must be positive");
  using Node = detail::SearchNode<typename D::State>;

  std::vector<Node> pool;
  pool.reserve(size_t(cfg.nSim) + 2);
  MinMaxStats mm;

  auto makeNode = [&](typename D::State&& s, Real pathReward, int depth) {
    Node node;
    node.state = std::move(s);
    node.pathReward = pathReward;
    node.depth = depth;
    node.terminal = dom.isTerminal(node.state);
    if (node.terminal) {
      node.v = dom.terminalValue(node.state);
      node.m = 0;
    } else {
      node.m = dom.actionCount(node.state);
      Evaluation e = dom.evaluate(node.state);
      require(e.logits.size() == node.m, "evaluator logit arity mismatch");
      require(std::isfinite(e.value), "non-finite value from evaluator");
      node.logits = e.logits;
      node.v = e.value;
      node.qsum = Vec::Zero(node.m);
      node.n = VecI::Zero(node.m);
      node.child.assign(size_t(node.m), -1);
    }
    pool.push_back(std::move(node));
    return int(pool.size()) - 1;
  };

  auto advantages = [&](const Node& node, const CompletedQ& cq) {
    Vec adv = Vec::Zero(node.m);
    for (int a = 0; a < node.m; ++a) {
      if (cfg.minmax) {
        adv(a) = mm.normalize(cq.qHat(a)) - mm.normalize(cq.vHat);
      } else if (cfg.baselines != nullptr) {
        const auto& b = *cfg.baselines;
        require(!b.empty(), "empty baseline vector");
        size_t idx = std::min(size_t(cfg.rootStep + node.depth), b.size() - 1);
        adv(a) = cq.qHat(a) - b[idx];
      } else {
        adv(a) = cq.qHat(a) - cq.vHat;
      }
    }
    return adv;
  };

  auto improvedAt = [&](const Node& node) {
    CompletedQ cq =
        completedQ(softmaxVec(node.logits), node.n, node.qsum, node.pathReward + node.v);
    Vec adv = advantages(node, cq);
    int maxN = node.m > 0 ? node.n.maxCoeff() : 0;
    Vec out = node.logits;
    for (int a = 0; a < node.m; ++a) {
      if (!std::isfinite(out(a))) continue;
      out(a) += sigmaScale(adv(a), maxN, cfg);
    }
    return out;
  };

  int root = makeNode(typename D::State(rootState), 0, 0);
  SearchResult res;
  res.rootVisits = VecI::Zero(pool[root].m);

  if (pool[root].m == 1) {
    res.policy = Vec::Ones(1);
    res.action = 0;
    res.rootValue = pool[root].pathReward + pool[root].v;
    return res;
  }

  int finiteRoot = 0;
  for (Eigen::Index i = 0; i < pool[root].logits.size(); ++i)
    if (std::isfinite(pool[root].logits(i))) ++finiteRoot;
  require(finiteRoot >= 1, "evaluator produced no finite root logit");
  int k = std::min({cfg.mRoot, pool[root].m, finiteRoot});
  std::vector<GumbelSample> alive = gumbelTopK(pool[root].logits, k, rng);
  auto schedule = halvingSchedule(cfg.nSim, k);

  auto simulate = [&](int rootAction) {
    int u = root;
    int a = rootAction;
    std::vector<std::pair<int, int>> path;
    Real g = 0;
    while (true) {
      path.push_back({u, a});
      int c = pool[u].child[size_t(a)];
      if (c < 0) {
        auto [next, r] = dom.step(pool[u].state, a, rng);
        Real pr = pool[u].pathReward + r;
        c = makeNode(std::move(next), pr, pool[u].depth + 1);
        pool[u].child[size_t(a)] = c;
        if (!pool[c].terminal) ++res.expansions;
        g = pool[c].pathReward + pool[c].v;
        break;
      }
      if (pool[c].terminal) {
        g = pool[c].pathReward + pool[c].v;
        break;
      }
      u = c;
      a = nonrootSelect(improvedAt(pool[u]), pool[u].n);
    }
    for (auto [nu, na] : path) {
      pool[nu].qsum(na) += g;
      pool[nu].n(na) += 1;
      mm.update(pool[nu].qsum(na) / Real(pool[nu].n(na)));
    }
    ++res.simulations;
  };

  auto rank = [&](std::vector<GumbelSample>& set) {
    CompletedQ cq = completedQ(softmaxVec(pool[root].logits), pool[root].n, pool[root].qsum,
                               pool[root].pathReward + pool[root].v);
    Vec adv = advantages(pool[root], cq);
    int maxN = pool[root].n.maxCoeff();
    std::sort(set.begin(), set.end(), [&](const GumbelSample& a, const GumbelSample& b) {
      Real sa = a.g + pool[root].logits(a.action) + sigmaScale(adv(a.action), maxN, cfg);
      Real sb = b.g + pool[root].logits(b.action) + sigmaScale(adv(b.action), maxN, cfg);
      if (sa != sb) return sa > sb;
      return a.action < b.action;
    });
  };

  int budget = cfg.nSim;
  for (size_t p = 0; p < schedule.size(); ++p) {
    if (int(alive.size()) > schedule[p].actions) {
      rank(alive);
      alive.resize(size_t(schedule[p].actions));
    }
    for (int v = 0; v < schedule[p].visits && budget > 0; ++v)
      for (size_t i = 0; i < alive.size() && budget > 0; ++i) {
        simulate(alive[i].action);
        --budget;
      }
    if (p + 1 == schedule.size())
      while (budget > 0) {
        for (size_t i = 0; i < alive.size() && budget > 0; ++i) {
          simulate(alive[i].action);
          --budget;
        }
      }
  }
  rank(alive);
  alive.resize(1);

  res.action = alive[0].action;
  res.rootVisits = pool[root].n;
  Vec improved = improvedAt(pool[root]);
  res.policy = softmaxVec(improved);
  CompletedQ cq = completedQ(softmaxVec(pool[root].logits), pool[root].n, pool[root].qsum,
                             pool[root].pathReward + pool[root].v);
  res.rootValue = cq.qHat(res.action);
  return res;
}

}  // namespace gaz

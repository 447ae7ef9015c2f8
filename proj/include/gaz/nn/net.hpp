#pragma once

#include "gaz/jssp.hpp"
#include "gaz/nn/params.hpp"
#include "gaz/nn/tape.hpp"
#include "gaz/tsp.hpp"

namespace gaz::nn {

enum class Variant { PtpSt, PtpGt, Vanilla, NStep, GreedyScalar, TbGreedy, TbSampled };

inline bool isPtp(Variant v) { return v == Variant::PtpSt || v == Variant::PtpGt; }
inline bool isScalarHead(Variant v) { return v == Variant::GreedyScalar; }
inline bool isSingleHead(Variant v) { return !isPtp(v) && !isScalarHead(v); }

Variant parseVariant(const std::string& name);
std::string variantName(Variant v);

struct NetConfig {
  int dim = 32;
  int heads = 2;
  int blocks = 2;      // TSP encoder / JSSP state encoder depth
  int jobBlocks = 2;   // JSSP job encoder depth
  uint64_t initSeed = 0;
};

/// Lazily materializes parameter tensors on a tape, one node per tensor.
class Bind {
 public:
  Bind(Tape<Real>& tape, const ParameterSet& ps)
      : tape_(&tape), ps_(&ps), ids_(ps.count(), -1) {}

  int operator()(int paramId) {
    int& slot = ids_[paramId];
    if (slot < 0) slot = tape_->param(ps_->tensor(paramId));
    return slot;
  }

  /// Gradients for every registered tensor (zero where unused), aligned with
  /// parameter registration order. Call after tape.backward().
  std::vector<Mat> collectGrads() const {
    std::vector<Mat> g(ids_.size());
    for (size_t i = 0; i < ids_.size(); ++i) {
      const Mat& w = ps_->tensor(int(i));
      if (ids_[i] >= 0 && tape_->grad(ids_[i]).size() > 0)
        g[i] = tape_->grad(ids_[i]);
      else
        g[i] = Mat::Zero(w.rows(), w.cols());
    }
    return g;
  }

 private:
  Tape<Real>* tape_;
  const ParameterSet* ps_;
  std::vector<int> ids_;
};

/// Evaluated encoder output for search-time consumers.
struct Latent {
  Vec stilde;   // d
  Mat actions;  // m x d, aligned with feasibleActions order
};

namespace detail {

enum class Norm { Layer, Instance };

struct BlockIds {
  int ln1g, ln1b, wq, wk, wv, wo, wob, ln2g, ln2b, f1w, f1b, f2w, f2b;
  std::vector<int> sw, sb;  // per-head spatial bias scalars (TSP only)
};

struct PolicyIds {
  int pq = -1, pk = -1;
  int shaQ = -1, shaK = -1, shaV = -1, sf1w = -1, sf1b = -1, sf2w = -1, sf2b = -1;
};

struct ValueIds {
  std::vector<int> w, b;
  int outw = -1, outb = -1;
  bool tanhOut = true;
};

BlockIds registerBlock(ParameterSet& ps, const std::string& prefix, int d, int heads,
                       bool spatial, Rng& rng);
int buildBlock(Tape<Real>& t, Bind& b, const BlockIds& ids, int x, int d, int heads, Norm norm,
               const Mat* D, const Mat* M);
PolicyIds registerPolicyHead(ParameterSet& ps, const std::string& prefix, int d, bool ptp,
                             Rng& rng);
int buildPolicyHead(Tape<Real>& t, Bind& b, const PolicyIds& ids, int stilde, int atok, int d,
                    bool ptp);
ValueIds registerValueHead(ParameterSet& ps, const std::string& prefix, int in,
                           const std::vector<int>& hidden, bool tanhOut, Rng& rng);
int buildValueHead(Tape<Real>& t, Bind& b, const ValueIds& ids, int x);

}  // namespace detail

/// Shared head plumbing; the environment-specific nets add their encoders.
class NetBase {
 public:
  ParameterSet params;

  Variant variant() const { return variant_; }
  const NetConfig& config() const { return cfg_; }

  int policyFromLatentG(Tape<Real>& t, Bind& b, int stilde, int atok) const {
    return detail::buildPolicyHead(t, b, policy_, stilde, atok, cfg_.dim, isPtp(variant_));
  }

  int valuePairG(Tape<Real>& t, Bind& b, int s1, int s2) const {
    require(isPtp(variant_), "pair value head not present in this variant");
    return detail::buildValueHead(t, b, value_, t.concatCols(s1, s2));
  }

  int valueScalarG(Tape<Real>& t, Bind& b, int stilde, Real scalar) const {
    require(isScalarHead(variant_), "scalar value head not present in this variant");
    Mat r(1, 1);
    r(0, 0) = scalar;
    return detail::buildValueHead(t, b, value_, t.concatCols(stilde, t.input(r)));
  }

  int valueSingleG(Tape<Real>& t, Bind& b, int stilde) const {
    require(isSingleHead(variant_), "single value head not present in this variant");
    return detail::buildValueHead(t, b, value_, stilde);
  }

  Vec logitsFromLatent(Tape<Real>& t, const Latent& l) const;
  Vec logitsFromLatent(Tape<Real>& t, const Latent& l, const std::vector<uint8_t>& mask) const;
  Real valuePairEval(Tape<Real>& t, const Latent& a, const Latent& b) const;
  Real valueScalarEval(Tape<Real>& t, const Latent& a, Real scalar) const;
  Real valueSingleEval(Tape<Real>& t, const Latent& a) const;

 protected:
  NetBase(NetConfig cfg, Variant variant) : cfg_(cfg), variant_(variant) {}

  NetConfig cfg_;
  Variant variant_;
  detail::PolicyIds policy_;
  detail::ValueIds value_;
};

/// Batched loss: mean squared error over value records plus mean KL over
/// policy records. `klNodes` carry one klVsSoftmax node per policy record;
/// value predictions are paired with scalar targets. Outputs the loss root
/// and, when present, the per-part nodes (-1 otherwise).
struct LossGraph {
  int root = -1;
  int valueLoss = -1;
  int policyLoss = -1;
};

inline LossGraph buildLoss(Tape<Real>& t, const std::vector<int>& valuePreds,
                           const std::vector<Real>& valueTargets,
                           const std::vector<int>& klNodes) {
  require(valuePreds.size() == valueTargets.size(), "value record arity mismatch");
  require(!valuePreds.empty() || !klNodes.empty(), "empty batch");
  LossGraph g;
  if (!valuePreds.empty()) {
    int acc = -1;
    for (size_t i = 0; i < valuePreds.size(); ++i) {
      int e = t.squaredDiff(valuePreds[i], valueTargets[i]);
      acc = acc < 0 ? e : t.add(acc, e);
    }
    g.valueLoss = t.scale(acc, Real(1) / Real(valuePreds.size()));
  }
  if (!klNodes.empty()) {
    int acc = -1;
    for (int k : klNodes) acc = acc < 0 ? k : t.add(acc, k);
    g.policyLoss = t.scale(acc, Real(1) / Real(klNodes.size()));
  }
  g.root = g.valueLoss < 0 ? g.policyLoss
           : g.policyLoss < 0 ? g.valueLoss
                              : t.add(g.valueLoss, g.policyLoss);
  require(std::isfinite(t.val(g.root)(0, 0)), "non-finite forward value in loss");
  return g;
}

class TspNet : public NetBase {
 public:
  TspNet(const NetConfig& cfg, Variant variant);

  struct Enc {
    int stilde;  // 1 x d
    int atok;    // m x d
    int m;
  };

  Enc encodeG(Tape<Real>& t, Bind& b, const TspInstance& inst, const TspState& s) const;
  int policyG(Tape<Real>& t, Bind& b, const Enc& e) const {
    return policyFromLatentG(t, b, e.stilde, e.atok);
  }

  Latent encodeEval(Tape<Real>& t, const TspInstance& inst, const TspState& s) const;

 private:
  std::vector<detail::BlockIds> blocks_;
  int tok_, estart_, eend_, estartInd_, eendInd_;
  int wlenW_, wlenB_, wnumW_, wnumB_, wnodeW_, wnodeB_;
  int lnFg_, lnFb_;
};

class JsspNet : public NetBase {
 public:
  JsspNet(const NetConfig& cfg, Variant variant, int k, int m);

  struct Enc {
    int stilde;
    int atok;
    int m;
  };

  Enc encodeG(Tape<Real>& t, Bind& b, const JsspInstance& inst, const JsspState& s) const;
  int policyG(Tape<Real>& t, Bind& b, const Enc& e) const {
    return policyFromLatentG(t, b, e.stilde, e.atok);
  }

  Latent encodeEval(Tape<Real>& t, const JsspInstance& inst, const JsspState& s) const;

  int jobs() const { return k_; }
  int machines() const { return m_; }

 private:
  int jobLatentG(Tape<Real>& t, Bind& b, const JsspInstance& inst, const JsspState& s, int job,
                 int relM) const;

  int k_, m_;
  std::vector<detail::BlockIds> jobBlocks_, stateBlocks_;
  int ejob_, wmavailW_, wmavailB_, wjavailW_, wjavailB_, pmach_, pop_, wopW_, wopB_;
  int jNormG_, jNormB_;
  int etok_, wnumW_, wnumB_, wlenW_, wlenB_, wmavail2W_, wmavail2B_, wjobW_, wjobB_;
  int sNormG_, sNormB_;
};

}  // namespace gaz::nn

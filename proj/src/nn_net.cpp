#include "gaz/nn/net.hpp"

#include <cmath>
#include <limits>

namespace gaz::nn {

Variant parseVariant(const std::string& name) {
  if (name == "ptp_st") return Variant::PtpSt;
  if (name == "ptp_gt") return Variant::PtpGt;
  if (name == "vanilla") return Variant::Vanilla;
  if (name == "nstep") return Variant::NStep;
  if (name == "greedy_scalar") return Variant::GreedyScalar;
  if (name == "tb_greedy") return Variant::TbGreedy;
  if (name == "tb_sampled") return Variant::TbSampled;
  throw std::runtime_error("unknown variant: " + name);
}

std::string variantName(Variant v) {
  switch (v) {
    case Variant::PtpSt: return "ptp_st";
    case Variant::PtpGt: return "ptp_gt";
    case Variant::Vanilla: return "vanilla";
    case Variant::NStep: return "nstep";
    case Variant::GreedyScalar: return "greedy_scalar";
    case Variant::TbGreedy: return "tb_greedy";
    case Variant::TbSampled: return "tb_sampled";
  }
  throw std::runtime_error("unknown variant enum value");
}

namespace detail {

BlockIds registerBlock(ParameterSet& ps, const std::string& prefix, int d, int heads,
                       bool spatial, Rng& rng) {
  BlockIds ids;
  ids.ln1g = ps.add(prefix + ".norm1.g", 1, d, Init::One, rng);
  ids.ln1b = ps.add(prefix + ".norm1.b", 1, d, Init::Zero, rng);
  ids.wq = ps.add(prefix + ".attn.wq", d, d, Init::FanIn, rng);
  ids.wk = ps.add(prefix + ".attn.wk", d, d, Init::FanIn, rng);
  ids.wv = ps.add(prefix + ".attn.wv", d, d, Init::FanIn, rng);
  ids.wo = ps.add(prefix + ".attn.wo", d, d, Init::FanIn, rng);
  ids.wob = ps.add(prefix + ".attn.bo", d, 1, Init::Zero, rng);
  ids.ln2g = ps.add(prefix + ".norm2.g", 1, d, Init::One, rng);
  ids.ln2b = ps.add(prefix + ".norm2.b", 1, d, Init::Zero, rng);
  ids.f1w = ps.add(prefix + ".ff.w1", 4 * d, d, Init::FanIn, rng);
  ids.f1b = ps.add(prefix + ".ff.b1", 4 * d, 1, Init::Zero, rng);
  ids.f2w = ps.add(prefix + ".ff.w2", d, 4 * d, Init::FanIn, rng);
  ids.f2b = ps.add(prefix + ".ff.b2", d, 1, Init::Zero, rng);
  if (spatial) {
    for (int h = 0; h < heads; ++h) {
      ids.sw.push_back(ps.add(prefix + ".spatial.w" + std::to_string(h), 1, 1, Init::Zero, rng));
      ids.sb.push_back(ps.add(prefix + ".spatial.b" + std::to_string(h), 1, 1, Init::Zero, rng));
    }
  }
  return ids;
}

int buildBlock(Tape<Real>& t, Bind& b, const BlockIds& ids, int x, int d, int heads, Norm norm,
               const Mat* D, const Mat* M) {
  auto normed = [&](int v, int g, int bb) {
    return norm == Norm::Layer ? t.layerNorm(v, b(g), b(bb)) : t.instNorm(v, b(g), b(bb));
  };
  int h = normed(x, ids.ln1g, ids.ln1b);
  int q = t.linearNB(h, b(ids.wq));
  int k = t.linearNB(h, b(ids.wk));
  int v = t.linearNB(h, b(ids.wv));
  int dh = d / heads;
  Real scale = Real(1) / std::sqrt(Real(dh));
  int cat = -1;
  for (int hh = 0; hh < heads; ++hh) {
    int qs = t.sliceCols(q, hh * dh, dh);
    int ks = t.sliceCols(k, hh * dh, dh);
    int vs = t.sliceCols(v, hh * dh, dh);
    int scores = t.matmulNT(qs, ks, scale);
    if (D) scores = t.spatialBias(scores, b(ids.sw[hh]), b(ids.sb[hh]), *D, *M);
    int out = t.matmulNN(t.rowSoftmax(scores), vs);
    cat = hh == 0 ? out : t.concatCols(cat, out);
  }
  x = t.add(x, t.linear(cat, b(ids.wo), b(ids.wob)));
  int h2 = normed(x, ids.ln2g, ids.ln2b);
  int f = t.linear(t.gelu(t.linear(h2, b(ids.f1w), b(ids.f1b))), b(ids.f2w), b(ids.f2b));
  return t.add(x, f);
}

PolicyIds registerPolicyHead(ParameterSet& ps, const std::string& prefix, int d, bool ptp,
                             Rng& rng) {
  PolicyIds ids;
  ids.pq = ps.add(prefix + ".point.wq", d, d, Init::FanIn, rng);
  ids.pk = ps.add(prefix + ".point.wk", d, d, Init::FanIn, rng);
  if (ptp) {
    ids.shaQ = ps.add(prefix + ".sha.wq", d, d, Init::FanIn, rng);
    ids.shaK = ps.add(prefix + ".sha.wk", d, d, Init::FanIn, rng);
    ids.shaV = ps.add(prefix + ".sha.wv", d, d, Init::FanIn, rng);
    ids.sf1w = ps.add(prefix + ".sha.ff.w1", 4 * d, d, Init::FanIn, rng);
    ids.sf1b = ps.add(prefix + ".sha.ff.b1", 4 * d, 1, Init::Zero, rng);
    ids.sf2w = ps.add(prefix + ".sha.ff.w2", d, 4 * d, Init::FanIn, rng);
    ids.sf2b = ps.add(prefix + ".sha.ff.b2", d, 1, Init::Zero, rng);
  }
  return ids;
}

int buildPolicyHead(Tape<Real>& t, Bind& b, const PolicyIds& ids, int stilde, int atok, int d,
                    bool ptp) {
  require(t.val(atok).rows() > 0, "policy requested with no action tokens");
  Real scale = Real(1) / std::sqrt(Real(d));
  int q = stilde;
  if (ptp) {
    int qq = t.linearNB(stilde, b(ids.shaQ));
    int kk = t.linearNB(atok, b(ids.shaK));
    int vv = t.linearNB(atok, b(ids.shaV));
    int y = t.matmulNN(t.rowSoftmax(t.matmulNT(qq, kk, scale)), vv);
    int f = t.linear(t.gelu(t.linear(y, b(ids.sf1w), b(ids.sf1b))), b(ids.sf2w), b(ids.sf2b));
    q = t.add(f, y);
  }
  int u = t.matmulNT(t.linearNB(q, b(ids.pq)), t.linearNB(atok, b(ids.pk)), scale);
  return t.scale(t.tanh(u), Real(10));
}

ValueIds registerValueHead(ParameterSet& ps, const std::string& prefix, int in,
                           const std::vector<int>& hidden, bool tanhOut, Rng& rng) {
  ValueIds ids;
  ids.tanhOut = tanhOut;
  int prev = in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    ids.w.push_back(
        ps.add(prefix + ".mlp.w" + std::to_string(i), hidden[i], prev, Init::FanIn, rng));
    ids.b.push_back(ps.add(prefix + ".mlp.b" + std::to_string(i), hidden[i], 1, Init::Zero, rng));
    prev = hidden[i];
  }
  ids.outw = ps.add(prefix + ".out.w", 1, prev, Init::Zero, rng);
  ids.outb = ps.add(prefix + ".out.b", 1, 1, Init::Zero, rng);
  return ids;
}

int buildValueHead(Tape<Real>& t, Bind& b, const ValueIds& ids, int x) {
  for (size_t i = 0; i < ids.w.size(); ++i)
    x = t.gelu(t.linear(x, b(ids.w[i]), b(ids.b[i])));
  x = t.linear(x, b(ids.outw), b(ids.outb));
  return ids.tanhOut ? t.tanh(x) : x;
}

}  // namespace detail

namespace {

uint64_t digestOf(std::initializer_list<uint64_t> xs) {
  uint64_t h = 0x67617a6e657431ull;
  for (uint64_t x : xs) h = splitmix64(h ^ x);
  return h;
}

}  // namespace

Vec NetBase::logitsFromLatent(Tape<Real>& t, const Latent& l) const {
  t.reset();
  Bind b(t, params);
  int st = t.input(l.stilde.transpose());
  int u = policyFromLatentG(t, b, st, t.input(l.actions));
  return t.val(u).row(0).transpose();
}

Vec NetBase::logitsFromLatent(Tape<Real>& t, const Latent& l,
                              const std::vector<uint8_t>& mask) const {
  require(mask.size() == size_t(l.actions.rows()), "mask length does not match action tokens");
  bool any = false;
  for (uint8_t m : mask) any = any || m != 0;
  require(any, "all actions masked");
  Vec u = logitsFromLatent(t, l);
  for (size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) u(Eigen::Index(i)) = -std::numeric_limits<Real>::infinity();
  return u;
}

Real NetBase::valuePairEval(Tape<Real>& t, const Latent& a, const Latent& b2) const {
  t.reset();
  Bind b(t, params);
  int v = valuePairG(t, b, t.input(a.stilde.transpose()), t.input(b2.stilde.transpose()));
  return t.val(v)(0, 0);
}

Real NetBase::valueScalarEval(Tape<Real>& t, const Latent& a, Real scalar) const {
  t.reset();
  Bind b(t, params);
  int v = valueScalarG(t, b, t.input(a.stilde.transpose()), scalar);
  return t.val(v)(0, 0);
}

Real NetBase::valueSingleEval(Tape<Real>& t, const Latent& a) const {
  t.reset();
  Bind b(t, params);
  int v = valueSingleG(t, b, t.input(a.stilde.transpose()));
  return t.val(v)(0, 0);
}

TspNet::TspNet(const NetConfig& cfg, Variant variant) : NetBase(cfg, variant) {
  int d = cfg.dim;
  require(d >= 2 && cfg.heads >= 1 && d % cfg.heads == 0,
          "model dim must be a positive multiple of the head count");
  Rng rng = Rng::derive(cfg.initSeed, 0x6e6e7473);
  tok_ = params.add("tsp.tok", 1, d, Init::FanIn, rng);
  estart_ = params.add("tsp.estart", 1, d, Init::FanIn, rng);
  eend_ = params.add("tsp.eend", 1, d, Init::FanIn, rng);
  estartInd_ = params.add("tsp.estart_ind", 1, d, Init::FanIn, rng);
  eendInd_ = params.add("tsp.eend_ind", 1, d, Init::FanIn, rng);
  wlenW_ = params.add("tsp.wlen.w", d, 1, Init::FanIn, rng);
  wlenB_ = params.add("tsp.wlen.b", d, 1, Init::Zero, rng);
  wnumW_ = params.add("tsp.wnum.w", d, 1, Init::FanIn, rng);
  wnumB_ = params.add("tsp.wnum.b", d, 1, Init::Zero, rng);
  wnodeW_ = params.add("tsp.wnode.w", d, 2, Init::FanIn, rng);
  wnodeB_ = params.add("tsp.wnode.b", d, 1, Init::Zero, rng);
  for (int i = 0; i < cfg.blocks; ++i)
    blocks_.push_back(detail::registerBlock(params, "tsp.block" + std::to_string(i), d,
                                            cfg.heads, true, rng));
  lnFg_ = params.add("tsp.norm.g", 1, d, Init::One, rng);
  lnFb_ = params.add("tsp.norm.b", 1, d, Init::Zero, rng);
  policy_ = detail::registerPolicyHead(params, "tsp.policy", d, isPtp(variant), rng);
  int vin = isPtp(variant) ? 2 * d : isScalarHead(variant) ? d + 1 : d;
  value_ = detail::registerValueHead(params, "tsp.value", vin, {d, d}, !isSingleHead(variant),
                                     rng);
  params.setConfigDigest(digestOf({uint64_t('T'), uint64_t(variant), uint64_t(d),
                                   uint64_t(cfg.heads), uint64_t(cfg.blocks)}));
}

TspNet::Enc TspNet::encodeG(Tape<Real>& t, Bind& b, const TspInstance& inst,
                            const TspState& s) const {
  int n = inst.n();
  int d = cfg_.dim;
  int u = int(s.unvisited.size());
  int L = 5 + u;

  Mat lenIn(1, 1), numIn(1, 1);
  lenIn(0, 0) = s.len;
  numIn(0, 0) = Real(n - s.t);
  int lenTok = t.linear(t.input(lenIn), b(wlenW_), b(wlenB_));
  int numTok = t.linear(t.input(numIn), b(wnumW_), b(wnumB_));

  int startTok, endTok;
  if (s.t == 0) {
    startTok = b(estart_);
    endTok = b(eend_);
  } else {
    Mat sc = inst.nodes.row(s.start);
    Mat ec = inst.nodes.row(s.end);
    startTok = t.add(t.linear(t.input(sc), b(wnodeW_), b(wnodeB_)), b(estartInd_));
    endTok = t.add(t.linear(t.input(ec), b(wnodeW_), b(wnodeB_)), b(eendInd_));
  }

  int x = t.concatRows(b(tok_), lenTok);
  x = t.concatRows(x, numTok);
  x = t.concatRows(x, startTok);
  x = t.concatRows(x, endTok);
  if (u > 0) {
    Mat coords(u, 2);
    for (int i = 0; i < u; ++i) coords.row(i) = inst.nodes.row(s.unvisited[i]);
    x = t.concatRows(x, t.linear(t.input(coords), b(wnodeW_), b(wnodeB_)));
  }

  std::vector<int> nodeAt(L, -1);
  if (s.t > 0) {
    nodeAt[3] = s.start;
    nodeAt[4] = s.end;
  }
  for (int i = 0; i < u; ++i) nodeAt[5 + i] = s.unvisited[i];
  Mat D = Mat::Zero(L, L), M = Mat::Zero(L, L);
  for (int p = 0; p < L; ++p) {
    if (nodeAt[p] < 0) continue;
    for (int q = 0; q < L; ++q) {
      if (nodeAt[q] < 0) continue;
      M(p, q) = 1;
      D(p, q) = inst.dist(nodeAt[p], nodeAt[q]);
    }
  }

  for (const auto& blk : blocks_)
    x = detail::buildBlock(t, b, blk, x, d, cfg_.heads, detail::Norm::Layer, &D, &M);
  x = t.layerNorm(x, b(lnFg_), b(lnFb_));

  Enc e;
  e.stilde = t.sliceRows(x, 0, 1);
  e.atok = t.sliceRows(x, 5, u);
  e.m = u;
  return e;
}

Latent TspNet::encodeEval(Tape<Real>& t, const TspInstance& inst, const TspState& s) const {
  t.reset();
  Bind b(t, params);
  Enc e = encodeG(t, b, inst, s);
  Latent l;
  l.stilde = t.val(e.stilde).row(0).transpose();
  l.actions = t.val(e.atok);
  return l;
}

JsspNet::JsspNet(const NetConfig& cfg, Variant variant, int k, int m)
    : NetBase(cfg, variant), k_(k), m_(m) {
  int d = cfg.dim;
  require(d >= 2 && cfg.heads >= 1 && d % cfg.heads == 0,
          "model dim must be a positive multiple of the head count");
  require(k >= 1 && m >= 1, "job and machine counts must be positive");
  Rng rng = Rng::derive(cfg.initSeed, 0x6e6e6a73);
  ejob_ = params.add("jssp.job.tok", 1, d, Init::FanIn, rng);
  wmavailW_ = params.add("jssp.job.wmavail.w", d, m, Init::FanIn, rng);
  wmavailB_ = params.add("jssp.job.wmavail.b", d, 1, Init::Zero, rng);
  wjavailW_ = params.add("jssp.job.wjavail.w", d, 1, Init::FanIn, rng);
  wjavailB_ = params.add("jssp.job.wjavail.b", d, 1, Init::Zero, rng);
  pmach_ = params.add("jssp.job.pmach", m, d, Init::FanIn, rng);
  pop_ = params.add("jssp.job.pop", m, d, Init::FanIn, rng);
  wopW_ = params.add("jssp.job.wop.w", d, 2 * d + 1, Init::FanIn, rng);
  wopB_ = params.add("jssp.job.wop.b", d, 1, Init::Zero, rng);
  for (int i = 0; i < cfg.jobBlocks; ++i)
    jobBlocks_.push_back(detail::registerBlock(params, "jssp.job.block" + std::to_string(i), d,
                                               cfg.heads, false, rng));
  jNormG_ = params.add("jssp.job.norm.g", 1, d, Init::One, rng);
  jNormB_ = params.add("jssp.job.norm.b", 1, d, Init::Zero, rng);

  etok_ = params.add("jssp.state.tok", 1, d, Init::FanIn, rng);
  wnumW_ = params.add("jssp.state.wnum.w", d, 1, Init::FanIn, rng);
  wnumB_ = params.add("jssp.state.wnum.b", d, 1, Init::Zero, rng);
  wlenW_ = params.add("jssp.state.wlen.w", d, 1, Init::FanIn, rng);
  wlenB_ = params.add("jssp.state.wlen.b", d, 1, Init::Zero, rng);
  wmavail2W_ = params.add("jssp.state.wmavail.w", d, m, Init::FanIn, rng);
  wmavail2B_ = params.add("jssp.state.wmavail.b", d, 1, Init::Zero, rng);
  wjobW_ = params.add("jssp.state.wjob.w", d, d, Init::FanIn, rng);
  wjobB_ = params.add("jssp.state.wjob.b", d, 1, Init::Zero, rng);
  for (int i = 0; i < cfg.blocks; ++i)
    stateBlocks_.push_back(detail::registerBlock(params, "jssp.state.block" + std::to_string(i),
                                                 d, cfg.heads, false, rng));
  sNormG_ = params.add("jssp.state.norm.g", 1, d, Init::One, rng);
  sNormB_ = params.add("jssp.state.norm.b", 1, d, Init::Zero, rng);

  policy_ = detail::registerPolicyHead(params, "jssp.policy", d, isPtp(variant), rng);
  int vin = isPtp(variant) ? 2 * d : isScalarHead(variant) ? d + 1 : d;
  value_ = detail::registerValueHead(params, "jssp.value", vin, {2 * d, 2 * d, 2 * d},
                                     !isSingleHead(variant), rng);
  params.setConfigDigest(digestOf({uint64_t('J'), uint64_t(variant), uint64_t(d),
                                   uint64_t(cfg.heads), uint64_t(cfg.blocks),
                                   uint64_t(cfg.jobBlocks), uint64_t(k), uint64_t(m)}));
}

int JsspNet::jobLatentG(Tape<Real>& t, Bind& b, const JsspInstance& inst, const JsspState& s,
                        int job, int relM) const {
  Real cmin = s.cMin();
  int mavTok = t.linear(relM, b(wmavailW_), b(wmavailB_));
  Mat jav(1, 1);
  jav(0, 0) = std::max(Real(0), s.e(job) - cmin);
  int javTok = t.linear(t.input(jav), b(wjavailW_), b(wjavailB_));
  int x = t.concatRows(t.concatRows(b(ejob_), mavTok), javTok);

  int opRows = -1;
  for (int l = s.nextOp(job); l < m_; ++l) {
    int pm = t.gather(b(pmach_), inst.machineOrder(job, l) - 1);
    int po = t.gather(b(pop_), l);
    Mat pt(1, 1);
    pt(0, 0) = inst.times(job, l);
    int row = t.concatCols(t.concatCols(pm, po), t.input(pt));
    opRows = opRows < 0 ? row : t.concatRows(opRows, row);
  }
  x = t.concatRows(x, t.linear(opRows, b(wopW_), b(wopB_)));

  for (const auto& blk : jobBlocks_)
    x = detail::buildBlock(t, b, blk, x, cfg_.dim, cfg_.heads, detail::Norm::Instance, nullptr,
                           nullptr);
  x = t.instNorm(x, b(jNormG_), b(jNormB_));
  return t.sliceRows(x, 0, 1);
}

JsspNet::Enc JsspNet::encodeG(Tape<Real>& t, Bind& b, const JsspInstance& inst,
                              const JsspState& s) const {
  require(inst.k == k_ && inst.m == m_, "instance shape does not match the network");
  Real cmin = s.cMin();
  Mat rel(1, m_);
  for (int l = 0; l < m_; ++l) rel(0, l) = s.c(l) - cmin;
  int relM = t.input(rel);

  std::vector<int> jobs;
  for (int i = 0; i < k_; ++i)
    if (s.nextOp(i) < m_) jobs.push_back(i);
  int nT = int(jobs.size());

  int jlat = -1;
  for (int i : jobs) {
    int one = jobLatentG(t, b, inst, s, i, relM);
    jlat = jlat < 0 ? one : t.concatRows(jlat, one);
  }

  Mat numIn(1, 1), lenIn(1, 1);
  numIn(0, 0) = Real(nT);
  lenIn(0, 0) = cmin;
  int x = t.concatRows(b(etok_), t.linear(t.input(numIn), b(wnumW_), b(wnumB_)));
  x = t.concatRows(x, t.linear(t.input(lenIn), b(wlenW_), b(wlenB_)));
  x = t.concatRows(x, t.linear(relM, b(wmavail2W_), b(wmavail2B_)));
  if (nT > 0) x = t.concatRows(x, t.linear(jlat, b(wjobW_), b(wjobB_)));

  for (const auto& blk : stateBlocks_)
    x = detail::buildBlock(t, b, blk, x, cfg_.dim, cfg_.heads, detail::Norm::Instance, nullptr,
                           nullptr);
  x = t.instNorm(x, b(sNormG_), b(sNormB_));

  Enc e;
  e.stilde = t.sliceRows(x, 0, 1);
  e.atok = t.sliceRows(x, 4, nT);
  e.m = nT;
  return e;
}

Latent JsspNet::encodeEval(Tape<Real>& t, const JsspInstance& inst, const JsspState& s) const {
  t.reset();
  Bind b(t, params);
  Enc e = encodeG(t, b, inst, s);
  Latent l;
  l.stilde = t.val(e.stilde).row(0).transpose();
  l.actions = t.val(e.atok);
  return l;
}

}  // namespace gaz::nn

#pragma once

#include "gaz/common.hpp"

namespace gaz::nn {

enum class Op : uint8_t {
  Input,
  Param,
  Gather,
  Linear,
  LinearNB,
  MatMulNT,
  MatMulNN,
  Add,
  Scale,
  ConcatRows,
  ConcatCols,
  SliceRows,
  SliceCols,
  RowSoftmax,
  LayerNorm,
  InstNorm,
  Gelu,
  Tanh,
  SpatialBias,
  SquaredDiff,
  KlVsSoftmax,
};

/// Reverse-mode tape over dense matrices. Nodes live in a pooled arena that
/// reset() recycles, so per-evaluation allocation settles to zero once shapes
/// stabilize. With grads disabled the tape is a plain forward evaluator.
template <typename S>
class Tape {
 public:
  explicit Tape(bool grads = true) : grads_(grads) {}

  void reset() {
    used_ = 0;
    payloadsUsed_ = 0;
  }

  int input(const MatX<S>& v) {
    int id = push(Op::Input);
    node(id).val = v;
    return id;
  }

  int param(const MatX<S>& v) {
    int id = push(Op::Param);
    auto& n = node(id);
    n.val = v;
    n.needsGrad = grads_;
    return id;
  }

  int gather(int table, int row) {
    int id = push(Op::Gather, table);
    auto& n = node(id);
    n.i0 = row;
    n.val = node(table).val.row(row);
    return id;
  }

  /// X (L x in) * W^T + broadcast bias. W is (out x in), bias (out x 1).
  int linear(int x, int w, int b) {
    int id = push(Op::Linear, x, w, b);
    auto& n = node(id);
    n.val.noalias() = node(x).val * node(w).val.transpose();
    n.val.rowwise() += node(b).val.col(0).transpose();
    return id;
  }

  int linearNB(int x, int w) {
    int id = push(Op::LinearNB, x, w);
    node(id).val.noalias() = node(x).val * node(w).val.transpose();
    return id;
  }

  int matmulNT(int a, int b, S scale = S(1)) {
    int id = push(Op::MatMulNT, a, b);
    auto& n = node(id);
    n.x0 = scale;
    n.val.noalias() = node(a).val * node(b).val.transpose();
    if (scale != S(1)) n.val *= scale;
    return id;
  }

  int matmulNN(int a, int b) {
    int id = push(Op::MatMulNN, a, b);
    node(id).val.noalias() = node(a).val * node(b).val;
    return id;
  }

  int add(int a, int b) {
    int id = push(Op::Add, a, b);
    node(id).val = node(a).val + node(b).val;
    return id;
  }

  int scale(int a, S k) {
    int id = push(Op::Scale, a);
    auto& n = node(id);
    n.x0 = k;
    n.val = node(a).val * k;
    return id;
  }

  int concatRows(int a, int b) {
    int id = push(Op::ConcatRows, a, b);
    auto& n = node(id);
    const auto& va = node(a).val;
    const auto& vb = node(b).val;
    n.val.resize(va.rows() + vb.rows(), va.cols());
    n.val.topRows(va.rows()) = va;
    n.val.bottomRows(vb.rows()) = vb;
    return id;
  }

  int concatCols(int a, int b) {
    int id = push(Op::ConcatCols, a, b);
    auto& n = node(id);
    const auto& va = node(a).val;
    const auto& vb = node(b).val;
    n.val.resize(va.rows(), va.cols() + vb.cols());
    n.val.leftCols(va.cols()) = va;
    n.val.rightCols(vb.cols()) = vb;
    return id;
  }

  int sliceRows(int a, int start, int count) {
    int id = push(Op::SliceRows, a);
    auto& n = node(id);
    n.i0 = start;
    n.i1 = count;
    n.val = node(a).val.middleRows(start, count);
    return id;
  }

  int sliceCols(int a, int start, int count) {
    int id = push(Op::SliceCols, a);
    auto& n = node(id);
    n.i0 = start;
    n.i1 = count;
    n.val = node(a).val.middleCols(start, count);
    return id;
  }

  int rowSoftmax(int a) {
    int id = push(Op::RowSoftmax, a);
    auto& n = node(id);
    const auto& x = node(a).val;
    n.val.resizeLike(x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      RowX<S> e = (x.row(r).array() - x.row(r).maxCoeff()).exp().matrix();
      n.val.row(r) = e / e.sum();
    }
    return id;
  }

  /// Per-row normalization with learnable gain/bias (both 1 x d).
  int layerNorm(int x, int gain, int bias) {
    int id = push(Op::LayerNorm, x, gain, bias);
    auto& n = node(id);
    const auto& v = node(x).val;
    allocPayloads(n, v.rows(), v.cols(), v.rows(), 1);
    MatX<S>& y = payloads_[n.p0];
    MatX<S>& inv = payloads_[n.p1];
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      S mean = v.row(r).mean();
      S var = (v.row(r).array() - mean).square().mean();
      inv(r, 0) = S(1) / std::sqrt(var + S(1e-5));
      y.row(r) = ((v.row(r).array() - mean) * inv(r, 0)).matrix();
    }
    n.val = y;
    n.val.array().rowwise() *= node(gain).val.row(0).array();
    n.val.array().rowwise() += node(bias).val.row(0).array();
    return id;
  }

  /// Per-channel normalization across the sequence dimension (rows); gain and
  /// bias are 1 x d. Permutation-equivariant over sequence elements.
  int instNorm(int x, int gain, int bias) {
    int id = push(Op::InstNorm, x, gain, bias);
    auto& n = node(id);
    const auto& v = node(x).val;
    allocPayloads(n, v.rows(), v.cols(), 1, v.cols());
    MatX<S>& y = payloads_[n.p0];
    MatX<S>& inv = payloads_[n.p1];
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      S mean = v.col(c).mean();
      S var = (v.col(c).array() - mean).square().mean();
      inv(0, c) = S(1) / std::sqrt(var + S(1e-5));
      y.col(c) = ((v.col(c).array() - mean) * inv(0, c)).matrix();
    }
    n.val = y;
    n.val.array().rowwise() *= node(gain).val.row(0).array();
    n.val.array().rowwise() += node(bias).val.row(0).array();
    return id;
  }

  int gelu(int a) {
    int id = push(Op::Gelu, a);
    const auto& x = node(a).val;
    node(id).val = x.unaryExpr(
        [](S v) { return v * S(0.5) * (S(1) + std::erf(v * S(M_SQRT1_2))); });
    return id;
  }

  int tanh(int a) {
    int id = push(Op::Tanh, a);
    node(id).val = node(a).val.array().tanh().matrix();
    return id;
  }

  /// scores + w * D + b * M with per-entry constant matrices D, M.
  int spatialBias(int scores, int w, int b, const MatX<S>& D, const MatX<S>& M) {
    int id = push(Op::SpatialBias, scores, w, b);
    auto& n = node(id);
    allocPayloads(n, D.rows(), D.cols(), M.rows(), M.cols());
    payloads_[n.p0] = D;
    payloads_[n.p1] = M;
    n.val = node(scores).val + node(w).val(0, 0) * D + node(b).val(0, 0) * M;
    return id;
  }

  int squaredDiff(int a, S target) {
    int id = push(Op::SquaredDiff, a);
    auto& n = node(id);
    n.x0 = target;
    S d = node(a).val(0, 0) - target;
    n.val.resize(1, 1);
    n.val(0, 0) = d * d;
    return id;
  }

  /// KL(target || softmax(logits)) over one row, with 0 * log 0 := 0.
  int klVsSoftmax(int logits, const RowX<S>& target) {
    int id = push(Op::KlVsSoftmax, logits);
    auto& n = node(id);
    const auto& u = node(logits).val;
    require(u.rows() == 1 && u.cols() == target.cols(), "KL arity mismatch");
    allocPayloads(n, 1, u.cols(), 1, u.cols());
    MatX<S>& p = payloads_[n.p0];
    MatX<S>& t = payloads_[n.p1];
    t.row(0) = target;
    S mx = u.row(0).maxCoeff();
    RowX<S> e = (u.row(0).array() - mx).exp().matrix();
    p.row(0) = e / e.sum();
    S kl = 0;
    for (Eigen::Index i = 0; i < u.cols(); ++i)
      if (target(i) > S(0)) kl += target(i) * (std::log(target(i)) - std::log(p(0, i)));
    n.val.resize(1, 1);
    n.val(0, 0) = kl;
    return id;
  }

  const MatX<S>& val(int id) const { return nodes_[id].val; }
  const MatX<S>& grad(int id) const { return nodes_[id].grad; }
  size_t size() const { return used_; }
  bool gradsEnabled() const { return grads_; }

  void backward(int root) {
    require(grads_, "backward on a forward-only tape");
    require(nodes_[root].val.size() == 1, "backward root must be scalar");
    for (size_t i = 0; i < used_; ++i) {
      auto& n = nodes_[i];
      if (!n.needsGrad) continue;
      n.grad.resizeLike(n.val);
      n.grad.setZero();
    }
    require(nodes_[root].needsGrad, "backward root does not depend on parameters");
    nodes_[root].grad(0, 0) = S(1);
    for (size_t i = used_; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.needsGrad) continue;
      const MatX<S>& g = n.grad;
      switch (n.op) {
        case Op::Input:
        case Op::Param:
          break;
        case Op::Gather:
          gacc(n.a).row(n.i0) += g.row(0);
          break;
        case Op::Linear:
          if (ng(n.a)) gacc(n.a).noalias() += g * nodes_[n.b].val;
          if (ng(n.b)) gacc(n.b).noalias() += g.transpose() * nodes_[n.a].val;
          if (ng(n.c)) gacc(n.c).col(0) += g.colwise().sum().transpose();
          break;
        case Op::LinearNB:
          if (ng(n.a)) gacc(n.a).noalias() += g * nodes_[n.b].val;
          if (ng(n.b)) gacc(n.b).noalias() += g.transpose() * nodes_[n.a].val;
          break;
        case Op::MatMulNT:
          if (ng(n.a)) gacc(n.a).noalias() += n.x0 * (g * nodes_[n.b].val);
          if (ng(n.b)) gacc(n.b).noalias() += n.x0 * (g.transpose() * nodes_[n.a].val);
          break;
        case Op::MatMulNN:
          if (ng(n.a)) gacc(n.a).noalias() += g * nodes_[n.b].val.transpose();
          if (ng(n.b)) gacc(n.b).noalias() += nodes_[n.a].val.transpose() * g;
          break;
        case Op::Add:
          if (ng(n.a)) gacc(n.a) += g;
          if (ng(n.b)) gacc(n.b) += g;
          break;
        case Op::Scale:
          gacc(n.a) += n.x0 * g;
          break;
        case Op::ConcatRows: {
          Eigen::Index ra = nodes_[n.a].val.rows();
          if (ng(n.a)) gacc(n.a) += g.topRows(ra);
          if (ng(n.b)) gacc(n.b) += g.bottomRows(g.rows() - ra);
          break;
        }
        case Op::ConcatCols: {
          Eigen::Index ca = nodes_[n.a].val.cols();
          if (ng(n.a)) gacc(n.a) += g.leftCols(ca);
          if (ng(n.b)) gacc(n.b) += g.rightCols(g.cols() - ca);
          break;
        }
        case Op::SliceRows:
          gacc(n.a).middleRows(n.i0, n.i1) += g;
          break;
        case Op::SliceCols:
          gacc(n.a).middleCols(n.i0, n.i1) += g;
          break;
        case Op::RowSoftmax: {
          auto& pg = gacc(n.a);
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            S dot = (g.row(r).array() * n.val.row(r).array()).sum();
            pg.row(r).array() += (g.row(r).array() - dot) * n.val.row(r).array();
          }
          break;
        }
        case Op::LayerNorm: {
          const MatX<S>& y = payloads_[n.p0];
          const MatX<S>& inv = payloads_[n.p1];
          const RowX<S> gainRow = nodes_[n.b].val.row(0);
          if (ng(n.b)) gacc(n.b).row(0) += (g.array() * y.array()).colwise().sum().matrix();
          if (ng(n.c)) gacc(n.c).row(0) += g.colwise().sum();
          if (ng(n.a)) {
            auto& pg = gacc(n.a);
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
              RowX<S> gh = g.row(r).array() * gainRow.array();
              S m1 = gh.mean();
              S m2 = (gh.array() * y.row(r).array()).mean();
              pg.row(r).array() += inv(r, 0) * (gh.array() - m1 - y.row(r).array() * m2);
            }
          }
          break;
        }
        case Op::InstNorm: {
          const MatX<S>& y = payloads_[n.p0];
          const MatX<S>& inv = payloads_[n.p1];
          const RowX<S> gainRow = nodes_[n.b].val.row(0);
          if (ng(n.b)) gacc(n.b).row(0) += (g.array() * y.array()).colwise().sum().matrix();
          if (ng(n.c)) gacc(n.c).row(0) += g.colwise().sum();
          if (ng(n.a)) {
            auto& pg = gacc(n.a);
            for (Eigen::Index c = 0; c < g.cols(); ++c) {
              VecX<S> gh = g.col(c) * gainRow(c);
              S m1 = gh.mean();
              S m2 = (gh.array() * y.col(c).array()).mean();
              pg.col(c).array() += inv(0, c) * (gh.array() - m1 - y.col(c).array() * m2);
            }
          }
          break;
        }
        case Op::Gelu: {
          gacc(n.a) += g.cwiseProduct(nodes_[n.a].val.unaryExpr([](S v) {
            S cdf = S(0.5) * (S(1) + std::erf(v * S(M_SQRT1_2)));
            S pdf = std::exp(-v * v * S(0.5)) * S(1.0 / std::sqrt(2.0 * M_PI));
            return cdf + v * pdf;
          }));
          break;
        }
        case Op::Tanh:
          gacc(n.a).array() += g.array() * (S(1) - n.val.array().square());
          break;
        case Op::SpatialBias: {
          if (ng(n.a)) gacc(n.a) += g;
          if (ng(n.b)) gacc(n.b)(0, 0) += (g.array() * payloads_[n.p0].array()).sum();
          if (ng(n.c)) gacc(n.c)(0, 0) += (g.array() * payloads_[n.p1].array()).sum();
          break;
        }
        case Op::SquaredDiff:
          gacc(n.a)(0, 0) += g(0, 0) * S(2) * (nodes_[n.a].val(0, 0) - n.x0);
          break;
        case Op::KlVsSoftmax:
          gacc(n.a).row(0) += g(0, 0) * (payloads_[n.p0].row(0) - payloads_[n.p1].row(0));
          break;
      }
    }
  }

 private:
  struct Node {
    Op op = Op::Input;
    int a = -1, b = -1, c = -1;
    int i0 = 0, i1 = 0;
    int p0 = -1, p1 = -1;
    S x0 = 0;
    bool needsGrad = false;
    MatX<S> val;
    MatX<S> grad;
  };

  Node& node(int id) { return nodes_[id]; }
  bool ng(int id) const { return id >= 0 && nodes_[id].needsGrad; }
  MatX<S>& gacc(int id) { return nodes_[id].grad; }

  void allocPayloads(Node& n, Eigen::Index r0, Eigen::Index c0, Eigen::Index r1,
                     Eigen::Index c1) {
    while (payloads_.size() < payloadsUsed_ + 2) payloads_.emplace_back();
    n.p0 = int(payloadsUsed_++);
    n.p1 = int(payloadsUsed_++);
    payloads_[n.p0].resize(r0, c0);
    payloads_[n.p1].resize(r1, c1);
  }

  int push(Op op, int a = -1, int b = -1, int c = -1) {
    if (used_ == nodes_.size()) nodes_.emplace_back();
    int id = int(used_++);
    Node& n = nodes_[id];
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.i0 = n.i1 = 0;
    n.p0 = n.p1 = -1;
    n.x0 = 0;
    n.needsGrad = grads_ && (ng(a) || ng(b) || ng(c));
    return id;
  }

  std::vector<Node> nodes_;
  size_t used_ = 0;
  std::vector<MatX<S>> payloads_;
  size_t payloadsUsed_ = 0;
  bool grads_;
};

}  // namespace gaz::nn

#pragma once

#include "gaz/common.hpp"

#include <map>
#include <string>

namespace gaz::nn {

enum class Init { FanIn, One, Zero };

/// Ordered collection of named parameter tensors plus Adam state. Snapshots
/// are value types: copying yields an independent, immutable-by-convention
/// set for concurrent forward evaluation.
class ParameterSet {
 public:
  int add(const std::string& name, int rows, int cols, Init init, Rng& rng) {
    require(!index_.count(name), "duplicate parameter name: " + name);
    Mat w(rows, cols);
    switch (init) {
      case Init::FanIn: {
        Real bound = std::sqrt(1.0 / Real(cols));
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) w(r, c) = bound * (2.0 * rng.uniform() - 1.0);
        break;
      }
      case Init::One:
        w.setOnes();
        break;
      case Init::Zero:
        w.setZero();
        break;
    }
    int id = int(tensors_.size());
    index_[name] = id;
    names_.push_back(name);
    tensors_.push_back(std::move(w));
    m_.emplace_back(Mat::Zero(rows, cols));
    v_.emplace_back(Mat::Zero(rows, cols));
    return id;
  }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + name);
    return it->second;
  }

  int count() const { return int(tensors_.size()); }
  const std::string& name(int id) const { return names_[id]; }
  const Mat& tensor(int id) const { return tensors_[id]; }
  Mat& tensor(int id) { return tensors_[id]; }
  const Mat& tensor(const std::string& n) const { return tensors_[id(n)]; }
  uint64_t version() const { return version_; }
  int64_t stepCount() const { return step_; }
  uint64_t configDigest() const { return digest_; }
  void setConfigDigest(uint64_t d) { digest_ = d; }

  size_t scalarCount() const {
    size_t n = 0;
    for (auto& t : tensors_) n += size_t(t.size());
    return n;
  }

  /// Global L2 clip to unit norm, then one Adam update. Gradients are given
  /// per tensor, aligned with registration order.
  void adamStep(std::vector<Mat>& grads, Real lr = 1e-4, Real beta1 = 0.9, Real beta2 = 0.999,
                Real eps = 1e-8) {
    require(grads.size() == tensors_.size(), "gradient/parameter arity mismatch");
    Real sq = 0;
    for (size_t i = 0; i < grads.size(); ++i) {
      require(grads[i].rows() == tensors_[i].rows() && grads[i].cols() == tensors_[i].cols(),
              "gradient shape mismatch: " + names_[i]);
      require(grads[i].allFinite(), "non-finite gradient: " + names_[i]);
      sq += grads[i].squaredNorm();
    }
    Real norm = std::sqrt(sq);
    Real rescale = norm > 1.0 ? 1.0 / norm : 1.0;
    ++step_;
    Real bc1 = 1.0 - std::pow(beta1, Real(step_));
    Real bc2 = 1.0 - std::pow(beta2, Real(step_));
    for (size_t i = 0; i < grads.size(); ++i) {
      Mat g = grads[i] * rescale;
      m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
      v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
      tensors_[i].array() -=
          lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
    }
    ++version_;
  }

  Real lastGradNorm(const std::vector<Mat>& grads) const {
    Real sq = 0;
    for (auto& g : grads) sq += g.squaredNorm();
    return std::sqrt(sq);
  }

  void save(const std::string& path) const;
  static ParameterSet load(const std::string& path);

  bool sameShape(const ParameterSet& o) const {
    if (o.count() != count()) return false;
    for (int i = 0; i < count(); ++i)
      if (names_[i] != o.names_[i] || tensors_[i].rows() != o.tensors_[i].rows() ||
          tensors_[i].cols() != o.tensors_[i].cols())
        return false;
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat> tensors_;
  std::vector<Mat> m_, v_;
  std::map<std::string, int> index_;
  uint64_t version_ = 0;
  int64_t step_ = 0;
  uint64_t digest_ = 0;
};

}  // namespace gaz::nn

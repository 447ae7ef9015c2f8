#include "gaz/nn/params.hpp"

#include <cstring>
#include <fstream>

namespace gaz::nn {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'Z', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  require(f.good(), "truncated checkpoint");
  return v;
}

void putMat(std::ofstream& f, const Mat& m) {
  put<int64_t>(f, m.rows());
  put<int64_t>(f, m.cols());
  f.write(reinterpret_cast<const char*>(m.data()), sizeof(Real) * size_t(m.size()));
}

Mat getMat(std::ifstream& f) {
  int64_t r = get<int64_t>(f), c = get<int64_t>(f);
  require(r >= 0 && c >= 0 && r * c <= (int64_t(1) << 32), "corrupt checkpoint shape");
  Mat m(r, c);
  f.read(reinterpret_cast<char*>(m.data()), sizeof(Real) * size_t(m.size()));
  require(f.good(), "truncated checkpoint");
  return m;
}

}  // namespace

void ParameterSet::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot open for writing: " + path);
  f.write(kMagic, sizeof kMagic);
  put<uint32_t>(f, 1);
  put<uint64_t>(f, digest_);
  put<uint64_t>(f, version_);
  put<int64_t>(f, step_);
  put<uint32_t>(f, uint32_t(tensors_.size()));
  for (size_t i = 0; i < tensors_.size(); ++i) {
    put<uint32_t>(f, uint32_t(names_[i].size()));
    f.write(names_[i].data(), std::streamsize(names_[i].size()));
    putMat(f, tensors_[i]);
    putMat(f, m_[i]);
    putMat(f, v_[i]);
  }
  require(f.good(), "write failed: " + path);
}

ParameterSet ParameterSet::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof magic);
  require(f.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0,
          "not a checkpoint file: " + path);
  require(get<uint32_t>(f) == 1, "unsupported checkpoint version in " + path);
  ParameterSet p;
  p.digest_ = get<uint64_t>(f);
  p.version_ = get<uint64_t>(f);
  p.step_ = get<int64_t>(f);
  uint32_t count = get<uint32_t>(f);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = get<uint32_t>(f);
    require(len < 4096, "corrupt checkpoint name");
    std::string name(len, '\0');
    f.read(name.data(), len);
    require(f.good(), "truncated checkpoint");
    p.index_[name] = int(p.tensors_.size());
    p.names_.push_back(name);
    p.tensors_.push_back(getMat(f));
    p.m_.push_back(getMat(f));
    p.v_.push_back(getMat(f));
  }
  return p;
}

}  // namespace gaz::nn

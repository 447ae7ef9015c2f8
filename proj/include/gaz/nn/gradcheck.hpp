#pragma once

#include "gaz/nn/net.hpp"

namespace gaz::nn {

struct GradCheckReport {
  Real maxRelErr = 0;
  long checked = 0;
  bool pass = true;
};

/// Compares reverse-mode gradients against central finite differences on the
/// scalar loss produced by `build(tape, bind)`. Checks every coordinate when
/// maxCoordsPerTensor == 0, otherwise a deterministic random subset per
/// tensor. Coordinates where both sides are below the absolute floor are
/// counted as passing without a relative-error test.
template <typename BuildFn>
GradCheckReport gradCheck(ParameterSet& ps, BuildFn&& build, Real eps = 1e-4, Real tol = 1e-3,
                          Real floor = 1e-8, int maxCoordsPerTensor = 0, uint64_t pickSeed = 0) {
  Tape<Real> tape(true);
  tape.reset();
  Bind bind(tape, ps);
  tape.backward(build(tape, bind));
  std::vector<Mat> grads = bind.collectGrads();

  Tape<Real> fwd(false);
  auto lossAt = [&]() {
    fwd.reset();
    Bind b(fwd, ps);
    return fwd.val(build(fwd, b))(0, 0);
  };

  Rng pick = Rng::derive(pickSeed, 0x6664);
  GradCheckReport rep;
  for (int p = 0; p < ps.count(); ++p) {
    Mat& w = ps.tensor(p);
    long total = long(w.size());
    std::vector<long> coords;
    if (maxCoordsPerTensor > 0 && total > maxCoordsPerTensor) {
      for (int j = 0; j < maxCoordsPerTensor; ++j) coords.push_back(long(pick.uniformInt(total)));
    } else {
      coords.resize(size_t(total));
      for (long j = 0; j < total; ++j) coords[size_t(j)] = j;
    }
    for (long i : coords) {
      Real keep = w.data()[i];
      w.data()[i] = keep + eps;
      Real up = lossAt();
      w.data()[i] = keep - eps;
      Real dn = lossAt();
      w.data()[i] = keep;
      Real fd = (up - dn) / (2 * eps);
      Real an = grads[size_t(p)].data()[i];
      ++rep.checked;
      Real mag = std::max(std::abs(fd), std::abs(an));
      if (mag < floor) continue;
      Real rel = std::abs(fd - an) / mag;
      if (rel > rep.maxRelErr) rep.maxRelErr = rel;
      if (rel > tol) rep.pass = false;
    }
  }
  return rep;
}

}  // namespace gaz::nn

#pragma once

#include "gaz/common.hpp"

#include <vector>

namespace gaz {

/// Replay record schemas shared by the game variants and the trainer. Policy
/// targets are aligned with the state's feasible-action order; value targets
/// are whatever the variant's listing stores (game outcome, episode return,
/// or bootstrapped root value).
template <class S>
struct PolicyRecord {
  S state;
  Vec target;
};

template <class S>
struct ValueRecord {
  S state;
  Real target = 0;
};

/// Pairwise record: the first state belongs to the player to move, the target
/// is that player's game outcome.
template <class S>
struct PairValueRecord {
  S toMove;
  S other;
  Real z = 0;
};

/// Baseline-conditioned record: state, scalar baseline R, and outcome z.
template <class S>
struct ScalarValueRecord {
  S state;
  Real baseline = 0;
  Real z = 0;
};

template <class S>
struct EpisodeRecords {
  std::vector<PolicyRecord<S>> policy;
  std::vector<ValueRecord<S>> value;
  std::vector<PairValueRecord<S>> pairValue;
  std::vector<ScalarValueRecord<S>> scalarValue;

  size_t valueCount() const { return value.size() + pairValue.size() + scalarValue.size(); }
};

}  // namespace gaz

#pragma once

#include <cstdint>

#include "monomer/corpus.hpp"

namespace monomer {

struct RewireConfig {
  // Accepted double-edge swaps per positive edge before the repair phase.
  int swap_factor = 10;
  // Bound on repair rounds / proposal budget multiplier.
  int max_retry = 100;
  uint64_t seed = 42;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;
  size_t train_cap = 2'000'000;
  uint64_t seed = 42;
};

// Degree-preserving rewiring of the positive set. The result has the same
// size, identical per-item out- and in-degrees, no overlap with the
// positives, no duplicates, and every pair cross-category. Throws when the
// instance cannot be rewired within the configured budget.
RelationSet sample_negatives(const Corpus& corpus, const RelationSet& positives,
                             const RewireConfig& config);

struct Splits {
  RelationSet train;
  RelationSet validation;
  RelationSet test;
};

// 80/10/10 shuffle split; the training block is truncated to train_cap and
// the excess discarded. Throws if any split rounds down to empty.
Splits split_dataset(const RelationSet& pairs, const SplitSpec& spec);

}  // namespace monomer

#include "monomer/sampling.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace monomer {
namespace {

struct EdgeHash {
  size_t operator()(const std::pair<Eigen::Index, Eigen::Index>& e) const {
    return std::hash<uint64_t>()((static_cast<uint64_t>(e.first) << 32) ^
                                 static_cast<uint64_t>(e.second));
  }
};

using EdgeSet = std::unordered_set<std::pair<Eigen::Index, Eigen::Index>, EdgeHash>;

}  // namespace

RelationSet sample_negatives(const Corpus& corpus, const RelationSet& positives,
                             const RewireConfig& config) {
  if (positives.pairs.empty()) throw std::runtime_error("positive set is empty");
  if (config.swap_factor < 1) throw std::runtime_error("swap_factor must be >= 1");

  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  EdgeSet positive_set;
  edges.reserve(positives.pairs.size());
  for (const Pair& p : positives.pairs) {
    if (p.label != Label::positive)
      throw std::runtime_error("sample_negatives expects only positive pairs");
    if (corpus.item(p.src).category == corpus.item(p.dst).category)
      throw std::runtime_error("positive pair (" + corpus.item(p.src).id + ", " +
                               corpus.item(p.dst).id + ") is same-category");
    edges.emplace_back(p.src, p.dst);
    positive_set.insert({p.src, p.dst});
  }

  EdgeSet current(positive_set);
  std::mt19937_64 rng(config.seed);
  const size_t m = edges.size();
  std::uniform_int_distribution<size_t> pick(0, m - 1);

  auto try_swap = [&](size_t i, size_t j) -> bool {
    if (i == j) return false;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (b == d || a == c) return false;
    if (a == d || c == b) return false;  // would create self-pairs
    if (corpus.item(a).category == corpus.item(d).category) return false;
    if (corpus.item(c).category == corpus.item(b).category) return false;
    if (positive_set.count({a, d}) || positive_set.count({c, b})) return false;
    if (current.count({a, d}) || current.count({c, b})) return false;
    current.erase({a, b});
    current.erase({c, d});
    current.insert({a, d});
    current.insert({c, b});
    edges[i] = {a, d};
    edges[j] = {c, b};
    return true;
  };

  // Mixing phase: run swap_factor * |R| accepted double-edge swaps, with a
  // proposal budget so degenerate instances terminate.
  const size_t target_accepted = static_cast<size_t>(config.swap_factor) * m;
  const size_t proposal_budget = target_accepted * 50 + 1000;
  size_t accepted = 0;
  for (size_t attempt = 0; attempt < proposal_budget && accepted < target_accepted;
       ++attempt) {
    if (try_swap(pick(rng), pick(rng))) ++accepted;
  }

  // Repair phase: targeted swaps on edges that still coincide with positives.
  auto count_overlap = [&]() {
    size_t overlap = 0;
    for (const auto& e : edges) overlap += positive_set.count(e);
    return overlap;
  };
  for (int round = 0; round < config.max_retry && count_overlap() > 0; ++round) {
    for (size_t i = 0; i < m; ++i) {
      if (!positive_set.count(edges[i])) continue;
      for (size_t t = 0; t < m; ++t) {
        if (try_swap(i, pick(rng))) break;
      }
    }
  }
  if (size_t overlap = count_overlap(); overlap > 0)
    throw std::runtime_error(
        "infeasible rewiring instance: " + std::to_string(overlap) +
        " edge(s) still overlap the positive set after " +
        std::to_string(config.max_retry) + " repair rounds");

  RelationSet negatives;
  negatives.edge_type = positives.edge_type;
  negatives.pairs.reserve(m);
  for (const auto& [src, dst] : edges)
    negatives.pairs.push_back(Pair{src, dst, Label::negative});
  return negatives;
}

Splits split_dataset(const RelationSet& pairs, const SplitSpec& spec) {
  const double sum =
      spec.train_fraction + spec.validation_fraction + spec.test_fraction;
  if (spec.train_fraction <= 0 || spec.validation_fraction <= 0 ||
      spec.test_fraction <= 0 || std::abs(sum - 1.0) > 1e-9)
    throw std::runtime_error("split fractions must be positive and sum to 1");
  if (spec.train_cap < 1) throw std::runtime_error("train_cap must be >= 1");

  std::vector<Pair> shuffled = pairs.pairs;
  std::mt19937_64 rng(spec.seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  const size_t n = shuffled.size();
  const size_t n_val = static_cast<size_t>(spec.validation_fraction * static_cast<double>(n));
  const size_t n_test = static_cast<size_t>(spec.test_fraction * static_cast<double>(n));
  if (n_val + n_test >= n)
    throw std::runtime_error("dataset of " + std::to_string(n) +
                             " pairs leaves no training pairs");
  const size_t n_train_raw = n - n_val - n_test;
  const size_t n_train = std::min(n_train_raw, spec.train_cap);
  if (n_train == 0 || n_val == 0 || n_test == 0)
    throw std::runtime_error("a split is empty after rounding (sizes " +
                             std::to_string(n_train) + "/" + std::to_string(n_val) +
                             "/" + std::to_string(n_test) + ")");

  Splits splits;
  splits.train.edge_type = splits.validation.edge_type = splits.test.edge_type =
      pairs.edge_type;
  splits.train.pairs.assign(shuffled.begin(),
                            shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  auto val_begin = shuffled.begin() + static_cast<std::ptrdiff_t>(n_train_raw);
  splits.validation.pairs.assign(val_begin,
                                 val_begin + static_cast<std::ptrdiff_t>(n_val));
  splits.test.pairs.assign(val_begin + static_cast<std::ptrdiff_t>(n_val),
                           shuffled.end());
  return splits;
}

}  // namespace monomer

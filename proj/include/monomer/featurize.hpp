#pragma once

#include <string>
#include <vector>

#include "monomer/corpus.hpp"

namespace monomer {

struct Vocabulary {
  // Unigrams and space-joined bigrams, ordered by descending corpus
  // frequency, ties broken lexicographically.
  std::vector<std::string> terms;

  size_t size() const { return terms.size(); }
};

// Lowercase, split on non-alphanumeric, drop tokens shorter than 2 chars.
std::vector<std::string> tokenize(const std::string& text);

std::vector<std::string> load_stopwords(const std::string& path);

struct VocabularyBuildResult {
  Vocabulary vocab;
  // Set when fewer distinct terms exist than requested.
  bool truncated_warning = false;
};

// Review corpus: TSV `item_id<TAB>review_text`, one review per line.
// Candidate terms are non-stopword unigrams plus adjacent-token bigrams
// whose both tokens survive stop-word removal.
VocabularyBuildResult build_vocabulary(const std::string& review_corpus_path,
                                       size_t size,
                                       const std::vector<std::string>& stopwords);

struct FeaturizeResult {
  std::vector<std::string> item_ids;  // items with >= 1 in-vocabulary token
  // |item_ids| x |vocab|; kept in double so each row sums to 1 within 1e-9
  // (the float32 feature file rounds on write).
  Eigen::MatrixXd features;
  std::vector<std::string> dropped;  // items with no in-vocabulary token
};

// One document per item (all its reviews bagged together); raw term counts
// normalized to sum to 1. `all_item_ids`, when nonempty, lists items that
// must appear either in the output or on the dropped list (items with zero
// reviews land on the dropped list).
FeaturizeResult featurize_items(const std::string& review_corpus_path,
                                const Vocabulary& vocab,
                                const std::vector<std::string>& all_item_ids = {});

void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace monomer

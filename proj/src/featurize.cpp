#include "monomer/featurize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace monomer {
namespace {

struct Review {
  std::string item_id;
  std::string text;
};

std::vector<Review> read_reviews(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open review corpus '" + path + "'");
  std::vector<Review> reviews;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected `item_id<TAB>review_text`");
    reviews.push_back(Review{line.substr(0, tab), line.substr(tab + 1)});
  }
  return reviews;
}

// Candidate terms of one document: non-stopword unigrams plus bigrams of
// adjacent surviving tokens.
template <typename Emit>
void emit_terms(const std::vector<std::string>& tokens,
                const std::unordered_set<std::string>& stopset, Emit&& emit) {
  for (size_t i = 0; i < tokens.size(); ++i) {
    const bool keep_i = !stopset.count(tokens[i]);
    if (keep_i) emit(tokens[i]);
    if (i + 1 < tokens.size() && keep_i && !stopset.count(tokens[i + 1]))
      emit(tokens[i] + " " + tokens[i + 1]);
  }
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!current.empty()) {
      if (current.size() >= 2) tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (current.size() >= 2) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword list '" + path + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    words.insert(words.end(), tokens.begin(), tokens.end());
    // single-character stopwords never survive tokenization anyway
  }
  return words;
}

VocabularyBuildResult build_vocabulary(const std::string& review_corpus_path,
                                       size_t size,
                                       const std::vector<std::string>& stopwords) {
  if (size < 1) throw std::runtime_error("vocabulary size must be >= 1");
  const auto reviews = read_reviews(review_corpus_path);
  if (reviews.empty())
    throw std::runtime_error(review_corpus_path + ": empty review corpus");

  std::unordered_set<std::string> stopset(stopwords.begin(), stopwords.end());
  std::unordered_map<std::string, size_t> counts;
  for (const Review& r : reviews)
    emit_terms(tokenize(r.text), stopset, [&](const std::string& t) { ++counts[t]; });
  if (counts.empty())
    throw std::runtime_error(review_corpus_path +
                             ": no candidate terms after stop-word removal");

  std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  VocabularyBuildResult result;
  result.truncated_warning = ranked.size() < size;
  const size_t keep = std::min(size, ranked.size());
  result.vocab.terms.reserve(keep);
  for (size_t i = 0; i < keep; ++i) result.vocab.terms.push_back(ranked[i].first);
  return result;
}

FeaturizeResult featurize_items(const std::string& review_corpus_path,
                                const Vocabulary& vocab,
                                const std::vector<std::string>& all_item_ids) {
  if (vocab.terms.empty()) throw std::runtime_error("empty vocabulary");
  std::unordered_map<std::string, Eigen::Index> term_index;
  for (size_t i = 0; i < vocab.terms.size(); ++i)
    term_index.emplace(vocab.terms[i], static_cast<Eigen::Index>(i));

  const auto reviews = read_reviews(review_corpus_path);

  // Bag all reviews per item; preserve first-seen order for determinism.
  std::vector<std::string> order;
  std::unordered_map<std::string, Eigen::VectorXd> item_counts;
  const std::unordered_set<std::string> no_stopwords;
  for (const Review& r : reviews) {
    auto [it, inserted] = item_counts.try_emplace(
        r.item_id, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size())));
    if (inserted) order.push_back(r.item_id);
    emit_terms(tokenize(r.text), no_stopwords, [&](const std::string& t) {
      auto term = term_index.find(t);
      if (term != term_index.end()) it->second[term->second] += 1.0;
    });
  }

  FeaturizeResult result;
  for (const std::string& id : order) {
    if (item_counts.at(id).sum() > 0)
      result.item_ids.push_back(id);
    else
      result.dropped.push_back(id);
  }
  result.features.resize(static_cast<Eigen::Index>(result.item_ids.size()),
                         static_cast<Eigen::Index>(vocab.size()));
  for (size_t i = 0; i < result.item_ids.size(); ++i) {
    const Eigen::VectorXd& counts = item_counts.at(result.item_ids[i]);
    result.features.row(static_cast<Eigen::Index>(i)) =
        (counts / counts.sum()).transpose();
  }
  // Items with zero reviews are dropped too.
  for (const std::string& id : all_item_ids)
    if (!item_counts.count(id)) result.dropped.push_back(id);
  return result;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const std::string& term : vocab.terms) out << term << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file '" + path + "'");
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) vocab.terms.push_back(line);
  if (vocab.terms.empty()) throw std::runtime_error(path + ": empty vocabulary");
  return vocab;
}

}  // namespace monomer

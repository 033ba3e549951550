#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace monomer {

// Row-major so each item's feature vector is contiguous.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Item {
  std::string id;
  std::string category;
  Eigen::Index feature_row = -1;
};

// Immutable after load; safe for concurrent reads.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Item> items, FeatureMatrix features);

  Eigen::Index size() const { return static_cast<Eigen::Index>(items_.size()); }
  Eigen::Index dim() const { return features_.cols(); }

  const Item& item(Eigen::Index i) const { return items_[static_cast<size_t>(i)]; }
  const std::vector<Item>& items() const { return items_; }
  const FeatureMatrix& features() const { return features_; }

  // Feature row of item i, promoted to double.
  Eigen::VectorXd feature(Eigen::Index i) const {
    return features_.row(items_[static_cast<size_t>(i)].feature_row)
        .transpose()
        .cast<double>();
  }

  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  Eigen::Index index_of(const std::string& id) const;

 private:
  std::vector<Item> items_;
  FeatureMatrix features_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

enum class Label : uint8_t { negative = 0, positive = 1 };

struct Pair {
  Eigen::Index src;
  Eigen::Index dst;
  Label label;

  friend bool operator==(const Pair&, const Pair&) = default;
};

struct RelationSet {
  std::vector<Pair> pairs;
  std::string edge_type;

  size_t size() const { return pairs.size(); }
};

struct RelationLoadStats {
  size_t accepted = 0;
  size_t same_category_dropped = 0;
};

// Items file: TSV `id<TAB>category`. Feature file: MNMR binary (see io docs
// in corpus.cpp). Every item must be bound to exactly one feature row.
Corpus load_corpus(const std::string& items_path, const std::string& features_path,
                   bool l2_normalize = false);

void save_corpus(const Corpus& corpus, const std::string& items_path,
                 const std::string& features_path);

// Edge file: TSV `src<TAB>dst[<TAB>label]`, label in {1,0}; missing label
// means positive. Same-category edges are dropped, counted in stats.
RelationSet load_relations(const Corpus& corpus, const std::string& edges_path,
                           RelationLoadStats* stats = nullptr);

void save_relations(const Corpus& corpus, const RelationSet& relations,
                    const std::string& edges_path);

// Raw feature-file access, used by the featurizer which has no item list.
void write_feature_file(const std::string& path, const std::vector<std::string>& ids,
                        const FeatureMatrix& rows);

}  // namespace monomer

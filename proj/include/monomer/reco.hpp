#pragma once

#include <string>
#include <vector>

#include "monomer/corpus.hpp"
#include "monomer/models.hpp"

namespace monomer {

struct RecoEntry {
  std::string candidate_id;
  double probability = 0.0;
  double distance = 0.0;
  std::vector<double> expert_distances;  // Monomer only
  std::vector<double> gating_weights;    // Monomer only
};

struct RecoResult {
  std::string query_id;
  std::vector<RecoEntry> entries;  // probability descending, ties by id
  size_t requested = 0;
};

// Scores all candidates by link probability. By default candidates are all
// items outside the query's category; the scoring path itself reads no
// category data, so the filter can be disabled.
RecoResult recommend(const Model& model, const Corpus& corpus,
                     const std::string& query_id, size_t top_k,
                     bool category_filter = true);

// Candidates ranked by expert_distance(k, query, candidate) ascending.
RecoResult expert_neighbors(const MonomerParams& params, const Corpus& corpus,
                            const std::string& query_id, Eigen::Index expert,
                            size_t top_k, bool category_filter = true);

struct DimensionEntry {
  std::string item_id;
  double score = 0.0;
};

// Items sorted by E_{:,i}^T f_x descending, ties by id ascending.
std::vector<DimensionEntry> top_items_per_dimension(const Eigen::MatrixXd& embedding,
                                                    const Corpus& corpus,
                                                    Eigen::Index dimension,
                                                    size_t top_k);

enum class ProjectionSource { anchor, expert };

// TSV `item_id<TAB>category<TAB>K comma-separated coordinates`.
void export_projections(const Model& model, const Corpus& corpus,
                        ProjectionSource which, Eigen::Index expert,
                        const std::string& output_path);

void write_reco_tsv(const RecoResult& result, std::ostream& out);

}  // namespace monomer

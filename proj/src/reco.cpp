#include "monomer/reco.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace monomer {
namespace {

std::vector<Eigen::Index> candidate_set(const Corpus& corpus, Eigen::Index query,
                                        bool category_filter) {
  std::vector<Eigen::Index> candidates;
  const std::string& query_cat = corpus.item(query).category;
  for (Eigen::Index i = 0; i < corpus.size(); ++i) {
    if (i == query) continue;
    if (category_filter && corpus.item(i).category == query_cat) continue;
    candidates.push_back(i);
  }
  if (candidates.empty()) throw std::runtime_error("empty candidate set");
  return candidates;
}

void sort_and_truncate(std::vector<RecoEntry>& entries, size_t top_k, bool by_distance) {
  std::sort(entries.begin(), entries.end(), [&](const RecoEntry& a, const RecoEntry& b) {
    if (by_distance) {
      if (a.distance != b.distance) return a.distance < b.distance;
    } else {
      if (a.probability != b.probability) return a.probability > b.probability;
    }
    return a.candidate_id < b.candidate_id;
  });
  if (entries.size() > top_k) entries.resize(top_k);
}

}  // namespace

RecoResult recommend(const Model& model, const Corpus& corpus,
                     const std::string& query_id, size_t top_k, bool category_filter) {
  if (top_k < 1) throw std::runtime_error("top_k must be >= 1");
  const Eigen::Index query = corpus.index_of(query_id);
  const auto candidates = candidate_set(corpus, query, category_filter);
  const Eigen::VectorXd f_x = corpus.feature(query);
  const double c = bias_of(model);

  RecoResult result;
  result.query_id = query_id;
  result.requested = top_k;
  result.entries.reserve(candidates.size());

  if (const auto* p = std::get_if<MonomerParams>(&model)) {
    // Query projection and gate computed once, shared across candidates.
    const Eigen::VectorXd anchor_x = p->anchor.transpose() * f_x;
    const Eigen::VectorXd probs = gate(*p, f_x);
    const Eigen::Index N = p->num_experts();
    for (Eigen::Index cand : candidates) {
      const Eigen::VectorXd f_y = corpus.feature(cand);
      RecoEntry entry;
      entry.candidate_id = corpus.item(cand).id;
      entry.expert_distances.resize(static_cast<size_t>(N));
      entry.gating_weights.assign(probs.data(), probs.data() + N);
      double d = 0.0;
      for (Eigen::Index k = 0; k < N; ++k) {
        const double dk =
            (anchor_x - p->experts[static_cast<size_t>(k)].transpose() * f_y)
                .squaredNorm();
        entry.expert_distances[static_cast<size_t>(k)] = dk;
        d += probs[k] * dk;
      }
      entry.distance = d;
      entry.probability = link_probability(d, c);
      result.entries.push_back(std::move(entry));
    }
  } else {
    for (Eigen::Index cand : candidates) {
      RecoEntry entry;
      entry.candidate_id = corpus.item(cand).id;
      entry.distance = distance(model, f_x, corpus.feature(cand));
      entry.probability = link_probability(entry.distance, c);
      result.entries.push_back(std::move(entry));
    }
  }
  sort_and_truncate(result.entries, top_k, /*by_distance=*/false);
  return result;
}

RecoResult expert_neighbors(const MonomerParams& params, const Corpus& corpus,
                            const std::string& query_id, Eigen::Index expert,
                            size_t top_k, bool category_filter) {
  if (top_k < 1) throw std::runtime_error("top_k must be >= 1");
  if (expert < 1 || expert > params.num_experts())
    throw std::runtime_error("expert index " + std::to_string(expert) +
                             " out of range [1, " +
                             std::to_string(params.num_experts()) + "]");
  const Eigen::Index query = corpus.index_of(query_id);
  const auto candidates = candidate_set(corpus, query, category_filter);
  const Eigen::VectorXd anchor_x = params.anchor.transpose() * corpus.feature(query);
  const Eigen::MatrixXd& expert_mat = params.experts[static_cast<size_t>(expert - 1)];

  RecoResult result;
  result.query_id = query_id;
  result.requested = top_k;
  for (Eigen::Index cand : candidates) {
    RecoEntry entry;
    entry.candidate_id = corpus.item(cand).id;
    entry.distance =
        (anchor_x - expert_mat.transpose() * corpus.feature(cand)).squaredNorm();
    entry.probability = link_probability(entry.distance, params.bias);
    result.entries.push_back(std::move(entry));
  }
  sort_and_truncate(result.entries, top_k, /*by_distance=*/true);
  return result;
}

std::vector<DimensionEntry> top_items_per_dimension(const Eigen::MatrixXd& embedding,
                                                    const Corpus& corpus,
                                                    Eigen::Index dimension,
                                                    size_t top_k) {
  if (dimension < 0 || dimension >= embedding.cols())
    throw std::runtime_error("dimension " + std::to_string(dimension) +
                             " out of range [0, " + std::to_string(embedding.cols()) +
                             ")");
  if (embedding.rows() != corpus.dim())
    throw std::runtime_error("embedding feature dimension does not match corpus");

  std::vector<DimensionEntry> entries;
  entries.reserve(static_cast<size_t>(corpus.size()));
  const Eigen::VectorXd column = embedding.col(dimension);
  for (Eigen::Index i = 0; i < corpus.size(); ++i)
    entries.push_back(DimensionEntry{corpus.item(i).id, column.dot(corpus.feature(i))});
  std::sort(entries.begin(), entries.end(),
            [](const DimensionEntry& a, const DimensionEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.item_id < b.item_id;
            });
  if (entries.size() > top_k) entries.resize(top_k);
  return entries;
}

void export_projections(const Model& model, const Corpus& corpus,
                        ProjectionSource which, Eigen::Index expert,
                        const std::string& output_path) {
  const Eigen::MatrixXd* embedding = nullptr;
  if (const auto* p = std::get_if<MonomerParams>(&model)) {
    if (which == ProjectionSource::anchor) {
      embedding = &p->anchor;
    } else {
      if (expert < 1 || expert > p->num_experts())
        throw std::runtime_error("expert index out of range");
      embedding = &p->experts[static_cast<size_t>(expert - 1)];
    }
  } else if (const auto* p = std::get_if<LmtParams>(&model)) {
    embedding = &p->embedding;
  } else {
    throw std::runtime_error("WNN has no embedding to export");
  }
  if (embedding->rows() != corpus.dim())
    throw std::runtime_error("model feature dimension does not match corpus");

  std::ofstream out(output_path);
  if (!out) throw std::runtime_error("cannot open '" + output_path + "' for writing");
  char buf[40];
  for (Eigen::Index i = 0; i < corpus.size(); ++i) {
    const Eigen::VectorXd coords = embedding->transpose() * corpus.feature(i);
    out << corpus.item(i).id << '\t' << corpus.item(i).category << '\t';
    for (Eigen::Index k = 0; k < coords.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.10g", coords[k]);
      out << buf << (k + 1 < coords.size() ? "," : "");
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + output_path + "'");
}

void write_reco_tsv(const RecoResult& result, std::ostream& out) {
  char buf[40];
  for (const RecoEntry& e : result.entries) {
    std::snprintf(buf, sizeof(buf), "%.10g", e.probability);
    out << result.query_id << '\t' << e.candidate_id << '\t' << buf;
    std::snprintf(buf, sizeof(buf), "%.10g", e.distance);
    out << '\t' << buf;
    if (!e.expert_distances.empty()) {
      out << '\t';
      for (size_t k = 0; k < e.expert_distances.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.10g", e.expert_distances[k]);
        out << buf << (k + 1 < e.expert_distances.size() ? "," : "");
      }
      out << '\t';
      for (size_t k = 0; k < e.gating_weights.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.10g", e.gating_weights[k]);
        out << buf << (k + 1 < e.gating_weights.size() ? "," : "");
      }
    }
    out << '\n';
  }
}

}  // namespace monomer

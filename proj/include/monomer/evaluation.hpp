#pragma once

#include <string>
#include <vector>

#include "monomer/corpus.hpp"
#include "monomer/models.hpp"
#include "monomer/training.hpp"

namespace monomer {

struct EvalResult {
  double error_rate = 0.0;
  size_t true_positives = 0;
  size_t false_positives = 0;
  size_t true_negatives = 0;
  size_t false_negatives = 0;
  std::string split_name;
  std::string model_name;

  size_t total() const {
    return true_positives + false_positives + true_negatives + false_negatives;
  }
};

// Misclassification rate at the probability-0.5 threshold (distance < c).
EvalResult evaluate(const Model& model, const Corpus& corpus, const RelationSet& split,
                    const std::string& split_name = "test");

EvalResult evaluate_ct(const CtModel& model, const Corpus& corpus,
                       const RelationSet& split, const std::string& split_name = "test");

struct LambdaSelection {
  double best_lambda = 0.0;
  Model best_model;
  std::vector<std::pair<double, double>> validation_errors;  // (lambda, error)
};

// Trains one model per grid point; argmin validation error, ties -> smaller
// lambda.
LambdaSelection select_lambda(const Objective& objective,
                              const std::vector<double>& grid,
                              const RelationSet& validation,
                              const TrainConfig& config);

// --- synthetic data ---

struct SyntheticSpec {
  Eigen::Index item_count = 2000;
  Eigen::Index category_count = 4;
  Eigen::Index style_dim = 8;
  double category_offset = 4.0;
  double noise = 0.05;
  size_t positives = 10000;
  Eigen::Index map_count = 2;
  uint64_t seed = 42;
};

struct SyntheticGroundTruth {
  std::vector<Eigen::MatrixXd> maps;  // style_dim x style_dim
  std::vector<Eigen::Index> map_of_category;
};

struct SyntheticData {
  Corpus corpus;
  RelationSet positives;
  SyntheticGroundTruth truth;
};

// Items carry a latent style and a category; features are
// [one-hot(category) * offset ; style + noise]. Positives pair items of
// different categories whose styles match under the map assigned to the
// source category, so no single metric explains all pairs.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Monomer parameters reconstructed from the ground-truth maps (bias left 0);
// used to check that the generated data is separable by construction.
MonomerParams ideal_monomer_params(const SyntheticSpec& spec,
                                   const SyntheticGroundTruth& truth, Eigen::Index K,
                                   Eigen::Index N);

void save_ground_truth_maps(const SyntheticGroundTruth& truth, const std::string& path);

// --- comparison harness ---

struct CompareConfig {
  ModelKind kind;
  Eigen::Index rank;
  Eigen::Index num_experts;  // Monomer only
  double lambda;
};

struct Splits;  // sampling.hpp

std::vector<EvalResult> compare_models(const Corpus& corpus, const RelationSet& train,
                                       const RelationSet& validation,
                                       const RelationSet& test,
                                       const std::vector<CompareConfig>& configs,
                                       const TrainConfig& train_config,
                                       bool include_ct = false);

std::string render_table(const std::vector<EvalResult>& rows);
std::string render_tsv(const std::vector<EvalResult>& rows);

}  // namespace monomer

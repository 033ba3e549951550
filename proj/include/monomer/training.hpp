#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monomer/corpus.hpp"
#include "monomer/models.hpp"

namespace monomer {

// Negated, regularized log-likelihood over a labeled pair set, for
// minimization. The L2 penalty covers embedding and gating entries, not c.
struct Objective {
  ModelKind kind = ModelKind::monomer;
  Eigen::Index rank = 10;        // K (Monomer) or K' (LMT); ignored by WNN
  Eigen::Index num_experts = 0;  // N; Monomer only
  double lambda = 0.0;
  const Corpus* corpus = nullptr;
  const std::vector<Pair>* pairs = nullptr;
  int threads = 1;

  Eigen::Index feature_dim() const { return corpus->dim(); }
  Eigen::Index parameter_count() const;
};

double objective_value(const Eigen::VectorXd& theta, const Objective& objective);
// Returns the value; fills `grad` (resized to the parameter count).
double objective_gradient(const Eigen::VectorXd& theta, const Objective& objective,
                          Eigen::VectorXd& grad);

struct TrainConfig {
  int max_iterations = 200;
  int lbfgs_history = 10;
  double gradient_tolerance = 1e-5;   // relative to the initial gradient norm
  double objective_tolerance = 1e-7;  // relative change between iterations
  double init_scale = 1.0;
  uint64_t seed = 42;
  int threads = 1;
};

enum class TrainStatus { converged, max_iterations, line_search_failure };

std::string to_string(TrainStatus status);

struct IterationRecord {
  int iteration;
  double objective;      // negative log-likelihood (+ penalty)
  double gradient_norm;
  double step_length;
};

struct TrainReport {
  std::vector<IterationRecord> iterations;
  TrainStatus status = TrainStatus::max_iterations;
  double wall_seconds = 0.0;
};

// Uniform(-a, a) init with a = init_scale * sqrt(6 / (F + K)); c = 0.
Model init_params(ModelKind kind, Eigen::Index F, Eigen::Index K, Eigen::Index N,
                  const TrainConfig& config);

struct TrainResult {
  Model model;
  TrainReport report;
};

// L-BFGS with strong-Wolfe line search; returns the best parameters seen.
TrainResult train(const Objective& objective, const TrainConfig& config);

void write_report(const TrainReport& report, const std::string& log_path,
                  const std::string& summary_path);

}  // namespace monomer

#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "monomer/corpus.hpp"

namespace monomer {

enum class ModelKind { monomer, lmt, wnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Anchor embedding E0, N expert embeddings, gating matrix U, threshold c.
struct MonomerParams {
  Eigen::MatrixXd anchor;                // F x K
  std::vector<Eigen::MatrixXd> experts;  // N matrices, each F x K
  Eigen::MatrixXd gating;                // F x N
  double bias = 0.0;

  Eigen::Index feature_dim() const { return anchor.rows(); }
  Eigen::Index rank() const { return anchor.cols(); }
  Eigen::Index num_experts() const { return static_cast<Eigen::Index>(experts.size()); }

  // F*(N*K + K + N) + 1
  Eigen::Index parameter_count() const;
  Eigen::Index embedding_parameter_count() const;
};

struct LmtParams {
  Eigen::MatrixXd embedding;  // F x K'
  double bias = 0.0;

  Eigen::Index parameter_count() const { return embedding.size() + 1; }
  Eigen::Index embedding_parameter_count() const { return embedding.size(); }
};

struct WnnParams {
  Eigen::VectorXd weights;  // F
  double bias = 0.0;

  Eigen::Index parameter_count() const { return weights.size() + 1; }
};

using Model = std::variant<MonomerParams, LmtParams, WnnParams>;

ModelKind kind_of(const Model& model);
Eigen::Index feature_dim_of(const Model& model);

// --- distances ---

// ||E^T f_x - E^T f_y||^2
double lmt_distance(const LmtParams& params, const Eigen::VectorXd& f_x,
                    const Eigen::VectorXd& f_y);

// ||E0^T f_x - E_k^T f_y||^2, k in [1, N]. Asymmetric; d_k(x,x) need not be 0.
double expert_distance(const MonomerParams& params, Eigen::Index k,
                       const Eigen::VectorXd& f_x, const Eigen::VectorXd& f_y);

// softmax(U^T f_x); depends only on the query item.
Eigen::VectorXd gate(const MonomerParams& params, const Eigen::VectorXd& f_x);

// sum_k gate(f_x)[k] * d_k(x, y)
double monomer_distance(const MonomerParams& params, const Eigen::VectorXd& f_x,
                        const Eigen::VectorXd& f_y);

// ||w o (f_x - f_y)||^2
double wnn_distance(const WnnParams& params, const Eigen::VectorXd& f_x,
                    const Eigen::VectorXd& f_y);

double distance(const Model& model, const Eigen::VectorXd& f_x,
                const Eigen::VectorXd& f_y);

// 1 / (1 + exp(distance - c)); saturates without overflow.
double link_probability(double distance, double c);

// log P and log(1 - P) via softplus, finite for any finite distance.
double log_link_probability(double distance, double c);
double log_nonlink_probability(double distance, double c);

// related iff distance < c (tie -> unrelated).
bool classify(double distance, double c);

double bias_of(const Model& model);

// Batch scoring: distances for a list of (src, dst) pairs over corpus
// features. Projects in blocks so the per-pair cost is O(F*K*(N+1)).
Eigen::VectorXd batch_distances(const Model& model, const Corpus& corpus,
                                const std::vector<Pair>& pairs);

// --- category-tree baseline ---

struct CtModel {
  // Destination categories kept per source category: the top
  // ceil(0.5 * #connected) by count, ties broken lexicographically.
  std::map<std::string, std::set<std::string>> allowed;
};

CtModel ct_fit(const Corpus& corpus, const RelationSet& train_positives);
bool ct_predict(const CtModel& model, const std::string& category_src,
                const std::string& category_dst);

// --- flat parameter vector (L-BFGS interface) ---

// Layout: E0 | E1..EN | U (all column-major) | c. LMT: E | c. WNN: w | c.
Eigen::VectorXd pack(const Model& model);
Model unpack(ModelKind kind, Eigen::Index F, Eigen::Index K, Eigen::Index N,
             const Eigen::VectorXd& theta);
Eigen::Index packed_size(ModelKind kind, Eigen::Index F, Eigen::Index K,
                         Eigen::Index N);

// --- model file ("MNMP" container) ---

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace monomer

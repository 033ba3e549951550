#include "monomer/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>

namespace monomer {

EvalResult evaluate(const Model& model, const Corpus& corpus, const RelationSet& split,
                    const std::string& split_name) {
  if (split.pairs.empty()) throw std::runtime_error("cannot evaluate an empty split");
  if (feature_dim_of(model) != corpus.dim())
    throw std::runtime_error("model feature dimension " +
                             std::to_string(feature_dim_of(model)) +
                             " does not match corpus dimension " +
                             std::to_string(corpus.dim()));

  const Eigen::VectorXd dists = batch_distances(model, corpus, split.pairs);
  const double c = bias_of(model);
  EvalResult result;
  result.split_name = split_name;
  result.model_name = to_string(kind_of(model));
  for (Eigen::Index i = 0; i < dists.size(); ++i) {
    const bool predicted = classify(dists[i], c);
    const bool actual = split.pairs[static_cast<size_t>(i)].label == Label::positive;
    if (predicted && actual)
      ++result.true_positives;
    else if (predicted && !actual)
      ++result.false_positives;
    else if (!predicted && !actual)
      ++result.true_negatives;
    else
      ++result.false_negatives;
  }
  result.error_rate =
      static_cast<double>(result.false_positives + result.false_negatives) /
      static_cast<double>(result.total());
  return result;
}

EvalResult evaluate_ct(const CtModel& model, const Corpus& corpus,
                       const RelationSet& split, const std::string& split_name) {
  if (split.pairs.empty()) throw std::runtime_error("cannot evaluate an empty split");
  EvalResult result;
  result.split_name = split_name;
  result.model_name = "ct";
  for (const Pair& p : split.pairs) {
    const bool predicted =
        ct_predict(model, corpus.item(p.src).category, corpus.item(p.dst).category);
    const bool actual = p.label == Label::positive;
    if (predicted && actual)
      ++result.true_positives;
    else if (predicted && !actual)
      ++result.false_positives;
    else if (!predicted && !actual)
      ++result.true_negatives;
    else
      ++result.false_negatives;
  }
  result.error_rate =
      static_cast<double>(result.false_positives + result.false_negatives) /
      static_cast<double>(result.total());
  return result;
}

LambdaSelection select_lambda(const Objective& objective,
                              const std::vector<double>& grid,
                              const RelationSet& validation,
                              const TrainConfig& config) {
  if (grid.empty()) throw std::runtime_error("lambda grid is empty");
  std::vector<double> sorted(grid);
  std::sort(sorted.begin(), sorted.end());

  LambdaSelection selection;
  bool first = true;
  double best_error = 0.0;
  for (double lambda : sorted) {
    Objective obj = objective;
    obj.lambda = lambda;
    TrainResult trained = train(obj, config);
    const EvalResult eval =
        evaluate(trained.model, *objective.corpus, validation, "validation");
    selection.validation_errors.emplace_back(lambda, eval.error_rate);
    // Strict comparison on an ascending grid: ties keep the smaller lambda.
    if (first || eval.error_rate < best_error) {
      first = false;
      best_error = eval.error_rate;
      selection.best_lambda = lambda;
      selection.best_model = trained.model;
    }
  }
  return selection;
}

namespace {

// Block rotation: identity on the first `invariant` style dimensions,
// 90-degree rotations on the remaining pairs, conjugated by a random
// orthogonal basis so nothing is axis-aligned.
Eigen::MatrixXd base_rotation(Eigen::Index style_dim, Eigen::Index invariant,
                              const Eigen::MatrixXd& basis) {
  Eigen::MatrixXd block = Eigen::MatrixXd::Identity(style_dim, style_dim);
  for (Eigen::Index i = invariant; i + 1 < style_dim; i += 2) {
    block(i, i) = 0.0;
    block(i, i + 1) = -1.0;
    block(i + 1, i) = 1.0;
    block(i + 1, i + 1) = 0.0;
  }
  return basis * block * basis.transpose();
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.item_count < 2 || spec.category_count < 2 || spec.style_dim < 2 ||
      spec.positives < 1 || spec.map_count < 1 || spec.category_offset <= 0 ||
      spec.noise < 0)
    throw std::runtime_error("invalid synthetic spec");
  if (spec.map_count > spec.category_count)
    throw std::runtime_error("map count cannot exceed category count");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Eigen::Index S = spec.style_dim;
  const Eigen::Index C = spec.category_count;

  // Random orthogonal style basis.
  Eigen::MatrixXd raw(S, S);
  for (Eigen::Index i = 0; i < S; ++i)
    for (Eigen::Index j = 0; j < S; ++j) raw(i, j) = gauss(rng);
  Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();

  const Eigen::Index invariant = S >= 4 ? 2 : 0;
  const Eigen::MatrixXd rotation = base_rotation(S, invariant, basis);

  SyntheticGroundTruth truth;
  // Group elements are powers of the base rotation; a 90-degree block
  // rotation has order 4.
  const Eigen::Index group_size = spec.map_count == 1 ? 1 : 4;
  std::vector<Eigen::MatrixXd> group(static_cast<size_t>(group_size));
  group[0] = Eigen::MatrixXd::Identity(S, S);
  for (Eigen::Index g = 1; g < group_size; ++g)
    group[static_cast<size_t>(g)] = rotation * group[static_cast<size_t>(g - 1)];

  // Map m is the rotation to the power exponent[m]; maps {R, R^3} are
  // mutually inverse and individually asymmetric.
  std::vector<Eigen::Index> exponents;
  if (spec.map_count == 1) {
    exponents = {0};
  } else {
    for (Eigen::Index m = 0; m < spec.map_count; ++m)
      exponents.push_back(1 + 2 * (m % 2));
  }
  for (Eigen::Index m = 0; m < spec.map_count; ++m)
    truth.maps.push_back(group[static_cast<size_t>(exponents[static_cast<size_t>(m)] %
                                                   group_size)]);
  truth.map_of_category.resize(static_cast<size_t>(C));
  for (Eigen::Index c = 0; c < C; ++c)
    truth.map_of_category[static_cast<size_t>(c)] = c * spec.map_count / C;

  // Style prototypes; each item is a group element applied to a prototype,
  // plus noise, so planted matches exist.
  const Eigen::Index n_protos = std::max<Eigen::Index>(1, spec.item_count / 40);
  Eigen::MatrixXd protos(S, n_protos);
  for (Eigen::Index j = 0; j < n_protos; ++j)
    for (Eigen::Index i = 0; i < S; ++i) protos(i, j) = gauss(rng);

  std::uniform_int_distribution<Eigen::Index> pick_proto(0, n_protos - 1);
  std::uniform_int_distribution<Eigen::Index> pick_elem(0, group_size - 1);
  std::uniform_int_distribution<Eigen::Index> pick_cat(0, C - 1);

  std::vector<Item> items;
  std::vector<Eigen::Index> item_proto(static_cast<size_t>(spec.item_count));
  std::vector<Eigen::Index> item_elem(static_cast<size_t>(spec.item_count));
  FeatureMatrix features(spec.item_count, C + S);
  features.setZero();

  // (proto, element) -> item indices, for positive sampling.
  std::map<std::pair<Eigen::Index, Eigen::Index>, std::vector<Eigen::Index>> buckets;

  std::vector<Eigen::Index> item_cat(static_cast<size_t>(spec.item_count));
  for (Eigen::Index i = 0; i < spec.item_count; ++i) {
    const Eigen::Index proto = pick_proto(rng);
    const Eigen::Index elem = pick_elem(rng);
    const Eigen::Index cat = pick_cat(rng);
    item_proto[static_cast<size_t>(i)] = proto;
    item_elem[static_cast<size_t>(i)] = elem;
    item_cat[static_cast<size_t>(i)] = cat;

    Eigen::VectorXd style = group[static_cast<size_t>(elem)] * protos.col(proto);
    for (Eigen::Index s = 0; s < S; ++s) style[s] += spec.noise * gauss(rng);

    features(i, cat) = static_cast<float>(spec.category_offset);
    features.row(i).tail(S) = style.cast<float>().transpose();

    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "item%06lld", static_cast<long long>(i));
    items.push_back(Item{id_buf, "c" + std::to_string(cat), i});
    buckets[{proto, elem}].push_back(i);
  }

  SyntheticData data;
  data.corpus = Corpus(std::move(items), std::move(features));
  data.truth = std::move(truth);
  data.positives.edge_type = "synthetic";

  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  std::uniform_int_distribution<Eigen::Index> pick_item(0, spec.item_count - 1);
  const size_t max_attempts = 200 * spec.positives + 10000;
  size_t attempts = 0;
  while (data.positives.pairs.size() < spec.positives && attempts < max_attempts) {
    ++attempts;
    const Eigen::Index x = pick_item(rng);
    const Eigen::Index cat_idx = item_cat[static_cast<size_t>(x)];
    const Eigen::Index m = data.truth.map_of_category[static_cast<size_t>(cat_idx)];
    const Eigen::Index target_elem =
        (item_elem[static_cast<size_t>(x)] + exponents[static_cast<size_t>(m)]) %
        group_size;
    auto it = buckets.find({item_proto[static_cast<size_t>(x)], target_elem});
    if (it == buckets.end()) continue;
    const auto& pool = it->second;
    std::uniform_int_distribution<size_t> pick_candidate(0, pool.size() - 1);
    const Eigen::Index y = pool[pick_candidate(rng)];
    if (item_cat[static_cast<size_t>(y)] == cat_idx) continue;
    if (!seen.emplace(x, y).second) continue;
    data.positives.pairs.push_back(Pair{x, y, Label::positive});
  }
  if (data.positives.pairs.size() < spec.positives)
    throw std::runtime_error("synthetic generator could not plant " +
                             std::to_string(spec.positives) + " positives (got " +
                             std::to_string(data.positives.pairs.size()) + ")");
  return data;
}

MonomerParams ideal_monomer_params(const SyntheticSpec& spec,
                                   const SyntheticGroundTruth& truth, Eigen::Index K,
                                   Eigen::Index N) {
  const Eigen::Index S = spec.style_dim;
  const Eigen::Index C = spec.category_count;
  const Eigen::Index F = C + S;
  if (K > S) throw std::runtime_error("ideal params require K <= style_dim");
  if (N < static_cast<Eigen::Index>(truth.maps.size()))
    throw std::runtime_error("ideal params require N >= map count");

  // Projection onto the first K style coordinates.
  Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(K, S);

  MonomerParams params;
  params.anchor = Eigen::MatrixXd::Zero(F, K);
  params.anchor.bottomRows(S) = proj.transpose();
  params.experts.resize(static_cast<size_t>(N));
  for (Eigen::Index k = 0; k < N; ++k) {
    const size_t m = std::min(static_cast<size_t>(k), truth.maps.size() - 1);
    // E_k^T f_y = proj * A_m^{-1} * s_y, so a planted match lands on the
    // anchor point; rotations invert by transposition.
    Eigen::MatrixXd expert = Eigen::MatrixXd::Zero(F, K);
    expert.bottomRows(S) = truth.maps[m] * proj.transpose();
    params.experts[static_cast<size_t>(k)] = expert;
  }
  params.gating = Eigen::MatrixXd::Zero(F, N);
  for (Eigen::Index c = 0; c < C; ++c) {
    const Eigen::Index m = truth.map_of_category[static_cast<size_t>(c)];
    params.gating(c, m) = 20.0 / spec.category_offset;
  }
  params.bias = 0.0;
  return params;
}

void save_ground_truth_maps(const SyntheticGroundTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[64];
  for (size_t m = 0; m < truth.maps.size(); ++m) {
    out << "map\t" << m << '\n';
    const Eigen::MatrixXd& map = truth.maps[m];
    for (Eigen::Index i = 0; i < map.rows(); ++i) {
      for (Eigen::Index j = 0; j < map.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", map(i, j));
        out << buf << (j + 1 < map.cols() ? '\t' : '\n');
      }
    }
  }
  out << "map_of_category";
  for (Eigen::Index m : truth.map_of_category) out << '\t' << m;
  out << '\n';
}

std::vector<EvalResult> compare_models(const Corpus& corpus, const RelationSet& train_set,
                                       const RelationSet& validation,
                                       const RelationSet& test,
                                       const std::vector<CompareConfig>& configs,
                                       const TrainConfig& train_config,
                                       bool include_ct) {
  std::vector<EvalResult> rows;
  for (const CompareConfig& cfg : configs) {
    if (cfg.kind != ModelKind::wnn && cfg.rank < 1)
      throw std::runtime_error("embedding rank must be >= 1");
    Objective obj;
    obj.kind = cfg.kind;
    obj.rank = cfg.kind == ModelKind::wnn ? 1 : cfg.rank;
    obj.num_experts = cfg.kind == ModelKind::monomer ? cfg.num_experts : 0;
    obj.lambda = cfg.lambda;
    obj.corpus = &corpus;
    obj.pairs = &train_set.pairs;
    TrainResult trained = train(obj, train_config);
    rows.push_back(evaluate(trained.model, corpus, test, "test"));
  }
  if (include_ct) {
    RelationSet train_positives;
    for (const Pair& p : train_set.pairs)
      if (p.label == Label::positive) train_positives.pairs.push_back(p);
    CtModel ct = ct_fit(corpus, train_positives);
    rows.push_back(evaluate_ct(ct, corpus, test, "test"));
  }
  (void)validation;
  return rows;
}

std::string render_tsv(const std::vector<EvalResult>& rows) {
  std::ostringstream out;
  out << "model\tsplit\terror_rate\ttp\tfp\ttn\tfn\n";
  char buf[32];
  for (const EvalResult& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f", r.error_rate);
    out << r.model_name << '\t' << r.split_name << '\t' << buf << '\t'
        << r.true_positives << '\t' << r.false_positives << '\t' << r.true_negatives
        << '\t' << r.false_negatives << '\n';
  }
  return out.str();
}

std::string render_table(const std::vector<EvalResult>& rows) {
  std::ostringstream out;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-10s %-12s %-10s\n", "model", "split", "error");
  out << buf;
  for (const EvalResult& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s %-12s %.4f\n", r.model_name.c_str(),
                  r.split_name.c_str(), r.error_rate);
    out << buf;
  }
  return out.str();
}

}  // namespace monomer

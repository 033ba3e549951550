// monomer: learns non-metric compatibility between items from relationship
// dyads and content features; see README.md for the pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "monomer/corpus.hpp"
#include "monomer/evaluation.hpp"
#include "monomer/featurize.hpp"
#include "monomer/models.hpp"
#include "monomer/reco.hpp"
#include "monomer/sampling.hpp"
#include "monomer/training.hpp"

namespace {

using namespace monomer;

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct SynthArgs {
  SyntheticSpec spec;
  std::string out_prefix;
};

void run_synth(const SynthArgs& args) {
  SyntheticData data = generate_synthetic(args.spec);
  save_corpus(data.corpus, args.out_prefix + "items.tsv",
              args.out_prefix + "features.bin");
  save_relations(data.corpus, data.positives, args.out_prefix + "positives.tsv");
  save_ground_truth_maps(data.truth, args.out_prefix + "maps.tsv");
  std::cerr << "synth: " << data.corpus.size() << " items, "
            << data.positives.size() << " positives -> " << args.out_prefix << "*\n";
}

struct SampleArgs {
  std::string items, features, edges, out;
  RewireConfig config;
};

void run_sample_negatives(const SampleArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  RelationLoadStats stats;
  RelationSet positives = load_relations(corpus, args.edges, &stats);
  if (stats.same_category_dropped > 0)
    std::cerr << "warning: dropped " << stats.same_category_dropped
              << " same-category edge(s)\n";
  RelationSet negatives = sample_negatives(corpus, positives, args.config);
  save_relations(corpus, negatives, args.out);
  std::cerr << "sample-negatives: " << negatives.size() << " negatives -> " << args.out
            << "\n";
}

struct SplitArgs {
  std::string items, features, edges, negatives, out_prefix;
  SplitSpec spec;
};

void run_split(const SplitArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  RelationSet pairs = load_relations(corpus, args.edges);
  if (!args.negatives.empty()) {
    RelationSet neg = load_relations(corpus, args.negatives);
    pairs.pairs.insert(pairs.pairs.end(), neg.pairs.begin(), neg.pairs.end());
  }
  Splits splits = split_dataset(pairs, args.spec);
  save_relations(corpus, splits.train, args.out_prefix + "train.tsv");
  save_relations(corpus, splits.validation, args.out_prefix + "validation.tsv");
  save_relations(corpus, splits.test, args.out_prefix + "test.tsv");
  std::cerr << "split: " << splits.train.size() << "/" << splits.validation.size()
            << "/" << splits.test.size() << " -> " << args.out_prefix << "*\n";
}

struct TrainArgs {
  std::string items, features, train_edges, validation_edges;
  std::string model_name = "monomer";
  Eigen::Index k = 20;
  Eigen::Index n = 4;
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  std::string model_out, log_out, summary_out;
  TrainConfig config;
};

void run_train(const TrainArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  RelationSet train_set = load_relations(corpus, args.train_edges);

  Objective obj;
  obj.kind = model_kind_from_string(args.model_name);
  obj.rank = obj.kind == ModelKind::wnn ? 1 : args.k;
  obj.num_experts = obj.kind == ModelKind::monomer ? args.n : 0;
  obj.corpus = &corpus;
  obj.pairs = &train_set.pairs;
  obj.threads = args.config.threads;

  Model model;
  if (!args.lambda_grid.empty()) {
    if (args.validation_edges.empty())
      throw std::runtime_error("--lambda-grid requires --validation edges");
    RelationSet validation = load_relations(corpus, args.validation_edges);
    LambdaSelection selection =
        select_lambda(obj, args.lambda_grid, validation, args.config);
    for (const auto& [lambda, error] : selection.validation_errors)
      std::cerr << "lambda " << lambda << ": validation error " << error << "\n";
    std::cerr << "selected lambda " << selection.best_lambda << "\n";
    model = selection.best_model;
  } else {
    obj.lambda = args.lambda;
    TrainResult result = train(obj, args.config);
    write_report(result.report, args.log_out, args.summary_out);
    std::cerr << "train: status " << to_string(result.report.status) << ", "
              << result.report.iterations.back().iteration << " iterations, final NLL "
              << result.report.iterations.back().objective << " ("
              << result.report.wall_seconds << "s)\n";
    model = result.model;
  }
  save_model(model, args.model_out);
  std::cerr << "model -> " << args.model_out << "\n";
}

struct EvaluateArgs {
  std::string items, features, edges, model_file, split_name = "test";
};

void run_evaluate(const EvaluateArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  RelationSet split = load_relations(corpus, args.edges);
  Model model = load_model(args.model_file);
  EvalResult result = evaluate(model, corpus, split, args.split_name);
  std::cout << render_tsv({result});
}

struct CompareArgs {
  std::string items, features, train_edges, validation_edges, test_edges;
  Eigen::Index lmt_k = 20;
  Eigen::Index k = 5;
  Eigen::Index n = 3;
  double lambda = 0.0;
  bool include_ct = false;
  bool tsv = false;
  TrainConfig config;
};

void run_compare(const CompareArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  RelationSet train_set = load_relations(corpus, args.train_edges);
  RelationSet validation = load_relations(corpus, args.validation_edges);
  RelationSet test = load_relations(corpus, args.test_edges);

  std::vector<CompareConfig> configs = {
      {ModelKind::wnn, 1, 0, args.lambda},
      {ModelKind::lmt, args.lmt_k, 0, args.lambda},
      {ModelKind::monomer, args.k, args.n, args.lambda},
  };
  auto rows = compare_models(corpus, train_set, validation, test, configs, args.config,
                             args.include_ct);
  std::cout << (args.tsv ? render_tsv(rows) : render_table(rows));
}

struct RecoArgs {
  std::string items, features, model_file, query, out;
  size_t top_k = 10;
  bool no_category_filter = false;
  Eigen::Index expert = 1;  // expert-neighbors only
};

void write_reco(const RecoResult& result, const std::string& out_path) {
  if (out_path.empty()) {
    write_reco_tsv(result, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    write_reco_tsv(result, out);
  }
}

void run_recommend(const RecoArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  Model model = load_model(args.model_file);
  write_reco(recommend(model, corpus, args.query, args.top_k, !args.no_category_filter),
             args.out);
}

void run_expert_neighbors(const RecoArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  Model model = load_model(args.model_file);
  const auto* params = std::get_if<MonomerParams>(&model);
  if (!params) throw std::runtime_error("expert-neighbors requires a monomer model");
  write_reco(expert_neighbors(*params, corpus, args.query, args.expert, args.top_k,
                              !args.no_category_filter),
             args.out);
}

struct TopDimsArgs {
  std::string items, features, model_file, which = "anchor";
  Eigen::Index dimension = 0;
  size_t top_k = 10;
};

const Eigen::MatrixXd& select_embedding(const Model& model, const std::string& which) {
  if (const auto* p = std::get_if<LmtParams>(&model)) {
    if (which != "anchor" && which != "embedding")
      throw std::runtime_error("LMT has a single embedding; use --which anchor");
    return p->embedding;
  }
  const auto* p = std::get_if<MonomerParams>(&model);
  if (!p) throw std::runtime_error("WNN has no embedding");
  if (which == "anchor") return p->anchor;
  if (which.rfind("expert", 0) == 0) {
    const Eigen::Index k = std::stoll(which.substr(6));
    if (k < 1 || k > p->num_experts())
      throw std::runtime_error("expert index out of range in '" + which + "'");
    return p->experts[static_cast<size_t>(k - 1)];
  }
  throw std::runtime_error("--which must be 'anchor' or 'expert<k>'");
}

void run_top_dims(const TopDimsArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  Model model = load_model(args.model_file);
  const auto entries = top_items_per_dimension(select_embedding(model, args.which),
                                               corpus, args.dimension, args.top_k);
  char buf[40];
  for (const DimensionEntry& e : entries) {
    std::snprintf(buf, sizeof(buf), "%.10g", e.score);
    std::cout << args.dimension << '\t' << e.item_id << '\t' << buf << '\n';
  }
}

struct ExportArgs {
  std::string items, features, model_file, which = "anchor", out;
};

void run_export(const ExportArgs& args) {
  Corpus corpus = load_corpus(args.items, args.features);
  Model model = load_model(args.model_file);
  ProjectionSource source = ProjectionSource::anchor;
  Eigen::Index expert = 1;
  if (args.which != "anchor") {
    if (args.which.rfind("expert", 0) != 0)
      throw std::runtime_error("--which must be 'anchor' or 'expert<k>'");
    source = ProjectionSource::expert;
    expert = std::stoll(args.which.substr(6));
  }
  export_projections(model, corpus, source, expert, args.out);
  std::cerr << "projections -> " << args.out << "\n";
}

struct FeaturizeArgs {
  std::string reviews, stopwords, out_features, out_vocab, out_dropped, in_vocab;
  std::string items;  // optional: items with zero reviews land on the dropped list
  size_t vocab_size = 5000;
};

void run_featurize(const FeaturizeArgs& args) {
  Vocabulary vocab;
  if (!args.in_vocab.empty()) {
    vocab = load_vocabulary(args.in_vocab);
  } else {
    std::vector<std::string> stopwords;
    if (!args.stopwords.empty()) stopwords = load_stopwords(args.stopwords);
    VocabularyBuildResult built =
        build_vocabulary(args.reviews, args.vocab_size, stopwords);
    if (built.truncated_warning)
      std::cerr << "warning: only " << built.vocab.size()
                << " distinct terms available (requested " << args.vocab_size << ")\n";
    vocab = std::move(built.vocab);
  }
  if (!args.out_vocab.empty()) save_vocabulary(vocab, args.out_vocab);

  std::vector<std::string> all_items;
  if (!args.items.empty()) {
    std::ifstream in(args.items);
    if (!in) throw std::runtime_error("cannot open items file '" + args.items + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      all_items.push_back(line.substr(0, line.find('\t')));
    }
  }

  FeaturizeResult result = featurize_items(args.reviews, vocab, all_items);
  write_feature_file(args.out_features, result.item_ids,
                     result.features.cast<float>());
  if (!args.out_dropped.empty()) {
    std::ofstream out(args.out_dropped);
    if (!out)
      throw std::runtime_error("cannot open '" + args.out_dropped + "' for writing");
    for (const std::string& id : result.dropped) out << id << '\n';
  }
  std::cerr << "featurize: " << result.item_ids.size() << " items, "
            << result.dropped.size() << " dropped, F = " << vocab.size() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-metric compatibility learning between items"};
  app.require_subcommand(1);
  // Key=value file with one [subcommand] section per subcommand.
  app.set_config("--config", "", "Read options from a key=value config file");

  // synth
  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--items", synth.spec.item_count, "Item count");
  synth_cmd->add_option("--categories", synth.spec.category_count, "Category count");
  synth_cmd->add_option("--style-dim", synth.spec.style_dim, "Latent style dimension");
  synth_cmd->add_option("--offset", synth.spec.category_offset,
                        "Category one-hot magnitude");
  synth_cmd->add_option("--noise", synth.spec.noise, "Style noise level");
  synth_cmd->add_option("--positives", synth.spec.positives, "Positive pair count");
  synth_cmd->add_option("--maps", synth.spec.map_count, "Ground-truth style map count");
  synth_cmd->add_option("--seed", synth.spec.seed, "RNG seed");
  synth_cmd->add_option("--out-prefix", synth.out_prefix, "Output path prefix")
      ->required();

  // sample-negatives
  SampleArgs sample;
  auto* sample_cmd =
      app.add_subcommand("sample-negatives", "Rewire positives into a negative set");
  sample_cmd->add_option("--items", sample.items)->required();
  sample_cmd->add_option("--features", sample.features)->required();
  sample_cmd->add_option("--edges", sample.edges, "Positive edge TSV")->required();
  sample_cmd->add_option("--out", sample.out)->required();
  sample_cmd->add_option("--seed", sample.config.seed);
  sample_cmd->add_option("--swap-factor", sample.config.swap_factor);
  sample_cmd->add_option("--max-retry", sample.config.max_retry);

  // split
  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "80/10/10 train/validation/test split");
  split_cmd->add_option("--items", split.items)->required();
  split_cmd->add_option("--features", split.features)->required();
  split_cmd->add_option("--edges", split.edges, "Labeled (or positive) edge TSV")
      ->required();
  split_cmd->add_option("--negatives", split.negatives, "Optional negative edge TSV");
  split_cmd->add_option("--out-prefix", split.out_prefix)->required();
  split_cmd->add_option("--seed", split.spec.seed);
  split_cmd->add_option("--train-cap", split.spec.train_cap);
  split_cmd->add_option("--train-fraction", split.spec.train_fraction);
  split_cmd->add_option("--validation-fraction", split.spec.validation_fraction);
  split_cmd->add_option("--test-fraction", split.spec.test_fraction);

  // train
  TrainArgs train_args;
  train_args.config.threads = default_threads();
  auto* train_cmd = app.add_subcommand("train", "Fit a model with L-BFGS");
  train_cmd->add_option("--items", train_args.items)->required();
  train_cmd->add_option("--features", train_args.features)->required();
  train_cmd->add_option("--train", train_args.train_edges)->required();
  train_cmd->add_option("--validation", train_args.validation_edges);
  train_cmd->add_option("--model", train_args.model_name, "monomer | lmt | wnn");
  train_cmd->add_option("--k", train_args.k, "Embedding rank");
  train_cmd->add_option("--n", train_args.n, "Expert count (monomer)");
  train_cmd->add_option("--lambda", train_args.lambda, "L2 strength");
  train_cmd->add_option("--lambda-grid", train_args.lambda_grid,
                        "Validate over these lambdas");
  train_cmd->add_option("--max-iters", train_args.config.max_iterations);
  train_cmd->add_option("--history", train_args.config.lbfgs_history);
  train_cmd->add_option("--gtol", train_args.config.gradient_tolerance);
  train_cmd->add_option("--ftol", train_args.config.objective_tolerance);
  train_cmd->add_option("--init-scale", train_args.config.init_scale);
  train_cmd->add_option("--seed", train_args.config.seed);
  train_cmd->add_option("--threads", train_args.config.threads);
  train_cmd->add_option("--out", train_args.model_out)->required();
  train_cmd->add_option("--log", train_args.log_out, "Per-iteration TSV log");
  train_cmd->add_option("--summary", train_args.summary_out, "Summary file");

  // evaluate
  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Error rate of a trained model");
  eval_cmd->add_option("--items", eval_args.items)->required();
  eval_cmd->add_option("--features", eval_args.features)->required();
  eval_cmd->add_option("--edges", eval_args.edges)->required();
  eval_cmd->add_option("--model-file", eval_args.model_file)->required();
  eval_cmd->add_option("--split-name", eval_args.split_name);

  // compare
  CompareArgs compare_args;
  compare_args.config.threads = default_threads();
  auto* compare_cmd =
      app.add_subcommand("compare", "Train and compare WNN, LMT and Monomer");
  compare_cmd->add_option("--items", compare_args.items)->required();
  compare_cmd->add_option("--features", compare_args.features)->required();
  compare_cmd->add_option("--train", compare_args.train_edges)->required();
  compare_cmd->add_option("--validation", compare_args.validation_edges)->required();
  compare_cmd->add_option("--test", compare_args.test_edges)->required();
  compare_cmd->add_option("--lmt-k", compare_args.lmt_k);
  compare_cmd->add_option("--k", compare_args.k);
  compare_cmd->add_option("--n", compare_args.n);
  compare_cmd->add_option("--lambda", compare_args.lambda);
  compare_cmd->add_flag("--with-ct", compare_args.include_ct, "Include the CT baseline");
  compare_cmd->add_flag("--tsv", compare_args.tsv, "Emit TSV instead of aligned text");
  compare_cmd->add_option("--max-iters", compare_args.config.max_iterations);
  compare_cmd->add_option("--seed", compare_args.config.seed);
  compare_cmd->add_option("--threads", compare_args.config.threads);

  // recommend / expert-neighbors
  RecoArgs reco_args;
  auto* reco_cmd = app.add_subcommand("recommend", "Top-k recommendations for a query");
  reco_cmd->add_option("--items", reco_args.items)->required();
  reco_cmd->add_option("--features", reco_args.features)->required();
  reco_cmd->add_option("--model-file", reco_args.model_file)->required();
  reco_cmd->add_option("--query", reco_args.query)->required();
  reco_cmd->add_option("--top-k", reco_args.top_k);
  reco_cmd->add_option("--out", reco_args.out, "Output TSV (default stdout)");
  reco_cmd->add_flag("--no-category-filter", reco_args.no_category_filter);

  RecoArgs expert_args;
  auto* expert_cmd =
      app.add_subcommand("expert-neighbors", "Nearest neighbors within one expert");
  expert_cmd->add_option("--items", expert_args.items)->required();
  expert_cmd->add_option("--features", expert_args.features)->required();
  expert_cmd->add_option("--model-file", expert_args.model_file)->required();
  expert_cmd->add_option("--query", expert_args.query)->required();
  expert_cmd->add_option("--expert", expert_args.expert)->required();
  expert_cmd->add_option("--top-k", expert_args.top_k);
  expert_cmd->add_option("--out", expert_args.out);
  expert_cmd->add_flag("--no-category-filter", expert_args.no_category_filter);

  // top-dims
  TopDimsArgs top_args;
  auto* top_cmd =
      app.add_subcommand("top-dims", "Top items for one embedding dimension");
  top_cmd->add_option("--items", top_args.items)->required();
  top_cmd->add_option("--features", top_args.features)->required();
  top_cmd->add_option("--model-file", top_args.model_file)->required();
  top_cmd->add_option("--which", top_args.which, "anchor | expert<k>");
  top_cmd->add_option("--dimension", top_args.dimension)->required();
  top_cmd->add_option("--top-k", top_args.top_k);

  // export-projections
  ExportArgs export_args;
  auto* export_cmd =
      app.add_subcommand("export-projections", "Export K-d item projections as TSV");
  export_cmd->add_option("--items", export_args.items)->required();
  export_cmd->add_option("--features", export_args.features)->required();
  export_cmd->add_option("--model-file", export_args.model_file)->required();
  export_cmd->add_option("--which", export_args.which, "anchor | expert<k>");
  export_cmd->add_option("--out", export_args.out)->required();

  // featurize
  FeaturizeArgs feat_args;
  auto* feat_cmd =
      app.add_subcommand("featurize", "Bag-of-words features from review text");
  feat_cmd->add_option("--reviews", feat_args.reviews, "TSV item_id<TAB>review")
      ->required();
  feat_cmd->add_option("--stopwords", feat_args.stopwords, "One stop-word per line");
  feat_cmd->add_option("--vocab-size", feat_args.vocab_size);
  feat_cmd->add_option("--vocab", feat_args.in_vocab, "Reuse an existing vocabulary");
  feat_cmd->add_option("--items", feat_args.items,
                       "Item list; review-less items are reported as dropped");
  feat_cmd->add_option("--out-features", feat_args.out_features)->required();
  feat_cmd->add_option("--out-vocab", feat_args.out_vocab);
  feat_cmd->add_option("--out-dropped", feat_args.out_dropped);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) run_synth(synth);
    if (sample_cmd->parsed()) run_sample_negatives(sample);
    if (split_cmd->parsed()) run_split(split);
    if (train_cmd->parsed()) run_train(train_args);
    if (eval_cmd->parsed()) run_evaluate(eval_args);
    if (compare_cmd->parsed()) run_compare(compare_args);
    if (reco_cmd->parsed()) run_recommend(reco_args);
    if (expert_cmd->parsed()) run_expert_neighbors(expert_args);
    if (top_cmd->parsed()) run_top_dims(top_args);
    if (export_cmd->parsed()) run_export(export_args);
    if (feat_cmd->parsed()) run_featurize(feat_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

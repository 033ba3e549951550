#include "monomer/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace monomer {
namespace {

constexpr char kModelMagic[4] = {'M', 'N', 'M', 'P'};
constexpr uint16_t kModelVersion = 1;
constexpr uint16_t kKindMonomer = 1;
constexpr uint16_t kKindLmt = 2;
constexpr uint16_t kKindWnn = 3;

void check_dim(const Eigen::VectorXd& f, Eigen::Index expected, const char* name) {
  if (f.size() != expected)
    throw std::runtime_error(std::string(name) + ": feature has dimension " +
                             std::to_string(f.size()) + ", model expects " +
                             std::to_string(expected));
}

double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::monomer: return "monomer";
    case ModelKind::lmt: return "lmt";
    case ModelKind::wnn: return "wnn";
  }
  throw std::logic_error("bad model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "monomer") return ModelKind::monomer;
  if (name == "lmt") return ModelKind::lmt;
  if (name == "wnn") return ModelKind::wnn;
  throw std::runtime_error("unknown model kind '" + name + "'");
}

Eigen::Index MonomerParams::parameter_count() const {
  const Eigen::Index F = feature_dim(), K = rank(), N = num_experts();
  return F * (N * K + K + N) + 1;
}

Eigen::Index MonomerParams::embedding_parameter_count() const {
  return feature_dim() * rank() * (num_experts() + 1);
}

ModelKind kind_of(const Model& model) {
  if (std::holds_alternative<MonomerParams>(model)) return ModelKind::monomer;
  if (std::holds_alternative<LmtParams>(model)) return ModelKind::lmt;
  return ModelKind::wnn;
}

Eigen::Index feature_dim_of(const Model& model) {
  return std::visit(
      [](const auto& p) -> Eigen::Index {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WnnParams>)
          return p.weights.size();
        else if constexpr (std::is_same_v<T, LmtParams>)
          return p.embedding.rows();
        else
          return p.feature_dim();
      },
      model);
}

double bias_of(const Model& model) {
  return std::visit([](const auto& p) { return p.bias; }, model);
}

double lmt_distance(const LmtParams& params, const Eigen::VectorXd& f_x,
                    const Eigen::VectorXd& f_y) {
  check_dim(f_x, params.embedding.rows(), "lmt_distance");
  check_dim(f_y, params.embedding.rows(), "lmt_distance");
  return (params.embedding.transpose() * (f_x - f_y)).squaredNorm();
}

double expert_distance(const MonomerParams& params, Eigen::Index k,
                       const Eigen::VectorXd& f_x, const Eigen::VectorXd& f_y) {
  if (k < 1 || k > params.num_experts())
    throw std::runtime_error("expert index " + std::to_string(k) + " out of range [1, " +
                             std::to_string(params.num_experts()) + "]");
  check_dim(f_x, params.feature_dim(), "expert_distance");
  check_dim(f_y, params.feature_dim(), "expert_distance");
  return (params.anchor.transpose() * f_x -
          params.experts[static_cast<size_t>(k - 1)].transpose() * f_y)
      .squaredNorm();
}

Eigen::VectorXd gate(const MonomerParams& params, const Eigen::VectorXd& f_x) {
  check_dim(f_x, params.feature_dim(), "gate");
  Eigen::VectorXd logits = params.gating.transpose() * f_x;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd probs = logits.array().exp();
  return probs / probs.sum();
}

double monomer_distance(const MonomerParams& params, const Eigen::VectorXd& f_x,
                        const Eigen::VectorXd& f_y) {
  const Eigen::VectorXd probs = gate(params, f_x);
  const Eigen::VectorXd anchor_x = params.anchor.transpose() * f_x;
  double d = 0.0;
  for (Eigen::Index k = 0; k < params.num_experts(); ++k)
    d += probs[k] *
         (anchor_x - params.experts[static_cast<size_t>(k)].transpose() * f_y)
             .squaredNorm();
  return d;
}

double wnn_distance(const WnnParams& params, const Eigen::VectorXd& f_x,
                    const Eigen::VectorXd& f_y) {
  check_dim(f_x, params.weights.size(), "wnn_distance");
  check_dim(f_y, params.weights.size(), "wnn_distance");
  return (params.weights.array() * (f_x - f_y).array()).matrix().squaredNorm();
}

double distance(const Model& model, const Eigen::VectorXd& f_x,
                const Eigen::VectorXd& f_y) {
  return std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MonomerParams>)
          return monomer_distance(p, f_x, f_y);
        else if constexpr (std::is_same_v<T, LmtParams>)
          return lmt_distance(p, f_x, f_y);
        else
          return wnn_distance(p, f_x, f_y);
      },
      model);
}

double link_probability(double distance, double c) {
  const double z = distance - c;
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double log_link_probability(double distance, double c) { return -softplus(distance - c); }

double log_nonlink_probability(double distance, double c) {
  return -softplus(c - distance);
}

bool classify(double distance, double c) { return distance < c; }

Eigen::VectorXd batch_distances(const Model& model, const Corpus& corpus,
                                const std::vector<Pair>& pairs) {
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Eigen::VectorXd out(n);
  constexpr Eigen::Index kBlock = 512;
  const auto& feats = corpus.features();

  if (const auto* p = std::get_if<MonomerParams>(&model)) {
    const Eigen::Index K = p->rank(), N = p->num_experts();
    const Eigen::Index F = p->feature_dim();
    // One GEMM over all experts instead of N small ones.
    Eigen::MatrixXd experts(F, N * K);
    for (Eigen::Index k = 0; k < N; ++k)
      experts.middleCols(k * K, K) = p->experts[static_cast<size_t>(k)];
    Eigen::MatrixXd fx(kBlock, F), fy(kBlock, F);
    for (Eigen::Index start = 0; start < n; start += kBlock) {
      const Eigen::Index b = std::min(kBlock, n - start);
      for (Eigen::Index i = 0; i < b; ++i) {
        const Pair& pr = pairs[static_cast<size_t>(start + i)];
        fx.row(i) = feats.row(corpus.item(pr.src).feature_row).cast<double>();
        fy.row(i) = feats.row(corpus.item(pr.dst).feature_row).cast<double>();
      }
      Eigen::MatrixXd anchor = fx.topRows(b) * p->anchor;  // b x K
      Eigen::MatrixXd logits = fx.topRows(b) * p->gating;  // b x N
      Eigen::MatrixXd proj = fy.topRows(b) * experts;      // b x N*K
      Eigen::MatrixXd dists(b, N);
      for (Eigen::Index k = 0; k < N; ++k)
        dists.col(k) = (anchor - proj.middleCols(k * K, K)).rowwise().squaredNorm();
      const Eigen::ArrayXd row_max = logits.rowwise().maxCoeff();
      Eigen::ArrayXXd weights = (logits.array().colwise() - row_max).exp();
      out.segment(start, b) = (weights * dists.array()).rowwise().sum() /
                              weights.rowwise().sum();
    }
    return out;
  }

  if (const auto* p = std::get_if<LmtParams>(&model)) {
    Eigen::MatrixXd diff(kBlock, p->embedding.rows());
    for (Eigen::Index start = 0; start < n; start += kBlock) {
      const Eigen::Index b = std::min(kBlock, n - start);
      for (Eigen::Index i = 0; i < b; ++i) {
        const Pair& pr = pairs[static_cast<size_t>(start + i)];
        diff.row(i) = feats.row(corpus.item(pr.src).feature_row).cast<double>() -
                      feats.row(corpus.item(pr.dst).feature_row).cast<double>();
      }
      out.segment(start, b) = (diff.topRows(b) * p->embedding).rowwise().squaredNorm();
    }
    return out;
  }

  const auto& p = std::get<WnnParams>(model);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Pair& pr = pairs[static_cast<size_t>(i)];
    out[i] = wnn_distance(p, corpus.feature(pr.src), corpus.feature(pr.dst));
  }
  return out;
}

CtModel ct_fit(const Corpus& corpus, const RelationSet& train_positives) {
  std::map<std::string, std::map<std::string, size_t>> counts;
  for (const Pair& p : train_positives.pairs) {
    if (p.label != Label::positive) continue;
    counts[corpus.item(p.src).category][corpus.item(p.dst).category]++;
  }
  CtModel model;
  for (const auto& [src_cat, dst_counts] : counts) {
    std::vector<std::pair<std::string, size_t>> ranked(dst_counts.begin(),
                                                       dst_counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const size_t keep = (ranked.size() + 1) / 2;  // ceil(0.5 * #connected)
    std::set<std::string>& allowed = model.allowed[src_cat];
    for (size_t i = 0; i < keep; ++i) allowed.insert(ranked[i].first);
  }
  return model;
}

bool ct_predict(const CtModel& model, const std::string& category_src,
                const std::string& category_dst) {
  auto it = model.allowed.find(category_src);
  if (it == model.allowed.end()) return false;
  return it->second.count(category_dst) > 0;
}

Eigen::Index packed_size(ModelKind kind, Eigen::Index F, Eigen::Index K,
                         Eigen::Index N) {
  switch (kind) {
    case ModelKind::monomer: return F * (N * K + K + N) + 1;
    case ModelKind::lmt: return F * K + 1;
    case ModelKind::wnn: return F + 1;
  }
  throw std::logic_error("bad model kind");
}

Eigen::VectorXd pack(const Model& model) {
  if (const auto* p = std::get_if<MonomerParams>(&model)) {
    Eigen::VectorXd theta(p->parameter_count());
    const Eigen::Index FK = p->anchor.size();
    Eigen::Index off = 0;
    theta.segment(off, FK) = Eigen::Map<const Eigen::VectorXd>(p->anchor.data(), FK);
    off += FK;
    for (const auto& e : p->experts) {
      theta.segment(off, FK) = Eigen::Map<const Eigen::VectorXd>(e.data(), FK);
      off += FK;
    }
    theta.segment(off, p->gating.size()) =
        Eigen::Map<const Eigen::VectorXd>(p->gating.data(), p->gating.size());
    off += p->gating.size();
    theta[off] = p->bias;
    return theta;
  }
  if (const auto* p = std::get_if<LmtParams>(&model)) {
    Eigen::VectorXd theta(p->parameter_count());
    theta.head(p->embedding.size()) =
        Eigen::Map<const Eigen::VectorXd>(p->embedding.data(), p->embedding.size());
    theta[p->embedding.size()] = p->bias;
    return theta;
  }
  const auto& p = std::get<WnnParams>(model);
  Eigen::VectorXd theta(p.parameter_count());
  theta.head(p.weights.size()) = p.weights;
  theta[p.weights.size()] = p.bias;
  return theta;
}

Model unpack(ModelKind kind, Eigen::Index F, Eigen::Index K, Eigen::Index N,
             const Eigen::VectorXd& theta) {
  if (theta.size() != packed_size(kind, F, K, N))
    throw std::runtime_error("parameter vector has length " +
                             std::to_string(theta.size()) + ", expected " +
                             std::to_string(packed_size(kind, F, K, N)));
  switch (kind) {
    case ModelKind::monomer: {
      MonomerParams p;
      Eigen::Index off = 0;
      p.anchor = Eigen::Map<const Eigen::MatrixXd>(theta.data(), F, K);
      off += F * K;
      p.experts.resize(static_cast<size_t>(N));
      for (Eigen::Index k = 0; k < N; ++k) {
        p.experts[static_cast<size_t>(k)] =
            Eigen::Map<const Eigen::MatrixXd>(theta.data() + off, F, K);
        off += F * K;
      }
      p.gating = Eigen::Map<const Eigen::MatrixXd>(theta.data() + off, F, N);
      off += F * N;
      p.bias = theta[off];
      return p;
    }
    case ModelKind::lmt: {
      LmtParams p;
      p.embedding = Eigen::Map<const Eigen::MatrixXd>(theta.data(), F, K);
      p.bias = theta[F * K];
      return p;
    }
    case ModelKind::wnn: {
      WnnParams p;
      p.weights = theta.head(F);
      p.bias = theta[F];
      return p;
    }
  }
  throw std::logic_error("bad model kind");
}

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error(path + ": truncated model file");
  return value;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(kModelMagic, 4);
  write_raw(out, kModelVersion);

  const ModelKind kind = kind_of(model);
  uint16_t tag = kind == ModelKind::monomer ? kKindMonomer
                 : kind == ModelKind::lmt   ? kKindLmt
                                            : kKindWnn;
  write_raw(out, tag);

  Eigen::Index F = feature_dim_of(model), K = 0, N = 0;
  if (const auto* p = std::get_if<MonomerParams>(&model)) {
    K = p->rank();
    N = p->num_experts();
  } else if (const auto* p = std::get_if<LmtParams>(&model)) {
    K = p->embedding.cols();
  } else {
    K = 1;
  }
  write_raw(out, static_cast<uint32_t>(F));
  write_raw(out, static_cast<uint32_t>(K));
  write_raw(out, static_cast<uint32_t>(N));

  const Eigen::VectorXd theta = pack(model);
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(sizeof(double) * theta.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw std::runtime_error(path + ": not a MNMP model file");
  const auto version = read_raw<uint16_t>(in, path);
  if (version != kModelVersion)
    throw std::runtime_error(path + ": unsupported model file version " +
                             std::to_string(version));
  const auto tag = read_raw<uint16_t>(in, path);
  ModelKind kind;
  switch (tag) {
    case kKindMonomer: kind = ModelKind::monomer; break;
    case kKindLmt: kind = ModelKind::lmt; break;
    case kKindWnn: kind = ModelKind::wnn; break;
    default:
      throw std::runtime_error(path + ": unknown model kind tag " + std::to_string(tag));
  }
  const auto F = static_cast<Eigen::Index>(read_raw<uint32_t>(in, path));
  const auto K = static_cast<Eigen::Index>(read_raw<uint32_t>(in, path));
  const auto N = static_cast<Eigen::Index>(read_raw<uint32_t>(in, path));

  Eigen::VectorXd theta(packed_size(kind, F, K, N));
  in.read(reinterpret_cast<char*>(theta.data()),
          static_cast<std::streamsize>(sizeof(double) * theta.size()));
  if (!in) throw std::runtime_error(path + ": truncated parameter block");
  if (!theta.allFinite()) throw std::runtime_error(path + ": non-finite parameters");
  return unpack(kind, F, K, N, theta);
}

}  // namespace monomer

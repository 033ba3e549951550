#include "monomer/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>

namespace monomer {
namespace {

double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Loss and gradient over one contiguous stripe of pairs. Sequential within
// the stripe; stripes are combined in index order so results do not depend
// on thread scheduling.
struct StripeResult {
  double value = 0.0;
  Eigen::VectorXd grad;
};

void accumulate_stripe(const Objective& obj, const Model& model, size_t begin,
                       size_t end, bool want_grad, StripeResult& out) {
  const auto& pairs = *obj.pairs;
  const Corpus& corpus = *obj.corpus;
  out.value = 0.0;
  if (want_grad) out.grad = Eigen::VectorXd::Zero(obj.parameter_count());

  const Eigen::Index F = obj.feature_dim();
  const Eigen::Index K = obj.rank;
  const Eigen::Index N = obj.num_experts;
  const Eigen::Index FK = F * K;

  for (size_t i = begin; i < end; ++i) {
    const Pair& pr = pairs[i];
    const Eigen::VectorXd f_x = corpus.feature(pr.src);
    const Eigen::VectorXd f_y = corpus.feature(pr.dst);
    double d = 0.0;

    // Reused by the gradient block below.
    Eigen::VectorXd probs, dists;
    std::vector<Eigen::VectorXd> deltas;
    Eigen::VectorXd delta_lmt, diff;

    if (const auto* p = std::get_if<MonomerParams>(&model)) {
      const Eigen::VectorXd anchor_x = p->anchor.transpose() * f_x;
      Eigen::VectorXd logits = p->gating.transpose() * f_x;
      logits.array() -= logits.maxCoeff();
      probs = logits.array().exp();
      probs /= probs.sum();
      dists.resize(N);
      deltas.resize(static_cast<size_t>(N));
      for (Eigen::Index k = 0; k < N; ++k) {
        deltas[static_cast<size_t>(k)] =
            anchor_x - p->experts[static_cast<size_t>(k)].transpose() * f_y;
        dists[k] = deltas[static_cast<size_t>(k)].squaredNorm();
      }
      d = probs.dot(dists);
    } else if (const auto* p = std::get_if<LmtParams>(&model)) {
      diff = f_x - f_y;
      delta_lmt = p->embedding.transpose() * diff;
      d = delta_lmt.squaredNorm();
    } else {
      const auto& w = std::get<WnnParams>(model);
      diff = f_x - f_y;
      d = (w.weights.array() * diff.array()).matrix().squaredNorm();
    }

    const double c = bias_of(model);
    const bool positive = pr.label == Label::positive;
    const double loss = positive ? softplus(d - c) : softplus(c - d);
    if (!std::isfinite(loss))
      throw std::runtime_error("non-finite objective at pair (" +
                               corpus.item(pr.src).id + ", " + corpus.item(pr.dst).id +
                               ")");
    out.value += loss;
    if (!want_grad) continue;

    // d(loss)/d(distance); d(loss)/dc is its negation.
    const double g = positive ? sigmoid(d - c) : -sigmoid(c - d);
    out.grad[out.grad.size() - 1] += -g;

    if (const auto* p = std::get_if<MonomerParams>(&model)) {
      Eigen::VectorXd weighted_delta = Eigen::VectorXd::Zero(K);
      for (Eigen::Index k = 0; k < N; ++k)
        weighted_delta += probs[k] * deltas[static_cast<size_t>(k)];
      Eigen::Map<Eigen::MatrixXd>(out.grad.data(), F, K).noalias() +=
          (2.0 * g) * f_x * weighted_delta.transpose();
      for (Eigen::Index k = 0; k < N; ++k)
        Eigen::Map<Eigen::MatrixXd>(out.grad.data() + FK * (1 + k), F, K).noalias() -=
            (2.0 * g * probs[k]) * f_y * deltas[static_cast<size_t>(k)].transpose();
      Eigen::Map<Eigen::MatrixXd> grad_u(out.grad.data() + FK * (1 + N), F, N);
      for (Eigen::Index k = 0; k < N; ++k)
        grad_u.col(k).noalias() += (g * probs[k] * (dists[k] - d)) * f_x;
    } else if (std::holds_alternative<LmtParams>(model)) {
      Eigen::Map<Eigen::MatrixXd>(out.grad.data(), F, K).noalias() +=
          (2.0 * g) * diff * delta_lmt.transpose();
    } else {
      const auto& w = std::get<WnnParams>(model);
      out.grad.head(F).array() +=
          (2.0 * g) * w.weights.array() * diff.array().square();
    }
  }
}

double evaluate(const Eigen::VectorXd& theta, const Objective& obj, bool want_grad,
                Eigen::VectorXd* grad) {
  if (!obj.corpus || !obj.pairs) throw std::runtime_error("objective not bound");
  if (obj.pairs->empty()) throw std::runtime_error("training pair set is empty");
  if (obj.lambda < 0) throw std::runtime_error("lambda must be >= 0");
  if (theta.size() != obj.parameter_count())
    throw std::runtime_error("parameter vector has length " +
                             std::to_string(theta.size()) + ", expected " +
                             std::to_string(obj.parameter_count()));

  const Model model =
      unpack(obj.kind, obj.feature_dim(), obj.rank, obj.num_experts, theta);

  // Fixed stripe count keeps the reduction order independent of the thread
  // count.
  constexpr size_t kStripes = 16;
  const size_t n = obj.pairs->size();
  std::vector<StripeResult> partial(kStripes);
  const size_t stripe_len = (n + kStripes - 1) / kStripes;

  auto run_stripe = [&](size_t s) {
    const size_t begin = s * stripe_len;
    const size_t end = std::min(n, begin + stripe_len);
    if (begin < end) accumulate_stripe(obj, model, begin, end, want_grad, partial[s]);
  };

  const int threads = std::max(1, obj.threads);
  if (threads == 1) {
    for (size_t s = 0; s < kStripes; ++s) run_stripe(s);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (size_t s = next.fetch_add(1); s < kStripes; s = next.fetch_add(1))
          run_stripe(s);
      });
    for (auto& th : pool) th.join();
  }

  double value = 0.0;
  if (want_grad) *grad = Eigen::VectorXd::Zero(theta.size());
  for (size_t s = 0; s < kStripes; ++s) {
    value += partial[s].value;
    if (want_grad && partial[s].grad.size() > 0) *grad += partial[s].grad;
  }

  // L2 penalty on everything but c.
  if (obj.lambda > 0) {
    const Eigen::Index emb = theta.size() - 1;
    value += obj.lambda * theta.head(emb).squaredNorm();
    if (want_grad) grad->head(emb) += (2.0 * obj.lambda) * theta.head(emb);
  }
  if (want_grad && !grad->allFinite()) {
    const char* block = "parameters";
    if (obj.kind == ModelKind::monomer) {
      const Eigen::Index FK = obj.feature_dim() * obj.rank;
      if (!grad->head(FK).allFinite())
        block = "anchor embedding";
      else if (!grad->segment(FK, FK * obj.num_experts).allFinite())
        block = "expert embeddings";
      else if (!grad->segment(FK * (1 + obj.num_experts),
                              obj.feature_dim() * obj.num_experts)
                    .allFinite())
        block = "gating matrix";
      else
        block = "bias";
    }
    throw std::runtime_error(std::string("non-finite gradient in ") + block);
  }
  return value;
}

}  // namespace

Eigen::Index Objective::parameter_count() const {
  return packed_size(kind, feature_dim(), rank, num_experts);
}

double objective_value(const Eigen::VectorXd& theta, const Objective& objective) {
  return evaluate(theta, objective, false, nullptr);
}

double objective_gradient(const Eigen::VectorXd& theta, const Objective& objective,
                          Eigen::VectorXd& grad) {
  return evaluate(theta, objective, true, &grad);
}

std::string to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::converged: return "converged";
    case TrainStatus::max_iterations: return "max-iter";
    case TrainStatus::line_search_failure: return "line-search-failure";
  }
  throw std::logic_error("bad status");
}

Model init_params(ModelKind kind, Eigen::Index F, Eigen::Index K, Eigen::Index N,
                  const TrainConfig& config) {
  if (F < 1 || K < 1 || (kind == ModelKind::monomer && N < 1))
    throw std::runtime_error("model dimensions must be positive");
  const Eigen::Index effective_k = kind == ModelKind::wnn ? 1 : K;
  const double a =
      config.init_scale * std::sqrt(6.0 / static_cast<double>(F + effective_k));
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(-a, a);

  Eigen::VectorXd theta(packed_size(kind, F, K, N));
  for (Eigen::Index i = 0; i + 1 < theta.size(); ++i)
    theta[i] = a == 0.0 ? 0.0 : uniform(rng);
  theta[theta.size() - 1] = 0.0;  // c
  return unpack(kind, F, K, N, theta);
}

namespace {

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;
  Eigen::VectorXd point;
  Eigen::VectorXd grad;
  int evals = 0;
};

// Strong Wolfe conditions (c1 = 1e-4, c2 = 0.9), bracketing + zoom.
LineSearchResult line_search(const Objective& obj, const Eigen::VectorXd& x,
                             double f0, const Eigen::VectorXd& g0,
                             const Eigen::VectorXd& dir) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  constexpr int kMaxEvals = 60;
  const double dphi0 = g0.dot(dir);
  LineSearchResult result;
  if (dphi0 >= 0) return result;

  auto phi = [&](double alpha, Eigen::VectorXd& grad_out, Eigen::VectorXd& point) {
    point = x + alpha * dir;
    return objective_gradient(point, obj, grad_out);
  };

  double alpha_prev = 0.0, f_prev = f0;
  double alpha = 1.0;
  Eigen::VectorXd grad, point;

  auto zoom = [&](double lo, double f_lo, double hi, double f_hi) {
    for (int it = 0; it < kMaxEvals && result.evals < kMaxEvals; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double f_mid = phi(mid, grad, point);
      ++result.evals;
      const double dphi_mid = grad.dot(dir);
      if (f_mid > f0 + c1 * mid * dphi0 || f_mid >= f_lo) {
        hi = mid;
        f_hi = f_mid;
      } else {
        if (std::abs(dphi_mid) <= -c2 * dphi0) {
          result.ok = true;
          result.step = mid;
          result.value = f_mid;
          result.point = point;
          result.grad = grad;
          return;
        }
        if (dphi_mid * (hi - lo) >= 0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = mid;
        f_lo = f_mid;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
  };

  for (int it = 0; it < kMaxEvals && result.evals < kMaxEvals; ++it) {
    const double f_alpha = phi(alpha, grad, point);
    ++result.evals;
    if (!std::isfinite(f_alpha)) {
      alpha *= 0.25;
      continue;
    }
    const double dphi = grad.dot(dir);
    if (f_alpha > f0 + c1 * alpha * dphi0 || (it > 0 && f_alpha >= f_prev)) {
      zoom(alpha_prev, f_prev, alpha, f_alpha);
      return result;
    }
    if (std::abs(dphi) <= -c2 * dphi0) {
      result.ok = true;
      result.step = alpha;
      result.value = f_alpha;
      result.point = point;
      result.grad = grad;
      return result;
    }
    if (dphi >= 0) {
      zoom(alpha, f_alpha, alpha_prev, f_prev);
      return result;
    }
    alpha_prev = alpha;
    f_prev = f_alpha;
    alpha *= 2.0;
    if (alpha > 1e8) break;
  }
  return result;
}

}  // namespace

TrainResult train(const Objective& objective, const TrainConfig& config) {
  if (config.max_iterations < 0 || config.lbfgs_history < 1 ||
      config.gradient_tolerance <= 0 || config.objective_tolerance <= 0)
    throw std::runtime_error("invalid training configuration");

  const auto start = std::chrono::steady_clock::now();
  Objective obj = objective;
  obj.threads = config.threads;

  Model init = init_params(obj.kind, obj.feature_dim(), obj.rank, obj.num_experts,
                           config);
  Eigen::VectorXd x = pack(init);
  Eigen::VectorXd g;
  double f = objective_gradient(x, obj, g);
  if (!std::isfinite(f))
    throw std::runtime_error("objective is non-finite at the initial point");

  const double g0_norm = g.norm();
  Eigen::VectorXd x_best = x;
  double f_best = f;

  TrainReport report;
  report.iterations.push_back(IterationRecord{0, f, g0_norm, 0.0});
  report.status = TrainStatus::max_iterations;

  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho_hist;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    if (g.norm() <= config.gradient_tolerance * std::max(1.0, g0_norm)) {
      report.status = TrainStatus::converged;
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd dir = -g;
    const size_t h = s_hist.size();
    std::vector<double> alpha(h);
    for (size_t i = h; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (h > 0) {
      const double gamma = s_hist[h - 1].dot(y_hist[h - 1]) / y_hist[h - 1].squaredNorm();
      dir *= gamma;
    }
    for (size_t i = 0; i < h; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    if (dir.dot(g) >= 0) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
    }

    LineSearchResult ls = line_search(obj, x, f, g, dir);
    if (!ls.ok) {
      report.status = TrainStatus::line_search_failure;
      break;
    }

    const Eigen::VectorXd s = ls.point - x;
    const Eigen::VectorXd y = ls.grad - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.lbfgs_history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }

    const double f_prev = f;
    x = ls.point;
    f = ls.value;
    g = ls.grad;
    if (f < f_best) {
      f_best = f;
      x_best = x;
    }
    report.iterations.push_back(IterationRecord{iter, f, g.norm(), ls.step});

    if (std::abs(f_prev - f) <= config.objective_tolerance * std::max(1.0, std::abs(f_prev))) {
      report.status = TrainStatus::converged;
      break;
    }
  }
  if (report.status == TrainStatus::max_iterations &&
      g.norm() <= config.gradient_tolerance * std::max(1.0, g0_norm))
    report.status = TrainStatus::converged;

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  TrainResult result;
  result.model = unpack(obj.kind, obj.feature_dim(), obj.rank, obj.num_experts, x_best);
  result.report = std::move(report);
  return result;
}

void write_report(const TrainReport& report, const std::string& log_path,
                  const std::string& summary_path) {
  // Wall time is intentionally absent so output files are reproducible.
  char buf[128];
  if (!log_path.empty()) {
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("cannot open '" + log_path + "' for writing");
    log << "iteration\tobjective\tgradient_norm\tstep\n";
    for (const IterationRecord& rec : report.iterations) {
      std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%.17g\t%.17g\n", rec.iteration,
                    rec.objective, rec.gradient_norm, rec.step_length);
      log << buf;
    }
  }
  if (!summary_path.empty()) {
    std::ofstream summary(summary_path);
    if (!summary)
      throw std::runtime_error("cannot open '" + summary_path + "' for writing");
    summary << "status\t" << to_string(report.status) << '\n';
    summary << "iterations\t" << report.iterations.back().iteration << '\n';
    std::snprintf(buf, sizeof(buf), "final_objective\t%.17g\n",
                  report.iterations.back().objective);
    summary << buf;
  }
}

}  // namespace monomer

#pragma once

// One-hidden-layer network: input -> ReLU(W1 x + b1) -> sigmoid(w2 . h + b2),
// trained on binary cross-entropy with Adam. Output is Prob(w_N = +1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fricke/error.hpp"
#include "fricke/features.hpp"
#include "fricke/predictions.hpp"
#include "fricke/rng.hpp"

namespace fricke {

struct NnConfig {
  int n_inputs = 0;
  int hidden_width = 32;
  double learning_rate = 1e-3;
  long iterations = 40000;
  int batch_size = 128;  ///< 0 = full batch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool include_spectral = true;
  long history_every = 500;
  /// Return the checkpoint with the best validation accuracy instead of the last.
  bool keep_best_val = false;
};

struct NnParams {
  Eigen::MatrixXd W1;  ///< hidden x inputs
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;  ///< output weights, one per hidden unit
  double b2 = 0.0;

  static NnParams zeros(int inputs, int hidden) {
    return {Eigen::MatrixXd::Zero(hidden, inputs), Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden), 0.0};
  }
  bool all_finite() const { return W1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2); }
};

using NnGradients = NnParams;

struct NnModel {
  NnParams params;
  NnConfig config;
  FeatureSpec feature_spec;
  std::optional<StandardizationStats> stats;

  int n_inputs() const { return static_cast<int>(params.W1.cols()); }
};

struct AdamState {
  NnParams m;
  NnParams v;
  long t = 0;

  static AdamState for_shape(const NnParams& p) {
    const auto h = static_cast<int>(p.W1.rows()), d = static_cast<int>(p.W1.cols());
    return {NnParams::zeros(d, h), NnParams::zeros(d, h), 0};
  }
};

inline constexpr double kProbClamp = 1e-12;

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

inline void check_inputs(const NnParams& p, const Eigen::MatrixXd& X) {
  if (X.cols() != p.W1.cols())
    throw ArgumentError("network expects " + std::to_string(p.W1.cols()) + " inputs, got " + std::to_string(X.cols()));
}

struct ForwardCache {
  Eigen::MatrixXd pre_hidden;  ///< n x h
  Eigen::MatrixXd hidden;      ///< n x h
  Eigen::VectorXd logit;       ///< n
};

inline ForwardCache forward_cache(const NnParams& p, const Eigen::MatrixXd& X) {
  check_inputs(p, X);
  ForwardCache c;
  c.pre_hidden = (X * p.W1.transpose()).rowwise() + p.b1.transpose();
  c.hidden = c.pre_hidden.cwiseMax(0.0);
  c.logit = (c.hidden * p.w2).array() + p.b2;
  return c;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

inline void check_labels(std::span<const double> y, Eigen::Index rows) {
  if (rows == 0) throw ArgumentError("empty batch");
  if (static_cast<Eigen::Index>(y.size()) != rows) throw ArgumentError("labels/rows mismatch");
}

}  // namespace detail

/// Pre-sigmoid output for each row.
inline Eigen::VectorXd logits(const NnParams& p, const Eigen::MatrixXd& X) { return detail::forward_cache(p, X).logit; }

inline Eigen::VectorXd forward(const NnParams& p, const Eigen::MatrixXd& X) {
  if (!X.allFinite()) throw ArgumentError("forward: non-finite input");
  return logits(p, X).unaryExpr([](double z) { return sigmoid(z); });
}

/// Prob(w = +1) for a single input vector.
inline double probability(const NnParams& p, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::MatrixXd row = x.transpose();
  return forward(p, row)[0];
}

/// Maps w = +1 -> 1, w = -1 -> 0.
inline std::vector<double> to_binary_labels(std::span<const int> signs) {
  std::vector<double> y;
  y.reserve(signs.size());
  for (int s : signs) {
    if (s != 1 && s != -1) throw ArgumentError("labels must be -1 or +1");
    y.push_back(s == 1 ? 1.0 : 0.0);
  }
  return y;
}

/// Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(const NnParams& p, const Eigen::MatrixXd& X, std::span<const double> y) {
  detail::check_labels(y, X.rows());
  const Eigen::VectorXd z = logits(p, X);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double q = detail::clamp_prob(sigmoid(z[i]));
    const double t = y[static_cast<std::size_t>(i)];
    total -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
  }
  return total / static_cast<double>(z.size());
}

/// Exact gradient of bce_loss. Clamped rows contribute nothing; ReLU'(0) = 0.
inline NnGradients gradients(const NnParams& p, const Eigen::MatrixXd& X, std::span<const double> y) {
  detail::check_labels(y, X.rows());
  const auto c = detail::forward_cache(p, X);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  Eigen::VectorXd dz(X.rows());
  for (Eigen::Index i = 0; i < dz.size(); ++i) {
    const double q = sigmoid(c.logit[i]);
    const bool clamped = q < kProbClamp || q > 1.0 - kProbClamp;
    dz[i] = clamped ? 0.0 : (q - y[static_cast<std::size_t>(i)]) * inv_n;
  }
  NnGradients g;
  g.w2 = c.hidden.transpose() * dz;
  g.b2 = dz.sum();
  const Eigen::MatrixXd d_pre =
      (dz * p.w2.transpose()).array() * (c.pre_hidden.array() > 0.0).cast<double>();
  g.W1 = d_pre.transpose() * X;
  g.b1 = d_pre.colwise().sum().transpose();
  return g;
}

/// One bias-corrected Adam update of every parameter.
inline void adam_step(AdamState& state, NnParams& params, const NnGradients& grads, const NnConfig& cfg) {
  if (grads.W1.rows() != params.W1.rows() || grads.W1.cols() != params.W1.cols() ||
      grads.w2.size() != params.w2.size() || grads.b1.size() != params.b1.size())
    throw ArgumentError("adam_step: gradient shape mismatch");
  if (!grads.all_finite()) throw TrainingDiverged("adam_step: non-finite gradient");
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  auto update = [&](auto&& theta, auto&& m, auto&& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const auto m_hat = m / c1;
    const auto v_hat = v / c2;
    theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
  };
  update(params.W1.array(), state.m.W1.array(), state.v.W1.array(), grads.W1.array());
  update(params.b1.array(), state.m.b1.array(), state.v.b1.array(), grads.b1.array());
  update(params.w2.array(), state.m.w2.array(), state.v.w2.array(), grads.w2.array());
  // scalar bias
  state.m.b2 = cfg.beta1 * state.m.b2 + (1.0 - cfg.beta1) * grads.b2;
  state.v.b2 = cfg.beta2 * state.v.b2 + (1.0 - cfg.beta2) * grads.b2 * grads.b2;
  params.b2 -= cfg.learning_rate * (state.m.b2 / c1) / (std::sqrt(state.v.b2 / c2) + cfg.epsilon);
}

/// Glorot-uniform weights, zero biases.
inline NnParams init_params(int inputs, int hidden, Rng& rng) {
  auto p = NnParams::zeros(inputs, hidden);
  const double a1 = std::sqrt(6.0 / (inputs + hidden));
  for (Eigen::Index i = 0; i < p.W1.rows(); ++i)
    for (Eigen::Index j = 0; j < p.W1.cols(); ++j) p.W1(i, j) = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / (hidden + 1));
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2[i] = rng.uniform(-a2, a2);
  return p;
}

/// Fraction of rows where (probability >= 0.5) matches label +1.
inline double accuracy(const NnParams& p, const Eigen::MatrixXd& X, std::span<const int> labels) {
  if (X.rows() == 0) throw ArgumentError("accuracy: empty evaluation set");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) throw ArgumentError("accuracy: labels/rows mismatch");
  const Eigen::VectorXd z = logits(p, X);
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) hit += (z[i] >= 0.0 ? 1 : -1) == labels[static_cast<std::size_t>(i)];
  return static_cast<double>(hit) / static_cast<double>(z.size());
}

inline double accuracy(const NnModel& m, const FeatureMatrix& X) { return accuracy(m.params, X.values, X.labels); }

struct TrainHistoryPoint {
  long iteration;
  double train_loss;
  double val_accuracy;
};

struct TrainResult {
  NnModel model;
  std::vector<TrainHistoryPoint> history;
};

/// Iteration = one Adam step on one mini-batch. Batches walk a seeded
/// permutation of the training rows; a new permutation is drawn when fewer
/// than `batch_size` rows remain.
inline TrainResult train(NnConfig cfg, const FeatureMatrix& train_set, const FeatureMatrix& val_set) {
  const auto n = train_set.rows();
  const auto d = train_set.cols();
  if (cfg.n_inputs == 0) cfg.n_inputs = static_cast<int>(d);
  if (cfg.n_inputs != d) throw ArgumentError("train: n_inputs does not match feature columns");
  if (cfg.hidden_width < 1) throw ArgumentError("train: hidden_width must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ArgumentError("train: learning_rate must be > 0");
  if (cfg.batch_size < 0 || cfg.batch_size > n) throw ArgumentError("train: batch_size must be in [0, n_train]");
  if (cfg.iterations < 0) throw ArgumentError("train: iterations must be >= 0");
  if (val_set.rows() > 0 && val_set.cols() != d) throw ArgumentError("train: validation columns mismatch");
  const auto y = to_binary_labels(train_set.labels);
  if (std::none_of(y.begin(), y.end(), [](double t) { return t == 1.0; }) ||
      std::none_of(y.begin(), y.end(), [](double t) { return t == 0.0; }))
    throw ArgumentError("train: both classes must be present");

  Rng init_rng(stream_seed(cfg.seed, 0));
  Rng batch_rng(stream_seed(cfg.seed, 1));
  TrainResult out;
  out.model.config = cfg;
  out.model.stats = train_set.stats;
  auto& params = out.model.params;
  params = init_params(cfg.n_inputs, cfg.hidden_width, init_rng);
  AdamState adam = AdamState::for_shape(params);

  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size == n;
  const auto bs = full_batch ? n : static_cast<Eigen::Index>(cfg.batch_size);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();
  Eigen::MatrixXd xb(bs, d);
  std::vector<double> yb(static_cast<std::size_t>(bs));

  std::optional<NnParams> best;
  double best_acc = -1.0;
  auto checkpoint = [&](long it) {
    const double loss = bce_loss(params, train_set.values, y);
    if (!std::isfinite(loss)) throw TrainingDiverged("training loss became non-finite at iteration " + std::to_string(it));
    const double acc = val_set.rows() > 0 ? accuracy(params, val_set.values, val_set.labels)
                                          : std::numeric_limits<double>::quiet_NaN();
    out.history.push_back({it, loss, acc});
    if (cfg.keep_best_val && acc > best_acc) best_acc = acc, best = params;
  };

  for (long it = 1; it <= cfg.iterations; ++it) {
    NnGradients g;
    if (full_batch) {
      g = gradients(params, train_set.values, y);
    } else {
      if (cursor + static_cast<std::size_t>(bs) > order.size()) {
        batch_rng.shuffle(std::span<Eigen::Index>(order));
        cursor = 0;
      }
      for (Eigen::Index b = 0; b < bs; ++b) {
        const auto row = order[cursor++];
        xb.row(b) = train_set.values.row(row);
        yb[static_cast<std::size_t>(b)] = y[static_cast<std::size_t>(row)];
      }
      g = gradients(params, xb, yb);
    }
    adam_step(adam, params, g, cfg);
    if (cfg.history_every > 0 && (it % cfg.history_every == 0 || it == cfg.iterations)) checkpoint(it);
  }
  if (cfg.history_every <= 0 || cfg.iterations == 0) checkpoint(cfg.iterations);
  if (!params.all_finite()) throw TrainingDiverged("non-finite parameters after training");
  if (cfg.keep_best_val && best) params = *best;
  return out;
}

/// Mean over rows of |d logit / d x_j|, in the (standardized) input space.
inline Eigen::VectorXd saliency(const NnParams& p, const Eigen::MatrixXd& X) {
  if (X.rows() == 0) throw ArgumentError("saliency: empty input");
  const auto c = detail::forward_cache(p, X);
  const Eigen::MatrixXd gate = (c.pre_hidden.array() > 0.0).cast<double>().matrix() * p.w2.asDiagonal();
  return (gate * p.W1).cwiseAbs().colwise().mean().transpose();
}

inline PredictionSet predict(const NnModel& m, const FeatureMatrix& X) {
  const Eigen::VectorXd prob = forward(m.params, X.values);
  PredictionSet out;
  out.provenance = "nn";
  for (Eigen::Index i = 0; i < prob.size(); ++i)
    out.add({X.row_ids[static_cast<std::size_t>(i)], prob[i] >= 0.5 ? 1 : -1, prob[i]});
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const NnConfig& c) {
  return nlohmann::json{{"n_inputs", c.n_inputs},     {"hidden_width", c.hidden_width}, {"learning_rate", c.learning_rate},
                        {"iterations", c.iterations}, {"batch_size", c.batch_size},     {"beta1", c.beta1},
                        {"beta2", c.beta2},           {"epsilon", c.epsilon},           {"seed", c.seed},
                        {"include_spectral", c.include_spectral},
                        {"history_every", c.history_every},
                        {"keep_best_val", c.keep_best_val}};
}

inline NnConfig nn_config_from_json(const nlohmann::json& j) {
  NnConfig c;
  c.n_inputs = j.value("n_inputs", c.n_inputs);
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  c.include_spectral = j.value("include_spectral", c.include_spectral);
  c.history_every = j.value("history_every", c.history_every);
  c.keep_best_val = j.value("keep_best_val", c.keep_best_val);
  return c;
}

inline nlohmann::json to_json(const NnModel& m) {
  const auto& p = m.params;
  std::vector<double> w1;
  w1.reserve(static_cast<std::size_t>(p.W1.size()));
  for (Eigen::Index i = 0; i < p.W1.rows(); ++i)
    for (Eigen::Index j = 0; j < p.W1.cols(); ++j) w1.push_back(p.W1(i, j));
  nlohmann::json j{{"config", to_json(m.config)},
                   {"feature_spec", to_json(m.feature_spec)},
                   {"hidden_width", p.W1.rows()},
                   {"n_inputs", p.W1.cols()},
                   {"W1", w1},
                   {"b1", std::vector<double>(p.b1.begin(), p.b1.end())},
                   {"W2", std::vector<double>(p.w2.begin(), p.w2.end())},
                   {"b2", p.b2}};
  if (m.stats) j["standardization"] = to_json(*m.stats);
  return j;
}

inline NnModel nn_from_json(const nlohmann::json& j) {
  NnModel m;
  try {
    m.config = nn_config_from_json(j.at("config"));
    m.feature_spec = feature_spec_from_json(j.at("feature_spec"));
    const auto h = j.at("hidden_width").get<Eigen::Index>();
    const auto d = j.at("n_inputs").get<Eigen::Index>();
    const auto w1 = j.at("W1").get<std::vector<double>>();
    const auto b1 = j.at("b1").get<std::vector<double>>();
    const auto w2 = j.at("W2").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w1.size()) != h * d || static_cast<Eigen::Index>(b1.size()) != h ||
        static_cast<Eigen::Index>(w2.size()) != h)
      throw DataError("network weight arrays disagree with declared shape");
    m.params = NnParams::zeros(static_cast<int>(d), static_cast<int>(h));
    for (Eigen::Index i = 0; i < h; ++i)
      for (Eigen::Index k = 0; k < d; ++k) m.params.W1(i, k) = w1[static_cast<std::size_t>(i * d + k)];
    for (Eigen::Index i = 0; i < h; ++i) m.params.b1[i] = b1[static_cast<std::size_t>(i)], m.params.w2[i] = w2[static_cast<std::size_t>(i)];
    m.params.b2 = j.at("b2").get<double>();
    if (j.contains("standardization")) m.stats = standardization_from_json(j["standardization"]);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad network model: ") + e.what());
  }
  if (!m.params.all_finite()) throw DataError("network model has non-finite parameters");
  return m;
}

inline void write_history_csv(const std::vector<TrainHistoryPoint>& h, const std::string& path) {
  auto out = csv::open_for_write(path);
  out << "iteration,train_loss,val_accuracy\n";
  for (const auto& p : h)
    out << p.iteration << ',' << csv::format_double(p.train_loss) << ',' << csv::format_double(p.val_accuracy) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace fricke

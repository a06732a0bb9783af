#pragma once

// Two-class linear discriminant analysis with trace-scaled shrinkage.
//
//   Sigma_g = (1 - g) * S + g * (tr S / d) * I
//   w = Sigma_g^{-1} (mu_pos - mu_neg)
//   b = -1/2 w . (mu_pos + mu_neg) + ln(pi_pos / pi_neg)
//   class +1 iff w . x + b >= 0
//
// S is the pooled within-class covariance with divisor n - 2.

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fricke/error.hpp"
#include "fricke/features.hpp"
#include "fricke/predictions.hpp"

namespace fricke {

struct LdaOptions {
  double gamma = 1e-4;
  /// (pi_pos, pi_neg); empirical class frequencies when absent.
  std::optional<std::pair<double, double>> priors;
  /// Multiply gamma by 10 (capped at 1) until the solve succeeds.
  bool auto_escalate = true;
};

struct LdaModel {
  Eigen::VectorXd mean_pos;
  Eigen::VectorXd mean_neg;
  double gamma = 0.0;
  double prior_pos = 0.5;
  double prior_neg = 0.5;
  Eigen::VectorXd weight;
  double bias = 0.0;
  Eigen::Index n_features = 0;
  /// Cholesky factor of Sigma_g; absent for models loaded from JSON.
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> cov_factor;

  // Feature recipe the model was trained with (used for unseen data).
  FeatureSpec feature_spec;
  std::optional<StandardizationStats> stats;
};

namespace detail {

// LLT succeeds on some numerically singular matrices; also reject tiny pivots.
inline bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if (!diag.allFinite() || diag.minCoeff() <= 0.0) return false;
  const double ratio = diag.minCoeff() / diag.maxCoeff();
  return ratio * ratio > 1e-13;
}

}  // namespace detail

inline LdaModel fit_lda(const Eigen::MatrixXd& X, std::span<const int> labels, const LdaOptions& opts = {}) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ArgumentError("fit_lda: labels/rows mismatch");
  if (n < 2) throw ArgumentError("fit_lda: need at least 2 samples");
  if (!(opts.gamma >= 0.0 && opts.gamma <= 1.0)) throw ArgumentError("fit_lda: gamma must be in [0,1]");

  Eigen::VectorXd sum_pos = Eigen::VectorXd::Zero(d), sum_neg = Eigen::VectorXd::Zero(d);
  Eigen::Index n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == 1) sum_pos += X.row(i).transpose(), ++n_pos;
    else if (y == -1) sum_neg += X.row(i).transpose(), ++n_neg;
    else throw ArgumentError("fit_lda: labels must be -1 or +1");
  }
  if (n_pos == 0 || n_neg == 0) throw ArgumentError("fit_lda: both classes must be present");

  LdaModel m;
  m.n_features = d;
  m.mean_pos = sum_pos / static_cast<double>(n_pos);
  m.mean_neg = sum_neg / static_cast<double>(n_neg);

  Eigen::MatrixXd centered(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    centered.row(i) = X.row(i) - (labels[static_cast<std::size_t>(i)] == 1 ? m.mean_pos : m.mean_neg).transpose();
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
  pooled.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  pooled.triangularView<Eigen::StrictlyUpper>() = pooled.transpose();
  pooled /= static_cast<double>(std::max<Eigen::Index>(n - 2, 1));

  const double avg_var = pooled.trace() / static_cast<double>(d);
  const Eigen::VectorXd delta = m.mean_pos - m.mean_neg;
  double gamma = opts.gamma;
  while (true) {
    Eigen::MatrixXd sigma = (1.0 - gamma) * pooled;
    sigma.diagonal().array() += gamma * avg_var;
    auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(sigma);
    if (detail::factor_ok(*llt)) {
      m.weight = llt->solve(delta);
      m.cov_factor = std::move(llt);
      break;
    }
    if (!opts.auto_escalate || gamma == 0.0 || gamma >= 1.0 || !(avg_var > 0.0)) {
      std::ostringstream msg;
      msg << "pooled covariance is numerically singular at gamma=" << gamma;
      throw SingularCovariance(msg.str(), gamma);
    }
    gamma = std::min(1.0, gamma * 10.0);
  }
  m.gamma = gamma;

  if (opts.priors) {
    const auto [pp, pn] = *opts.priors;
    if (!(pp > 0.0 && pn > 0.0)) throw ArgumentError("fit_lda: priors must be positive");
    m.prior_pos = pp / (pp + pn);
    m.prior_neg = pn / (pp + pn);
  } else {
    m.prior_pos = static_cast<double>(n_pos) / static_cast<double>(n);
    m.prior_neg = static_cast<double>(n_neg) / static_cast<double>(n);
  }
  m.bias = -0.5 * m.weight.dot(m.mean_pos + m.mean_neg) + std::log(m.prior_pos / m.prior_neg);
  if (!m.weight.allFinite() || !std::isfinite(m.bias)) throw SingularCovariance("non-finite LDA weights", gamma);
  return m;
}

inline LdaModel fit_lda(const FeatureMatrix& X, const LdaOptions& opts = {}) {
  auto m = fit_lda(X.values, X.labels, opts);
  m.stats = X.stats;
  return m;
}

/// w . x + b; positive (or zero) means class +1.
inline double decision(const LdaModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != m.n_features)
    throw ArgumentError("decision: expected " + std::to_string(m.n_features) + " features, got " +
                        std::to_string(x.size()));
  return m.weight.dot(x) + m.bias;
}

/// Scores for every row of X.
inline Eigen::VectorXd decision_scores(const LdaModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.n_features)
    throw ArgumentError("decision: expected " + std::to_string(m.n_features) + " features, got " +
                        std::to_string(X.cols()));
  return (X * m.weight).array() + m.bias;
}

inline int sign_of_score(double score) { return score >= 0.0 ? 1 : -1; }

inline PredictionSet predict(const LdaModel& m, const FeatureMatrix& X) {
  const Eigen::VectorXd s = decision_scores(m, X.values);
  PredictionSet out;
  out.provenance = "lda";
  for (Eigen::Index i = 0; i < s.size(); ++i)
    out.add({X.row_ids[static_cast<std::size_t>(i)], sign_of_score(s[i]), s[i]});
  return out;
}

/// Fraction of rows whose predicted sign matches the label.
inline double accuracy(const LdaModel& m, const Eigen::MatrixXd& X, std::span<const int> labels) {
  if (X.rows() == 0) throw ArgumentError("accuracy: empty evaluation set");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) throw ArgumentError("accuracy: labels/rows mismatch");
  const Eigen::VectorXd s = decision_scores(m, X);
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 1 && y != -1) throw ArgumentError("accuracy: labels must be -1 or +1");
    hit += sign_of_score(s[i]) == y;
  }
  return static_cast<double>(hit) / static_cast<double>(s.size());
}

inline double accuracy(const LdaModel& m, const FeatureMatrix& X) { return accuracy(m, X.values, X.labels); }

// ---------------------------------------------------------------------------
// Persistence

namespace detail {
inline std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }
inline Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace detail

inline nlohmann::json to_json(const LdaModel& m) {
  nlohmann::json j{{"gamma", m.gamma},
                   {"priors", {m.prior_pos, m.prior_neg}},
                   {"mean_pos", detail::to_vec(m.mean_pos)},
                   {"mean_neg", detail::to_vec(m.mean_neg)},
                   {"weight", detail::to_vec(m.weight)},
                   {"bias", m.bias},
                   {"n_features", m.n_features},
                   {"feature_spec", to_json(m.feature_spec)}};
  if (m.stats) j["standardization"] = to_json(*m.stats);
  return j;
}

inline LdaModel lda_from_json(const nlohmann::json& j) {
  LdaModel m;
  try {
    m.gamma = j.at("gamma").get<double>();
    const auto priors = j.at("priors").get<std::vector<double>>();
    if (priors.size() != 2) throw DataError("LDA priors must have two entries");
    m.prior_pos = priors[0];
    m.prior_neg = priors[1];
    m.mean_pos = detail::from_vec(j.at("mean_pos").get<std::vector<double>>());
    m.mean_neg = detail::from_vec(j.at("mean_neg").get<std::vector<double>>());
    m.weight = detail::from_vec(j.at("weight").get<std::vector<double>>());
    m.bias = j.at("bias").get<double>();
    m.n_features = j.at("n_features").get<Eigen::Index>();
    m.feature_spec = feature_spec_from_json(j.at("feature_spec"));
    if (j.contains("standardization")) m.stats = standardization_from_json(j["standardization"]);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad LDA model: ") + e.what());
  }
  if (m.weight.size() != m.n_features || m.mean_pos.size() != m.n_features || m.mean_neg.size() != m.n_features)
    throw DataError("LDA model vector lengths disagree with n_features");
  return m;
}

}  // namespace fricke

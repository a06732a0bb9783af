#pragma once

// Feature construction: coefficient index families, coprime masking,
// parity normalization, the spectral column and standardization.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fricke/csv.hpp"
#include "fricke/dataset.hpp"
#include "fricke/error.hpp"
#include "fricke/primes.hpp"

namespace fricke {

enum class IndexFamily { AllN, Primes };

/// Declarative feature recipe.
///
/// `AllN` selects a_1..a_{max_n}; `Primes` selects a_p for primes p < bound.
/// A nonzero `limit` keeps only the first `limit` indices of the family.
struct FeatureSpec {
  IndexFamily index_set = IndexFamily::AllN;
  int max_n = kCoefficientCount;
  int bound = kCoefficientCount;
  int limit = 0;
  bool masked = false;
  bool parity_normalize = false;
  bool include_spectral = false;
  bool standardize = false;

  static FeatureSpec all_n(int max_n = kCoefficientCount) {
    FeatureSpec s;
    s.index_set = IndexFamily::AllN;
    s.max_n = max_n;
    return s;
  }
  static FeatureSpec primes(int bound = kCoefficientCount) {
    FeatureSpec s;
    s.index_set = IndexFamily::Primes;
    s.bound = bound;
    return s;
  }

  /// Named families: "an", "aprime" (masked a_n), "ap", "apprime" (masked a_p),
  /// all parity-normalized.
  static FeatureSpec preset(const std::string& name) {
    FeatureSpec s;
    if (name == "an") s = all_n();
    else if (name == "aprime") s = all_n().with_mask();
    else if (name == "ap") s = primes();
    else if (name == "apprime") s = primes().with_mask();
    else throw ArgumentError("unknown feature family '" + name + "' (expected an|aprime|ap|apprime)");
    s.parity_normalize = true;
    return s;
  }

  FeatureSpec with_mask(bool on = true) const {
    auto s = *this;
    s.masked = on;
    return s;
  }

  /// Size of the index family before `limit` is applied.
  std::size_t family_size() const {
    if (index_set == IndexFamily::AllN) return static_cast<std::size_t>(max_n);
    return primes_below(bound).size();
  }

  std::vector<int> indices() const {
    if (max_n < 1 || max_n > kCoefficientCount) throw ArgumentError("max_n must be in [1, 1000]");
    if (bound < 2 || bound > kCoefficientCount) throw ArgumentError("bound must be in [2, 1000]");
    if (limit < 0) throw ArgumentError("limit must be nonnegative");
    std::vector<int> idx;
    if (index_set == IndexFamily::AllN) {
      for (int n = 1; n <= max_n; ++n) idx.push_back(n);
    } else {
      idx = primes_below(bound);
    }
    if (limit > 0) {
      if (static_cast<std::size_t>(limit) > idx.size())
        throw ArgumentError("feature count " + std::to_string(limit) + " exceeds family size " +
                            std::to_string(idx.size()));
      idx.resize(static_cast<std::size_t>(limit));
    }
    return idx;
  }

  std::size_t n_columns() const { return indices().size() + (include_spectral ? 1 : 0); }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (int n : indices()) names.push_back("a_" + std::to_string(n));
    if (include_spectral) names.emplace_back("R");
    return names;
  }

  bool operator==(const FeatureSpec&) const = default;
};

inline nlohmann::json to_json(const FeatureSpec& s) {
  return nlohmann::json{{"index_set", s.index_set == IndexFamily::AllN ? "all_n" : "primes_below"},
                        {"max_n", s.max_n},
                        {"bound", s.bound},
                        {"limit", s.limit},
                        {"masked", s.masked},
                        {"parity_normalize", s.parity_normalize},
                        {"include_spectral", s.include_spectral},
                        {"standardize", s.standardize}};
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
  FeatureSpec s;
  try {
    const auto kind = j.value("index_set", std::string("all_n"));
    if (kind == "all_n") {
      s.index_set = IndexFamily::AllN;
    } else if (kind == "primes_below") {
      s.index_set = IndexFamily::Primes;
    } else {
      throw DataError("unknown index_set '" + kind + "'");
    }
    s.max_n = j.value("max_n", kCoefficientCount);
    s.bound = j.value("bound", kCoefficientCount);
    s.limit = j.value("limit", 0);
    s.masked = j.value("masked", false);
    s.parity_normalize = j.value("parity_normalize", false);
    s.include_spectral = j.value("include_spectral", false);
    s.standardize = j.value("standardize", false);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad feature spec: ") + e.what());
  }
  s.indices();  // range check
  return s;
}

/// Per-column affine rescaling fitted on training rows.
struct StandardizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  ///< population std, floored to 1 for degenerate columns

  Eigen::Index size() const { return mean.size(); }
};

inline constexpr double kDegenerateStd = 1e-12;

inline nlohmann::json to_json(const StandardizationStats& s) {
  return nlohmann::json{{"mean", std::vector<double>(s.mean.begin(), s.mean.end())},
                        {"scale", std::vector<double>(s.scale.begin(), s.scale.end())}};
}

inline StandardizationStats standardization_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != scale.size()) throw DataError("standardization mean/scale length mismatch");
  StandardizationStats s;
  s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  if ((s.scale.array() <= 0.0).any()) throw DataError("standardization scale must be positive");
  return s;
}

/// Dense design matrix with aligned labels (-1, +1, or 0 for unknown).
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<int> labels;
  std::vector<std::string> row_ids;
  std::vector<std::string> column_names;
  std::optional<StandardizationStats> stats;  ///< set when values are standardized

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// a'_n: a_n where gcd(n, N) = 1, else 0.
inline std::vector<double> mask_coprime(const MaassFormRecord& r) {
  std::vector<double> out = r.coefficients;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!coprime(static_cast<int>(i + 1), r.level)) out[i] = 0.0;
  return out;
}

/// Multiplies the first `coefficient_cols` columns of row i by (-1)^parity[i].
/// Self-inverse.
inline void flip_row_signs(Eigen::MatrixXd& values, std::span<const int> parity, Eigen::Index coefficient_cols) {
  if (static_cast<Eigen::Index>(parity.size()) != values.rows())
    throw ArgumentError("flip_row_signs: parity length does not match rows");
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    if (parity[static_cast<std::size_t>(i)] == 1) values.row(i).head(coefficient_cols) *= -1.0;
}

inline StandardizationStats fit_standardization(const Eigen::MatrixXd& values) {
  if (values.rows() < 2) throw ArgumentError("fit_standardization: need at least 2 rows");
  StandardizationStats s;
  s.mean = values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = values.rowwise() - s.mean.transpose();
  s.scale = (centered.colwise().squaredNorm().transpose() / static_cast<double>(values.rows())).cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale[j] >= kDegenerateStd)) s.scale[j] = 1.0;
  return s;
}

inline StandardizationStats fit_standardization(const FeatureMatrix& m) { return fit_standardization(m.values); }

inline void apply_standardization(Eigen::MatrixXd& values, const StandardizationStats& s) {
  if (s.size() != values.cols())
    throw ArgumentError("standardization stats have " + std::to_string(s.size()) + " columns, matrix has " +
                        std::to_string(values.cols()));
  values = (values.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array();
}

/// Builds the design matrix. Column order: ascending index, then R.
/// Masking precedes parity normalization; standardization comes last and
/// uses `stats` when given, otherwise stats fitted on this matrix.
inline FeatureMatrix build_features(const Dataset& ds, const FeatureSpec& spec,
                                    const std::optional<StandardizationStats>& stats = std::nullopt) {
  const auto idx = spec.indices();
  const auto n_coef = static_cast<Eigen::Index>(idx.size());
  FeatureMatrix m;
  m.column_names = spec.column_names();
  m.values.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(spec.n_columns()));
  std::vector<int> parity;
  parity.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < n_coef; ++j) {
      const int n = idx[static_cast<std::size_t>(j)];
      m.values(row, j) = (spec.masked && !coprime(n, r.level)) ? 0.0 : r.a(n);
    }
    if (spec.include_spectral) m.values(row, n_coef) = r.spectral_parameter;
    m.labels.push_back(r.fricke_sign);
    m.row_ids.push_back(r.label);
    parity.push_back(r.parity);
  }
  if (spec.parity_normalize) flip_row_signs(m.values, parity, n_coef);
  if (spec.standardize) {
    auto s = stats ? *stats : fit_standardization(m.values);
    apply_standardization(m.values, s);
    m.stats = std::move(s);
  }
  if (!m.values.allFinite()) throw DataError("build_features: non-finite feature value");
  return m;
}

struct IndexSpread {
  int n;
  double stddev;
};

/// Population standard deviation of a_n across the dataset, per index.
inline std::vector<IndexSpread> coefficient_variances(const Dataset& ds, std::span<const int> indices) {
  if (ds.empty()) throw ArgumentError("coefficient_variances: empty dataset");
  std::vector<IndexSpread> out;
  const double count = static_cast<double>(ds.size());
  for (int n : indices) {
    double mean = 0.0;
    for (const auto& r : ds.records) mean += r.a(n);
    mean /= count;
    double ss = 0.0;
    for (const auto& r : ds.records) ss += (r.a(n) - mean) * (r.a(n) - mean);
    out.push_back({n, std::sqrt(ss / count)});
  }
  return out;
}

inline void write_csv(const FeatureMatrix& m, const std::string& path) {
  auto out = csv::open_for_write(path);
  out << csv::join(m.column_names) << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << csv::format_double(m.values(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace fricke

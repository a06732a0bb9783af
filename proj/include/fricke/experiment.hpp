#pragma once

// End-to-end experiments: parity-restricted LDA / network runs, feature-count
// sweeps, prediction of unknown signs, and report serialization.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fricke/dataset.hpp"
#include "fricke/error.hpp"
#include "fricke/features.hpp"
#include "fricke/lda.hpp"
#include "fricke/nn.hpp"
#include "fricke/predictions.hpp"

namespace fricke {

enum class ParityFilter { All, Even, Odd };

inline ParityFilter parse_parity_filter(const std::string& s) {
  if (s == "all") return ParityFilter::All;
  if (s == "even") return ParityFilter::Even;
  if (s == "odd") return ParityFilter::Odd;
  throw ArgumentError("parity filter must be all|even|odd, got '" + s + "'");
}

inline const char* to_string(ParityFilter p) {
  switch (p) {
    case ParityFilter::All: return "all";
    case ParityFilter::Even: return "even";
    case ParityFilter::Odd: return "odd";
  }
  return "?";
}

inline bool accepts(ParityFilter f, const MaassFormRecord& r) {
  return f == ParityFilter::All || (f == ParityFilter::Even) == r.is_even();
}

inline Dataset filter_parity(const Dataset& ds, ParityFilter f) {
  return filter(ds, [f](const MaassFormRecord& r) { return accepts(f, r); });
}

/// Default network features: (a_2, a_3, ..., a_997, R), parity-normalized and standardized.
inline FeatureSpec nn_feature_spec(bool include_spectral = true) {
  auto s = FeatureSpec::preset("ap");
  s.include_spectral = include_spectral;
  s.standardize = true;
  return s;
}

/// Splits the labeled forms of `ds` and then restricts each part to `parity`.
/// Splitting before filtering keeps the even/odd runs on the same partition
/// as the all-parity run.
inline DatasetSplit prepare_split(const Dataset& ds, ParityFilter parity, const SplitSpec& split_spec) {
  auto parts = split(labeled_only(ds), split_spec);
  parts.train = filter_parity(parts.train, parity);
  parts.val = filter_parity(parts.val, parity);
  parts.test = filter_parity(parts.test, parity);
  for (const auto* part : {&parts.train, &parts.val, &parts.test})
    if (part->empty()) throw ArgumentError(std::string("no labeled forms left after ") + to_string(parity) + " filter");
  const auto c = counts(parts.train);
  if (c.row_total(1) == 0 || c.row_total(-1) == 0)
    throw ArgumentError(std::string("a Fricke-sign class is empty after ") + to_string(parity) + " filter");
  return parts;
}

struct ExperimentReport {
  std::string method;
  FeatureSpec feature_spec;
  ParityFilter parity = ParityFilter::All;
  SplitSpec split;
  SplitSizes sizes;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  nlohmann::json method_params;
  double wall_time_s = 0.0;
};

/// `include_wall_time = false` gives byte-reproducible output.
inline nlohmann::json to_json(const ExperimentReport& r, bool include_wall_time = true) {
  nlohmann::json j{{"method", r.method},
                   {"feature_spec", to_json(r.feature_spec)},
                   {"parity", to_string(r.parity)},
                   {"seed", r.split.seed},
                   {"split",
                    {{"test_fraction", r.split.test_fraction},
                     {"val_fraction", r.split.val_fraction},
                     {"stratify_by_sign", r.split.stratify_by_sign}}},
                   {"split_sizes", {{"train", r.sizes.train}, {"val", r.sizes.val}, {"test", r.sizes.test}}},
                   {"train_accuracy", r.train_accuracy},
                   {"val_accuracy", r.val_accuracy},
                   {"test_accuracy", r.test_accuracy},
                   {"method_params", r.method_params}};
  if (include_wall_time) j["wall_time_s"] = r.wall_time_s;
  return j;
}

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// LDA

struct LdaExperiment {
  ExperimentReport report;
  LdaModel model;
  PredictionSet test_predictions;
};

inline LdaExperiment run_lda_experiment(const Dataset& ds, const FeatureSpec& spec, ParityFilter parity,
                                        const SplitSpec& split_spec, const LdaOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto parts = prepare_split(ds, parity, split_spec);
  const auto train_x = build_features(parts.train, spec);
  const auto val_x = build_features(parts.val, spec, train_x.stats);
  const auto test_x = build_features(parts.test, spec, train_x.stats);

  LdaExperiment out;
  out.model = fit_lda(train_x, opts);
  out.model.feature_spec = spec;
  out.test_predictions = predict(out.model, test_x);
  out.test_predictions.provenance = "lda";

  auto& r = out.report;
  r.method = "lda";
  r.feature_spec = spec;
  r.parity = parity;
  r.split = split_spec;
  r.sizes = {parts.train.size(), parts.val.size(), parts.test.size()};
  r.train_accuracy = accuracy(out.model, train_x);
  r.val_accuracy = accuracy(out.model, val_x);
  r.test_accuracy = accuracy(out.model, test_x);
  r.method_params = {{"gamma_requested", opts.gamma},
                     {"gamma", out.model.gamma},
                     {"priors", {out.model.prior_pos, out.model.prior_neg}}};
  r.wall_time_s = detail::seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Neural network

struct NnExperiment {
  ExperimentReport report;
  TrainResult trained;
  PredictionSet test_predictions;
};

inline NnExperiment run_nn_experiment(const Dataset& ds, const FeatureSpec& spec, const NnConfig& config,
                                      ParityFilter parity, const SplitSpec& split_spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto parts = prepare_split(ds, parity, split_spec);
  const auto train_x = build_features(parts.train, spec);
  const auto val_x = build_features(parts.val, spec, train_x.stats);
  const auto test_x = build_features(parts.test, spec, train_x.stats);

  NnConfig cfg = config;
  cfg.n_inputs = static_cast<int>(train_x.cols());
  cfg.include_spectral = spec.include_spectral;
  if (cfg.batch_size > train_x.rows()) cfg.batch_size = 0;

  NnExperiment out;
  out.trained = train(cfg, train_x, val_x);
  auto& model = out.trained.model;
  model.feature_spec = spec;
  out.test_predictions = predict(model, test_x);

  auto& r = out.report;
  r.method = "nn";
  r.feature_spec = spec;
  r.parity = parity;
  r.split = split_spec;
  r.sizes = {parts.train.size(), parts.val.size(), parts.test.size()};
  r.train_accuracy = accuracy(model, train_x);
  r.val_accuracy = accuracy(model, val_x);
  r.test_accuracy = accuracy(model, test_x);
  r.method_params = to_json(cfg);
  r.method_params["saliency_method"] = "mean |d logit / d x_j| over rows";
  r.wall_time_s = detail::seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

enum class SweepMethod { Lda, Nn };

struct SweepSpec {
  SweepMethod method = SweepMethod::Lda;
  FeatureSpec base;  ///< `limit` is overridden per point
  std::vector<int> counts;
  ParityFilter parity = ParityFilter::All;
  SplitSpec split;
  LdaOptions lda;
  NnConfig nn;
  unsigned threads = 1;
};

struct SweepPoint {
  int count;
  double val_accuracy;
};

inline std::vector<int> default_sweep_counts(IndexFamily family) {
  if (family == IndexFamily::Primes) return {1, 2, 5, 10, 25, 50, 100, 168};
  return {10, 50, 100, 250, 500, 1000};
}

/// Accuracy on the validation split using the first k features of the family,
/// for each k in `counts`. Every point uses the same split and seeds, so each
/// equals a standalone run with that k.
inline std::vector<SweepPoint> feature_count_sweep(const Dataset& ds, const SweepSpec& spec) {
  const auto family = spec.base.family_size();
  for (std::size_t i = 0; i < spec.counts.size(); ++i) {
    if (spec.counts[i] < 1 || static_cast<std::size_t>(spec.counts[i]) > family)
      throw ArgumentError("sweep count " + std::to_string(spec.counts[i]) + " outside [1, " + std::to_string(family) +
                          "]");
    if (i && spec.counts[i] <= spec.counts[i - 1]) throw ArgumentError("sweep counts must be ascending");
  }
  std::vector<SweepPoint> out(spec.counts.size());
  parallel_for(spec.counts.size(), spec.threads, [&](std::size_t i) {
    auto fs = spec.base;
    fs.limit = spec.counts[i];
    const double acc = spec.method == SweepMethod::Lda
                           ? run_lda_experiment(ds, fs, spec.parity, spec.split, spec.lda).report.val_accuracy
                           : run_nn_experiment(ds, fs, spec.nn, spec.parity, spec.split).report.val_accuracy;
    out[i] = {spec.counts[i], acc};
  });
  return out;
}

inline void write_sweep_csv(const std::vector<SweepPoint>& pts, const std::string& path) {
  auto out = csv::open_for_write(path);
  out << "count,val_accuracy\n";
  for (const auto& p : pts) out << p.count << ',' << csv::format_double(p.val_accuracy) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Unknown-sign prediction

namespace detail {
template <typename Model>
PredictionSet predict_unknown_impl(const Model& model, const Dataset& ds, Eigen::Index n_inputs, const char* method) {
  const auto unknown = unknown_only(ds);
  PredictionSet out;
  out.provenance = method;
  if (unknown.empty()) return out;
  const auto& spec = model.feature_spec;
  if (spec.standardize && !model.stats) throw DataError("model is missing standardization statistics");
  if (static_cast<Eigen::Index>(spec.n_columns()) != n_inputs)
    throw DataError("model feature spec yields " + std::to_string(spec.n_columns()) + " columns, model expects " +
                    std::to_string(n_inputs));
  const auto x = build_features(unknown, spec, model.stats);
  out = predict(model, x);
  out.provenance = method;
  return out;
}
}  // namespace detail

/// One prediction per record with unknown Fricke sign, in dataset order.
inline PredictionSet predict_unknown(const LdaModel& model, const Dataset& ds) {
  return detail::predict_unknown_impl(model, ds, model.n_features, "lda");
}

inline PredictionSet predict_unknown(const NnModel& model, const Dataset& ds) {
  return detail::predict_unknown_impl(model, ds, model.n_inputs(), "nn");
}

}  // namespace fricke

#pragma once

// Per-form sign predictions, external heuristic labels, and agreement scoring.

#include <string>
#include <unordered_map>
#include <vector>

#include "fricke/csv.hpp"
#include "fricke/error.hpp"

namespace fricke {

struct Prediction {
  std::string label;
  int sign = 1;        ///< -1 or +1
  double score = 0.0;  ///< LDA discriminant or NN probability of +1
};

/// Ordered predictions with unique labels.
class PredictionSet {
 public:
  std::string provenance;

  void add(Prediction p) {
    if (p.sign != 1 && p.sign != -1) throw ArgumentError("prediction sign must be -1 or +1");
    if (!index_.emplace(p.label, entries_.size()).second)
      throw ArgumentError("duplicate prediction label '" + p.label + "'");
    entries_.push_back(std::move(p));
  }

  const std::vector<Prediction>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const Prediction* find(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

 private:
  std::vector<Prediction> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Externally supplied "probably correct" signs for a subset of forms.
struct HeuristicLabels {
  std::unordered_map<std::string, int> signs;
  std::string source;

  void add(const std::string& label, int sign) {
    if (sign != 1 && sign != -1) throw DataError("heuristic sign for '" + label + "' must be -1 or +1");
    if (!signs.emplace(label, sign).second) throw DataError("duplicate heuristic label '" + label + "'");
  }
};

struct Agreement {
  double percent = 0.0;
  std::size_t n_common = 0;
  std::size_t n_agree = 0;
};

namespace detail {

inline int sign_of(const PredictionSet& s, const std::string& label, bool& found) {
  const auto* p = s.find(label);
  found = p != nullptr;
  return found ? p->sign : 0;
}

inline int sign_of(const HeuristicLabels& s, const std::string& label, bool& found) {
  auto it = s.signs.find(label);
  found = it != s.signs.end();
  return found ? it->second : 0;
}

}  // namespace detail

/// Agreement over the labels present in both sets.
template <typename Other>
Agreement agreement(const PredictionSet& a, const Other& b) {
  Agreement out;
  for (const auto& p : a.entries()) {
    bool found = false;
    const int other = detail::sign_of(b, p.label, found);
    if (!found) continue;
    ++out.n_common;
    if (other == p.sign) ++out.n_agree;
  }
  if (out.n_common == 0) throw DataError("agreement: the two label sets do not overlap");
  out.percent = 100.0 * static_cast<double>(out.n_agree) / static_cast<double>(out.n_common);
  return out;
}

inline void write_csv(const PredictionSet& s, const std::string& path) {
  auto out = csv::open_for_write(path);
  out << "label,predicted_sign,score\n";
  for (const auto& p : s.entries())
    out << csv::escape(p.label) << ',' << p.sign << ',' << csv::format_double(p.score) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline PredictionSet read_predictions_csv(const std::string& path) {
  const auto t = csv::read(path);
  const auto c_label = t.column("label");
  const auto c_sign = t.column("predicted_sign");
  const auto c_score = t.column("score");
  PredictionSet s;
  s.provenance = path;
  for (const auto& row : t.rows) {
    const double sign = csv::parse_double(row[c_sign]);
    if (sign != 1.0 && sign != -1.0) throw DataError(path + ": predicted_sign must be -1 or 1");
    try {
      s.add({row[c_label], static_cast<int>(sign), csv::parse_double(row[c_score])});
    } catch (const ArgumentError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  return s;
}

/// CSV with columns label, fricke_sign.
inline HeuristicLabels read_heuristic_csv(const std::string& path) {
  const auto t = csv::read(path);
  const auto c_label = t.column("label");
  const auto c_sign = t.column("fricke_sign");
  HeuristicLabels h;
  h.source = path;
  for (const auto& row : t.rows) {
    const double sign = csv::parse_double(row[c_sign]);
    h.add(row[c_label], sign == 1.0 ? 1 : sign == -1.0 ? -1 : 0);
  }
  return h;
}

inline void write_heuristic_csv(const HeuristicLabels& h, const std::vector<std::string>& order,
                                const std::string& path) {
  auto out = csv::open_for_write(path);
  out << "label,fricke_sign\n";
  for (const auto& label : order) out << csv::escape(label) << ',' << h.signs.at(label) << '\n';
}

}  // namespace fricke

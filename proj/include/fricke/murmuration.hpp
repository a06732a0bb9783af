#pragma once

// Class-conditional coefficient averages ("murmurations") and their CSV/SVG output.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fricke/csv.hpp"
#include "fricke/dataset.hpp"
#include "fricke/error.hpp"
#include "fricke/predictions.hpp"
#include "fricke/primes.hpp"

namespace fricke {

/// Sum with a fixed binary reduction tree; result does not depend on threading.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const auto half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct MurmurationRow {
  int p = 0;
  double mean_plus = 0.0;
  double mean_minus = 0.0;
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
};

struct MurmurationTable {
  std::vector<MurmurationRow> rows;
  bool masked = false;
  bool normalized = false;
  std::string parity_filter = "all";
  /// Set when a class had no members; its means are NaN.
  bool empty_plus = false;
  bool empty_minus = false;
};

/// Maps a record to +1, -1, or 0 (excluded from both classes).
using ClassFn = std::function<int(const MaassFormRecord&)>;

inline int by_fricke_sign(const MaassFormRecord& r) { return r.fricke_sign; }

/// Mean over each class of [(-1)^parity] * a_p (or a'_p when masked), for each
/// index in `primes`. An empty class is an error unless `allow_empty_class`.
inline MurmurationTable average_by_class(const Dataset& ds, const ClassFn& class_fn, std::span<const int> primes,
                                         bool normalize, bool masked, bool allow_empty_class = false) {
  for (std::size_t k = 0; k < primes.size(); ++k) {
    if (primes[k] < 1 || primes[k] > kCoefficientCount) throw ArgumentError("average_by_class: index out of range");
    if (k && primes[k] <= primes[k - 1]) throw ArgumentError("average_by_class: indices must increase");
  }
  std::vector<const MaassFormRecord*> plus, minus;
  for (const auto& r : ds.records) {
    const int c = class_fn(r);
    if (c == 1) plus.push_back(&r);
    else if (c == -1) minus.push_back(&r);
  }
  if (!allow_empty_class && (plus.empty() || minus.empty()))
    throw ArgumentError("average_by_class: class " + std::string(plus.empty() ? "+1" : "-1") + " is empty");

  MurmurationTable t;
  t.masked = masked;
  t.normalized = normalize;
  t.empty_plus = plus.empty();
  t.empty_minus = minus.empty();

  std::vector<double> buf;
  auto class_mean = [&](const std::vector<const MaassFormRecord*>& members, int p) {
    if (members.empty()) return std::numeric_limits<double>::quiet_NaN();
    buf.clear();
    for (const auto* r : members) {
      double v = (masked && !coprime(p, r->level)) ? 0.0 : r->a(p);
      if (normalize) v *= r->parity_sign();
      buf.push_back(v);
    }
    return pairwise_sum(buf) / static_cast<double>(members.size());
  };
  for (int p : primes) t.rows.push_back({p, class_mean(plus, p), class_mean(minus, p), plus.size(), minus.size()});
  return t;
}

struct MaskedComparison {
  MurmurationTable raw;
  MurmurationTable masked;

  /// Largest |raw - masked| over both classes and all primes.
  double max_gap() const {
    double gap = 0.0;
    for (std::size_t i = 0; i < raw.rows.size(); ++i) {
      gap = std::max(gap, std::abs(raw.rows[i].mean_plus - masked.rows[i].mean_plus));
      gap = std::max(gap, std::abs(raw.rows[i].mean_minus - masked.rows[i].mean_minus));
    }
    return gap;
  }
};

/// a_p versus a'_p averages over labeled forms, for primes p <= prime_bound.
inline MaskedComparison compare_masked(const Dataset& ds, int prime_bound = 105, bool normalize = true) {
  const auto primes = primes_below(prime_bound + 1);
  return {average_by_class(ds, by_fricke_sign, primes, normalize, false),
          average_by_class(ds, by_fricke_sign, primes, normalize, true)};
}

/// Averages with classes given by predicted signs. Every record must have a
/// prediction; an empty predicted class is flagged rather than an error.
inline MurmurationTable murmuration_of_predictions(const Dataset& ds, const PredictionSet& predictions,
                                                   std::span<const int> primes, bool normalize) {
  for (const auto& r : ds.records)
    if (!predictions.find(r.label)) throw DataError("no prediction for form '" + r.label + "'");
  return average_by_class(
      ds, [&](const MaassFormRecord& r) { return predictions.find(r.label)->sign; }, primes, normalize, false, true);
}

// ---------------------------------------------------------------------------
// Output

inline void write_csv(const MurmurationTable& t, const std::string& path) {
  auto out = csv::open_for_write(path);
  out << "p,mean_plus,mean_minus,n_plus,n_minus\n";
  for (const auto& r : t.rows)
    out << r.p << ',' << csv::format_double(r.mean_plus) << ',' << csv::format_double(r.mean_minus) << ','
        << r.n_plus << ',' << r.n_minus << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline MurmurationTable read_murmuration_csv(const std::string& path) {
  const auto t = csv::read(path);
  const std::array<std::size_t, 5> c{t.column("p"), t.column("mean_plus"), t.column("mean_minus"),
                                     t.column("n_plus"), t.column("n_minus")};
  MurmurationTable out;
  for (const auto& row : t.rows) {
    out.rows.push_back({static_cast<int>(csv::parse_double(row[c[0]])), csv::parse_double(row[c[1]]),
                        csv::parse_double(row[c[2]]), static_cast<std::size_t>(csv::parse_double(row[c[3]])),
                        static_cast<std::size_t>(csv::parse_double(row[c[4]]))});
  }
  return out;
}

inline std::string to_svg(const MurmurationTable& t, const std::string& title = "") {
  if (t.rows.empty()) throw ArgumentError("to_svg: empty table");
  constexpr double W = 900, H = 500, L = 70, R = 150, T = 40, B = 50;
  double xmin = t.rows.front().p, xmax = t.rows.back().p;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& r : t.rows)
    for (double y : {r.mean_plus, r.mean_minus})
      if (std::isfinite(y)) ymin = std::min(ymin, y), ymax = std::max(ymax, y);
  if (!std::isfinite(ymin)) ymin = -1, ymax = 1;
  if (xmax == xmin) xmin -= 1, xmax += 1;
  if (ymax == ymin) ymin -= 1, ymax += 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad, ymax += pad;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream o;
  o.precision(6);
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  if (ymin < 0 && ymax > 0)
    o << "<line x1=\"" << L << "\" y1=\"" << sy(0) << "\" x2=\"" << W - R << "\" y2=\"" << sy(0)
      << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4,3\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + k * (xmax - xmin) / 4, yv = ymin + k * (ymax - ymin) / 4;
    o << "<text x=\"" << sx(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << std::lround(xv) << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"13\">p</text>\n"
    << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
    << (T + H - B) / 2 << ")\">" << (t.normalized ? "mean (-1)^parity a_p" : "mean a_p") << "</text>\n";

  const std::array<std::pair<const char*, const char*>, 2> series{{{"#1f5fbf", "w = +1"}, {"#c0392b", "w = -1"}}};
  for (int s = 0; s < 2; ++s) {
    o << "<g fill=\"" << series[s].first << "\">\n";
    for (const auto& r : t.rows) {
      const double y = s == 0 ? r.mean_plus : r.mean_minus;
      if (std::isfinite(y)) o << "<circle cx=\"" << sx(r.p) << "\" cy=\"" << sy(y) << "\" r=\"2.5\"/>\n";
    }
    o << "</g>\n"
      << "<circle cx=\"" << W - R + 20 << "\" cy=\"" << T + 10 + 20 * s << "\" r=\"4\" fill=\"" << series[s].first
      << "\"/>\n"
      << "<text x=\"" << W - R + 30 << "\" y=\"" << T + 14 + 20 * s << "\" font-size=\"12\">" << series[s].second
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Writes `<stem>.csv` and `<stem>.svg`.
inline void render(const MurmurationTable& t, const std::string& stem, const std::string& title = "") {
  write_csv(t, stem + ".csv");
  auto out = csv::open_for_write(stem + ".svg");
  out << to_svg(t, title);
  if (!out) throw DataError("write failed for '" + stem + ".svg'");
}

}  // namespace fricke

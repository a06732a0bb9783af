#pragma once

// Maass-form records: JSONL ingestion, arithmetic validation, class counts,
// seeded splitting, filtering and a synthetic generator used as a test oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "fricke/error.hpp"
#include "fricke/primes.hpp"
#include "fricke/rng.hpp"

namespace fricke {

inline constexpr int kCoefficientCount = 1000;

/// One weight-0, trivial-character Maass newform.
///
/// `coefficients[i]` holds a_{i+1}, so a_n is `coefficients[n - 1]` for
/// n = 1..1000. A Fricke sign of 0 means the sign is not known.
struct MaassFormRecord {
  std::string label;
  int level = 1;
  double spectral_parameter = 1.0;
  int parity = 0;
  int fricke_sign = 0;
  std::vector<double> coefficients;

  double a(int n) const { return coefficients.at(static_cast<std::size_t>(n - 1)); }
  double& a(int n) { return coefficients.at(static_cast<std::size_t>(n - 1)); }
  bool is_even() const { return parity == 0; }
  bool has_known_sign() const { return fricke_sign != 0; }
  /// (-1)^parity
  double parity_sign() const { return parity == 0 ? 1.0 : -1.0; }

  bool operator==(const MaassFormRecord&) const = default;
};

struct Dataset {
  std::vector<MaassFormRecord> records;
  std::string provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  auto begin() const { return records.begin(); }
  auto end() const { return records.end(); }
};

// ---------------------------------------------------------------------------
// JSONL interchange

inline nlohmann::json to_json(const MaassFormRecord& r) {
  return nlohmann::json{{"label", r.label},
                        {"level", r.level},
                        {"spectral_parameter", r.spectral_parameter},
                        {"parity", r.parity},
                        {"fricke_sign", r.fricke_sign},
                        {"coefficients", r.coefficients}};
}

namespace detail {

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

template <typename T>
T required_field(const nlohmann::json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(ctx + "missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ctx + "field '" + key + "' has wrong type: " + e.what());
  }
}

}  // namespace detail

/// Parses one JSONL line; structural checks only (ranges, lengths).
inline MaassFormRecord record_from_json(const nlohmann::json& j, const std::string& ctx = "") {
  if (!j.is_object()) throw DataError(ctx + "record is not a JSON object");
  MaassFormRecord r;
  r.label = detail::required_field<std::string>(j, "label", ctx);
  if (!j.contains("level") || !j["level"].is_number_integer())
    throw DataError(ctx + "field 'level' must be an integer");
  r.level = j["level"].get<int>();
  if (r.level < 1) throw DataError(ctx + "level must be a positive integer");
  r.spectral_parameter = detail::required_field<double>(j, "spectral_parameter", ctx);
  if (!(std::isfinite(r.spectral_parameter) && r.spectral_parameter > 0.0))
    throw DataError(ctx + "spectral_parameter must be finite and > 0");
  r.parity = detail::required_field<int>(j, "parity", ctx);
  if (r.parity != 0 && r.parity != 1) throw DataError(ctx + "parity must be 0 or 1");
  r.fricke_sign = detail::required_field<int>(j, "fricke_sign", ctx);
  if (r.fricke_sign < -1 || r.fricke_sign > 1)
    throw DataError(ctx + "fricke_sign must be -1, 0 or 1");
  r.coefficients = detail::required_field<std::vector<double>>(j, "coefficients", ctx);
  if (r.coefficients.size() != static_cast<std::size_t>(kCoefficientCount))
    throw DataError(ctx + "expected " + std::to_string(kCoefficientCount) + " coefficients, got " +
                    std::to_string(r.coefficients.size()));
  return r;
}

inline Dataset parse_jsonl(std::istream& in, const std::string& source = "<stream>") {
  Dataset ds;
  ds.provenance = source;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto ctx = detail::where(source, lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(ctx + "malformed JSON: " + e.what());
    }
    auto rec = record_from_json(j, ctx);
    if (!seen.insert(rec.label).second) throw DataError(ctx + "duplicate label '" + rec.label + "'");
    ds.records.push_back(std::move(rec));
  }
  if (in.bad()) throw DataError(source + ": read error");
  return ds;
}

/// Reads a JSONL dataset, one record per line, in file order.
inline Dataset ingest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_jsonl(in, path);
}

inline void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const auto& r : ds.records) out << to_json(r).dump() << '\n';
}

inline void write_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_jsonl(ds, out);
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  enum class Kind {
    CoefficientCount,
    ParityRange,
    SignRange,
    LevelRange,
    SpectralParameter,
    NonFiniteCoefficient,
    UnknownSignNonzeroCoefficient,
    LocalSignProduct,
  };
  Kind kind;
  std::string message;
};

inline constexpr double kDefaultValidationTol = 1e-6;

/// Product of (-a_p * sqrt(p)) over primes p | N. Only meaningful for
/// squarefree N with known sign, where each factor is the local sign w_p.
inline double local_sign_product(const MaassFormRecord& r) {
  double prod = 1.0;
  for (int p : prime_divisors(r.level)) {
    if (p > kCoefficientCount) return std::nan("");
    prod *= -r.a(p) * std::sqrt(static_cast<double>(p));
  }
  return prod;
}

/// Lists every broken record invariant; an empty result means the record is
/// consistent. Never throws.
inline std::vector<Violation> validate(const MaassFormRecord& r, double tol = kDefaultValidationTol) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  if (r.coefficients.size() != static_cast<std::size_t>(kCoefficientCount)) {
    out.push_back({K::CoefficientCount, "expected 1000 coefficients, got " +
                                            std::to_string(r.coefficients.size())});
  }
  if (r.parity != 0 && r.parity != 1)
    out.push_back({K::ParityRange, "parity " + std::to_string(r.parity) + " not in {0,1}"});
  if (r.fricke_sign < -1 || r.fricke_sign > 1)
    out.push_back({K::SignRange, "fricke_sign " + std::to_string(r.fricke_sign) + " not in {-1,0,1}"});
  if (r.level < 1) out.push_back({K::LevelRange, "level must be positive"});
  if (!(std::isfinite(r.spectral_parameter) && r.spectral_parameter > 0.0))
    out.push_back({K::SpectralParameter, "spectral_parameter must be finite and > 0"});
  if (!out.empty()) return out;  // remaining checks need a well-formed record

  if (!std::all_of(r.coefficients.begin(), r.coefficients.end(), [](double x) { return std::isfinite(x); }))
    out.push_back({K::NonFiniteCoefficient, "non-finite coefficient"});

  if (r.fricke_sign == 0) {
    int first_bad = 0;
    int n_bad = 0;
    for (int n = 1; n <= kCoefficientCount; ++n) {
      if (!coprime(n, r.level) && r.a(n) != 0.0) {
        if (first_bad == 0) first_bad = n;
        ++n_bad;
      }
    }
    if (n_bad > 0) {
      out.push_back({K::UnknownSignNonzeroCoefficient,
                     "unknown sign but " + std::to_string(n_bad) +
                         " coefficient(s) with gcd(n,N)>1 are nonzero (first n=" +
                         std::to_string(first_bad) + ")"});
    }
    return out;
  }

  // No primes divide 1: nothing to check.
  if (r.level == 1 || !is_squarefree(r.level)) return out;
  const auto divisors = prime_divisors(r.level);
  const bool applicable = std::all_of(divisors.begin(), divisors.end(), [&](int p) {
    return p <= kCoefficientCount && r.a(p) != 0.0;
  });
  if (!applicable) return out;
  const double prod = local_sign_product(r);
  if (!(std::abs(prod - r.fricke_sign) < tol)) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "local sign product " << prod << " disagrees with fricke_sign "
        << r.fricke_sign;
    out.push_back({K::LocalSignProduct, msg.str()});
  }
  return out;
}

/// Soft checks that are reported but do not count as violations
/// (currently: a_1 differing from 1).
inline std::vector<std::string> normalization_warnings(const MaassFormRecord& r,
                                                       double tol = kDefaultValidationTol) {
  std::vector<std::string> out;
  if (!r.coefficients.empty() && std::abs(r.coefficients[0] - 1.0) >= tol)
    out.push_back("a_1 != 1 (not Hecke-normalized)");
  return out;
}

// ---------------------------------------------------------------------------
// Counts by Fricke sign x parity

struct SignParityCounts {
  // rows: sign -1, +1, 0; columns: even, odd
  std::array<std::array<std::size_t, 2>, 3> cells{};

  static std::size_t row_of(int sign) {
    switch (sign) {
      case -1: return 0;
      case 1: return 1;
      case 0: return 2;
    }
    throw ArgumentError("fricke sign must be -1, 0 or 1");
  }
  std::size_t cell(int sign, int parity) const { return cells[row_of(sign)].at(parity); }
  std::size_t row_total(int sign) const {
    const auto& row = cells[row_of(sign)];
    return row[0] + row[1];
  }
  std::size_t column_total(int parity) const {
    return cells[0].at(parity) + cells[1].at(parity) + cells[2].at(parity);
  }
  std::size_t total() const { return column_total(0) + column_total(1); }
};

inline SignParityCounts counts(const Dataset& ds) {
  SignParityCounts c;
  for (const auto& r : ds.records) ++c.cells[SignParityCounts::row_of(r.fricke_sign)].at(r.parity);
  return c;
}

// ---------------------------------------------------------------------------
// Filtering and splitting

template <typename Pred>
Dataset filter(const Dataset& ds, Pred&& pred) {
  Dataset out;
  out.provenance = ds.provenance;
  for (const auto& r : ds.records)
    if (pred(r)) out.records.push_back(r);
  return out;
}

inline Dataset labeled_only(const Dataset& ds) {
  return filter(ds, [](const MaassFormRecord& r) { return r.has_known_sign(); });
}

inline Dataset unknown_only(const Dataset& ds) {
  return filter(ds, [](const MaassFormRecord& r) { return !r.has_known_sign(); });
}

struct SplitSpec {
  double test_fraction = 0.2;
  double val_fraction = 0.2;  ///< fraction of the non-test remainder
  std::uint64_t seed = 0;
  bool stratify_by_sign = true;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Train sizes are floored; the held-out parts take the rest
/// (19,993 -> test 3,999, val 3,199, train 12,795).
inline SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  auto frac_ok = [](double f) { return f > 0.0 && f < 1.0; };
  if (!frac_ok(spec.test_fraction) || !frac_ok(spec.val_fraction))
    throw ArgumentError("split fractions must lie strictly between 0 and 1");
  // Slack keeps products like 10 * 0.2 from rounding up past an integer.
  auto held_out = [](std::size_t m, double f) {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(m) * f - 1e-9));
  };
  SplitSizes s;
  s.test = held_out(n, spec.test_fraction);
  s.val = held_out(n - s.test, spec.val_fraction);
  s.train = n - s.test - s.val;
  return s;
}

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

namespace detail {

// Per-class counts for each part. Class k's cumulative count up to part j is
// round(S_j * n_k / n), so each part deviates from proportional by < 1 record.
inline std::vector<std::array<std::size_t, 3>> stratified_part_counts(
    const std::vector<std::size_t>& class_sizes, const SplitSizes& sizes) {
  const std::size_t n = sizes.train + sizes.val + sizes.test;
  const std::array<std::size_t, 3> part{sizes.test, sizes.val, sizes.train};
  const std::array<std::size_t, 3> cumulative{part[0], part[0] + part[1], n};
  std::vector<std::array<std::size_t, 3>> out(class_sizes.size());
  std::array<std::size_t, 3> used_cum{};
  for (std::size_t k = 0; k < class_sizes.size(); ++k) {
    std::array<std::size_t, 3> cum{};
    if (k + 1 == class_sizes.size()) {
      for (int j = 0; j < 3; ++j) cum[j] = cumulative[j] - used_cum[j];
    } else {
      for (int j = 0; j < 3; ++j) {
        const double target = static_cast<double>(cumulative[j]) * static_cast<double>(class_sizes[k]) /
                              static_cast<double>(n);
        cum[j] = static_cast<std::size_t>(std::floor(target + 0.5));
      }
    }
    std::size_t prev = 0;
    for (int j = 0; j < 3; ++j) {
      if (cum[j] < prev || cum[j] > class_sizes[k]) throw ArgumentError("stratified split infeasible");
      out[k][j] = cum[j] - prev;
      prev = cum[j];
      used_cum[j] += cum[j];
    }
    if (cum[2] != class_sizes[k]) throw ArgumentError("stratified split infeasible");
  }
  return out;
}

}  // namespace detail

/// Seeded three-way partition. Each part keeps the input order of its records.
inline DatasetSplit split(const Dataset& ds, const SplitSpec& spec) {
  const auto sizes = split_sizes(ds.size(), spec);
  if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0)
    throw ArgumentError("split would leave an empty part (n=" + std::to_string(ds.size()) + ")");

  Rng rng(spec.seed);
  std::vector<int> part_of(ds.size(), 2);  // 0 test, 1 val, 2 train

  auto assign = [&](std::vector<std::size_t>& idx, const std::array<std::size_t, 3>& per_part) {
    rng.shuffle(std::span<std::size_t>(idx));
    std::size_t pos = 0;
    for (int j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < per_part[j]; ++c) part_of[idx[pos++]] = j;
  };

  if (spec.stratify_by_sign) {
    const std::array<int, 3> signs{-1, 1, 0};
    std::vector<std::vector<std::size_t>> members;
    std::vector<std::size_t> class_sizes;
    for (int s : signs) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.records[i].fricke_sign == s) idx.push_back(i);
      if (idx.empty()) continue;
      class_sizes.push_back(idx.size());
      members.push_back(std::move(idx));
    }
    const auto per_class = detail::stratified_part_counts(class_sizes, sizes);
    for (std::size_t k = 0; k < members.size(); ++k) assign(members[k], per_class[k]);
  } else {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    assign(idx, {sizes.test, sizes.val, sizes.train});
  }

  DatasetSplit out;
  out.train.provenance = out.val.provenance = out.test.provenance = ds.provenance;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& dst = part_of[i] == 0 ? out.test : part_of[i] == 1 ? out.val : out.train;
    dst.records.push_back(ds.records[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

/// Parameters of the synthetic generator.
///
/// Each record gets a latent sign (its Fricke sign when known, otherwise drawn
/// with probability `unknown_plus_fraction` of +1). Coefficients a_n with
/// gcd(n, N) = 1 are Gaussian with standard deviation `noise_sigma`; on
/// `signal_indices` the mean is `signal_strength * (-1)^parity * latent`.
/// a_1 = 1. Arithmetic structure is forced: a_p = -w_p/sqrt(p) for p || N
/// with local signs multiplying to w_N, and a_n = a_p * a_{n/p} for the
/// smallest p | gcd(n, N). Unknown-sign records have a_n = 0 when gcd > 1.
struct GeneratorSpec {
  long long n = 0;
  /// Cell weights, apportioned exactly: (+1 even, +1 odd, -1 even, -1 odd, 0 even, 0 odd).
  std::array<double, 6> class_weights{1, 1, 1, 1, 0, 0};
  std::vector<int> levels{1};
  std::vector<int> signal_indices{2, 3, 5, 7, 11, 13};
  double signal_strength = 0.3;
  double noise_sigma = 0.5;
  double spectral_min = 1.0;
  double spectral_max = 20.0;
  /// Added to R when the latent sign is +1.
  double spectral_shift = 0.0;
  double unknown_plus_fraction = 0.5;
  std::string label_prefix = "syn";
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<int> latent_sign;  ///< aligned with dataset.records
  std::array<std::size_t, 6> cell_counts{};
};

/// Largest-remainder apportionment of `total` items to `weights`.
template <std::size_t K>
std::array<std::size_t, K> apportion(std::size_t total, const std::array<double, K>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::array<std::size_t, K> out{};
  std::array<double, K> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double q = static_cast<double>(total) * weights[k] / sum;
    out[k] = static_cast<std::size_t>(std::floor(q));
    rem[k] = q - std::floor(q);
    assigned += out[k];
  }
  std::array<std::size_t, K> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % K]];
  return out;
}

inline SyntheticDataset synthesize_with_truth(std::uint64_t seed, const GeneratorSpec& spec) {
  if (spec.n < 0) throw ArgumentError("synthesize: n must be nonnegative");
  if (std::any_of(spec.class_weights.begin(), spec.class_weights.end(), [](double w) { return !(w >= 0.0); }) ||
      std::accumulate(spec.class_weights.begin(), spec.class_weights.end(), 0.0) <= 0.0)
    throw ArgumentError("synthesize: class weights must be nonnegative with positive sum");
  if (spec.levels.empty() || std::any_of(spec.levels.begin(), spec.levels.end(), [](int l) { return l < 1; }))
    throw ArgumentError("synthesize: level pool must be nonempty and positive");
  if (!(spec.spectral_min > 0.0 && spec.spectral_max >= spec.spectral_min))
    throw ArgumentError("synthesize: need 0 < spectral_min <= spectral_max");
  if (!(spec.noise_sigma >= 0.0)) throw ArgumentError("synthesize: noise_sigma must be >= 0");
  for (int idx : spec.signal_indices)
    if (idx < 2 || idx > kCoefficientCount) throw ArgumentError("synthesize: signal index out of range");

  SyntheticDataset out;
  out.dataset.provenance = "synthetic(seed=" + std::to_string(seed) + ")";
  const auto n = static_cast<std::size_t>(spec.n);
  out.cell_counts = apportion(n, spec.class_weights);

  std::vector<int> cells;
  cells.reserve(n);
  for (int c = 0; c < 6; ++c) cells.insert(cells.end(), out.cell_counts[c], c);
  Rng rng(seed);
  rng.shuffle(std::span<int>(cells));

  std::vector<bool> is_signal(kCoefficientCount + 1, false);
  for (int idx : spec.signal_indices) is_signal[idx] = true;

  for (std::size_t i = 0; i < n; ++i) {
    static constexpr std::array<int, 6> kSign{1, 1, -1, -1, 0, 0};
    MaassFormRecord r;
    r.label = spec.label_prefix + "." + std::to_string(i);
    r.level = spec.levels[rng.below(spec.levels.size())];
    r.parity = cells[i] % 2;
    r.fricke_sign = kSign[cells[i]];
    const int latent = r.fricke_sign != 0 ? r.fricke_sign : (rng.uniform() < spec.unknown_plus_fraction ? 1 : -1);
    r.spectral_parameter = rng.uniform(spec.spectral_min, spec.spectral_max) + (latent > 0 ? spec.spectral_shift : 0.0);

    const double root_number = r.parity_sign() * latent;
    r.coefficients.assign(kCoefficientCount, 0.0);
    r.a(1) = 1.0;
    for (int m = 2; m <= kCoefficientCount; ++m) {
      const double mean = is_signal[m] ? spec.signal_strength * root_number : 0.0;
      const double draw = rng.normal(mean, spec.noise_sigma);
      if (coprime(m, r.level)) r.a(m) = draw;
    }

    if (r.fricke_sign != 0) {
      const auto divisors = prime_divisors(r.level);
      // Local signs with product w_N; the last one is forced.
      int running = 1;
      for (std::size_t k = 0; k < divisors.size(); ++k) {
        const int p = divisors[k];
        int wp = (k + 1 == divisors.size()) ? r.fricke_sign * running : (rng.uniform() < 0.5 ? 1 : -1);
        running *= wp;
        if (p > kCoefficientCount) continue;
        r.a(p) = (r.level % (p * p) == 0) ? 0.0 : -wp / std::sqrt(static_cast<double>(p));
      }
      for (int m = 2; m <= kCoefficientCount; ++m) {
        if (coprime(m, r.level)) continue;
        const int p = prime_divisors(std::gcd(m, r.level)).front();
        if (m == p) continue;
        r.a(m) = r.a(p) * r.a(m / p);
      }
    }
    out.dataset.records.push_back(std::move(r));
    out.latent_sign.push_back(latent);
  }
  return out;
}

inline Dataset synthesize(std::uint64_t seed, const GeneratorSpec& spec) {
  return synthesize_with_truth(seed, spec).dataset;
}

}  // namespace fricke

// fricke_lab: command-line front end for the Fricke-sign pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fricke/fricke.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace fricke;

constexpr const char* kVersion = "0.3.0";

struct Options {
  std::string config;
  bool deterministic = false;

  std::string input;
  std::string out;
  double tol = kDefaultValidationTol;

  std::string features;  // empty: method default
  std::string parity = "all";
  bool normalize = false;
  int prime_bound = 1000;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  int limit = 0;

  double gamma = 1e-4;
  bool standardize = false;

  int hidden = 32;
  double lr = 1e-3;
  long iters = 40000;
  int batch = 128;
  bool no_spectral = false;
  bool keep_best_val = false;

  std::string method = "lda";
  std::string counts;

  std::string model;
  bool all_records = false;

  std::string a;
  std::string b;
  std::string heuristic;

  std::string run;

  long long n = 1000;
  std::string levels = "1";
  double unknown_weight = 0.0;
  double signal = 0.3;
  double noise = 0.5;
  double spectral_shift = 0.0;
  std::string truth;
};

// ---------------------------------------------------------------------------
// Helpers

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (tok.empty() || used != tok.size()) throw ArgumentError(std::string("bad integer in ") + what + ": '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError(std::string(what) + " must not be empty");
  return out;
}

unsigned worker_count(bool deterministic) {
  if (deterministic) return 1;
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FRICKE_LAB_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
      throw ArgumentError(std::string("FRICKE_LAB_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return n;
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

void write_json(const json& j, const fs::path& p) {
  auto out = csv::open_for_write(p.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + p.string() + "'");
}

/// Output directory plus the bookkeeping for its manifest.
class RunDir {
 public:
  RunDir(const std::string& out, std::uint64_t seed) {
    if (!out.empty()) {
      dir_ = out;
    } else {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::tm tm{};
      localtime_r(&now, &tm);
      std::ostringstream name;
      name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "-seed" << seed;
      dir_ = fs::path("runs") / name.str();
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  std::string file(const std::string& name) {
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
    return (dir_ / name).string();
  }
  const fs::path& dir() const { return dir_; }

  void write_manifest(const std::string& subcommand, const json& config, std::uint64_t seed, bool deterministic,
                      const std::vector<std::string>& inputs) {
    json m{{"tool", "fricke_lab"},
           {"version", kVersion},
           {"subcommand", subcommand},
           {"seed", seed},
           {"deterministic", deterministic},
           {"config", config}};
    json in = json::object();
    for (const auto& p : inputs)
      if (!p.empty()) in[p] = sha256_file(p);
    m["inputs"] = in;
    json art = json::object();
    for (const auto& name : artifacts_) art[name] = sha256_file(dir_ / name);
    m["artifacts"] = art;
    write_json(m, dir_ / "manifest.json");
  }

 private:
  fs::path dir_;
  std::vector<std::string> artifacts_;
};

Dataset load(const Options& o) {
  if (o.input.empty()) throw ArgumentError("--input is required");
  return ingest(o.input);
}

SplitSpec split_spec(const Options& o) {
  SplitSpec s;
  s.seed = o.seed;
  s.test_fraction = o.test_fraction;
  s.val_fraction = o.val_fraction;
  return s;
}

FeatureSpec lda_features(const Options& o) {
  auto s = FeatureSpec::preset(o.features.empty() ? "an" : o.features);
  s.limit = o.limit;
  s.standardize = o.standardize;
  return s;
}

FeatureSpec nn_features(const Options& o) {
  auto s = FeatureSpec::preset(o.features.empty() ? "ap" : o.features);
  s.limit = o.limit;
  s.include_spectral = !o.no_spectral;
  s.standardize = true;
  return s;
}

NnConfig nn_config(const Options& o) {
  NnConfig c;
  c.hidden_width = o.hidden;
  c.learning_rate = o.lr;
  c.iterations = o.iters;
  c.batch_size = o.batch;
  c.seed = o.seed;
  c.include_spectral = !o.no_spectral;
  c.keep_best_val = o.keep_best_val;
  return c;
}

json split_config(const Options& o) {
  return {{"seed", o.seed}, {"test-fraction", o.test_fraction}, {"val-fraction", o.val_fraction}};
}

json lda_config(const Options& o) {
  auto j = split_config(o);
  j.update({{"input", o.input},
            {"features", o.features.empty() ? "an" : o.features},
            {"parity", o.parity},
            {"limit", o.limit},
            {"gamma", o.gamma},
            {"standardize", o.standardize}});
  return j;
}

json nn_json_config(const Options& o) {
  auto j = split_config(o);
  j.update({{"input", o.input},
            {"features", o.features.empty() ? "ap" : o.features},
            {"parity", o.parity},
            {"limit", o.limit},
            {"hidden", o.hidden},
            {"lr", o.lr},
            {"iters", o.iters},
            {"batch", o.batch},
            {"no-spectral", o.no_spectral},
            {"keep-best-val", o.keep_best_val}});
  return j;
}

void print_accuracies(const ExperimentReport& r) {
  std::cout << std::fixed << std::setprecision(4) << r.method << " [" << to_string(r.parity)
            << "] train/val/test sizes " << r.sizes.train << '/' << r.sizes.val << '/' << r.sizes.test
            << "  accuracy train " << r.train_accuracy << "  val " << r.val_accuracy << "  test " << r.test_accuracy
            << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_validate(const Options& o, bool strict_ingest) {
  const auto ds = load(o);
  std::size_t n_violations = 0, bad_records = 0, warnings = 0, shown = 0;
  for (const auto& r : ds.records) {
    const auto v = validate(r, o.tol);
    warnings += normalization_warnings(r, o.tol).size();
    if (v.empty()) continue;
    ++bad_records;
    n_violations += v.size();
    for (const auto& x : v)
      if (shown++ < 20) std::cout << r.label << ": " << x.message << '\n';
  }
  if (shown > 20) std::cout << "... (" << shown - 20 << " more)\n";
  std::cout << ds.size() << " records, " << n_violations << " violations";
  if (n_violations) std::cout << " in " << bad_records << " records";
  if (warnings) std::cout << ", " << warnings << " normalization warnings (a_1 != 1)";
  std::cout << '\n';
  if (strict_ingest && n_violations == 0) {
    const auto c = counts(ds);
    std::cout << "ingested " << ds.size() << " records (" << c.row_total(0) << " with unknown sign)\n";
  }
  return n_violations ? 2 : 0;
}

int cmd_counts(const Options& o) {
  const auto ds = load(o);
  const auto c = counts(ds);
  RunDir run(o.out, o.seed);
  {
    auto out = csv::open_for_write(run.file("counts.csv"));
    out << "fricke_sign,even,odd,total\n";
    for (int s : {1, -1, 0}) out << s << ',' << c.cell(s, 0) << ',' << c.cell(s, 1) << ',' << c.row_total(s) << '\n';
    out << "total," << c.column_total(0) << ',' << c.column_total(1) << ',' << c.total() << '\n';
  }
  run.write_manifest("counts", {{"input", o.input}}, o.seed, o.deterministic, {o.input});
  auto row = [](const char* name, std::size_t e, std::size_t od, std::size_t t) {
    std::cout << std::left << std::setw(10) << name << std::right << std::setw(9) << e << std::setw(9) << od
              << std::setw(9) << t << '\n';
  };
  std::cout << std::left << std::setw(10) << "" << std::right << std::setw(9) << "even" << std::setw(9) << "odd"
            << std::setw(9) << "total" << '\n';
  row("w = +1", c.cell(1, 0), c.cell(1, 1), c.row_total(1));
  row("w = -1", c.cell(-1, 0), c.cell(-1, 1), c.row_total(-1));
  row("unknown", c.cell(0, 0), c.cell(0, 1), c.row_total(0));
  row("total", c.column_total(0), c.column_total(1), c.total());
  return 0;
}

int cmd_murmurate(const Options& o) {
  const auto ds = filter_parity(labeled_only(load(o)), parse_parity_filter(o.parity));
  auto spec = FeatureSpec::preset(o.features.empty() ? "ap" : o.features);
  if (o.prime_bound < 2 || o.prime_bound > kCoefficientCount)
    throw ArgumentError("--prime-bound must be in [2, 1000]");
  std::vector<int> idx;
  if (spec.index_set == IndexFamily::Primes) {
    idx = primes_below(o.prime_bound + 1);
  } else {
    for (int k = 1; k <= o.prime_bound; ++k) idx.push_back(k);
  }
  auto table = average_by_class(ds, by_fricke_sign, idx, o.normalize, spec.masked);
  table.parity_filter = o.parity;

  RunDir run(o.out, o.seed);
  std::ostringstream title;
  title << (spec.masked ? "masked " : "") << "coefficient averages by Fricke sign (parity " << o.parity
        << (o.normalize ? ", normalized" : "") << ")";
  write_csv(table, run.file("murmurations.csv"));
  {
    auto svg = csv::open_for_write(run.file("murmurations.svg"));
    svg << to_svg(table, title.str());
  }
  run.write_manifest("murmurate",
                     {{"input", o.input},
                      {"features", o.features.empty() ? "ap" : o.features},
                      {"parity", o.parity},
                      {"normalize", o.normalize},
                      {"prime-bound", o.prime_bound}},
                     o.seed, o.deterministic, {o.input});
  std::cout << "murmurations over " << ds.size() << " forms (" << table.rows.front().n_plus << " with w = +1, "
            << table.rows.front().n_minus << " with w = -1), " << table.rows.size() << " indices -> "
            << run.dir().string() << '\n';
  return 0;
}

int cmd_lda_train(const Options& o) {
  const auto ds = load(o);
  const auto spec = lda_features(o);
  LdaOptions lo;
  lo.gamma = o.gamma;
  const auto res = run_lda_experiment(ds, spec, parse_parity_filter(o.parity), split_spec(o), lo);

  RunDir run(o.out, o.seed);
  write_json(to_json(res.report, !o.deterministic), run.file("report.json"));
  write_json(to_json(res.model), run.file("model.json"));
  write_csv(res.test_predictions, run.file("test_predictions.csv"));
  const auto unknown = predict_unknown(res.model, filter_parity(ds, parse_parity_filter(o.parity)));
  write_csv(unknown, run.file("unknown_predictions.csv"));
  run.write_manifest("lda train", lda_config(o), o.seed, o.deterministic, {o.input});
  print_accuracies(res.report);
  if (res.model.gamma != o.gamma) std::cout << "shrinkage raised to gamma = " << res.model.gamma << '\n';
  std::cout << unknown.size() << " unknown-sign predictions -> " << run.dir().string() << '\n';
  return 0;
}

int cmd_nn_train(const Options& o) {
  const auto ds = load(o);
  const auto spec = nn_features(o);
  const auto parity = parse_parity_filter(o.parity);
  const auto res = run_nn_experiment(ds, spec, nn_config(o), parity, split_spec(o));
  const auto& model = res.trained.model;

  RunDir run(o.out, o.seed);
  write_json(to_json(res.report, !o.deterministic), run.file("report.json"));
  write_json(to_json(model), run.file("model.json"));
  write_history_csv(res.trained.history, run.file("history.csv"));
  write_csv(res.test_predictions, run.file("test_predictions.csv"));

  // saliency over the training rows, in the standardized space the network sees
  const auto parts = prepare_split(ds, parity, split_spec(o));
  const auto train_x = build_features(parts.train, spec, model.stats);
  const Eigen::VectorXd sal = saliency(model.params, train_x.values);
  {
    auto out = csv::open_for_write(run.file("saliency.csv"));
    out << "feature,saliency\n";
    for (Eigen::Index j = 0; j < sal.size(); ++j)
      out << train_x.column_names[static_cast<std::size_t>(j)] << ',' << csv::format_double(sal[j]) << '\n';
  }
  const auto unknown = predict_unknown(model, filter_parity(ds, parity));
  write_csv(unknown, run.file("unknown_predictions.csv"));
  run.write_manifest("nn train", nn_json_config(o), o.seed, o.deterministic, {o.input});
  print_accuracies(res.report);
  std::cout << unknown.size() << " unknown-sign predictions -> " << run.dir().string() << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  const auto ds = load(o);
  SweepSpec s;
  if (o.method == "lda") {
    s.method = SweepMethod::Lda;
    s.base = lda_features(o);
    s.lda.gamma = o.gamma;
  } else if (o.method == "nn") {
    s.method = SweepMethod::Nn;
    s.base = nn_features(o);
    s.nn = nn_config(o);
  } else {
    throw ArgumentError("--method must be lda or nn");
  }
  s.base.limit = 0;
  s.counts = o.counts.empty() ? default_sweep_counts(s.base.index_set) : parse_int_list(o.counts, "--counts");
  s.parity = parse_parity_filter(o.parity);
  s.split = split_spec(o);
  s.threads = worker_count(o.deterministic);
  const auto curve = feature_count_sweep(ds, s);

  RunDir run(o.out, o.seed);
  write_sweep_csv(curve, run.file("sweep.csv"));
  auto cfg = o.method == "lda" ? lda_config(o) : nn_json_config(o);
  cfg.erase("limit");
  cfg["method"] = o.method;
  std::vector<int> used(curve.size());
  std::transform(curve.begin(), curve.end(), used.begin(), [](const SweepPoint& p) { return p.count; });
  cfg["counts"] = used;
  run.write_manifest("sweep", cfg, o.seed, o.deterministic, {o.input});
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& p : curve) std::cout << std::setw(6) << p.count << "  " << p.val_accuracy << '\n';
  return 0;
}

int cmd_predict(const Options& o) {
  if (o.model.empty()) throw ArgumentError("--model is required");
  std::ifstream in(o.model);
  if (!in) throw DataError("cannot open model '" + o.model + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("bad model file '" + o.model + "': " + e.what());
  }
  const auto ds = load(o);
  PredictionSet preds;
  if (j.contains("W1")) {
    const auto m = nn_from_json(j);
    preds = o.all_records ? predict(m, build_features(ds, m.feature_spec, m.stats)) : predict_unknown(m, ds);
  } else if (j.contains("weight")) {
    const auto m = lda_from_json(j);
    preds = o.all_records ? predict(m, build_features(ds, m.feature_spec, m.stats)) : predict_unknown(m, ds);
  } else {
    throw DataError("'" + o.model + "' is neither an LDA nor a network model");
  }
  RunDir run(o.out, o.seed);
  write_csv(preds, run.file("predictions.csv"));
  run.write_manifest("predict", {{"model", o.model}, {"input", o.input}, {"all", o.all_records}}, o.seed,
                     o.deterministic, {o.model, o.input});
  const auto plus = std::count_if(preds.entries().begin(), preds.entries().end(),
                                  [](const Prediction& p) { return p.sign == 1; });
  std::cout << preds.size() << " predictions (" << plus << " +1, " << preds.size() - static_cast<std::size_t>(plus)
            << " -1) -> " << run.dir().string() << '\n';
  return 0;
}

int cmd_compare(const Options& o) {
  if (o.a.empty()) throw ArgumentError("--a is required");
  if (o.b.empty() == o.heuristic.empty()) throw ArgumentError("give exactly one of --b or --heuristic");
  const auto a = read_predictions_csv(o.a);
  const auto r = o.b.empty() ? agreement(a, read_heuristic_csv(o.heuristic)) : agreement(a, read_predictions_csv(o.b));
  RunDir run(o.out, o.seed);
  write_json({{"a", o.a},
              {"b", o.b.empty() ? o.heuristic : o.b},
              {"kind", o.b.empty() ? "heuristic" : "predictions"},
              {"percent", r.percent},
              {"n_common", r.n_common},
              {"n_agree", r.n_agree}},
             run.file("agreement.json"));
  run.write_manifest("compare", {{"a", o.a}, {"b", o.b}, {"heuristic", o.heuristic}}, o.seed, o.deterministic,
                     {o.a, o.b, o.heuristic});
  std::cout << std::fixed << std::setprecision(2) << "agreement " << r.percent << "% (" << r.n_agree << " of "
            << r.n_common << " common labels)\n";
  return 0;
}

int cmd_report(const Options& o) {
  if (o.run.empty()) throw ArgumentError("--run is required");
  const fs::path dir(o.run);
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no manifest.json in '" + o.run + "'");
  const auto m = json::parse(in, nullptr, false);
  if (m.is_discarded()) throw DataError("unreadable manifest in '" + o.run + "'");
  std::cout << m.value("subcommand", "?") << " (seed " << m.value("seed", 0) << ")\n";
  if (std::ifstream rep(dir / "report.json"); rep) {
    const auto r = json::parse(rep, nullptr, false);
    if (!r.is_discarded()) {
      std::cout << std::fixed << std::setprecision(4) << "  method " << r.value("method", "?") << ", parity "
                << r.value("parity", "?") << ", val accuracy " << r.value("val_accuracy", 0.0) << ", test accuracy "
                << r.value("test_accuracy", 0.0) << '\n';
    }
  }
  for (const auto& [name, hash] : m.at("artifacts").items()) {
    const bool ok = fs::exists(dir / name) && sha256_file(dir / name) == hash.get<std::string>();
    std::cout << "  " << (ok ? "ok      " : "CHANGED ") << name << '\n';
  }
  return 0;
}

int cmd_synth(const Options& o) {
  if (o.out.empty()) throw ArgumentError("--out is required");
  GeneratorSpec g;
  g.n = o.n;
  g.levels = parse_int_list(o.levels, "--levels");
  g.class_weights = {1, 1, 1, 1, o.unknown_weight, o.unknown_weight};
  g.signal_strength = o.signal;
  g.noise_sigma = o.noise;
  g.spectral_shift = o.spectral_shift;
  const auto syn = synthesize_with_truth(o.seed, g);
  write_jsonl(syn.dataset, o.out);
  if (!o.truth.empty()) {
    HeuristicLabels h;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < syn.dataset.records.size(); ++i) {
      const auto& r = syn.dataset.records[i];
      if (r.has_known_sign()) continue;
      h.add(r.label, syn.latent_sign[i]);
      order.push_back(r.label);
    }
    write_heuristic_csv(h, order, o.truth);
  }
  std::cout << "wrote " << syn.dataset.size() << " synthetic records to " << o.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// Config file: keys are long option names, either at top level or nested under
// a subcommand name. A manifest.json is accepted too (its "config" block).

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config '" + path + "'");
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ArgumentError("config '" + path + "' is not a JSON object");
  if (j.value("tool", "") == "fricke_lab" && j.contains("config")) return j["config"];
  return j;
}

std::string config_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + config_value(x);
    return s;
  }
  return v.dump();
}

void apply_config(CLI::App* app, const json& cfg, const json& scope) {
  for (CLI::Option* opt : app->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || opt->count() > 0 || names[0] == "help" || names[0] == "config") continue;
    const json* v = nullptr;
    if (scope.is_object() && scope.contains(names[0])) v = &scope[names[0]];
    else if (cfg.contains(names[0])) v = &cfg[names[0]];
    if (!v || v->is_null()) continue;
    if (opt->get_expected_min() == 0) {
      if (!v->is_boolean()) throw ArgumentError("config key '" + names[0] + "' must be true or false");
      if (!v->get<bool>()) continue;
    }
    opt->add_result(config_value(*v));
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Fricke-sign experiments on Maass-form coefficient data", "fricke_lab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_option("--config", o.config, "JSON file supplying any flag (command line wins)");
  app.add_flag("--deterministic", o.deterministic, "single-threaded, omit wall times from reports");

  auto add_input = [&](CLI::App* c) { c->add_option("--input", o.input, "dataset (JSON lines)"); };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory (default runs/<time>-seed<seed>)"); };
  auto add_split = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "split and training seed");
    c->add_option("--test-fraction", o.test_fraction, "held-out test fraction")->check(CLI::Range(0.0, 1.0));
    c->add_option("--val-fraction", o.val_fraction, "validation fraction of the remainder")->check(CLI::Range(0.0, 1.0));
  };
  auto add_features = [&](CLI::App* c) {
    c->add_option("--features", o.features, "an | aprime | ap | apprime")
        ->check(CLI::IsMember({"an", "aprime", "ap", "apprime"}));
    c->add_option("--parity", o.parity, "all | even | odd")->check(CLI::IsMember({"all", "even", "odd"}));
    c->add_option("--limit", o.limit, "use only the first k indices of the family (0 = all)");
  };
  auto add_nn = [&](CLI::App* c) {
    c->add_option("--hidden", o.hidden, "hidden width");
    c->add_option("--lr", o.lr, "Adam learning rate");
    c->add_option("--iters", o.iters, "training iterations (mini-batch steps)");
    c->add_option("--batch", o.batch, "mini-batch size (0 = full batch)");
    c->add_flag("--no-spectral", o.no_spectral, "drop the spectral parameter R from the inputs");
    c->add_flag("--keep-best-val", o.keep_best_val, "keep the checkpoint with the best validation accuracy");
  };
  auto add_gamma = [&](CLI::App* c) {
    c->add_option("--gamma", o.gamma, "covariance shrinkage in [0,1]")->check(CLI::Range(0.0, 1.0));
    c->add_flag("--standardize", o.standardize, "standardize features before LDA");
  };

  std::function<int()> action;
  std::vector<CLI::App*> chain;
  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& desc, std::function<int()> fn) {
    auto* c = parent->add_subcommand(name, desc);
    c->callback([&, c, fn] {
      action = fn;
      chain.push_back(c);
    });
    return c;
  };

  auto* ingest_cmd = sub(&app, "ingest", "load a dataset and check its schema", [&] { return cmd_validate(o, true); });
  add_input(ingest_cmd);
  ingest_cmd->add_option("--tol", o.tol, "tolerance for arithmetic checks");

  auto* validate_cmd = sub(&app, "validate", "check every record", [&] { return cmd_validate(o, false); });
  add_input(validate_cmd);
  validate_cmd->add_option("--tol", o.tol, "tolerance for arithmetic checks");

  auto* counts_cmd = sub(&app, "counts", "forms by Fricke sign and parity", [&] { return cmd_counts(o); });
  add_input(counts_cmd);
  add_out(counts_cmd);

  auto* murm = sub(&app, "murmurate", "class-conditional coefficient averages", [&] { return cmd_murmurate(o); });
  add_input(murm);
  murm->add_option("--features", o.features, "an | aprime | ap | apprime")
      ->check(CLI::IsMember({"an", "aprime", "ap", "apprime"}));
  murm->add_option("--parity", o.parity, "all | even | odd")->check(CLI::IsMember({"all", "even", "odd"}));
  murm->add_flag("--normalize", o.normalize, "multiply by (-1)^parity");
  murm->add_option("--prime-bound", o.prime_bound, "largest index averaged");
  add_out(murm);

  auto* lda = app.add_subcommand("lda", "linear discriminant analysis")->require_subcommand(1);
  auto* lda_train = sub(lda, "train", "train and evaluate LDA", [&] { return cmd_lda_train(o); });
  add_input(lda_train);
  add_features(lda_train);
  add_split(lda_train);
  add_gamma(lda_train);
  add_out(lda_train);

  auto* nn = app.add_subcommand("nn", "one-hidden-layer network")->require_subcommand(1);
  auto* nn_train = sub(nn, "train", "train and evaluate the network", [&] { return cmd_nn_train(o); });
  add_input(nn_train);
  add_features(nn_train);
  add_split(nn_train);
  add_nn(nn_train);
  add_out(nn_train);

  auto* sweep = sub(&app, "sweep", "validation accuracy against number of features", [&] { return cmd_sweep(o); });
  add_input(sweep);
  sweep->add_option("--method", o.method, "lda | nn")->check(CLI::IsMember({"lda", "nn"}));
  sweep->add_option("--counts", o.counts, "comma-separated feature counts, ascending");
  add_features(sweep);
  add_split(sweep);
  add_gamma(sweep);
  add_nn(sweep);
  add_out(sweep);

  auto* predict_cmd = sub(&app, "predict", "apply a saved model to unknown-sign forms", [&] { return cmd_predict(o); });
  predict_cmd->add_option("--model", o.model, "model.json from lda/nn train");
  add_input(predict_cmd);
  predict_cmd->add_flag("--all", o.all_records, "predict every record, not only unknown signs");
  add_out(predict_cmd);

  auto* compare = sub(&app, "compare", "agreement between two prediction sets", [&] { return cmd_compare(o); });
  compare->add_option("--a", o.a, "predictions CSV");
  compare->add_option("--b", o.b, "second predictions CSV");
  compare->add_option("--heuristic", o.heuristic, "heuristic labels CSV (label,fricke_sign)");
  add_out(compare);

  auto* report = sub(&app, "report", "summarize a run directory and check its artifacts", [&] { return cmd_report(o); });
  report->add_option("--run", o.run, "run directory");

  auto* synth = sub(&app, "synth", "write a synthetic dataset", [&] { return cmd_synth(o); });
  synth->add_option("--n", o.n, "number of forms");
  synth->add_option("--seed", o.seed, "generator seed");
  synth->add_option("--levels", o.levels, "comma-separated level pool");
  synth->add_option("--unknown-weight", o.unknown_weight, "relative weight of unknown-sign cells");
  synth->add_option("--signal", o.signal, "class signal on small primes");
  synth->add_option("--noise", o.noise, "coefficient noise");
  synth->add_option("--spectral-shift", o.spectral_shift, "shift of R for w = +1");
  synth->add_option("--out", o.out, "output JSON-lines file");
  synth->add_option("--truth", o.truth, "also write the latent signs of unknown forms (label,fricke_sign)");

  try {
    app.parse(argc, argv);
    if (!o.config.empty()) {
      const auto cfg = load_config(o.config);
      for (auto* c : chain) apply_config(c, cfg, cfg.contains(c->get_name()) ? cfg[c->get_name()] : json());
    }
    return action();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

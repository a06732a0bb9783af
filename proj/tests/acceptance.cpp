// Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//
// Criteria that need the public LMFDB Maass-form export read it from
// $FRICKE_LAB_DATA (JSON lines); the heuristic-label comparison also needs
// $FRICKE_LAB_HEURISTIC (label,fricke_sign CSV). Without them those lines SKIP.
// Everything else runs on synthetic data.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fricke/fricke.hpp"
#include "gaussian_oracle.hpp"
#include "nn_fixtures.hpp"
#include "test_util.hpp"

namespace {

using namespace fricke;
namespace fs = std::filesystem;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass_if(bool ok, const std::string& detail) { return {ok ? Status::Pass : Status::Fail, detail}; }

std::string fmt(double x, int digits = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << x;
  return o.str();
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

const Dataset& real_data() {
  static const Dataset ds = ingest(env("FRICKE_LAB_DATA"));
  return ds;
}

// ---------------------------------------------------------------------------
// Real-data criteria

Outcome counts_exact() {
  if (!env("FRICKE_LAB_DATA")) return {Status::Skip, "FRICKE_LAB_DATA not set"};
  const auto c = counts(real_data());
  struct Cell {
    int sign, parity;
    std::size_t expected;
  };
  const Cell cells[] = {{-1, 0, 5009}, {1, 0, 7171}, {0, 0, 6173}, {-1, 1, 3724}, {1, 1, 4089}, {0, 1, 9250}};
  bool ok = c.total() == 35416 && c.row_total(0) == 15423 && c.row_total(-1) == 8733 && c.row_total(1) == 11260;
  for (const auto& x : cells) ok = ok && c.cell(x.sign, x.parity) == x.expected;
  return pass_if(ok, "total " + std::to_string(c.total()) + ", unknown " + std::to_string(c.row_total(0)) +
                         ", (even,+1) " + std::to_string(c.cell(1, 0)) + ", (odd,-1) " + std::to_string(c.cell(-1, 1)));
}

Outcome lda_accuracy_grid() {
  if (!env("FRICKE_LAB_DATA")) return {Status::Skip, "FRICKE_LAB_DATA not set"};
  const std::array<const char*, 4> features{"an", "aprime", "ap", "apprime"};
  const std::array<ParityFilter, 3> parities{ParityFilter::All, ParityFilter::Even, ParityFilter::Odd};
  const double target[4][3] = {
      {0.9612, 0.9488, 0.9633}, {0.9456, 0.9564, 0.9633}, {0.8625, 0.8261, 0.8800}, {0.8615, 0.8329, 0.8769}};
  bool ok = true;
  double worst = 0.0;
  std::string cells;
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t p = 0; p < 3; ++p) {
      const double acc =
          run_lda_experiment(real_data(), FeatureSpec::preset(features[f]), parities[p], SplitSpec{}).report.val_accuracy;
      const double gap = std::abs(acc - target[f][p]);
      worst = std::max(worst, gap);
      ok = ok && gap <= 0.015;
      cells += std::string(cells.empty() ? "" : " ") + features[f] + "/" + to_string(parities[p]) + "=" + fmt(acc);
    }
  return pass_if(ok, "max gap " + fmt(100 * worst, 2) + " points (tol 1.5): " + cells);
}

PredictionSet lda_unknown(const char* family, ParityFilter parity = ParityFilter::All) {
  const auto run = run_lda_experiment(real_data(), FeatureSpec::preset(family), parity, SplitSpec{});
  return predict_unknown(run.model, filter_parity(real_data(), parity));
}

Outcome lda_pairwise_agreement() {
  if (!env("FRICKE_LAB_DATA")) return {Status::Skip, "FRICKE_LAB_DATA not set"};
  const auto an = lda_unknown("an"), aprime = lda_unknown("aprime"), ap = lda_unknown("ap"),
             apprime = lda_unknown("apprime");
  const double x = agreement(an, ap).percent, y = agreement(an, aprime).percent, z = agreement(ap, apprime).percent;
  const bool ok = std::abs(x - 83.29) <= 2 && std::abs(y - 97.50) <= 2 && std::abs(z - 99.81) <= 2;
  return pass_if(ok, "an~ap " + fmt(x, 2) + "%, an~a'n " + fmt(y, 2) + "%, ap~a'p " + fmt(z, 2) + "% (tol 2)");
}

Outcome nn_accuracy_and_spectral_sweep() {
  if (!env("FRICKE_LAB_DATA")) return {Status::Skip, "FRICKE_LAB_DATA not set"};
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::array<double, 2> acc{};
  const std::array<ParityFilter, 2> parities{ParityFilter::Even, ParityFilter::Odd};
  parallel_for(2, threads, [&](std::size_t i) {
    acc[i] = run_nn_experiment(real_data(), nn_feature_spec(), NnConfig{}, parities[i], SplitSpec{}).report.val_accuracy;
  });
  SweepSpec s;
  s.method = SweepMethod::Nn;
  s.counts = {25, 50, 100, 168};
  s.threads = threads;
  s.base = nn_feature_spec(true);
  const auto with_r = feature_count_sweep(real_data(), s);
  s.base = nn_feature_spec(false);
  const auto without_r = feature_count_sweep(real_data(), s);
  bool dominates = true;
  std::string curve;
  for (std::size_t i = 0; i < with_r.size(); ++i) {
    dominates = dominates && with_r[i].val_accuracy >= without_r[i].val_accuracy;
    curve += " " + std::to_string(with_r[i].count) + ":" + fmt(with_r[i].val_accuracy) + "/" +
             fmt(without_r[i].val_accuracy);
  }
  const bool ok = std::abs(acc[0] - 0.95) <= 0.02 && std::abs(acc[1] - 0.94) <= 0.02 && dominates;
  return pass_if(ok, "even " + fmt(acc[0]) + ", odd " + fmt(acc[1]) + "; with/without R:" + curve);
}

Outcome heuristic_agreement() {
  if (!env("FRICKE_LAB_DATA")) return {Status::Skip, "FRICKE_LAB_DATA not set"};
  if (!env("FRICKE_LAB_HEURISTIC")) return {Status::Skip, "FRICKE_LAB_HEURISTIC not set"};
  const auto h = read_heuristic_csv(env("FRICKE_LAB_HEURISTIC"));
  const auto all = agreement(lda_unknown("an"), h);
  const auto odd = agreement(lda_unknown("an", ParityFilter::Odd), h);
  const auto even = agreement(lda_unknown("an", ParityFilter::Even), h);
  const bool ok = std::abs(all.percent - 95.45) <= 2 && std::abs(odd.percent - 96.09) <= 2 &&
                  std::abs(even.percent - 94.61) <= 2;
  return pass_if(ok, "all " + fmt(all.percent, 2) + "%, odd " + fmt(odd.percent, 2) + "% (" +
                         std::to_string(odd.n_agree) + "/" + std::to_string(odd.n_common) + "), even " +
                         fmt(even.percent, 2) + "% (" + std::to_string(even.n_agree) + "/" +
                         std::to_string(even.n_common) + ")");
}

// ---------------------------------------------------------------------------
// Synthetic criteria

Outcome lda_oracle() {
  double worst_match = 1.0, worst_affine = 0.0;
  bool negation_exact = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(700 + seed);
    const std::size_t d = 1 + seed;  // 1..5
    const auto g = testing::with_mahalanobis(testing::random_problem(d, rng), 3.0);
    const auto s = testing::draw(g, 10000, rng);
    const auto m = fit_lda(s.x, s.y);
    const Eigen::VectorXd scores = decision_scores(m, s.x);
    std::size_t match = 0;
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) match += sign_of_score(scores[i]) == g.bayes(testing::row(s.x, i));
    worst_match = std::min(worst_match, static_cast<double>(match) / 10000.0);

    // negation: x -> -x flips every score's argument, predictions identical
    const auto neg = fit_lda(-s.x, s.y);
    const Eigen::VectorXd neg_scores = decision_scores(neg, -s.x);
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      negation_exact = negation_exact && sign_of_score(scores[i]) == sign_of_score(neg_scores[i]);

    // affine map at gamma = 0
    const auto di = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(di, di);
    for (Eigen::Index i = 0; i < di; ++i)
      for (Eigen::Index j = 0; j < di; ++j) A(i, j) += 0.3 * rng.normal() / std::sqrt(static_cast<double>(d));
    const Eigen::VectorXd shift = Eigen::VectorXd::NullaryExpr(di, [&] { return 3 * rng.normal(); });
    const Eigen::MatrixXd tx = (s.x * A.transpose()).rowwise() + shift.transpose();
    LdaOptions exact;
    exact.gamma = 0.0;
    exact.auto_escalate = false;
    const Eigen::VectorXd sa = decision_scores(fit_lda(s.x, s.y, exact), s.x);
    const Eigen::VectorXd sb = decision_scores(fit_lda(tx, s.y, exact), tx);
    for (Eigen::Index i = 0; i < sa.size(); ++i)
      worst_affine = std::max(worst_affine, std::abs(sa[i] - sb[i]) / (1 + std::abs(sa[i])));
  }
  return pass_if(worst_match >= 0.995 && negation_exact && worst_affine <= 1e-8,
                 "min Bayes match " + fmt(100 * worst_match, 2) + "%, negation " +
                     (negation_exact ? "exact" : "BROKEN") + ", affine max rel diff " + [&] {
                       std::ostringstream o;
                       o << std::scientific << std::setprecision(2) << worst_affine;
                       return o.str();
                     }());
}

Outcome nn_gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(900 + seed);
    const int d = 1 + static_cast<int>(rng.below(8)), h = 1 + static_cast<int>(rng.below(8)),
              n = 2 + static_cast<int>(rng.below(10));
    auto p = NnParams::zeros(d, h);
    p.W1 = Eigen::MatrixXd::NullaryExpr(h, d, [&] { return rng.normal(); });
    p.b1 = Eigen::VectorXd::NullaryExpr(h, [&] { return 0.5 * rng.normal(); });
    p.w2 = Eigen::VectorXd::NullaryExpr(h, [&] { return rng.normal(); });
    p.b2 = 0.3 * rng.normal();
    const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(n, d, [&] { return rng.normal(); });
    std::vector<double> y;
    for (int i = 0; i < n; ++i) y.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
    const auto g = gradients(p, x, y);
    constexpr double step = 1e-5;
    auto check = [&](double& theta, double analytic) {
      const double saved = theta;
      theta = saved + step;
      const double up = bce_loss(p, x, y);
      theta = saved - step;
      const double down = bce_loss(p, x, y);
      theta = saved;
      const double numeric = (up - down) / (2 * step);
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max({std::abs(analytic), std::abs(numeric), 1e-7}));
    };
    for (Eigen::Index i = 0; i < h; ++i)
      for (Eigen::Index j = 0; j < d; ++j) check(p.W1(i, j), g.W1(i, j));
    for (Eigen::Index i = 0; i < h; ++i) check(p.b1[i], g.b1[i]), check(p.w2[i], g.w2[i]);
    check(p.b2, g.b2);
  }
  std::ostringstream o;
  o << "max relative error " << std::scientific << std::setprecision(2) << worst << " over 20 configurations";
  return pass_if(worst < 1e-4, o.str());
}

Outcome nn_separable() {
  const auto train_set = testing::separable_set(2000, 169, 7);
  NnConfig cfg;
  cfg.iterations = 5000;
  cfg.seed = 1;
  const auto result = train(cfg, train_set, FeatureMatrix{});
  const double acc = accuracy(result.model, train_set);
  return pass_if(acc >= 0.99, "train accuracy " + fmt(acc) + " after 5000 iterations");
}

Outcome dataset_invariants() {
  GeneratorSpec g;
  g.n = 3000;
  g.levels = {1, 2, 3, 4, 5, 6, 7, 9, 10, 12, 15, 30, 42, 105};
  g.class_weights = {3, 2, 2, 1, 1, 1};
  const auto ds = synthesize(2024, g);
  std::size_t clean = 0;
  for (const auto& r : ds.records) clean += validate(r).empty();

  auto hand = testing::blank_record("6.hand", 6, 0, 1);
  hand.a(2) = -1.0 / std::sqrt(2.0);
  hand.a(3) = 1.0 / std::sqrt(3.0);
  const auto v = validate(hand);
  const bool hand_ok = v.size() == 1 && v[0].kind == Violation::Kind::LocalSignProduct;
  return pass_if(clean == ds.size() && hand_ok, std::to_string(clean) + "/" + std::to_string(ds.size()) +
                                                    " synthesized records valid; hand case " +
                                                    std::to_string(v.size()) + " violation(s)");
}

Outcome murmuration_oracle() {
  GeneratorSpec g;
  g.n = 1000;
  g.levels = {1, 2, 3, 5, 6, 7, 10, 11, 14, 15, 21, 30};
  g.class_weights = {2, 3, 2, 1, 1, 1};
  const auto ds = synthesize(77, g);
  const auto primes = primes_below(1000);
  double worst = 0.0;
  for (bool normalize : {false, true})
    for (bool masked : {false, true}) {
      const auto t = average_by_class(ds, by_fricke_sign, primes, normalize, masked);
      for (const auto& row : t.rows)
        for (int cls : {1, -1}) {
          double sum = 0.0;
          int n = 0;
          for (const auto& r : ds.records) {
            if (r.fricke_sign != cls) continue;
            double v = (masked && std::gcd(row.p, r.level) != 1) ? 0.0 : r.coefficients[row.p - 1];
            if (normalize && r.parity == 1) v = -v;
            sum += v;
            ++n;
          }
          worst = std::max(worst, std::abs((cls == 1 ? row.mean_plus : row.mean_minus) - sum / n));
        }
    }

  double worst_split = 0.0;
  Rng rng(78);
  const auto labeled = labeled_only(ds);
  const auto whole = average_by_class(labeled, by_fricke_sign, primes, true, false);
  for (int trial = 0; trial < 10; ++trial) {
    Dataset a, b;
    for (const auto& r : labeled.records) (rng.below(3) == 0 ? a : b).records.push_back(r);
    const auto ta = average_by_class(a, by_fricke_sign, primes, true, false);
    const auto tb = average_by_class(b, by_fricke_sign, primes, true, false);
    for (std::size_t k = 0; k < primes.size(); ++k) {
      const auto &ra = ta.rows[k], &rb = tb.rows[k];
      const double plus = (ra.mean_plus * ra.n_plus + rb.mean_plus * rb.n_plus) / (ra.n_plus + rb.n_plus);
      const double minus = (ra.mean_minus * ra.n_minus + rb.mean_minus * rb.n_minus) / (ra.n_minus + rb.n_minus);
      worst_split = std::max({worst_split, std::abs(whole.rows[k].mean_plus - plus),
                              std::abs(whole.rows[k].mean_minus - minus)});
    }
  }
  std::ostringstream o;
  o << std::scientific << std::setprecision(2) << "max |lib - brute force| " << worst << ", partition consistency "
    << worst_split;
  return pass_if(worst <= 1e-12 && worst_split <= 1e-12, o.str());
}

int run_cli(const std::string& args) {
  const int status = std::system(("\"" FRICKE_LAB_EXE "\" " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_determinism() {
  testing::TempDir dir;
  GeneratorSpec g;
  g.n = 800;
  g.levels = {1, 2, 3, 5, 6};
  g.class_weights = {1, 1, 1, 1, 0.5, 0.5};
  write_jsonl(synthesize(5, g), dir.file("data.jsonl"));
  const std::string in = " --input " + dir.file("data.jsonl");
  const std::vector<std::string> commands = {
      "counts" + in,
      "murmurate --features ap --normalize" + in,
      "lda train --features an --seed 17" + in,
      "nn train --parity even --seed 3 --iters 500 --hidden 16" + in,
      "sweep --method lda --features ap --counts 1,5,25,100" + in,
  };
  std::size_t files = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    const auto a = dir.file("a" + std::to_string(c)), b = dir.file("b" + std::to_string(c));
    if (run_cli("--deterministic " + commands[c] + " --out " + a) != 0 ||
        run_cli("--deterministic " + commands[c] + " --out " + b) != 0)
      return {Status::Fail, "command failed: " + commands[c]};
    for (const auto& e : fs::directory_iterator(a)) {
      const auto name = e.path().filename().string();
      if (testing::slurp(e.path().string()) != testing::slurp(b + "/" + name))
        return {Status::Fail, commands[c] + ": " + name + " differs"};
      ++files;
    }
  }
  return {Status::Pass, std::to_string(files) + " output files byte-identical across " +
                            std::to_string(commands.size()) + " repeated commands"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"counts by sign and parity (real data, exact)", counts_exact},
      {"LDA validation accuracy grid (real data, +-1.5 pts)", lda_accuracy_grid},
      {"LDA pairwise agreement on unknown signs (real data, +-2 pts)", lda_pairwise_agreement},
      {"network accuracy and with/without-R sweep (real data, +-2 pts)", nn_accuracy_and_spectral_sweep},
      {"LDA vs heuristic labels (real data, +-2 pts)", heuristic_agreement},
      {"LDA matches Bayes rule; negation and affine invariance", lda_oracle},
      {"network gradients vs central differences", nn_gradient_check},
      {"network fits a separable 169-feature set", nn_separable},
      {"dataset invariants", dataset_invariants},
      {"murmuration averages vs brute force", murmuration_oracle},
      {"CLI determinism", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = r.status == Status::Pass ? "PASS" : r.status == Status::Fail ? "FAIL" : "SKIP";
    failures += r.status == Status::Fail;
    std::cout << std::setw(2) << i + 1 << ". " << tag << "  " << criteria[i].first << " -- " << r.detail << " ["
              << fmt(secs, 1) << "s]" << std::endl;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failing" : std::string("acceptance: ok"))
            << std::endl;
  return failures ? 1 : 0;
}

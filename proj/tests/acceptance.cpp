// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "procscore/cli.hpp"
#include "procscore/error.hpp"
#include "procscore/eval.hpp"
#include "procscore/io.hpp"
#include "procscore/irt.hpp"
#include "procscore/mds.hpp"
#include "procscore/reg.hpp"
#include "procscore/simgen.hpp"

using namespace procscore;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Exact conditional-variance identity on random toy models.
Outcome rao_blackwell_identity() {
  Rng rng(2024);
  long double worst = 0, min_gap = 1;
  const int n = 30;
  for (int rep = 0; rep < n; ++rep) {
    simgen::ToyOptions opt;
    opt.n_theta = 2 + rep % 4;
    opt.n_x = 5 + rep % 16;
    opt.n_stat = std::min(opt.n_x, 3 + rep % 6);
    const auto r = simgen::exact_rao_blackwell_check(simgen::random_toy_model(rng, opt));
    worst = std::max(worst, std::fabs(r.difference - r.gap));
    min_gap = std::min(min_gap, r.gap);
  }
  return {worst <= 1e-10L && min_gap >= -1e-12L,
          std::to_string(n) + " models, max |difference - gap| = " + fmt("%.3g", static_cast<double>(worst)) +
              ", min gap = " + fmt("%.3g", static_cast<double>(min_gap))};
}

// 2. G(t) strictly monotone on valid models; invalid assumptions rejected.
Outcome monotonicity() {
  Rng rng(2024);
  int monotone = 0, total = 0;
  for (int rep = 0; rep < 30; ++rep) {
    simgen::ToyOptions opt;
    opt.n_theta = 2 + rep % 4;
    opt.n_x = 5 + rep % 16;
    opt.n_stat = std::min(opt.n_x, 3 + rep % 6);
    opt.decreasing_m = rep % 3 == 0;
    const auto r = simgen::sufficiency_monotonicity_check(simgen::random_toy_model(rng, opt));
    ++total;
    monotone += r.strictly_monotone && r.direction == (opt.decreasing_m ? -1 : 1) ? 1 : 0;
  }
  int rejected = 0;
  for (int rep = 0; rep < 10; ++rep) {
    auto flat = simgen::random_toy_model(rng);
    flat.psi.assign(flat.psi.size(), 0.25);
    auto bent = simgen::random_toy_model(rng);
    std::swap(bent.eta[0], bent.eta[2]);
    std::swap(bent.p_x[0], bent.p_x[2]);
    for (const auto* toy : {&flat, &bent}) {
      try {
        simgen::sufficiency_monotonicity_check(*toy);
      } catch (const ValidationError&) {
        ++rejected;
      }
    }
  }
  return {monotone == total && rejected == 20, std::to_string(monotone) + "/" + std::to_string(total) +
                                                   " strictly monotone, " + std::to_string(rejected) +
                                                   "/20 invalid models rejected"};
}

// 3. Exact covariance of two increasing functions of a non-constant X.
Outcome increasing_covariance() {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  int positive = 0;
  long double smallest = 1e9;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rep % 9;
    std::vector<double> x(n), p(n), f(n), g(n);
    double acc_x = u(rng) - 0.5, acc_f = -u(rng), acc_g = u(rng) * 3.0, mass = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = acc_x += u(rng);
      f[k] = acc_f += u(rng) * u(rng);
      g[k] = acc_g += std::exp(u(rng) * 4) * 1e-2;
      p[k] = u(rng);
      mass += p[k];
    }
    for (auto& v : p) v /= mass;
    const long double c = simgen::increasing_covariance_check(x, p, f, g);
    positive += c > 0 ? 1 : 0;
    smallest = std::min(smallest, c);
  }
  return {positive == 100, std::to_string(positive) + "/100 positive, smallest " +
                               fmt("%.3g", static_cast<double>(smallest))};
}

struct PipelineRun {
  std::vector<bool> mse_better, tau_better;
  bool tails_better = false;
  bool middle_close = false;
  std::string note;
};

// Shared by 4 and 5: ten seeds of the cross-validated comparison.
const std::vector<PipelineRun>& pipeline_runs() {
  static std::vector<PipelineRun> runs = [] {
    std::vector<PipelineRun> out;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      simgen::SimConfig sc;
      sc.N = 2000;
      sc.J = 8;
      sc.K = 10;
      sc.seed = seed;
      sc.feature_model = simgen::FeatureModel::LinearGaussian;
      sc.sequences = false;
      const auto sim = simgen::simulate_dataset(sc);
      eval::ProtocolData data;
      data.responses = sim.responses;
      data.features = sim.features;
      eval::ProtocolConfig pc;
      pc.n_partitions = 10;
      pc.folds = 5;
      pc.t_max = 3;
      pc.seed = seed;
      const auto report = eval::run_protocol(data, pc);
      PipelineRun run;
      for (int t = 1; t <= 3; ++t) {
        const auto& p = report.summary_for(t, "process");
        const auto& r = report.summary_for(t, "response");
        run.mse_better.push_back(p.mean_mse < r.mean_mse);
        run.tau_better.push_back(p.mean_tau > r.mean_tau);
      }
      const auto& d = report.deciles;
      run.tails_better = d.size() == 10 && d[0].mse_process < d[0].mse_response &&
                         d[9].mse_process < d[9].mse_response;
      double worst = 0.0;
      for (std::size_t k = 3; k <= 5 && d.size() == 10; ++k) {
        worst = std::max(worst, std::fabs(d[k].mse_process - d[k].mse_response) / d[k].mse_response);
      }
      run.middle_close = d.size() == 10 && worst < 0.25;
      run.note = fmt("%.3f", worst);
      out.push_back(run);
    }
    return out;
  }();
  return runs;
}

// 4. Process-based estimates agree better with the reference set.
Outcome pipeline_mse() {
  int ok = 0;
  for (const auto& r : pipeline_runs()) {
    const bool all = std::all_of(r.mse_better.begin(), r.mse_better.end(), [](bool b) { return b; }) &&
                     std::all_of(r.tau_better.begin(), r.tau_better.end(), [](bool b) { return b; });
    ok += all ? 1 : 0;
  }
  return {ok >= 8, std::to_string(ok) + "/10 seeds with lower MSE and higher tau for t = 1, 2, 3"};
}

// 5. Residual deciles: gains in the tails, agreement in the middle.
Outcome pipeline_deciles() {
  int ok = 0;
  std::string middle;
  for (const auto& r : pipeline_runs()) {
    ok += r.tails_better && r.middle_close ? 1 : 0;
    middle += (middle.empty() ? "" : " ") + r.note;
  }
  return {ok >= 8, std::to_string(ok) + "/10 seeds; worst relative gap in deciles 4-6 per seed: " + middle};
}

// 6. Calibration recovery on simulated data.
Outcome calibration() {
  simgen::SimConfig sc;
  sc.N = 2000;
  sc.J = 14;
  sc.seed = 606;
  sc.sequences = false;
  sc.feature_model = simgen::FeatureModel::ExactTheta;
  const auto sim = simgen::simulate_dataset(sc);
  const auto fit = irt::fit_grm(sim.responses, {}, {});
  bool monotone = true;
  for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k) {
    monotone = monotone && fit.loglik_trace[k] >= fit.loglik_trace[k - 1] - 1e-8;
  }
  double se_a = 0, se_d = 0;
  int n_d = 0;
  for (std::size_t j = 0; j < sim.params.size(); ++j) {
    se_a += std::pow(fit.params[j].slope - sim.params[j].slope, 2);
    for (std::size_t k = 0; k < sim.params[j].intercepts.size(); ++k) {
      se_d += std::pow(fit.params[j].intercepts[k] - sim.params[j].intercepts[k], 2);
      ++n_d;
    }
  }
  const double ra = std::sqrt(se_a / static_cast<double>(sim.params.size())), rd = std::sqrt(se_d / n_d);
  return {ra <= 0.15 && rd <= 0.20 && monotone, "slope RMSE " + fmt("%.4f", ra) + ", intercept RMSE " +
                                                    fmt("%.4f", rd) + ", EM log-likelihood " +
                                                    (monotone ? "monotone" : "NOT monotone") + ", " +
                                                    std::to_string(fit.iterations) + " iterations"};
}

double dense_eap(const std::vector<int>& y, const std::vector<irt::GrmItemParams>& ps) {
  const int n = 100000;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / n;
  long double num = 0, den = 0;
  for (int k = 0; k < n; ++k) {
    const double t = lo + (k + 0.5) * h;
    long double w = std::exp(-0.5 * t * t);
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const int c = y[j];
      const double upper = c == 0 ? 1.0 : sigmoid(ps[j].slope * t + ps[j].intercepts[c - 1]);
      const double lower = c == ps[j].max_score() ? 0.0 : sigmoid(ps[j].slope * t + ps[j].intercepts[c]);
      w *= upper - lower;
    }
    num += t * w;
    den += w;
  }
  return static_cast<double>(num / den);
}

double tau_quadratic(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::int64_t num = 0, ta = 0, tb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      ta += da == 0;
      tb += db == 0;
      num += (da * db > 0) - (da * db < 0);
    }
  }
  const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  return static_cast<double>(num) /
         (std::sqrt(static_cast<double>(n0 - ta)) * std::sqrt(static_cast<double>(n0 - tb)));
}

// 7. Estimators against independent oracles.
Outcome estimator_oracles() {
  Rng rng(77);
  std::uniform_real_distribution<double> a(0.6, 2.2), d(-2.5, 2.5);
  double eap_err = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<irt::GrmItemParams> ps;
    std::vector<int> y;
    const int J = 1 + rep % 6;
    for (int j = 0; j < J; ++j) {
      const int C = 1 + (rep + j) % 3;
      std::vector<double> ds(static_cast<std::size_t>(C));
      for (auto& v : ds) v = d(rng);
      std::sort(ds.rbegin(), ds.rend());
      for (std::size_t k = 1; k < ds.size(); ++k) ds[k] = std::min(ds[k], ds[k - 1] - 0.2);
      ps.push_back({"i" + std::to_string(j), a(rng), ds});
      y.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(C + 1)));
    }
    eap_err = std::max(eap_err, std::fabs(irt::estimate_theta(y, ps, {}, irt::ThetaMethod::EAP) - dense_eap(y, ps)));
  }

  double tau_err = 0;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(60), z(60);
    for (auto& v : x) v = static_cast<double>(rng() % (2 + rep % 8));
    for (auto& v : z) v = static_cast<double>(rng() % (2 + rep % 5)) * 0.5;
    tau_err = std::max(tau_err, std::fabs(eval::kendall_tau(x, z) - tau_quadratic(x, z)));
  }

  double ridge_err = 0;
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 10 + rep, p = 1 + rep % 5;
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = g(rng);
    const double lambda = 0.05 * (rep + 1);
    Eigen::MatrixXd Z = X;
    for (Eigen::Index c = 0; c < p; ++c) {
      const double m = X.col(c).mean();
      const double sd = std::sqrt((X.col(c).array() - m).square().sum() / n);
      Z.col(c) = (X.col(c).array() - m) / sd;
    }
    const Eigen::MatrixXd A = Z.transpose() * Z + lambda * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd w = A.inverse() * Z.transpose() * (y.array() - y.mean()).matrix();
    const Eigen::VectorXd pred = (Z * w).array() + y.mean();
    const auto m = reg::ridge_fit_fixed(X, y, lambda);
    ridge_err = std::max(ridge_err, (m.weights - w).cwiseAbs().maxCoeff());
    ridge_err = std::max(ridge_err, (reg::ridge_predict(m, X) - pred).cwiseAbs().maxCoeff());
  }
  return {eap_err <= 1e-4 && tau_err == 0.0 && ridge_err <= 1e-8,
          "EAP max error " + fmt("%.2e", eap_err) + ", tau max error " + fmt("%.2e", tau_err) +
              ", ridge max error " + fmt("%.2e", ridge_err)};
}

seqdiss::DissimilarityMatrix from_points(const Eigen::MatrixXd& P) {
  seqdiss::DissimilarityMatrix d;
  d.values.resize(P.rows(), P.rows());
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    d.ids.push_back("p" + std::to_string(i));
    for (Eigen::Index j = 0; j < P.rows(); ++j) d.values(i, j) = (P.row(i) - P.row(j)).norm();
  }
  return d;
}

// 8. Embedding contracts.
Outcome mds_contracts() {
  Rng rng(88);
  int monotone = 0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<seqdiss::ActionSequence> seqs;
    for (int i = 0; i < 25; ++i) {
      std::vector<std::string> acts;
      const int len = 2 + static_cast<int>(rng() % 12);
      for (int k = 0; k < len; ++k) acts.push_back("T" + std::to_string(rng() % 6));
      seqs.push_back({"p" + std::to_string(i), "X", acts});
    }
    const auto fit = mds::embed_train(seqdiss::dissimilarity_matrix(seqs), 2 + rep % 3);
    bool ok = true;
    for (std::size_t t = 1; t < fit.stress_trace.size(); ++t) {
      ok = ok && fit.stress_trace[t] <= fit.stress_trace[t - 1] * (1 + 1e-12) + 1e-15;
    }
    monotone += ok ? 1 : 0;
  }

  std::normal_distribution<double> z;
  double worst_stress = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd P(3, 2);
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = z(rng);
    worst_stress = std::max(worst_stress, mds::embed_train(from_points(P), 2).model.final_stress);
  }

  double worst_proj = 0;
  for (int dim : {1, 2, 3}) {
    Eigen::MatrixXd P(15, dim);
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = z(rng);
    const auto d = from_points(P);
    const auto fit = mds::embed_train(d, dim);
    for (int k = 0; k < 15; ++k) {
      std::vector<double> row(15);
      for (int j = 0; j < 15; ++j) row[static_cast<std::size_t>(j)] = d.values(k, j);
      const auto x = mds::embed_project(fit.model, row);
      worst_proj = std::max(worst_proj, (x - fit.model.coords.row(k).transpose()).norm());
    }
  }
  return {monotone == 20 && worst_stress <= 1e-10 && worst_proj <= 1e-4,
          std::to_string(monotone) + "/20 stress traces nonincreasing, 3-point stress max " +
              fmt("%.2e", worst_stress) + ", projection error max " + fmt("%.2e", worst_proj)};
}

// 9. simulate -> evaluate twice under one seed gives identical reports.
Outcome reproducibility() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "procscore_acceptance_repro";
  fs::remove_all(root);
  std::vector<std::string> digests;
  std::ostringstream out, err;
  for (const char* rep : {"a", "b"}) {
    const auto dir = (root / rep).string();
    if (cli::run({"simulate", "--out", dir + "/sim", "--seed", "2718", "--persons", "200", "--items", "4"}, out, err) != 0) {
      return {false, "simulate failed: " + err.str()};
    }
    if (cli::run({"evaluate", "--responses", dir + "/sim/responses.csv", "--levels", dir + "/sim/levels.json",
                  "--sequences", dir + "/sim/sequences.jsonl", "--seed", "2718", "--partitions", "2", "--folds",
                  "2", "--dim", "4", "--threads", rep[0] == 'a' ? "1" : "2", "--out", dir + "/eval"},
                 out, err) != 0) {
      return {false, "evaluate failed: " + err.str()};
    }
    std::string all;
    for (const char* f : {"eval_rows.csv", "partition_means.csv", "deciles.csv"}) {
      all += io::read_text(fs::path(dir) / "eval" / f);
    }
    digests.push_back(cli::sha256_hex(all));
  }
  return {digests[0] == digests[1], "report digest " + digests[0].substr(0, 16) + " vs " + digests[1].substr(0, 16)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "conditional-variance identity on toy models", 10, rao_blackwell_identity},
      {2, "strict monotonicity of the sufficient-statistic map", 5, monotonicity},
      {3, "positive covariance of increasing functions", 1, increasing_covariance},
      {4, "process-based MSE and tau beat response-based", 600, pipeline_mse},
      {5, "residual deciles: tails improve, middle agrees", 600, pipeline_deciles},
      {6, "GRM calibration recovery", 60, calibration},
      {7, "estimator oracles (EAP, Kendall tau, ridge)", 30, estimator_oracles},
      {8, "MDS contracts", 30, mds_contracts},
      {9, "byte-identical simulate -> evaluate reports", 600, reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += pass ? 0 : 1;
    std::printf("criterion %d: %-52s %s  (%s; %.1fs of %.0fs budget%s)\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_s, in_budget ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

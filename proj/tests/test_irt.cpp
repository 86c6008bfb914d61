#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "procscore/error.hpp"
#include "procscore/irt.hpp"

using namespace procscore;
using namespace procscore::irt;

namespace {

GrmItemParams item(std::string id, double a, std::vector<double> d) {
  GrmItemParams p;
  p.item_id = std::move(id);
  p.slope = a;
  p.intercepts = std::move(d);
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Posterior mean by brute-force midpoint rule on [-10, 10], standard normal
// prior, written against the logistic formula directly.
double dense_grid_eap(const std::vector<int>& y, const std::vector<GrmItemParams>& ps) {
  const int n = 100000;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / n;
  long double num = 0, den = 0;
  for (int k = 0; k < n; ++k) {
    const double t = lo + (k + 0.5) * h;
    long double w = std::exp(-0.5 * t * t);
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const auto& p = ps[j];
      const int c = y[j];
      const double upper = c == 0 ? 1.0 : sigmoid(p.slope * t + p.intercepts[c - 1]);
      const double lower = c == p.max_score() ? 0.0 : sigmoid(p.slope * t + p.intercepts[c]);
      w *= upper - lower;
    }
    num += t * w;
    den += w;
  }
  return static_cast<double>(num / den);
}

ResponseMatrix simulate(const std::vector<GrmItemParams>& ps, int n, std::uint64_t seed,
                        std::vector<double>* theta_out = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  ResponseMatrix y;
  for (const auto& p : ps) {
    y.item_ids.push_back(p.item_id);
    y.n_categories.push_back(p.n_categories());
  }
  for (int i = 0; i < n; ++i) {
    y.person_ids.push_back("p" + std::to_string(i));
    const double t = normal(rng);
    if (theta_out) theta_out->push_back(t);
    for (const auto& p : ps) {
      const double u = unif(rng);
      int s = 0;
      while (s < p.max_score() && u < sigmoid(p.slope * t + p.intercepts[s])) ++s;
      y.scores.push_back(s);
    }
  }
  return y;
}

}  // namespace

TEST_CASE("grm category probabilities") {
  auto probs = grm_category_probs(0.0, item("b", 1.0, {0.0}));
  CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-15));

  probs = grm_category_probs(0.0, item("p", 1.0, {1.0, -1.0}));
  REQUIRE(probs.size() == 3);
  // Direct evaluation: 1 - sigma(1), sigma(1) - sigma(-1), sigma(-1).
  const double tail = 1.0 / (1.0 + std::exp(1.0));
  CHECK(std::abs(probs[0] - tail) < 1e-15);
  CHECK(std::abs(probs[1] - (1.0 - 2.0 * tail)) < 1e-15);
  CHECK(std::abs(probs[2] - tail) < 1e-15);
  CHECK(std::abs(probs[0] - 0.2689) < 1e-4);
  CHECK(std::abs(probs[1] - 0.4622) < 1e-4);  // exact value 0.462117

  CHECK_THROWS_AS(grm_category_probs(std::nan(""), item("b", 1.0, {0.0})), DomainError);
  CHECK_THROWS_AS(grm_category_probs(0.0, item("b", 1.0, {0.0, 0.5})), DomainError);
  CHECK_THROWS_AS(grm_category_probs(0.0, item("b", -1.0, {0.0})), DomainError);
}

TEST_CASE("category probabilities form a simplex and cumulative curves increase") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int rep = 0; rep < 200; ++rep) {
    const int c = 1 + rep % 4;
    std::vector<double> d(c);
    for (auto& v : d) v = u(rng);
    std::sort(d.rbegin(), d.rend());
    bool distinct = std::adjacent_find(d.begin(), d.end()) == d.end();
    if (!distinct) continue;
    const auto p = item("x", 0.3 + std::abs(u(rng)), d);
    for (double t = -8; t <= 8; t += 0.25) {
      const auto probs = grm_category_probs(t, p);
      double sum = 0;
      for (double v : probs) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    for (int k = 1; k <= c; ++k) {
      double prev = -1;
      for (double t = -4; t <= 4; t += 0.5) {
        const auto probs = grm_category_probs(t, p);
        const double upper = std::accumulate(probs.begin() + k, probs.end(), 0.0);
        CHECK(upper > prev);
        prev = upper;
      }
    }
  }
}

TEST_CASE("EAP on a single binary item") {
  const std::vector<GrmItemParams> ps{item("b", 1.0, {0.0})};
  const PriorSpec prior;
  const std::vector<int> one{1}, zero{0};
  const double up = estimate_theta(one, ps, prior, ThetaMethod::EAP);
  const double down = estimate_theta(zero, ps, prior, ThetaMethod::EAP);
  CHECK(up > 0.0);
  CHECK(down == doctest::Approx(-up).epsilon(1e-12));
  CHECK(std::abs(up - dense_grid_eap({1}, ps)) < 1e-4);
}

TEST_CASE("EAP matches dense grid on random polytomous patterns") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> a(0.6, 2.2), d(-2.5, 2.5);
  const PriorSpec prior;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<GrmItemParams> ps;
    std::vector<int> y;
    for (int j = 0; j < 4; ++j) {
      std::vector<double> ds{d(rng), d(rng)};
      if (ds[0] < ds[1]) std::swap(ds[0], ds[1]);
      ps.push_back(item("i" + std::to_string(j), a(rng), ds));
      y.push_back(static_cast<int>(rng() % 3));
    }
    CHECK(std::abs(estimate_theta(y, ps, prior, ThetaMethod::EAP) - dense_grid_eap(y, ps)) < 1e-4);
  }
}

TEST_CASE("MLE, BME and error paths") {
  const std::vector<GrmItemParams> ps{item("a", 1.2, {1.0, -0.5}), item("b", 0.9, {0.3})};
  const PriorSpec prior;
  const std::vector<int> all_max{2, 1}, all_min{0, 0}, mixed{1, 1}, none{kMissing, kMissing};
  CHECK_THROWS_AS(estimate_theta(all_max, ps, prior, ThetaMethod::MLE), DivergenceError);
  CHECK_THROWS_AS(estimate_theta(all_min, ps, prior, ThetaMethod::MLE), DivergenceError);
  CHECK_THROWS_AS(estimate_theta(none, ps, prior, ThetaMethod::EAP), DomainError);
  CHECK(std::isfinite(estimate_theta(all_max, ps, prior, ThetaMethod::EAP)));
  CHECK(std::isfinite(estimate_theta(all_max, ps, prior, ThetaMethod::BME)));

  // The MLE zeroes the score function; check by central differences.
  const double mle = estimate_theta(mixed, ps, prior, ThetaMethod::MLE);
  auto ll = [&](double t) { return grm_log_prob(t, ps[0], 1) + grm_log_prob(t, ps[1], 1); };
  CHECK(std::abs((ll(mle + 1e-5) - ll(mle - 1e-5)) / 2e-5) < 1e-6);
  const double bme = estimate_theta(mixed, ps, prior, ThetaMethod::BME);
  auto lp = [&](double t) { return ll(t) - 0.5 * t * t; };
  CHECK(std::abs((lp(bme + 1e-5) - lp(bme - 1e-5)) / 2e-5) < 1e-6);
}

// The posterior mode always lies between 0 and the MLE (log-concave
// likelihood). The posterior mean can overshoot when the MLE is within about
// 0.2 of zero and the likelihood is skewed, so EAP is checked away from zero.
TEST_CASE("Bayesian estimators shrink toward zero relative to MLE") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> a(0.6, 2.0), d(-2, 2);
  const PriorSpec prior;
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<GrmItemParams> ps;
    std::vector<int> y;
    for (int j = 0; j < 3; ++j) {
      std::vector<double> ds{d(rng), d(rng), d(rng)};
      std::sort(ds.rbegin(), ds.rend());
      ps.push_back(item("i", a(rng), ds));
      y.push_back(static_cast<int>(rng() % 4));
    }
    double mle;
    try {
      mle = estimate_theta(y, ps, prior, ThetaMethod::MLE);
    } catch (const DivergenceError&) {
      continue;
    }
    const double bme = estimate_theta(y, ps, prior, ThetaMethod::BME);
    CHECK(std::abs(bme) <= std::abs(mle) + 1e-12);
    CHECK(bme * mle >= 0.0);
    if (std::abs(mle) >= 0.5) {
      const double eap = estimate_theta(y, ps, prior, ThetaMethod::EAP);
      CHECK(std::abs(eap) <= std::abs(mle));
    }
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("quadrature refinement changes EAP by less than 1e-6") {
  const std::vector<GrmItemParams> ps{item("a", 1.5, {1.0, 0.2, -1.1}), item("b", 0.8, {0.4})};
  PriorSpec coarse;  // 61 nodes on [-6, 6]
  PriorSpec fine = coarse;
  fine.nodes = 121;
  for (int y0 = 0; y0 <= 3; ++y0) {
    for (int y1 = 0; y1 <= 1; ++y1) {
      const std::vector<int> y{y0, y1};
      CHECK(std::abs(estimate_theta(y, ps, coarse, ThetaMethod::EAP) -
                     estimate_theta(y, ps, fine, ThetaMethod::EAP)) < 1e-6);
    }
  }
}

TEST_CASE("prior spec validation") {
  PriorSpec p;
  p.nodes = 11;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = PriorSpec{};
  p.lo = -4;
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("fit_grm recovers parameters and EM is monotone") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> a(0.8, 2.0), d(-2, 2);
  std::vector<GrmItemParams> truth;
  for (int j = 0; j < 14; ++j) {
    const int c = j % 3 == 0 ? 3 : 1;
    std::vector<double> ds(c);
    for (auto& v : ds) v = d(rng);
    std::sort(ds.rbegin(), ds.rend());
    for (std::size_t k = 1; k < ds.size(); ++k) ds[k] = std::min(ds[k], ds[k - 1] - 0.3);
    truth.push_back(item("i" + std::to_string(j), a(rng), ds));
  }
  const auto y = simulate(truth, 2000, 99);
  const auto fit = fit_grm(y, PriorSpec{}, EmConfig{});
  CHECK(fit.converged);
  for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k) {
    CHECK(fit.loglik_trace[k] >= fit.loglik_trace[k - 1] - 1e-8);
  }
  double se_a = 0, se_d = 0;
  int n_d = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    CHECK_NOTHROW(fit.params[j].validate());
    se_a += std::pow(fit.params[j].slope - truth[j].slope, 2);
    for (std::size_t k = 0; k < truth[j].intercepts.size(); ++k) {
      se_d += std::pow(fit.params[j].intercepts[k] - truth[j].intercepts[k], 2);
      ++n_d;
    }
  }
  CHECK(std::sqrt(se_a / truth.size()) <= 0.15);
  CHECK(std::sqrt(se_d / n_d) <= 0.20);
}

TEST_CASE("fit_grm is invariant to duplicating every person") {
  const std::vector<GrmItemParams> truth{item("a", 1.3, {1.0, -0.4}), item("b", 0.9, {0.2}),
                                         item("c", 1.7, {0.5, -0.2, -1.2}), item("d", 1.1, {-0.3})};
  const auto y = simulate(truth, 300, 4);
  ResponseMatrix doubled = y;
  for (std::size_t i = 0; i < y.n_persons(); ++i) {
    doubled.person_ids.push_back(y.person_ids[i] + "_dup");
    for (std::size_t j = 0; j < y.n_items(); ++j) doubled.scores.push_back(y.at(i, j));
  }
  const auto f1 = fit_grm(y, PriorSpec{});
  const auto f2 = fit_grm(doubled, PriorSpec{});
  for (std::size_t j = 0; j < truth.size(); ++j) {
    CHECK(std::abs(f1.params[j].slope - f2.params[j].slope) < 1e-6);
    for (std::size_t k = 0; k < truth[j].intercepts.size(); ++k) {
      CHECK(std::abs(f1.params[j].intercepts[k] - f2.params[j].intercepts[k]) < 1e-6);
    }
  }
}

TEST_CASE("fit_grm rejects a constant item column") {
  const std::vector<GrmItemParams> truth{item("a", 1.3, {0.0}), item("b", 0.9, {0.2})};
  auto y = simulate(truth, 200, 8);
  for (std::size_t i = 0; i < y.n_persons(); ++i) y.at(i, 1) = 1;
  try {
    fit_grm(y, PriorSpec{});
    FAIL("expected CalibrationError");
  } catch (const CalibrationError& e) {
    CHECK(e.item_id() == "b");
  }
}

TEST_CASE("missing responses are skipped") {
  const std::vector<GrmItemParams> truth{item("a", 1.3, {0.5, -0.5}), item("b", 0.9, {0.2}),
                                         item("c", 1.5, {0.1})};
  auto y = simulate(truth, 400, 12);
  for (std::size_t i = 0; i < y.n_persons(); i += 7) y.at(i, 0) = kMissing;
  const auto fit = fit_grm(y, PriorSpec{});
  CHECK(fit.converged);
  LoglikTable table(y, fit.params, PriorSpec{});
  const std::vector<std::size_t> items{0, 1, 2};
  const std::vector<int> row{kMissing, y.at(0, 1), y.at(0, 2)};
  CHECK(table.eap(0, items) ==
        doctest::Approx(estimate_theta(row, fit.params, PriorSpec{}, ThetaMethod::EAP)).epsilon(1e-12));
}

#include "procscore/irt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "procscore/error.hpp"
#include "procscore/util.hpp"

namespace procscore::irt {

namespace {

constexpr double kMinProb = 1e-300;

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

// sigma(x) - sigma(y) for x >= y, evaluated on the complement side when both
// are in the upper tail.
double logistic_diff(double x, double y) {
  if (y > 0) return logistic(-y) - logistic(-x);
  return logistic(x) - logistic(y);
}

double category_prob(double theta, double slope, std::span<const double> d, int c) {
  const int top = static_cast<int>(d.size());
  if (c == 0) return logistic(-(slope * theta + d[0]));
  if (c == top) return logistic(slope * theta + d[top - 1]);
  return logistic_diff(slope * theta + d[c - 1], slope * theta + d[c]);
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Item parameters in the unconstrained M-step coordinates:
// (log a, d_1, log(d_1 - d_2), ..., log(d_{C-1} - d_C)).
Eigen::VectorXd to_free(const GrmItemParams& p) {
  const int c = p.max_score();
  Eigen::VectorXd phi(c + 1);
  phi(0) = std::log(p.slope);
  phi(1) = p.intercepts[0];
  for (int k = 1; k < c; ++k) phi(k + 1) = std::log(p.intercepts[k - 1] - p.intercepts[k]);
  return phi;
}

void from_free(const Eigen::VectorXd& phi, GrmItemParams& p) {
  const int c = p.max_score();
  p.slope = std::exp(phi(0));
  p.intercepts[0] = phi(1);
  for (int k = 1; k < c; ++k) p.intercepts[k] = p.intercepts[k - 1] - std::exp(phi(k + 1));
}

// Expected complete-data log-likelihood of one item given expected counts
// r[q * n_cat + c].
double item_objective(const GrmItemParams& p, const QuadratureGrid& grid,
                      std::span<const double> r) {
  const int n_cat = p.n_categories();
  double total = 0.0;
  for (std::size_t q = 0; q < grid.nodes.size(); ++q) {
    for (int c = 0; c < n_cat; ++c) {
      const double w = r[q * n_cat + c];
      if (w == 0.0) continue;
      total += w * std::log(std::max(category_prob(grid.nodes[q], p.slope, p.intercepts, c), kMinProb));
    }
  }
  return total;
}

// Gradient and expected information of item_objective in the free
// coordinates.
void item_score_info(const GrmItemParams& p, const QuadratureGrid& grid,
                     std::span<const double> r, Eigen::VectorXd& grad,
                     Eigen::MatrixXd& info) {
  const int top = p.max_score();
  if (top < 1) return;
  const int n_cat = top + 1;
  const int dim = top + 1;  // (a, d_1..d_C)
  Eigen::VectorXd g_beta = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd i_beta = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<double> w(top + 2, 0.0);
  Eigen::VectorXd dp(dim);
  for (std::size_t q = 0; q < grid.nodes.size(); ++q) {
    const double theta = grid.nodes[q];
    double n_q = 0.0;
    for (int c = 0; c < n_cat; ++c) n_q += r[q * n_cat + c];
    if (n_q == 0.0) continue;
    for (int k = 1; k <= top; ++k) {
      const double s = logistic(p.slope * theta + p.intercepts[k - 1]);
      w[k] = s * (1.0 - s);
    }
    w[0] = 0.0;
    w[top + 1] = 0.0;
    for (int c = 0; c < n_cat; ++c) {
      const double prob = std::max(category_prob(theta, p.slope, p.intercepts, c), kMinProb);
      dp.setZero();
      dp(0) = theta * (w[c] - w[c + 1]);
      if (c >= 1) dp(c) += w[c];
      if (c + 1 <= top) dp(c + 1) -= w[c + 1];
      g_beta += (r[q * n_cat + c] / prob) * dp;
      i_beta.noalias() += (n_q / prob) * dp * dp.transpose();
    }
  }
  // Jacobian d beta / d phi.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
  jac(0, 0) = p.slope;
  for (int c = 1; c <= top; ++c) {
    jac(c, 1) = 1.0;
    for (int k = 2; k <= c; ++k) {
      jac(c, k) = -(p.intercepts[k - 2] - p.intercepts[k - 1]);
    }
  }
  grad = jac.transpose() * g_beta;
  info = jac.transpose() * i_beta * jac;
}

// Damped Fisher scoring. Never decreases the item objective.
void m_step_item(GrmItemParams& p, const QuadratureGrid& grid,
                 std::span<const double> r, int steps) {
  double current = item_objective(p, grid, r);
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
  for (int it = 0; it < steps; ++it) {
    item_score_info(p, grid, r, grad, info);
    const double ridge = 1e-10 * std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
    info.diagonal().array() += ridge;
    Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) break;
    const double max_step = step.cwiseAbs().maxCoeff();
    if (max_step > 1.0) step *= 1.0 / max_step;
    const Eigen::VectorXd phi = to_free(p);
    GrmItemParams trial = p;
    bool accepted = false;
    double scale = 1.0;
    for (int halving = 0; halving < 30; ++halving) {
      from_free(phi + scale * step, trial);
      const double value = item_objective(trial, grid, r);
      if (std::isfinite(value) && value >= current) {
        p = trial;
        current = value;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted || scale * std::min(max_step, 1.0) < 1e-10) break;
  }
}

GrmItemParams initial_params(const ResponseMatrix& y, std::size_t j) {
  const int top = y.n_categories[j] - 1;
  std::vector<double> count(top + 1, 0.0);
  double n = 0.0;
  for (std::size_t i = 0; i < y.n_persons(); ++i) {
    const int s = y.at(i, j);
    if (s == kMissing) continue;
    count[s] += 1.0;
    n += 1.0;
  }
  GrmItemParams p;
  p.item_id = y.item_ids[j];
  p.slope = 1.0;
  p.intercepts.resize(top);
  double above = n;
  for (int c = 1; c <= top; ++c) {
    above -= count[c - 1];
    const double prop = std::clamp(above / n, 0.01, 0.99);
    double d = 1.7 * std::log(prop / (1.0 - prop));
    if (c > 1) d = std::min(d, p.intercepts[c - 2] - 0.1);
    p.intercepts[c - 1] = d;
  }
  return p;
}

}  // namespace

void GrmItemParams::validate() const {
  if (intercepts.empty()) throw DomainError("item " + item_id + ": needs at least one intercept");
  if (!(slope > 0.0) || !std::isfinite(slope)) {
    throw DomainError("item " + item_id + ": slope must be positive and finite");
  }
  for (std::size_t k = 0; k < intercepts.size(); ++k) {
    if (!std::isfinite(intercepts[k])) throw DomainError("item " + item_id + ": non-finite intercept");
    if (k > 0 && !(intercepts[k - 1] > intercepts[k])) {
      throw DomainError("item " + item_id + ": intercepts must be strictly decreasing");
    }
  }
}

void PriorSpec::validate() const {
  if (nodes < 21) throw DomainError("prior: quadrature needs at least 21 nodes");
  if (!(lo < 0.0 && hi > 0.0)) throw DomainError("prior: range must straddle zero");
  if (std::abs(lo + hi) > 1e-12 * std::max(1.0, hi)) throw DomainError("prior: range must be symmetric");
}

QuadratureGrid make_grid(const PriorSpec& prior) {
  prior.validate();
  QuadratureGrid g;
  const int q = prior.nodes;
  g.nodes.resize(q);
  g.weights.resize(q);
  g.log_weights.resize(q);
  double total = 0.0;
  for (int k = 0; k < q; ++k) {
    g.nodes[k] = prior.lo + (prior.hi - prior.lo) * k / (q - 1);
    g.weights[k] = std::exp(-0.5 * g.nodes[k] * g.nodes[k]);
    total += g.weights[k];
  }
  for (int k = 0; k < q; ++k) {
    g.weights[k] /= total;
    g.log_weights[k] = std::log(g.weights[k]);
  }
  return g;
}

std::optional<std::size_t> ResponseMatrix::item_index(std::string_view id) const {
  for (std::size_t j = 0; j < item_ids.size(); ++j) {
    if (item_ids[j] == id) return j;
  }
  return std::nullopt;
}

std::optional<std::size_t> ResponseMatrix::person_index(std::string_view id) const {
  for (std::size_t i = 0; i < person_ids.size(); ++i) {
    if (person_ids[i] == id) return i;
  }
  return std::nullopt;
}

std::vector<std::optional<std::size_t>> ResponseMatrix::person_rows(std::span<const std::string> ids) const {
  std::unordered_map<std::string_view, std::size_t> row_of;
  row_of.reserve(person_ids.size());
  for (std::size_t i = 0; i < person_ids.size(); ++i) row_of.emplace(person_ids[i], i);
  std::vector<std::optional<std::size_t>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = row_of.find(id);
    out.push_back(it == row_of.end() ? std::nullopt : std::optional<std::size_t>(it->second));
  }
  return out;
}

std::size_t ResponseMatrix::require_item(std::string_view id) const {
  auto j = item_index(id);
  if (!j) throw DomainError("unknown item: " + std::string(id));
  return *j;
}

void ResponseMatrix::validate() const {
  if (n_categories.size() != item_ids.size()) throw DomainError("responses: category counts do not match items");
  if (scores.size() != person_ids.size() * item_ids.size()) throw DomainError("responses: score grid has wrong size");
  for (std::size_t j = 0; j < item_ids.size(); ++j) {
    if (n_categories[j] < 2) throw DomainError("responses: item " + item_ids[j] + " needs at least two categories");
  }
  for (std::size_t i = 0; i < n_persons(); ++i) {
    for (std::size_t j = 0; j < n_items(); ++j) {
      const int s = at(i, j);
      if (s == kMissing) continue;
      if (s < 0 || s >= n_categories[j]) {
        throw DomainError("responses: person " + person_ids[i] + " item " + item_ids[j] +
                          " score " + std::to_string(s) + " outside 0.." +
                          std::to_string(n_categories[j] - 1));
      }
    }
  }
}

ResponseMatrix ResponseMatrix::select_persons(std::span<const std::size_t> rows) const {
  ResponseMatrix out;
  out.item_ids = item_ids;
  out.n_categories = n_categories;
  out.person_ids.reserve(rows.size());
  out.scores.reserve(rows.size() * n_items());
  for (std::size_t i : rows) {
    out.person_ids.push_back(person_ids[i]);
    for (std::size_t j = 0; j < n_items(); ++j) out.scores.push_back(at(i, j));
  }
  return out;
}

ResponseMatrix ResponseMatrix::select_items(std::span<const std::size_t> cols) const {
  ResponseMatrix out;
  out.person_ids = person_ids;
  for (std::size_t j : cols) {
    out.item_ids.push_back(item_ids[j]);
    out.n_categories.push_back(n_categories[j]);
  }
  out.scores.reserve(n_persons() * cols.size());
  for (std::size_t i = 0; i < n_persons(); ++i) {
    for (std::size_t j : cols) out.scores.push_back(at(i, j));
  }
  return out;
}

std::string to_string(ThetaMethod m) {
  switch (m) {
    case ThetaMethod::MLE: return "MLE";
    case ThetaMethod::EAP: return "EAP";
    case ThetaMethod::BME: return "BME";
  }
  return "?";
}

ThetaMethod theta_method_from_string(std::string_view s) {
  if (s == "MLE" || s == "mle") return ThetaMethod::MLE;
  if (s == "EAP" || s == "eap") return ThetaMethod::EAP;
  if (s == "BME" || s == "bme") return ThetaMethod::BME;
  throw DomainError("unknown estimator: " + std::string(s));
}

std::vector<double> grm_category_probs(double theta, const GrmItemParams& params) {
  if (!std::isfinite(theta)) throw DomainError("grm_category_probs: theta must be finite");
  params.validate();
  std::vector<double> probs(params.n_categories());
  for (int c = 0; c < params.n_categories(); ++c) {
    probs[c] = category_prob(theta, params.slope, params.intercepts, c);
  }
  return probs;
}

double grm_log_prob(double theta, const GrmItemParams& params, int score) {
  if (score < 0 || score > params.max_score()) throw DomainError("grm_log_prob: score out of range");
  return std::log(std::max(category_prob(theta, params.slope, params.intercepts, score), kMinProb));
}

GrmFit fit_grm(const ResponseMatrix& responses, const PriorSpec& prior,
               const EmConfig& config) {
  responses.validate();
  const std::size_t n = responses.n_persons();
  const std::size_t n_items = responses.n_items();
  if (n_items == 0) throw DomainError("fit_grm: no items");
  GrmFit fit;
  if (n < 100) fit.warnings.push_back("fewer than 100 persons; calibration may be unstable");

  for (std::size_t j = 0; j < n_items; ++j) {
    std::vector<bool> seen(responses.n_categories[j], false);
    int distinct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int s = responses.at(i, j);
      if (s != kMissing && !seen[s]) {
        seen[s] = true;
        ++distinct;
      }
    }
    if (distinct < 2) {
      throw CalibrationError(responses.item_ids[j],
                             "item " + responses.item_ids[j] + " has fewer than two observed categories");
    }
    for (std::size_t c = 0; c < seen.size(); ++c) {
      if (!seen[c]) {
        fit.warnings.push_back("item " + responses.item_ids[j] + ": category " +
                               std::to_string(c) + " never observed");
      }
    }
  }

  const QuadratureGrid grid = make_grid(prior);
  const std::size_t q_count = grid.nodes.size();
  std::vector<GrmItemParams> params(n_items);
  for (std::size_t j = 0; j < n_items; ++j) params[j] = initial_params(responses, j);

  std::vector<std::size_t> offset(n_items + 1, 0);  // into the expected-count buffer
  for (std::size_t j = 0; j < n_items; ++j) {
    offset[j + 1] = offset[j] + q_count * responses.n_categories[j];
  }

  // Fixed chunking makes the summation order independent of thread count.
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> chunk_counts(n_chunks);
  std::vector<double> chunk_ll(n_chunks);

  for (int iter = 0; iter < config.max_iter; ++iter) {
    std::vector<double> logp(offset[n_items]);
    for (std::size_t j = 0; j < n_items; ++j) {
      const int n_cat = responses.n_categories[j];
      for (std::size_t q = 0; q < q_count; ++q) {
        for (int c = 0; c < n_cat; ++c) {
          logp[offset[j] + q * n_cat + c] = grm_log_prob(grid.nodes[q], params[j], c);
        }
      }
    }

    parallel_for(n_chunks, config.threads, [&](std::size_t chunk) {
      auto& counts = chunk_counts[chunk];
      counts.assign(offset[n_items], 0.0);
      double ll = 0.0;
      std::vector<double> post(q_count);
      const std::size_t end = std::min(n, (chunk + 1) * kChunk);
      for (std::size_t i = chunk * kChunk; i < end; ++i) {
        for (std::size_t q = 0; q < q_count; ++q) post[q] = grid.log_weights[q];
        for (std::size_t j = 0; j < n_items; ++j) {
          const int s = responses.at(i, j);
          if (s == kMissing) continue;
          const int n_cat = responses.n_categories[j];
          for (std::size_t q = 0; q < q_count; ++q) post[q] += logp[offset[j] + q * n_cat + s];
        }
        const double norm = log_sum_exp(post);
        ll += norm;
        for (std::size_t q = 0; q < q_count; ++q) post[q] = std::exp(post[q] - norm);
        for (std::size_t j = 0; j < n_items; ++j) {
          const int s = responses.at(i, j);
          if (s == kMissing) continue;
          const int n_cat = responses.n_categories[j];
          for (std::size_t q = 0; q < q_count; ++q) counts[offset[j] + q * n_cat + s] += post[q];
        }
      }
      chunk_ll[chunk] = ll;
    });

    std::vector<double> counts(offset[n_items], 0.0);
    double ll = 0.0;
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      ll += chunk_ll[chunk];
      for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += chunk_counts[chunk][k];
    }
    fit.loglik_trace.push_back(ll);

    const std::vector<GrmItemParams> before = params;
    parallel_for(n_items, config.threads, [&](std::size_t j) {
      std::span<const double> r(counts.data() + offset[j], offset[j + 1] - offset[j]);
      m_step_item(params[j], grid, r, config.newton_steps);
    });

    double change = 0.0;
    for (std::size_t j = 0; j < n_items; ++j) {
      change = std::max(change, std::abs(params[j].slope - before[j].slope));
      for (std::size_t k = 0; k < params[j].intercepts.size(); ++k) {
        change = std::max(change, std::abs(params[j].intercepts[k] - before[j].intercepts[k]));
      }
    }
    fit.iterations = iter + 1;
    if (change < config.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.loglik_trace.push_back(marginal_loglik(responses, params, prior));
  if (!fit.converged) fit.warnings.push_back("EM did not converge within max_iter");
  fit.params = std::move(params);
  return fit;
}

double marginal_loglik(const ResponseMatrix& responses,
                       std::span<const GrmItemParams> params,
                       const PriorSpec& prior) {
  if (params.size() != responses.n_items()) throw DomainError("marginal_loglik: params do not match items");
  const QuadratureGrid grid = make_grid(prior);
  const std::size_t q_count = grid.nodes.size();
  std::vector<std::vector<double>> logp(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    const int n_cat = params[j].n_categories();
    logp[j].resize(q_count * n_cat);
    for (std::size_t q = 0; q < q_count; ++q) {
      for (int c = 0; c < n_cat; ++c) logp[j][q * n_cat + c] = grm_log_prob(grid.nodes[q], params[j], c);
    }
  }
  // Same chunked summation order as fit_grm.
  constexpr std::size_t kChunk = 64;
  double total = 0.0;
  std::vector<double> post(q_count);
  for (std::size_t start = 0; start < responses.n_persons(); start += kChunk) {
    double ll = 0.0;
    const std::size_t end = std::min(responses.n_persons(), start + kChunk);
    for (std::size_t i = start; i < end; ++i) {
      for (std::size_t q = 0; q < q_count; ++q) post[q] = grid.log_weights[q];
      for (std::size_t j = 0; j < params.size(); ++j) {
        const int s = responses.at(i, j);
        if (s == kMissing) continue;
        const int n_cat = params[j].n_categories();
        for (std::size_t q = 0; q < q_count; ++q) post[q] += logp[j][q * n_cat + s];
      }
      ll += log_sum_exp(post);
    }
    total += ll;
  }
  return total;
}

namespace {

// d/dtheta of the log-likelihood of the observed pattern.
double loglik_slope(double theta, std::span<const int> scores,
                    std::span<const GrmItemParams> params) {
  double total = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const int s = scores[k];
    if (s == kMissing) continue;
    const auto& p = params[k];
    const int top = p.max_score();
    auto w = [&](int c) {
      if (c <= 0 || c > top) return 0.0;
      const double v = logistic(p.slope * theta + p.intercepts[c - 1]);
      return v * (1.0 - v);
    };
    const double prob = std::max(category_prob(theta, p.slope, p.intercepts, s), kMinProb);
    total += p.slope * (w(s) - w(s + 1)) / prob;
  }
  return total;
}

// Root of a decreasing function on [lo, hi] by bisection; clamps to the
// boundary when there is no sign change.
template <class F>
double decreasing_root(F&& f, double lo, double hi) {
  if (f(lo) <= 0.0) return lo;
  if (f(hi) >= 0.0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double estimate_theta(std::span<const int> scores,
                      std::span<const GrmItemParams> params,
                      const PriorSpec& prior, ThetaMethod method) {
  if (scores.size() != params.size()) throw DomainError("estimate_theta: scores and params differ in length");
  prior.validate();
  bool any = false;
  bool all_min = true;
  bool all_max = true;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] == kMissing) continue;
    if (scores[k] < 0 || scores[k] > params[k].max_score()) {
      throw DomainError("estimate_theta: score out of range for item " + params[k].item_id);
    }
    any = true;
    all_min = all_min && scores[k] == 0;
    all_max = all_max && scores[k] == params[k].max_score();
  }
  if (!any) throw DomainError("estimate_theta: no observed responses");

  switch (method) {
    case ThetaMethod::EAP: {
      const QuadratureGrid grid = make_grid(prior);
      std::vector<double> post(grid.nodes.size());
      for (std::size_t q = 0; q < post.size(); ++q) {
        double v = grid.log_weights[q];
        for (std::size_t k = 0; k < scores.size(); ++k) {
          if (scores[k] != kMissing) v += grm_log_prob(grid.nodes[q], params[k], scores[k]);
        }
        post[q] = v;
      }
      const double norm = log_sum_exp(post);
      double mean = 0.0;
      for (std::size_t q = 0; q < post.size(); ++q) mean += grid.nodes[q] * std::exp(post[q] - norm);
      return mean;
    }
    case ThetaMethod::MLE: {
      if (all_min || all_max) {
        throw DivergenceError("estimate_theta: MLE does not exist for an all-minimum or all-maximum pattern; use EAP");
      }
      return decreasing_root([&](double t) { return loglik_slope(t, scores, params); }, prior.lo, prior.hi);
    }
    case ThetaMethod::BME:
      return decreasing_root([&](double t) { return loglik_slope(t, scores, params) - t; }, prior.lo,
                             prior.hi);
  }
  throw DomainError("estimate_theta: unknown method");
}

ThetaEstimate estimate_person(const ResponseMatrix& responses, std::size_t person,
                              std::span<const GrmItemParams> params,
                              std::span<const std::size_t> items,
                              const PriorSpec& prior, ThetaMethod method) {
  if (params.size() != items.size()) throw DomainError("estimate_person: one parameter set per item required");
  ThetaEstimate est;
  est.person_id = responses.person_ids.at(person);
  est.method = method;
  std::vector<int> row;
  for (std::size_t j : items) {
    row.push_back(responses.at(person, j));
    est.item_set.push_back(responses.item_ids.at(j));
  }
  est.value = estimate_theta(row, params, prior, method);
  return est;
}

LoglikTable::LoglikTable(const ResponseMatrix& responses,
                         std::span<const GrmItemParams> params,
                         const PriorSpec& prior)
    : n_items_(responses.n_items()), grid_(make_grid(prior)) {
  if (params.size() != n_items_) throw DomainError("LoglikTable: params do not match items");
  const std::size_t q_count = grid_.nodes.size();
  std::vector<std::vector<double>> logp(n_items_);
  for (std::size_t j = 0; j < n_items_; ++j) {
    const int n_cat = params[j].n_categories();
    if (n_cat != responses.n_categories[j]) {
      throw DomainError("LoglikTable: category count mismatch for item " + responses.item_ids[j]);
    }
    logp[j].resize(q_count * n_cat);
    for (std::size_t q = 0; q < q_count; ++q) {
      for (int c = 0; c < n_cat; ++c) logp[j][q * n_cat + c] = grm_log_prob(grid_.nodes[q], params[j], c);
    }
  }
  table_.assign(responses.n_persons() * n_items_ * q_count, 0.0);
  observed_.assign(responses.n_persons() * n_items_, 0);
  for (std::size_t i = 0; i < responses.n_persons(); ++i) {
    for (std::size_t j = 0; j < n_items_; ++j) {
      const int s = responses.at(i, j);
      if (s == kMissing) continue;
      observed_[i * n_items_ + j] = 1;
      const int n_cat = params[j].n_categories();
      double* dst = &table_[(i * n_items_ + j) * q_count];
      for (std::size_t q = 0; q < q_count; ++q) dst[q] = logp[j][q * n_cat + s];
    }
  }
}

double LoglikTable::eap(std::size_t person, std::span<const std::size_t> items) const {
  const std::size_t q_count = grid_.nodes.size();
  std::vector<double> post(grid_.log_weights);
  bool any = false;
  for (std::size_t j : items) {
    if (!observed_[person * n_items_ + j]) continue;
    any = true;
    const double* src = &table_[(person * n_items_ + j) * q_count];
    for (std::size_t q = 0; q < q_count; ++q) post[q] += src[q];
  }
  if (!any) throw DomainError("LoglikTable::eap: no observed responses");
  const double norm = log_sum_exp(post);
  double mean = 0.0;
  for (std::size_t q = 0; q < q_count; ++q) mean += grid_.nodes[q] * std::exp(post[q] - norm);
  return mean;
}

std::vector<double> LoglikTable::eap(std::span<const std::size_t> persons,
                                     std::span<const std::size_t> items) const {
  std::vector<double> out;
  out.reserve(persons.size());
  for (std::size_t i : persons) out.push_back(eap(i, items));
  return out;
}

}  // namespace procscore::irt

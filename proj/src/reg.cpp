#include "procscore/reg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "procscore/error.hpp"
#include "procscore/util.hpp"

namespace procscore::reg {

namespace {

void check_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DomainError("ridge: X has " + std::to_string(X.rows()) + " rows but y has " +
                                              std::to_string(y.size()));
  if (!X.allFinite()) throw DomainError("ridge: non-finite feature entries");
  if (!y.allFinite()) throw DomainError("ridge: non-finite targets");
}

struct Standardized {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;
  Eigen::MatrixXd Z;  // constant columns zeroed
  std::vector<bool> constant;
  Eigen::VectorXd yc;
  double ymean = 0.0;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Standardized s;
  const double n = static_cast<double>(X.rows());
  s.means = X.colwise().mean().transpose();
  s.scales.resize(X.cols());
  s.Z.resize(X.rows(), X.cols());
  s.constant.assign(X.cols(), false);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const Eigen::VectorXd centered = X.col(c).array() - s.means(c);
    const double sd = std::sqrt(centered.squaredNorm() / n);
    const bool constant = (X.col(c).array() == X(0, c)).all() || sd <= 1e-12 * (1.0 + std::abs(s.means(c)));
    s.constant[c] = constant;
    if (constant) {
      s.scales(c) = 1.0;
      s.Z.col(c).setZero();
    } else {
      s.scales(c) = sd;
      s.Z.col(c) = centered / sd;
    }
  }
  s.ymean = y.mean();
  s.yc = y.array() - s.ymean;
  return s;
}

Eigen::VectorXd solve_weights(const Eigen::MatrixXd& Z, const Eigen::VectorXd& yc, double lambda) {
  if (Z.cols() == 0) return Eigen::VectorXd();
  if (lambda == 0.0) return Z.completeOrthogonalDecomposition().solve(yc);
  Eigen::MatrixXd A = Z.transpose() * Z;
  A.diagonal().array() += lambda;
  return A.ldlt().solve(Z.transpose() * yc);
}

// Squared held-out errors of one fold for every grid value.
std::vector<double> fold_errors(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::vector<int>& fold_ids, int fold,
                                const std::vector<double>& grid) {
  std::vector<Eigen::Index> train, test;
  for (Eigen::Index i = 0; i < X.rows(); ++i) (fold_ids[i] == fold ? test : train).push_back(i);
  const Eigen::MatrixXd Xtr = X(train, Eigen::all);
  const Eigen::VectorXd ytr = y(train);
  const Standardized s = standardize(Xtr, ytr);

  Eigen::MatrixXd Zte(static_cast<Eigen::Index>(test.size()), X.cols());
  for (std::size_t r = 0; r < test.size(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      Zte(static_cast<Eigen::Index>(r), c) = s.constant[c] ? 0.0 : (X(test[r], c) - s.means(c)) / s.scales(c);
    }
  }

  const Eigen::Index p = X.cols();
  std::vector<double> out(grid.size(), 0.0);
  if (p == 0) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (auto i : test) out[g] += (y(i) - s.ymean) * (y(i) - s.ymean);
    }
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.Z.transpose() * s.Z);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::VectorXd b = V.transpose() * (s.Z.transpose() * s.yc);
  const Eigen::MatrixXd ZV = Zte * V;
  const double cutoff = 1e-12 * std::max(ev.maxCoeff(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Eigen::VectorXd coef(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      const double denom = ev(k) + grid[g];
      coef(k) = (grid[g] == 0.0 && ev(k) <= cutoff) || denom <= 0.0 ? 0.0 : b(k) / denom;
    }
    const Eigen::VectorXd pred = (ZV * coef).array() + s.ymean;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const double e = y(test[r]) - pred(static_cast<Eigen::Index>(r));
      out[g] += e * e;
    }
  }
  return out;
}

}  // namespace

void RidgeModel::validate() const {
  if (means.size() != weights.size() || scales.size() != weights.size()) {
    throw DomainError("ridge model: inconsistent widths");
  }
  if (!weights.allFinite() || !means.allFinite() || !std::isfinite(intercept) || !std::isfinite(lambda)) {
    throw DomainError("ridge model: non-finite parameters");
  }
  if ((scales.array() <= 0.0).any()) throw DomainError("ridge model: scales must be positive");
  if (lambda < 0.0) throw DomainError("ridge model: negative lambda");
}

RidgeModel ridge_fit_fixed(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  check_finite(X, y);
  if (X.rows() < 1) throw DomainError("ridge: no rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("ridge: lambda must be finite and nonnegative");
  const Standardized s = standardize(X, y);
  RidgeModel m;
  m.means = s.means;
  m.scales = s.scales;
  m.intercept = s.ymean;
  m.lambda = lambda;
  m.weights = solve_weights(s.Z, s.yc, lambda);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (s.constant[c]) m.weights(c) = 0.0;
  }
  return m;
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n,
                                        double ratio) {
  check_finite(X, y);
  if (n < 1) throw DomainError("lambda grid needs at least one value");
  if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("lambda_min_ratio must lie in (0, 1)");
  const Standardized s = standardize(X, y);
  const double sd_y = std::sqrt(s.yc.squaredNorm() / static_cast<double>(y.size()));
  double top = X.cols() > 0 ? (s.Z.transpose() * s.yc).cwiseAbs().maxCoeff() : 0.0;
  double lambda_max = sd_y > 0.0 && top > 0.0 ? 1000.0 * top / sd_y : 1.0;
  std::vector<double> grid(n);
  for (int k = 0; k < n; ++k) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
    grid[k] = lambda_max * std::pow(ratio, frac);
  }
  return grid;
}

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw DomainError("cross-validation needs at least 2 folds");
  if (n < static_cast<std::size_t>(folds)) {
    throw DomainError("cross-validation: " + std::to_string(n) + " rows for " + std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "folds", n));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  std::vector<int> out(n);
  for (std::size_t k = 0; k < n; ++k) out[perm[k]] = static_cast<int>(k % folds);
  return out;
}

RidgeFit ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeConfig& config) {
  check_finite(X, y);
  const std::size_t n = static_cast<std::size_t>(X.rows());
  std::vector<int> fold_ids = config.fold_ids;
  int folds = config.folds;
  if (fold_ids.empty()) {
    fold_ids = assign_folds(n, folds, config.seed);
  } else {
    if (fold_ids.size() != n) throw DomainError("ridge: fold_ids length does not match rows");
    folds = *std::max_element(fold_ids.begin(), fold_ids.end()) + 1;
    if (folds < 2 || *std::min_element(fold_ids.begin(), fold_ids.end()) < 0) {
      throw DomainError("ridge: fold ids must be 0..k-1 with k >= 2");
    }
    for (int f = 0; f < folds; ++f) {
      if (std::find(fold_ids.begin(), fold_ids.end(), f) == fold_ids.end()) {
        throw DomainError("ridge: fold " + std::to_string(f) + " is empty");
      }
    }
  }

  std::vector<double> grid = config.lambda_grid.empty()
                                 ? default_lambda_grid(X, y, config.n_lambda, config.lambda_min_ratio)
                                 : config.lambda_grid;
  for (double l : grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw DomainError("ridge: lambda grid must be finite and nonnegative");
  }

  std::vector<std::vector<double>> per_fold(folds);
  parallel_for(static_cast<std::size_t>(folds), config.threads,
               [&](std::size_t f) { per_fold[f] = fold_errors(X, y, fold_ids, static_cast<int>(f), grid); });

  RidgeFit fit;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (int f = 0; f < folds; ++f) sum += per_fold[f][g];
    fit.cv_curve.push_back({grid[g], sum / static_cast<double>(n)});
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const auto& c = fit.cv_curve[g];
    const auto& b = fit.cv_curve[best];
    if (c.error < b.error || (c.error == b.error && c.lambda > b.lambda)) best = g;
  }
  fit.selected = best;
  fit.model = ridge_fit_fixed(X, y, grid[best]);
  return fit;
}

Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.width()) {
    throw DomainError("ridge_predict: " + std::to_string(X.cols()) + " columns, model expects " +
                      std::to_string(model.width()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), model.intercept);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (model.weights(c) == 0.0) continue;
    out += ((X.col(c).array() - model.means(c)) / model.scales(c) * model.weights(c)).matrix();
  }
  return out;
}

LinearModel ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw DomainError("ols_fit: length mismatch");
  if (x.size() < 2) throw DomainError("ols_fit: needs at least 2 points");
  if (!x.allFinite() || !y.allFinite()) throw DomainError("ols_fit: non-finite input");
  if ((x.array() == x(0)).all()) throw DegenerateDesignError("ols_fit: predictor is constant");
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd dx = x.array() - mx;
  const double sxx = dx.square().sum();
  if (sxx <= 0.0) throw DegenerateDesignError("ols_fit: predictor is constant");
  LinearModel m;
  m.slope = (dx * (y.array() - my)).sum() / sxx;
  m.intercept = my - m.slope * mx;
  return m;
}

}  // namespace procscore::reg

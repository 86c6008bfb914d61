#pragma once

// Ridge regression with k-fold cross-validated penalty, and simple linear
// regression.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace procscore::reg {

struct RidgeModel {
  Eigen::VectorXd weights;  // on standardized columns
  double intercept = 0.0;
  double lambda = 0.0;
  Eigen::VectorXd means;
  Eigen::VectorXd scales;  // 1/N standard deviations; 1 for constant columns

  Eigen::Index width() const { return weights.size(); }
  void validate() const;
};

struct RidgeConfig {
  std::vector<double> lambda_grid;  // empty: default_lambda_grid
  int n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  int folds = 10;
  std::uint64_t seed = 0;
  // Explicit fold of each row; overrides `seed` when nonempty.
  std::vector<int> fold_ids;
  int threads = 1;
};

struct CvPoint {
  double lambda = 0.0;
  double error = 0.0;  // mean squared error over all held-out rows
};

struct RidgeFit {
  RidgeModel model;
  std::vector<CvPoint> cv_curve;  // in grid order
  std::size_t selected = 0;
};

// The penalty is lambda * |w|^2 on standardized columns, unscaled by N:
// w = (Z'Z + lambda I)^-1 Z'(y - mean(y)).
RidgeModel ridge_fit_fixed(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
RidgeFit ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeConfig& config = {});
Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X);

// n log-spaced values from ratio * lambda_max up to lambda_max, descending,
// with lambda_max = 1000 * max_j |z_j'(y - mean(y))| / sd(y).
std::vector<double> default_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n,
                                        double ratio);

// Balanced random fold labels; a deterministic function of (seed, n).
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

struct LinearModel {
  double slope = 0.0;
  double intercept = 0.0;

  double predict(double x) const { return intercept + slope * x; }
};

// Throws DegenerateDesignError when x is constant.
LinearModel ols_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace procscore::reg

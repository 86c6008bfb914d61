#pragma once

// Metric multidimensional scaling of dissimilarity matrices, out-of-sample
// projection, and assembly of per-item features into one design matrix.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "procscore/irt.hpp"
#include "procscore/seqdiss.hpp"

namespace procscore::mds {

struct EmbeddingModel {
  std::string item_id;
  int K = 30;
  std::vector<std::string> train_ids;
  Eigen::MatrixXd coords;  // N x K, column-centered
  double final_stress = 0.0;
  bool augment_with_score = true;

  std::size_t n_train() const { return train_ids.size(); }
  void validate() const;
};

struct SmacofConfig {
  int max_iter = 500;
  double rel_tol = 1e-7;
  int threads = 1;
};

struct EmbeddingFit {
  EmbeddingModel model;
  std::vector<double> stress_trace;  // initial configuration first
  int iterations = 0;
  bool converged = false;
};

// Raw stress: sum over i < j of (d_ij - |X_i - X_j|)^2.
double stress(const Eigen::MatrixXd& d, const Eigen::MatrixXd& X);

// Classical scaling start followed by SMACOF majorization.
EmbeddingFit embed_train(const seqdiss::DissimilarityMatrix& dmat, int K,
                         const SmacofConfig& config = {},
                         const std::string& item_id = "");

// sum_i (d_i - |X_i - x|)^2 for a new point x.
double projection_objective(const EmbeddingModel& model, std::span<const double> cross_d,
                            const Eigen::VectorXd& x);

struct ProjectionResult {
  Eigen::VectorXd point;
  double objective = 0.0;
  std::vector<Eigen::VectorXd> starts;
  std::vector<double> start_objectives;
};

// BFGS from the 5 training points with the smallest dissimilarity and their
// centroid; the best local minimum is returned.
ProjectionResult embed_project_detail(const EmbeddingModel& model, std::span<const double> cross_d);
Eigen::VectorXd embed_project(const EmbeddingModel& model, std::span<const double> cross_d);

// Coordinates of a set of persons on one item, either training coordinates
// or projections.
struct ItemFeatures {
  std::string item_id;
  std::vector<std::string> person_ids;
  Eigen::MatrixXd values;  // persons x K
};

ItemFeatures training_features(const EmbeddingModel& model);

struct FeatureMatrix {
  std::vector<std::string> person_ids;
  std::vector<std::string> item_ids;
  std::vector<std::string> column_labels;
  Eigen::MatrixXd values;

  void validate() const;
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
};

// Column-binds the item blocks in the given order for `person_ids`. With
// `augment`, each block is followed by the one-hot indicators of the
// person's score on that item (all zero when the score is missing).
FeatureMatrix build_feature_matrix(std::span<const ItemFeatures> items,
                                   const std::vector<std::string>& person_ids,
                                   const irt::ResponseMatrix* responses, bool augment);

}  // namespace procscore::mds

#include "procscore/mds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "procscore/error.hpp"
#include "procscore/util.hpp"

namespace procscore::mds {

namespace {

void check_dissimilarities(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw DomainError("dissimilarity matrix is not square");
  const Eigen::Index n = d.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) throw DomainError("dissimilarity matrix has a nonzero diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!std::isfinite(d(i, j)) || d(i, j) < 0.0) {
        throw DomainError("dissimilarities must be finite and nonnegative");
      }
      if (std::abs(d(i, j) - d(j, i)) > 1e-12) throw DomainError("dissimilarity matrix is not symmetric");
    }
  }
}

// Pairwise distances of the rows of X, full symmetric matrix.
void distances(const Eigen::MatrixXd& X, Eigen::MatrixXd& out, int threads) {
  const Eigen::Index n = X.rows();
  out.resize(n, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    out(i, i) = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) out(j, i) = (X.row(i) - X.row(j)).norm();
    }
  });
}

double stress_from(const Eigen::MatrixXd& d, const Eigen::MatrixXd& dist) {
  const Eigen::Index n = d.rows();
  double s = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) {
      const double r = d(i, j) - dist(i, j);
      col += r * r;
    }
    s += col;
  }
  return s;
}

Eigen::MatrixXd classical_scaling(const Eigen::MatrixXd& d, int K) {
  const Eigen::Index n = d.rows();
  Eigen::MatrixXd B = -0.5 * d.array().square().matrix();
  const Eigen::VectorXd row_mean = B.rowwise().mean();
  const double grand = row_mean.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) B(i, j) += grand - row_mean(i) - row_mean(j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  if (eig.info() != Eigen::Success) throw DomainError("classical scaling eigendecomposition failed");
  Eigen::MatrixXd X(n, K);
  for (int k = 0; k < K; ++k) {
    const Eigen::Index idx = n - 1 - k;  // eigenvalues ascend
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    // Fix the sign so the start does not depend on the solver's choice.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    X.col(k) = v * std::sqrt(std::max(eig.eigenvalues()(idx), 0.0));
  }
  return X;
}

void center(Eigen::MatrixXd& X) {
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
}

struct ProjectionProblem {
  const Eigen::MatrixXd& X;
  std::span<const double> d;

  double value(const Eigen::VectorXd& x) const {
    double f = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double r = d[i] - (X.row(i).transpose() - x).norm();
      f += r * r;
    }
    return f;
  }

  // Gradient, taking the zero subgradient at points coinciding with X_i.
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Eigen::VectorXd diff = x - X.row(i).transpose();
      const double r = diff.norm();
      if (r > 0.0) g += (2.0 * (r - d[i]) / r) * diff;
    }
    return g;
  }

  Eigen::VectorXd majorize(const Eigen::VectorXd& x) const {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Eigen::VectorXd xi = X.row(i).transpose();
      const Eigen::VectorXd diff = x - xi;
      const double r = diff.norm();
      next += xi;
      if (r > 0.0) next += (d[i] / r) * diff;
    }
    return next / static_cast<double>(X.rows());
  }
};

Eigen::VectorXd bfgs(const ProjectionProblem& prob, Eigen::VectorXd x) {
  const Eigen::Index k = x.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(k, k) / (2.0 * static_cast<double>(prob.X.rows()));
  double f = prob.value(x);
  Eigen::VectorXd g = prob.gradient(x);
  for (int it = 0; it < 500; ++it) {
    if (g.norm() <= 1e-10 * (1.0 + f)) break;
    Eigen::VectorXd p = -H * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      H = Eigen::MatrixXd::Identity(k, k) / (2.0 * static_cast<double>(prob.X.rows()));
      p = -H * g;
      slope = g.dot(p);
    }
    double alpha = 1.0;
    Eigen::VectorXd x_new;
    double f_new = f;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      x_new = x + alpha * p;
      f_new = prob.value(x_new);
      if (f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      x_new = prob.majorize(x);
      f_new = prob.value(x_new);
      if (!(f_new < f)) break;
      H = Eigen::MatrixXd::Identity(k, k) / (2.0 * static_cast<double>(prob.X.rows()));
    }
    const Eigen::VectorXd g_new = prob.gradient(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double decrease = f - f_new;
    x = x_new;
    f = f_new;
    g = g_new;
    if (decrease <= 1e-15 * (1.0 + f) && s.norm() <= 1e-12) break;
    if (accepted && sy > 1e-16 * s.squaredNorm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
  }
  return x;
}

}  // namespace

void EmbeddingModel::validate() const {
  if (K < 1) throw DomainError("embedding dimension must be positive");
  if (coords.rows() != static_cast<Eigen::Index>(train_ids.size()) || coords.cols() != K) {
    throw DomainError("embedding coordinates do not match ids and K");
  }
  if (!coords.allFinite()) throw DomainError("embedding coordinates are not finite");
  if (!(final_stress >= 0.0)) throw DomainError("embedding stress must be nonnegative");
}

double stress(const Eigen::MatrixXd& d, const Eigen::MatrixXd& X) {
  if (d.rows() != X.rows()) throw DomainError("stress: size mismatch");
  Eigen::MatrixXd dist;
  distances(X, dist, 1);
  return stress_from(d, dist);
}

EmbeddingFit embed_train(const seqdiss::DissimilarityMatrix& dmat, int K,
                         const SmacofConfig& config, const std::string& item_id) {
  const Eigen::MatrixXd& d = dmat.values;
  check_dissimilarities(d);
  const Eigen::Index n = d.rows();
  if (static_cast<Eigen::Index>(dmat.ids.size()) != n) throw DomainError("dissimilarity ids do not match matrix");
  if (K < 1) throw DomainError("embedding dimension must be positive");
  if (K >= n) {
    throw DomainError("embedding dimension K=" + std::to_string(K) + " must be below the number of persons " +
                      std::to_string(n));
  }

  EmbeddingFit fit;
  Eigen::MatrixXd X = classical_scaling(d, K);
  Eigen::MatrixXd dist;
  distances(X, dist, config.threads);
  double s = stress_from(d, dist);
  fit.stress_trace.push_back(s);

  Eigen::MatrixXd next(n, K);
  while (fit.iterations < config.max_iter) {
    if (s == 0.0) {
      fit.converged = true;
      break;
    }
    parallel_for(static_cast<std::size_t>(n), config.threads, [&](std::size_t ii) {
      const auto i = static_cast<Eigen::Index>(ii);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(K);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || dist(j, i) <= 0.0) continue;
        acc += (d(j, i) / dist(j, i)) * (X.row(i) - X.row(j));
      }
      next.row(i) = acc / static_cast<double>(n);
    });
    X.swap(next);
    distances(X, dist, config.threads);
    const double s_new = stress_from(d, dist);
    fit.stress_trace.push_back(s_new);
    ++fit.iterations;
    const double rel = (s - s_new) / s;
    s = s_new;
    if (rel < config.rel_tol) {
      fit.converged = true;
      break;
    }
  }

  center(X);
  fit.model.item_id = item_id;
  fit.model.K = K;
  fit.model.train_ids = dmat.ids;
  fit.model.final_stress = stress(d, X);
  fit.model.coords = std::move(X);
  return fit;
}

double projection_objective(const EmbeddingModel& model, std::span<const double> cross_d,
                            const Eigen::VectorXd& x) {
  if (cross_d.size() != model.n_train()) throw DomainError("cross dissimilarities do not match training size");
  return ProjectionProblem{model.coords, cross_d}.value(x);
}

ProjectionResult embed_project_detail(const EmbeddingModel& model, std::span<const double> cross_d) {
  const std::size_t n = model.n_train();
  if (cross_d.size() != n) {
    throw DomainError("cross dissimilarities have length " + std::to_string(cross_d.size()) + ", expected " +
                      std::to_string(n));
  }
  for (double v : cross_d) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("cross dissimilarities must be finite and nonnegative");
  }
  if (n == 0) throw DomainError("embedding has no training points");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t m = std::min<std::size_t>(5, n);
  std::partial_sort(order.begin(), order.begin() + m, order.end(), [&](std::size_t a, std::size_t b) {
    return cross_d[a] < cross_d[b] || (cross_d[a] == cross_d[b] && a < b);
  });

  ProjectionResult out;
  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(model.K);
  for (std::size_t k = 0; k < m; ++k) {
    out.starts.push_back(model.coords.row(order[k]).transpose());
    centroid += out.starts.back();
  }
  out.starts.push_back(centroid / static_cast<double>(m));

  const ProjectionProblem prob{model.coords, cross_d};
  bool first = true;
  for (const auto& start : out.starts) {
    out.start_objectives.push_back(prob.value(start));
    Eigen::VectorXd x = bfgs(prob, start);
    const double f = prob.value(x);
    if (first || f < out.objective) {
      out.point = std::move(x);
      out.objective = f;
      first = false;
    }
  }
  return out;
}

Eigen::VectorXd embed_project(const EmbeddingModel& model, std::span<const double> cross_d) {
  return embed_project_detail(model, cross_d).point;
}

ItemFeatures training_features(const EmbeddingModel& model) {
  return {model.item_id, model.train_ids, model.coords};
}

void FeatureMatrix::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(person_ids.size())) {
    throw DomainError("feature matrix rows do not match person ids");
  }
  if (values.cols() != static_cast<Eigen::Index>(column_labels.size())) {
    throw DomainError("feature matrix columns do not match labels");
  }
  if (!values.allFinite()) throw DomainError("feature matrix has non-finite entries");
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.item_ids = item_ids;
  out.column_labels = column_labels;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.person_ids.push_back(person_ids.at(rows[r]));
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

FeatureMatrix build_feature_matrix(std::span<const ItemFeatures> items,
                                   const std::vector<std::string>& person_ids,
                                   const irt::ResponseMatrix* responses, bool augment) {
  if (augment && responses == nullptr) throw DomainError("augmented features need responses");
  FeatureMatrix out;
  out.person_ids = person_ids;
  Eigen::Index width = 0;
  std::vector<std::size_t> response_cols;
  for (const auto& item : items) {
    if (static_cast<Eigen::Index>(item.person_ids.size()) != item.values.rows()) {
      throw DomainError("features of item " + item.item_id + " do not match their person ids");
    }
    out.item_ids.push_back(item.item_id);
    width += item.values.cols();
    if (augment) {
      response_cols.push_back(responses->require_item(item.item_id));
      width += responses->n_categories[response_cols.back()];
    }
  }

  const auto n = static_cast<Eigen::Index>(person_ids.size());
  out.values = Eigen::MatrixXd::Zero(n, width);
  std::vector<std::size_t> response_rows;
  if (augment) {
    const auto rows = responses->person_rows(person_ids);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i]) throw DomainError("person " + person_ids[i] + " has no responses for score indicators");
      response_rows.push_back(*rows[i]);
    }
  }

  Eigen::Index col = 0;
  for (std::size_t b = 0; b < items.size(); ++b) {
    const auto& item = items[b];
    std::unordered_map<std::string_view, Eigen::Index> row_of;
    row_of.reserve(item.person_ids.size());
    for (std::size_t r = 0; r < item.person_ids.size(); ++r) row_of.emplace(item.person_ids[r], r);
    const Eigen::Index k = item.values.cols();
    for (Eigen::Index c = 0; c < k; ++c) out.column_labels.push_back(item.item_id + "_d" + std::to_string(c + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
      auto it = row_of.find(person_ids[i]);
      if (it == row_of.end()) {
        throw DomainError("person " + person_ids[i] + " has no features for item " + item.item_id);
      }
      out.values.block(i, col, 1, k) = item.values.row(it->second);
    }
    col += k;
    if (augment) {
      const int levels = responses->n_categories[response_cols[b]];
      for (int c = 0; c < levels; ++c) out.column_labels.push_back(item.item_id + "_s" + std::to_string(c));
      for (Eigen::Index i = 0; i < n; ++i) {
        const int y = responses->at(response_rows[i], response_cols[b]);
        if (y >= 0) out.values(i, col + y) = 1.0;
      }
      col += levels;
    }
  }
  return out;
}

}  // namespace procscore::mds

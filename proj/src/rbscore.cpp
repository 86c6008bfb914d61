#include "procscore/rbscore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "procscore/error.hpp"

namespace procscore::rbscore {

void ItemPartition::validate() const {
  if (B1.empty() || B2.empty()) throw DomainError("item partition: B1 and B2 must be nonempty");
  std::set<std::string> seen;
  for (const auto& id : B1) {
    if (!seen.insert(id).second) throw DomainError("item partition: repeated item " + id);
  }
  for (const auto& id : B2) {
    if (!seen.insert(id).second) throw DomainError("item partition: item " + id + " appears twice or in both sets");
  }
}

const irt::GrmItemParams& ScoringRule::params_for(const std::string& item_id) const {
  for (const auto& p : grm_params) {
    if (p.item_id == item_id) return p;
  }
  throw DomainError("scoring rule has no parameters for item " + item_id);
}

void ScoringRule::validate() const {
  partition.validate();
  for (const auto& id : partition.B1) params_for(id).validate();
  for (const auto& id : partition.B2) params_for(id).validate();
  prior.validate();
  f1.validate();
  if (f1.width() != static_cast<Eigen::Index>(feature_layout.size())) {
    throw DomainError("scoring rule: f1 width " + std::to_string(f1.width()) + " differs from the feature layout " +
                      std::to_string(feature_layout.size()));
  }
  if (!std::isfinite(f2.slope) || !std::isfinite(f2.intercept)) throw DomainError("scoring rule: f2 is not finite");
  if (n_categories.size() != partition.B1.size()) throw DomainError("scoring rule: category counts do not cover B1");
  if (has_embeddings()) {
    if (embedding.models.size() != partition.B1.size() || embedding.sequences.size() != partition.B1.size()) {
      throw DomainError("scoring rule: embeddings must cover exactly B1");
    }
    std::size_t width = 0;
    for (std::size_t b = 0; b < partition.B1.size(); ++b) {
      const auto& m = embedding.models[b];
      m.validate();
      if (m.item_id != partition.B1[b]) throw DomainError("scoring rule: embedding order differs from B1");
      if (embedding.sequences[b].size() != m.n_train()) {
        throw DomainError("scoring rule: reference sequences of " + m.item_id + " do not match the embedding");
      }
      for (std::size_t i = 0; i < m.n_train(); ++i) {
        if (embedding.sequences[b][i].person_id != m.train_ids[i]) {
          throw DomainError("scoring rule: reference sequences of " + m.item_id + " are out of order");
        }
      }
      width += static_cast<std::size_t>(m.K) + (augment ? static_cast<std::size_t>(n_categories[b]) : 0);
    }
    if (width != feature_layout.size()) throw DomainError("scoring rule: embeddings do not match the feature layout");
  }
}

TrainResult train_scoring_rule(const irt::ResponseMatrix& responses, const mds::FeatureMatrix& features_b1,
                               const ItemPartition& partition, std::span<const irt::GrmItemParams> params,
                               const irt::PriorSpec& prior, const TrainConfig& config,
                               const ProcessEmbedding* embedding) {
  partition.validate();
  features_b1.validate();
  responses.validate();

  std::vector<std::size_t> rows;
  const auto found = responses.person_rows(features_b1.person_ids);
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (!found[i]) throw DomainError("person " + features_b1.person_ids[i] + " has features but no responses");
    rows.push_back(*found[i]);
  }
  std::vector<std::string> items = partition.B1;
  items.insert(items.end(), partition.B2.begin(), partition.B2.end());
  std::vector<std::size_t> cols;
  std::vector<irt::GrmItemParams> used;
  for (const auto& id : items) {
    cols.push_back(responses.require_item(id));
    auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.item_id == id; });
    if (it == params.end()) throw DomainError("no calibrated parameters for item " + id);
    used.push_back(*it);
  }
  const irt::ResponseMatrix sub = responses.select_persons(rows).select_items(cols);

  const irt::LoglikTable table(sub, used, prior);
  std::vector<std::size_t> persons(sub.n_persons());
  std::iota(persons.begin(), persons.end(), 0);
  std::vector<std::size_t> b1(partition.B1.size()), b2(partition.B2.size());
  std::iota(b1.begin(), b1.end(), 0);
  std::iota(b2.begin(), b2.end(), partition.B1.size());

  TrainResult out;
  out.person_ids = features_b1.person_ids;
  const auto th1 = table.eap(persons, b1);
  const auto th2 = table.eap(persons, b2);
  out.theta_b1 = Eigen::Map<const Eigen::VectorXd>(th1.data(), static_cast<Eigen::Index>(th1.size()));
  out.theta_b2 = Eigen::Map<const Eigen::VectorXd>(th2.data(), static_cast<Eigen::Index>(th2.size()));

  out.ridge = reg::ridge_fit(features_b1.values, out.theta_b2, config.ridge);
  out.t_x = reg::ridge_predict(out.ridge.model, features_b1.values);

  ScoringRule& rule = out.rule;
  rule.partition = partition;
  rule.grm_params = used;
  rule.prior = prior;
  rule.feature_layout = features_b1.column_labels;
  rule.augment = config.augment;
  rule.metric = config.metric;
  for (std::size_t b = 0; b < partition.B1.size(); ++b) rule.n_categories.push_back(sub.n_categories[b]);
  rule.f1 = out.ridge.model;
  try {
    rule.f2 = reg::ols_fit(out.t_x, out.theta_b1);
  } catch (const DegenerateDesignError&) {
    rule.f2 = {0.0, out.theta_b1.mean()};
    rule.constant_f2 = true;
    rule.warnings.push_back("process features carry no usable signal: f1 is constant, f2 falls back to the mean");
  }
  out.theta_x = (rule.f2.slope * out.t_x.array() + rule.f2.intercept).matrix();
  if (rule.constant_f2) out.theta_x.setConstant(rule.f2.intercept);
  if (embedding != nullptr) rule.embedding = *embedding;
  rule.validate();
  return out;
}

EmbeddedFeatures embed_training_items(std::span<const seqdiss::ActionSequence> sequences,
                                      const std::vector<std::string>& items,
                                      const std::vector<std::string>& person_ids,
                                      const irt::ResponseMatrix& responses, int K, bool augment,
                                      const std::string& metric, const mds::SmacofConfig& smacof) {
  std::unordered_map<std::string, std::unordered_map<std::string, const seqdiss::ActionSequence*>> by_item;
  for (const auto& s : sequences) by_item[s.item_id][s.person_id] = &s;

  EmbeddedFeatures out;
  std::vector<mds::ItemFeatures> blocks;
  for (const auto& item : items) {
    auto it = by_item.find(item);
    if (it == by_item.end()) throw DomainError("no sequences for item " + item);
    std::vector<seqdiss::ActionSequence> seqs;
    seqs.reserve(person_ids.size());
    for (const auto& p : person_ids) {
      auto s = it->second.find(p);
      if (s == it->second.end()) throw DomainError("person " + p + " has no sequence for item " + item);
      seqs.push_back(*s->second);
    }
    const auto dmat = seqdiss::dissimilarity_matrix(seqs, metric, smacof.threads);
    auto fit = mds::embed_train(dmat, K, smacof, item);
    fit.model.augment_with_score = augment;
    blocks.push_back(mds::training_features(fit.model));
    out.embedding.models.push_back(std::move(fit.model));
    out.embedding.sequences.push_back(std::move(seqs));
  }
  out.features = mds::build_feature_matrix(blocks, person_ids, &responses, augment);
  return out;
}

Scorer::Scorer(const ScoringRule& rule) : rule_(rule) {
  rule_.validate();
  if (rule_.has_embeddings() && rule_.metric == "oss") {
    for (const auto& seqs : rule_.embedding.sequences) corpora_.emplace_back(seqs);
  }
}

Scorer::Scorer(Scorer&&) noexcept = default;
Scorer::~Scorer() = default;

Eigen::RowVectorXd Scorer::features(const std::map<std::string, seqdiss::ActionSequence>& sequences,
                                    const std::map<std::string, int>& scores, bool* missing_scores) const {
  if (!rule_.has_embeddings()) {
    throw DomainError("the scoring rule was trained on precomputed features; score from a feature row instead");
  }
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(rule_.feature_layout.size()));
  bool missing = false;
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < rule_.partition.B1.size(); ++b) {
    const auto& item = rule_.partition.B1[b];
    auto it = sequences.find(item);
    if (it == sequences.end()) throw DomainError("missing action sequence for item " + item);
    const auto& model = rule_.embedding.models[b];
    const std::vector<double> cross =
        corpora_.empty() ? seqdiss::cross_dissimilarities(it->second, rule_.embedding.sequences[b], rule_.metric)
                         : corpora_[b].cross(it->second);
    const Eigen::VectorXd x = mds::embed_project(model, cross);
    row.segment(col, model.K) = x.transpose();
    col += model.K;
    if (rule_.augment) {
      auto s = scores.find(item);
      if (s == scores.end() || s->second == irt::kMissing) {
        missing = true;
      } else {
        if (s->second < 0 || s->second >= rule_.n_categories[b]) {
          throw DomainError("score " + std::to_string(s->second) + " out of range for item " + item);
        }
        row(col + s->second) = 1.0;
      }
      col += rule_.n_categories[b];
    }
  }
  if (missing_scores != nullptr) *missing_scores = missing;
  return row;
}

double Scorer::score_features(const Eigen::RowVectorXd& row) const {
  if (row.size() != rule_.f1.width()) {
    throw DomainError("feature row has " + std::to_string(row.size()) + " columns, the rule expects " +
                      std::to_string(rule_.f1.width()));
  }
  if (rule_.constant_f2) return rule_.f2.intercept;
  const double t = reg::ridge_predict(rule_.f1, Eigen::MatrixXd(row))(0);
  return rule_.f2.predict(t);
}

ScoreOutcome Scorer::score(const std::map<std::string, seqdiss::ActionSequence>& sequences,
                           const std::map<std::string, int>& scores) const {
  ScoreOutcome out;
  const auto row = features(sequences, scores, &out.missing_scores);
  out.theta = score_features(row);
  return out;
}

double score_new_person(const ScoringRule& rule, const std::map<std::string, seqdiss::ActionSequence>& sequences,
                        const std::map<std::string, int>& scores) {
  return Scorer(rule).score(sequences, scores).theta;
}

Combination combine_estimates(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& target) {
  if (estimates.empty()) throw DomainError("combine_estimates: no estimates");
  const Eigen::Index n = target.size();
  const auto M = static_cast<Eigen::Index>(estimates.size());
  if (n < 2) throw DomainError("combine_estimates: needs at least 2 persons");
  Eigen::MatrixXd D(n, M + 1);
  D.col(0).setOnes();
  for (Eigen::Index m = 0; m < M; ++m) {
    if (estimates[m].size() != n) throw DomainError("combine_estimates: estimates are not aligned with the target");
    D.col(m + 1) = estimates[m];
  }
  if (!D.allFinite() || !target.allFinite()) throw DomainError("combine_estimates: non-finite input");

  Combination out;
  Eigen::VectorXd beta;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  if (qr.rank() == M + 1) {
    beta = qr.solve(target);
  } else {
    out.collinear = true;
    Eigen::MatrixXd A = D.transpose() * D;
    A.diagonal().tail(M).array() += 1e-8;
    beta = A.ldlt().solve(D.transpose() * target);
  }
  out.intercept = beta(0);
  out.weights = beta.tail(M);
  out.combined = D * beta;
  return out;
}

}  // namespace procscore::rbscore

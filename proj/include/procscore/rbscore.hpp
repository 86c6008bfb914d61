#pragma once

// Two-step scoring rule: regress a trait estimate from items B2 on process
// features of items B1 (f1), then regress the B1 response-based estimate on
// that fitted value (f2). New persons are scored as f2(f1(X)).

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "procscore/irt.hpp"
#include "procscore/mds.hpp"
#include "procscore/reg.hpp"
#include "procscore/seqdiss.hpp"

namespace procscore::rbscore {

struct ItemPartition {
  std::vector<std::string> B1;
  std::vector<std::string> B2;

  // Disjoint, nonempty, no repeated ids.
  void validate() const;
};

// Per-item embeddings of B1 together with the training sequences they were
// fitted on; projection of a new person needs both.
struct ProcessEmbedding {
  std::vector<mds::EmbeddingModel> models;
  std::vector<std::vector<seqdiss::ActionSequence>> sequences;
};

struct ScoringRule {
  static constexpr const char* kSchema = "procscore.rule.v1";

  ItemPartition partition;
  std::vector<irt::GrmItemParams> grm_params;  // B1 then B2
  irt::PriorSpec prior;
  std::vector<std::string> feature_layout;
  bool augment = true;
  std::vector<int> n_categories;  // per B1 item
  std::string metric = "oss";
  // Empty when the rule was trained on precomputed features.
  ProcessEmbedding embedding;
  reg::RidgeModel f1;
  reg::LinearModel f2;
  bool constant_f2 = false;
  std::vector<std::string> warnings;

  bool has_embeddings() const { return !embedding.models.empty(); }
  const irt::GrmItemParams& params_for(const std::string& item_id) const;
  void validate() const;
};

struct TrainConfig {
  reg::RidgeConfig ridge;
  bool augment = true;  // whether the features carry score indicators
  std::string metric = "oss";
};

struct TrainResult {
  ScoringRule rule;
  std::vector<std::string> person_ids;
  Eigen::VectorXd theta_b2;
  Eigen::VectorXd theta_b1;
  Eigen::VectorXd t_x;
  Eigen::VectorXd theta_x;
  reg::RidgeFit ridge;
};

// Persons are taken in the order of `features_b1`; each must be present in
// `responses`, which must contain every item of B1 and B2.
TrainResult train_scoring_rule(const irt::ResponseMatrix& responses, const mds::FeatureMatrix& features_b1,
                               const ItemPartition& partition, std::span<const irt::GrmItemParams> params,
                               const irt::PriorSpec& prior, const TrainConfig& config = {},
                               const ProcessEmbedding* embedding = nullptr);

// Dissimilarities, embedding and feature assembly for the B1 items of a set
// of training persons.
struct EmbeddedFeatures {
  ProcessEmbedding embedding;
  mds::FeatureMatrix features;
};

EmbeddedFeatures embed_training_items(std::span<const seqdiss::ActionSequence> sequences,
                                      const std::vector<std::string>& items,
                                      const std::vector<std::string>& person_ids,
                                      const irt::ResponseMatrix& responses, int K, bool augment,
                                      const std::string& metric = "oss", const mds::SmacofConfig& smacof = {});

struct ScoreOutcome {
  double theta = 0.0;
  bool missing_scores = false;  // indicator columns were left at zero
};

// Reusable operational scorer: tokenizes the reference sequences once.
class Scorer {
 public:
  explicit Scorer(const ScoringRule& rule);
  Scorer(Scorer&&) noexcept;
  ~Scorer();

  // `sequences` maps B1 item id to the person's sequence; `scores` maps B1
  // item id to the observed final score and may omit items.
  ScoreOutcome score(const std::map<std::string, seqdiss::ActionSequence>& sequences,
                     const std::map<std::string, int>& scores) const;
  // Feature row laid out as rule.feature_layout.
  double score_features(const Eigen::RowVectorXd& row) const;
  Eigen::RowVectorXd features(const std::map<std::string, seqdiss::ActionSequence>& sequences,
                              const std::map<std::string, int>& scores, bool* missing_scores = nullptr) const;

 private:
  const ScoringRule& rule_;
  std::vector<seqdiss::SequenceCorpus> corpora_;
};

double score_new_person(const ScoringRule& rule, const std::map<std::string, seqdiss::ActionSequence>& sequences,
                        const std::map<std::string, int>& scores);

struct Combination {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  Eigen::VectorXd combined;
  bool collinear = false;  // solved with a 1e-8 ridge on the weights
};

// Least-squares weights (with intercept) of the estimates against the target.
Combination combine_estimates(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& target);

}  // namespace procscore::rbscore

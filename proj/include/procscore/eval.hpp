#pragma once

// Agreement metrics, Studentized residual deciles, and the cross-validated
// comparison of response-based and process-based trait estimates against a
// held-out reference item set.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "procscore/irt.hpp"
#include "procscore/mds.hpp"
#include "procscore/reg.hpp"
#include "procscore/seqdiss.hpp"

namespace procscore::eval {

double mse(std::span<const double> a, std::span<const double> b);

// Tau-b in O(n log n). Throws UndefinedCorrelationError when either argument
// is constant.
double kendall_tau(std::span<const double> a, std::span<const double> b);

struct ResidualDeciles {
  reg::LinearModel fit;              // theta_y on theta_x
  std::vector<double> studentized;   // internally Studentized, per person
  std::vector<int> bin;              // 0..9, per person
  bool degenerate = false;           // perfect fit: bins follow person order
};

// Throws DomainError for fewer than 20 persons and DegenerateDesignError
// for a constant theta_x.
ResidualDeciles residual_deciles(std::span<const double> theta_y, std::span<const double> theta_x);

struct ExtremeResiduals {
  std::vector<std::string> bottom;  // most negative first
  std::vector<std::string> top;     // most positive first
};

// Ties are broken by person id.
ExtremeResiduals extreme_residuals(std::span<const double> residuals, const std::vector<std::string>& ids,
                                   std::size_t k);

struct PartitionPlan {
  std::vector<std::string> scoring_set;
  std::vector<std::string> reference_set;
};

// Random halves of the items, distinct while possible.
std::vector<PartitionPlan> sample_partitions(const std::vector<std::string>& items, int n_partitions,
                                             std::uint64_t seed);

struct ProtocolConfig {
  int n_partitions = 30;
  int folds = 5;
  int t_max = 0;     // 0: the scoring-set size
  int decile_t = 0;  // 0: scoring-set size - 1
  std::uint64_t seed = 1;
  int K = 30;
  bool augment = true;
  int ridge_folds = 10;
  int n_lambda = 100;
  std::string metric = "oss";
  irt::PriorSpec prior;
  irt::EmConfig em;
  mds::SmacofConfig smacof;
  int threads = 1;
};

struct ProtocolData {
  irt::ResponseMatrix responses;
  // Either sequences for every person and item, or precomputed features.
  std::vector<seqdiss::ActionSequence> sequences;
  std::vector<mds::ItemFeatures> features;
};

struct MetricRow {
  int partition = 0;
  int t = 0;
  std::string subset;  // items joined by '+'
  int fold = 0;
  std::string estimator;  // "response" or "process"
  std::string metric;     // "mse" or "tau"
  double value = 0.0;
};

// Mean over subsets of the mean over folds, for one partition.
struct PartitionMean {
  int partition = 0;
  int t = 0;
  std::string estimator;
  double mse = 0.0;
  double tau = 0.0;
};

struct SummaryRow {
  int t = 0;
  std::string estimator;
  double mean_mse = 0.0;
  double median_mse = 0.0;
  double mean_tau = 0.0;
  double median_tau = 0.0;
};

struct DecileRow {
  int decile = 0;  // 1..10
  double mse_response = 0.0;
  double mse_process = 0.0;
  double mean_size = 0.0;
};

struct EvalReport {
  std::vector<PartitionPlan> partitions;
  std::vector<MetricRow> rows;
  std::vector<PartitionMean> partition_means;
  std::vector<SummaryRow> summary;
  int decile_t = 0;
  std::vector<DecileRow> deciles;
  std::vector<std::string> warnings;

  const SummaryRow& summary_for(int t, const std::string& estimator) const;
};

// Requires an even number of items and at least 20 persons per fold.
EvalReport run_protocol(const ProtocolData& data, const ProtocolConfig& config);

}  // namespace procscore::eval

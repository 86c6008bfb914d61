#pragma once

// Graded Response Model: category probabilities, marginal maximum likelihood
// calibration by EM over a fixed quadrature grid, and latent trait
// estimation (MLE, EAP, BME).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace procscore::irt {

inline constexpr int kMissing = -1;

struct GrmItemParams {
  std::string item_id;
  double slope = 1.0;
  // d_1 > d_2 > ... > d_C for score levels 1..C.
  std::vector<double> intercepts;

  int n_categories() const { return static_cast<int>(intercepts.size()) + 1; }
  int max_score() const { return static_cast<int>(intercepts.size()); }
  // Throws DomainError unless slope > 0 and intercepts strictly decrease.
  void validate() const;
};

// Standard normal prior discretized on equally spaced nodes.
struct PriorSpec {
  int nodes = 61;
  double lo = -6.0;
  double hi = 6.0;

  void validate() const;
};

struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;  // normalized standard normal masses
  std::vector<double> log_weights;
};

QuadratureGrid make_grid(const PriorSpec& prior);

struct ResponseMatrix {
  std::vector<std::string> person_ids;
  std::vector<std::string> item_ids;
  std::vector<int> n_categories;  // C_j + 1 per item
  std::vector<int> scores;        // row-major, kMissing for absent

  std::size_t n_persons() const { return person_ids.size(); }
  std::size_t n_items() const { return item_ids.size(); }
  int at(std::size_t person, std::size_t item) const {
    return scores[person * item_ids.size() + item];
  }
  int& at(std::size_t person, std::size_t item) {
    return scores[person * item_ids.size() + item];
  }
  std::optional<std::size_t> item_index(std::string_view id) const;
  std::optional<std::size_t> person_index(std::string_view id) const;
  std::size_t require_item(std::string_view id) const;
  // Row of each id, nullopt where absent; one hash pass instead of a scan per id.
  std::vector<std::optional<std::size_t>> person_rows(std::span<const std::string> ids) const;

  // Checks shape and that every observed score lies in 0..C_j.
  void validate() const;
  ResponseMatrix select_persons(std::span<const std::size_t> rows) const;
  ResponseMatrix select_items(std::span<const std::size_t> cols) const;
};

enum class ThetaMethod { MLE, EAP, BME };

std::string to_string(ThetaMethod m);
ThetaMethod theta_method_from_string(std::string_view s);

struct ThetaEstimate {
  std::string person_id;
  double value = 0.0;
  ThetaMethod method = ThetaMethod::EAP;
  std::vector<std::string> item_set;
};

// P(Y = c | theta) for c = 0..C.
std::vector<double> grm_category_probs(double theta, const GrmItemParams& params);
double grm_log_prob(double theta, const GrmItemParams& params, int score);

struct EmConfig {
  double tol = 1e-5;
  int max_iter = 500;
  int newton_steps = 5;  // scoring iterations per M-step
  int threads = 1;
};

struct GrmFit {
  std::vector<GrmItemParams> params;  // ordered as the response columns
  std::vector<double> loglik_trace;   // marginal log-likelihood per iteration
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Bock-Aitkin EM. Throws CalibrationError naming the first item that has
// fewer than two observed categories.
GrmFit fit_grm(const ResponseMatrix& responses, const PriorSpec& prior,
               const EmConfig& config = {});

// Marginal log-likelihood of the data at the given parameters on the grid.
double marginal_loglik(const ResponseMatrix& responses,
                       std::span<const GrmItemParams> params,
                       const PriorSpec& prior);

// `scores[k]` is the response to `params[k]`; kMissing entries are skipped.
double estimate_theta(std::span<const int> scores,
                      std::span<const GrmItemParams> params,
                      const PriorSpec& prior, ThetaMethod method);

ThetaEstimate estimate_person(const ResponseMatrix& responses, std::size_t person,
                              std::span<const GrmItemParams> params,
                              std::span<const std::size_t> items,
                              const PriorSpec& prior, ThetaMethod method);

// Per person x item log-likelihood on the quadrature grid, for evaluating
// EAP over many item subsets without recomputing GRM probabilities.
class LoglikTable {
 public:
  LoglikTable(const ResponseMatrix& responses,
              std::span<const GrmItemParams> params, const PriorSpec& prior);

  double eap(std::size_t person, std::span<const std::size_t> items) const;
  std::vector<double> eap(std::span<const std::size_t> persons,
                          std::span<const std::size_t> items) const;

 private:
  std::size_t n_items_;
  QuadratureGrid grid_;
  std::vector<double> table_;  // [person][item][node]; zeros when missing
  std::vector<unsigned char> observed_;
};

}  // namespace procscore::irt

#pragma once

// Synthetic data: GRM responses, grammar-generated action sequences whose
// rubric reproduces the responses, optional direct process features, and
// small discrete models evaluated by exact enumeration.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "procscore/irt.hpp"
#include "procscore/mds.hpp"
#include "procscore/seqdiss.hpp"
#include "procscore/util.hpp"

namespace procscore::simgen {

enum class FeatureModel {
  Sequences,       // no direct features; use the action sequences
  LinearGaussian,  // w * theta * u_j + sigma * noise, u_j a unit vector in R^K
  ScoreOnly,       // one-hot of the item score
  NoiseOnly,       // K independent standard normals
  ExactTheta,      // the true theta as a single column
};

std::string to_string(FeatureModel m);
FeatureModel feature_model_from_string(std::string_view s);

// Number of response categories per item, cycled when J exceeds 14.
inline const std::vector<int> kDefaultCategoryCounts{4, 2, 4, 2, 4, 2, 2, 2, 4, 2, 2, 3, 2, 4};

struct SimConfig {
  int N = 1000;
  int J = 14;
  std::uint64_t seed = 1;
  double slope_lo = 0.8;
  double slope_hi = 2.0;
  double intercept_spread = 2.0;
  std::vector<int> category_counts;  // empty: kDefaultCategoryCounts
  // When nonempty, used instead of drawing item parameters; one per item.
  std::vector<irt::GrmItemParams> fixed_params;
  FeatureModel feature_model = FeatureModel::Sequences;
  int K = 10;
  double informativeness = 1.0;  // w
  double noise = 1.0;            // sigma
  bool sequences = true;
  double omission_rate = 0.0;
  int detour_vocabulary = 8;
  int threads = 1;

  int categories(int item) const;
  // Throws ValidationError.
  void validate() const;
};

struct SimData {
  irt::ResponseMatrix responses;
  std::vector<seqdiss::ActionSequence> sequences;  // person-major, item order
  std::vector<mds::ItemFeatures> features;         // empty for Sequences
  std::vector<double> theta;
  std::vector<irt::GrmItemParams> params;
};

SimData simulate_dataset(const SimConfig& config);

// The scoring rubric of the grammar: the number of distinct "Key_" actions.
int rubric_score(const seqdiss::ActionSequence& seq);

// Draws a score from the GRM with a uniform variate.
int draw_score(double theta, const irt::GrmItemParams& params, double u);

// ---------------------------------------------------------------------------
// Discrete toy model. theta, the process features X, and two response-based
// estimators phi(Y1) and psi(Y2) live on finite supports. Y1 depends on theta
// only through X; Y2 depends on theta only (conditionally independent of X).

struct ToyModel {
  std::vector<double> theta;                 // <= 5 support points, increasing
  std::vector<double> prior;                 // masses
  std::vector<std::vector<double>> p_x;      // [theta][x], <= 20 points
  // Exponential-family description of X | theta, empty when not claimed:
  // P(x|theta) = h(x) exp(eta(theta) T(x) - A(theta)).
  std::vector<double> stat;  // T(x)
  std::vector<double> base;  // h(x)
  std::vector<double> eta;   // eta(theta)
  std::vector<std::vector<double>> y1_kernel;  // [x][y1]
  std::vector<double> phi;                     // estimate per y1
  std::vector<std::vector<std::vector<double>>> y2;  // [theta][x][y2]
  std::vector<double> psi;                           // estimate per y2

  std::size_t n_theta() const { return theta.size(); }
  std::size_t n_x() const { return p_x.empty() ? 0 : p_x.front().size(); }
  bool exponential_family() const { return !eta.empty(); }
  // E[psi(Y2) | theta].
  std::vector<long double> m() const;
  // Throws ValidationError on invalid distributions, sizes, or when Y2
  // depends on X given theta.
  void validate() const;
};

struct RaoBlackwellReport {
  long double mse_y = 0;
  long double mse_x = 0;
  long double difference = 0;  // mse_y - mse_x
  long double gap = 0;         // E[Var(phi - theta | T_X, theta)]
  long double identity_error = 0;
  std::vector<long double> t_x;      // per x
  std::vector<long double> theta_x;  // per x
  std::size_t n_groups = 0;
};

RaoBlackwellReport exact_rao_blackwell_check(const ToyModel& toy);

struct MonotonicityReport {
  bool strictly_monotone = false;
  int direction = 0;  // +1 increasing, -1 decreasing
  std::vector<double> t;
  std::vector<long double> G;  // E[m(theta) | T(X) = t]
};

// Requires the exponential-family description, strictly monotone eta and m;
// otherwise ValidationError.
MonotonicityReport sufficiency_monotonicity_check(const ToyModel& toy);

// Exact Cov(f(X), g(X)) for X on `support` (increasing) with `masses`, and
// f, g given by their values on the support. ValidationError unless X is
// non-degenerate and f, g are strictly increasing.
long double increasing_covariance_check(const std::vector<double>& support, const std::vector<double>& masses,
                         const std::vector<double>& f, const std::vector<double>& g);

struct ToyOptions {
  int n_theta = 5;
  int n_x = 20;
  int n_stat = 7;  // distinct values of T(x)
  int n_y1 = 4;
  int n_y2 = 4;
  bool decreasing_m = false;
};

// A random toy model in exponential-family form with monotone eta and m,
// Y1 kernel free of theta, and Y2 independent of X given theta.
ToyModel random_toy_model(Rng& rng, const ToyOptions& options = {});

}  // namespace procscore::simgen

#include "procscore/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "procscore/error.hpp"

namespace procscore::simgen {

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string item_name(int j) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "I%02d", j + 1);
  return buf;
}

std::vector<irt::GrmItemParams> draw_params(const SimConfig& c) {
  if (!c.fixed_params.empty()) return c.fixed_params;
  Rng rng(derive_seed(c.seed, "items"));
  std::uniform_real_distribution<double> slope(c.slope_lo, c.slope_hi);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  std::vector<irt::GrmItemParams> out;
  for (int j = 0; j < c.J; ++j) {
    irt::GrmItemParams p;
    p.item_id = item_name(j);
    p.slope = slope(rng);
    const double s = shift(rng);
    const int C = c.categories(j) - 1;
    for (int k = 1; k <= C; ++k) p.intercepts.push_back(s + c.intercept_spread * (C + 1 - 2.0 * k) / (C + 1));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Eigen::VectorXd> draw_loadings(const SimConfig& c) {
  Rng rng(derive_seed(c.seed, "loadings"));
  std::normal_distribution<double> z;
  std::vector<Eigen::VectorXd> out;
  for (int j = 0; j < c.J; ++j) {
    Eigen::VectorXd u(c.K);
    for (int k = 0; k < c.K; ++k) u(k) = z(rng);
    out.push_back(u / u.norm());
  }
  return out;
}

std::vector<std::string> make_sequence(double theta, int score, int max_score, const SimConfig& c, Rng& rng) {
  std::vector<std::string> core{"Open_Task"};
  for (int k = 1; k <= score; ++k) core.push_back("Key_" + std::to_string(k));
  if (score < max_score) {
    std::bernoulli_distribution partial(logistic(theta));
    if (partial(rng)) {
      core.push_back("Try_" + std::to_string(score + 1));
      if (partial(rng)) core.push_back("Try_" + std::to_string(score + 1));
    }
  }
  // Less proficient persons wander more before and between key steps.
  const double rate = std::clamp(2.5 * std::exp(-0.7 * theta), 0.05, 20.0);
  const int detours = std::poisson_distribution<int>(rate)(rng);
  std::uniform_int_distribution<int> token(1, c.detour_vocabulary);
  for (int d = 0; d < detours; ++d) {
    std::uniform_int_distribution<std::size_t> where(1, core.size());
    core.insert(core.begin() + static_cast<std::ptrdiff_t>(where(rng)), "Detour_" + std::to_string(token(rng)));
  }
  std::vector<std::string> seq{"Start"};
  seq.insert(seq.end(), core.begin(), core.end());
  seq.push_back("Next");
  seq.push_back("Next_OK");
  return seq;
}

}  // namespace

std::string to_string(FeatureModel m) {
  switch (m) {
    case FeatureModel::Sequences: return "sequences";
    case FeatureModel::LinearGaussian: return "linear_gaussian";
    case FeatureModel::ScoreOnly: return "score_only";
    case FeatureModel::NoiseOnly: return "noise_only";
    case FeatureModel::ExactTheta: return "exact_theta";
  }
  return "sequences";
}

FeatureModel feature_model_from_string(std::string_view s) {
  for (auto m : {FeatureModel::Sequences, FeatureModel::LinearGaussian, FeatureModel::ScoreOnly,
                 FeatureModel::NoiseOnly, FeatureModel::ExactTheta}) {
    if (s == to_string(m)) return m;
  }
  throw DomainError("unknown feature model: " + std::string(s));
}

int SimConfig::categories(int item) const {
  const auto& counts = category_counts.empty() ? kDefaultCategoryCounts : category_counts;
  return counts[static_cast<std::size_t>(item) % counts.size()];
}

void SimConfig::validate() const {
  if (N < 1) throw ValidationError("simulation needs N >= 1");
  if (J < 1) throw ValidationError("simulation needs J >= 1");
  if (!(slope_lo > 0.0 && slope_hi >= slope_lo)) throw ValidationError("slope range must be positive and ordered");
  if (!(intercept_spread > 0.0)) throw ValidationError("intercept spread must be positive");
  for (int c : category_counts.empty() ? kDefaultCategoryCounts : category_counts) {
    if (c < 2) throw ValidationError("every item needs at least 2 categories");
    // The grammar encodes score c by the key actions Key_1..Key_c.
    if (c > 10) throw ValidationError("the sequence grammar supports at most 10 categories");
  }
  if (!fixed_params.empty()) {
    if (fixed_params.size() != static_cast<std::size_t>(J)) throw ValidationError("fixed_params must have J entries");
    for (int j = 0; j < J; ++j) {
      try {
        fixed_params[j].validate();
      } catch (const DomainError& e) {
        throw ValidationError(e.what());
      }
      if (fixed_params[j].n_categories() != categories(j)) {
        throw ValidationError("fixed_params disagree with the category counts of item " + fixed_params[j].item_id);
      }
    }
  }
  if (K < 1) throw ValidationError("feature dimension K must be positive");
  if (!(informativeness >= 0.0)) throw ValidationError("informativeness must be nonnegative");
  if (!(noise > 0.0)) throw ValidationError("feature noise must be positive");
  if (!(omission_rate >= 0.0 && omission_rate < 1.0)) throw ValidationError("omission rate must lie in [0, 1)");
  if (detour_vocabulary < 3) throw ValidationError("detour vocabulary needs at least 3 tokens");
}

int draw_score(double theta, const irt::GrmItemParams& params, double u) {
  int y = 0;
  for (double d : params.intercepts) {
    if (u < logistic(params.slope * theta + d)) ++y;
  }
  return y;
}

int rubric_score(const seqdiss::ActionSequence& seq) {
  std::set<std::string_view> keys;
  for (const auto& a : seq.actions) {
    if (a.starts_with("Key_")) keys.insert(a);
  }
  return static_cast<int>(keys.size());
}

SimData simulate_dataset(const SimConfig& c) {
  c.validate();
  SimData data;
  data.params = draw_params(c);
  const auto loadings = draw_loadings(c);
  const auto J = static_cast<std::size_t>(c.J);
  const auto N = static_cast<std::size_t>(c.N);

  auto& r = data.responses;
  for (const auto& p : data.params) {
    r.item_ids.push_back(p.item_id);
    r.n_categories.push_back(p.n_categories());
  }
  r.person_ids.resize(N);
  r.scores.assign(N * J, 0);
  data.theta.assign(N, 0.0);
  if (c.sequences) data.sequences.resize(N * J);

  const bool direct = c.feature_model != FeatureModel::Sequences;
  std::vector<int> widths(J, 0);
  if (direct) {
    for (std::size_t j = 0; j < J; ++j) {
      switch (c.feature_model) {
        case FeatureModel::ScoreOnly: widths[j] = c.categories(static_cast<int>(j)); break;
        case FeatureModel::ExactTheta: widths[j] = 1; break;
        default: widths[j] = c.K;
      }
      data.features.push_back({data.params[j].item_id, {}, Eigen::MatrixXd::Zero(c.N, widths[j])});
    }
  }

  parallel_for(N, c.threads, [&](std::size_t i) {
    Rng rng(derive_seed(c.seed, "person", i));
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    char buf[24];
    std::snprintf(buf, sizeof buf, "P%06zu", i + 1);
    r.person_ids[i] = buf;
    const double theta = z(rng);
    data.theta[i] = theta;
    for (std::size_t j = 0; j < J; ++j) {
      const auto& p = data.params[j];
      const bool omitted = c.omission_rate > 0.0 && u(rng) < c.omission_rate;
      const int y = omitted ? 0 : draw_score(theta, p, u(rng));
      r.scores[i * J + j] = y;
      if (c.sequences) {
        auto& s = data.sequences[i * J + j];
        s.person_id = buf;
        s.item_id = p.item_id;
        s.actions = omitted ? std::vector<std::string>{"Start", "Next", "Next_OK"}
                            : make_sequence(theta, y, p.max_score(), c, rng);
      }
      if (direct) {
        auto row = data.features[j].values.row(static_cast<Eigen::Index>(i));
        switch (c.feature_model) {
          case FeatureModel::LinearGaussian:
            for (int k = 0; k < c.K; ++k) row(k) = c.informativeness * theta * loadings[j](k) + c.noise * z(rng);
            break;
          case FeatureModel::ScoreOnly: row(y) = 1.0; break;
          case FeatureModel::NoiseOnly:
            for (int k = 0; k < c.K; ++k) row(k) = z(rng);
            break;
          case FeatureModel::ExactTheta: row(0) = theta; break;
          case FeatureModel::Sequences: break;
        }
      }
    }
  });
  for (auto& f : data.features) f.person_ids = r.person_ids;
  return data;
}

}  // namespace procscore::simgen

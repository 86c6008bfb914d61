#include "procscore/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <unordered_map>

#include "procscore/error.hpp"
#include "procscore/rbscore.hpp"
#include "procscore/util.hpp"

namespace procscore::eval {

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite value");
  }
}

// Pairs tied within runs of equal values of a sorted sequence.
template <class Eq>
std::int64_t tied_pairs(std::size_t n, Eq eq) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && eq(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Merge sort of v counting inversions (pairs with v[i] > v[j], i < j).
std::int64_t sort_count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_count_swaps(v, buf, lo, mid) + sort_count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

std::vector<std::vector<std::size_t>> combinations(std::size_t m, std::size_t t) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> c(t);
  std::iota(c.begin(), c.end(), 0);
  while (true) {
    out.push_back(c);
    std::size_t i = t;
    while (i > 0 && c[i - 1] == m - t + i - 1) --i;
    if (i == 0) break;
    ++c[i - 1];
    for (std::size_t k = i; k < t; ++k) c[k] = c[k - 1] + 1;
  }
  return out;
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : "+") + id;
  return s;
}

// Per-fold features of one item: training rows and held-out rows.
struct ItemBlocks {
  mds::ItemFeatures train;
  mds::ItemFeatures test;
};

struct CellResult {
  double resp_mse = 0.0, resp_tau = 0.0;
  double proc_mse = 0.0, proc_tau = 0.0;
  bool has_process = false;
  bool has_deciles = false;
  std::array<double, 10> dec_resp{}, dec_proc{}, dec_size{};
  std::vector<std::string> warnings;
};

double tau_or_zero(std::span<const double> a, std::span<const double> b, const std::string& what,
                   std::vector<std::string>& warnings) {
  try {
    return kendall_tau(a, b);
  } catch (const UndefinedCorrelationError&) {
    warnings.push_back(what + ": constant estimates, Kendall tau recorded as 0");
    return 0.0;
  }
}

}  // namespace

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DomainError("mse: lengths differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DomainError("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("kendall_tau: lengths differ");
  const std::size_t n = a.size();
  if (n < 2) throw DomainError("kendall_tau: needs at least 2 observations");
  check_finite(a, "kendall_tau");
  check_finite(b, "kendall_tau");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  std::vector<double> bs(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[order[i]];

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return a[order[i]] == a[order[j]]; });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]] && bs[i] == bs[j];
  });
  std::vector<double> buf(n);
  const std::int64_t swaps = sort_count_swaps(bs, buf, 0, n);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return bs[i] == bs[j]; });

  if (n1 == n0 || n2 == n0) throw UndefinedCorrelationError("kendall_tau: a constant argument has no rank correlation");
  const std::int64_t num = n0 - n1 - n2 + n3 - 2 * swaps;
  const double den = std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
  return std::clamp(static_cast<double>(num) / den, -1.0, 1.0);
}

ResidualDeciles residual_deciles(std::span<const double> theta_y, std::span<const double> theta_x) {
  if (theta_y.size() != theta_x.size()) throw DomainError("residual_deciles: lengths differ");
  const std::size_t n = theta_y.size();
  if (n < 20) throw DomainError("residual_deciles: needs at least 20 persons, got " + std::to_string(n));
  check_finite(theta_y, "residual_deciles");
  check_finite(theta_x, "residual_deciles");

  const Eigen::Map<const Eigen::VectorXd> y(theta_y.data(), static_cast<Eigen::Index>(n));
  const Eigen::Map<const Eigen::VectorXd> x(theta_x.data(), static_cast<Eigen::Index>(n));
  ResidualDeciles out;
  out.fit = reg::ols_fit(x, y);

  const double xbar = x.mean(), ybar = y.mean();
  const double sxx = (x.array() - xbar).square().sum();
  const double syy = (y.array() - ybar).square().sum();
  const Eigen::VectorXd e = y - (out.fit.slope * x.array() + out.fit.intercept).matrix();
  const double sse = e.squaredNorm();
  out.studentized.assign(n, 0.0);
  out.bin.assign(n, 0);

  if (sse == 0.0 || sse <= 1e-20 * syy) {
    out.degenerate = true;
    for (std::size_t i = 0; i < n; ++i) out.bin[i] = static_cast<int>(i * 10 / n);
    return out;
  }
  const double s = std::sqrt(sse / static_cast<double>(n - 2));
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = theta_x[i] - xbar;
    const double h = 1.0 / static_cast<double>(n) + dx * dx / sxx;
    out.studentized[i] = e(static_cast<Eigen::Index>(i)) / (s * std::sqrt(1.0 - h));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return out.studentized[i] < out.studentized[j]; });
  for (std::size_t rank = 0; rank < n; ++rank) out.bin[order[rank]] = static_cast<int>(rank * 10 / n);
  return out;
}

ExtremeResiduals extreme_residuals(std::span<const double> residuals, const std::vector<std::string>& ids,
                                   std::size_t k) {
  if (residuals.size() != ids.size()) throw DomainError("extreme_residuals: residuals and ids differ in length");
  if (2 * k > ids.size()) {
    throw DomainError("extreme_residuals: k = " + std::to_string(k) + " exceeds half of " + std::to_string(ids.size()));
  }
  check_finite(residuals, "extreme_residuals");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return residuals[i] < residuals[j] || (residuals[i] == residuals[j] && ids[i] < ids[j]);
  });
  ExtremeResiduals out;
  for (std::size_t r = 0; r < k; ++r) {
    out.bottom.push_back(ids[order[r]]);
    out.top.push_back(ids[order[order.size() - 1 - r]]);
  }
  return out;
}

std::vector<PartitionPlan> sample_partitions(const std::vector<std::string>& items, int n_partitions,
                                             std::uint64_t seed) {
  const std::size_t J = items.size();
  if (J < 2 || J % 2 != 0) throw DomainError("partitions need an even number of items, got " + std::to_string(J));
  if (n_partitions < 1) throw DomainError("need at least one partition");
  const double distinct = binomial(J, J / 2);
  Rng rng(seed);
  std::set<std::vector<std::size_t>> seen;
  std::vector<PartitionPlan> out;
  std::vector<std::size_t> idx(J);
  while (out.size() < static_cast<std::size_t>(n_partitions)) {
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> half(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(J / 2));
    std::sort(half.begin(), half.end());
    if (!seen.insert(half).second && static_cast<double>(seen.size()) < distinct) continue;
    PartitionPlan plan;
    std::vector<bool> in_s(J, false);
    for (auto j : half) in_s[j] = true;
    for (std::size_t j = 0; j < J; ++j) (in_s[j] ? plan.scoring_set : plan.reference_set).push_back(items[j]);
    out.push_back(std::move(plan));
  }
  return out;
}

const SummaryRow& EvalReport::summary_for(int t, const std::string& estimator) const {
  for (const auto& s : summary) {
    if (s.t == t && s.estimator == estimator) return s;
  }
  throw DomainError("no summary for t = " + std::to_string(t) + " and estimator " + estimator);
}

EvalReport run_protocol(const ProtocolData& data, const ProtocolConfig& config) {
  const auto& responses = data.responses;
  responses.validate();
  const std::size_t J = responses.n_items();
  const std::size_t N = responses.n_persons();
  if (J < 2 || J % 2 != 0) throw DomainError("the protocol needs an even number of items, got " + std::to_string(J));
  if (config.folds < 2) throw DomainError("the protocol needs at least 2 folds");
  if (N < static_cast<std::size_t>(config.folds) * 20) {
    throw DomainError("insufficient persons: " + std::to_string(N) + " persons for " + std::to_string(config.folds) +
                      " folds, at least 20 per fold are required");
  }
  const int half = static_cast<int>(J / 2);
  const int t_max = config.t_max == 0 ? half : config.t_max;
  if (t_max < 1 || t_max > half) throw DomainError("t_max must lie in 1.." + std::to_string(half));
  int decile_t = config.decile_t == 0 ? std::min(half - 1, t_max) : config.decile_t;
  if (decile_t < 0 || decile_t > std::min(half - 1, t_max)) {
    throw DomainError("decile_t must lie in 1.." + std::to_string(std::min(half - 1, t_max)));
  }
  const bool use_sequences = data.features.empty();
  if (use_sequences && data.sequences.empty()) throw DomainError("the protocol needs sequences or features");

  EvalReport report;
  report.decile_t = decile_t;
  report.partitions = sample_partitions(responses.item_ids, config.n_partitions, derive_seed(config.seed, "partitions"));
  const auto fold_of = reg::assign_folds(N, config.folds, derive_seed(config.seed, "protocol-folds"));

  // Per item, person id -> sequence or feature row.
  std::vector<std::unordered_map<std::string_view, std::size_t>> lookup(J);
  if (use_sequences) {
    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
      const auto j = responses.require_item(data.sequences[s].item_id);
      lookup[j].emplace(data.sequences[s].person_id, s);
    }
  } else {
    if (data.features.size() != J) throw DomainError("precomputed features must cover every item");
    for (std::size_t b = 0; b < J; ++b) {
      if (data.features[b].item_id != responses.item_ids[b]) {
        throw DomainError("precomputed features must follow the item order of the responses");
      }
      if (static_cast<Eigen::Index>(data.features[b].person_ids.size()) != data.features[b].values.rows()) {
        throw DomainError("features of item " + data.features[b].item_id + " do not match their person ids");
      }
      for (std::size_t r = 0; r < data.features[b].person_ids.size(); ++r) {
        lookup[b].emplace(data.features[b].person_ids[r], r);
      }
    }
  }
  auto require = [&](std::size_t j, const std::string& person) {
    auto it = lookup[j].find(person);
    if (it == lookup[j].end()) {
      throw DomainError("person " + person + " has no " + (use_sequences ? "sequence" : "features") + " for item " +
                        responses.item_ids[j]);
    }
    return it->second;
  };

  // Tasks: every (partition, t, subset) cell.
  struct Task {
    std::size_t partition;
    int t;
    std::size_t subset;
    std::vector<std::size_t> b1, b2;  // positions within the scoring set
  };
  std::vector<Task> tasks;
  std::vector<std::vector<std::size_t>> n_subsets(report.partitions.size(), std::vector<std::size_t>(t_max + 1, 0));
  for (std::size_t p = 0; p < report.partitions.size(); ++p) {
    for (int t = 1; t <= t_max; ++t) {
      const auto combos = combinations(static_cast<std::size_t>(half), static_cast<std::size_t>(t));
      n_subsets[p][t] = combos.size();
      for (std::size_t s = 0; s < combos.size(); ++s) {
        Task task{p, t, s, combos[s], {}};
        for (std::size_t k = 0; k < static_cast<std::size_t>(half); ++k) {
          if (!std::binary_search(combos[s].begin(), combos[s].end(), k)) task.b2.push_back(k);
        }
        tasks.push_back(std::move(task));
      }
    }
  }
  const auto folds = static_cast<std::size_t>(config.folds);
  std::vector<std::vector<CellResult>> results(tasks.size(), std::vector<CellResult>(folds));

  std::vector<std::vector<std::size_t>> s_cols(report.partitions.size()), r_cols(report.partitions.size());
  for (std::size_t p = 0; p < report.partitions.size(); ++p) {
    for (const auto& id : report.partitions[p].scoring_set) s_cols[p].push_back(responses.require_item(id));
    for (const auto& id : report.partitions[p].reference_set) r_cols[p].push_back(responses.require_item(id));
  }

  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < N; ++i) (fold_of[i] == static_cast<int>(f) ? test_rows : train_rows).push_back(i);
    const auto train_resp = responses.select_persons(train_rows);
    const auto test_resp = responses.select_persons(test_rows);

    irt::EmConfig em = config.em;
    em.threads = config.threads;
    const auto grm = irt::fit_grm(train_resp, config.prior, em);
    for (const auto& w : grm.warnings) report.warnings.push_back("fold " + std::to_string(f + 1) + ": " + w);
    const irt::LoglikTable test_table(test_resp, grm.params, config.prior);
    std::vector<std::size_t> test_persons(test_rows.size());
    std::iota(test_persons.begin(), test_persons.end(), 0);

    // Features of every item for this fold, shared by all partitions.
    std::vector<ItemBlocks> blocks(J);
    for (std::size_t j = 0; j < J; ++j) {
      auto& blk = blocks[j];
      blk.train.item_id = blk.test.item_id = responses.item_ids[j];
      blk.train.person_ids = train_resp.person_ids;
      blk.test.person_ids = test_resp.person_ids;
      if (use_sequences) {
        std::vector<seqdiss::ActionSequence> seqs;
        for (const auto& p : train_resp.person_ids) seqs.push_back(data.sequences[require(j, p)]);
        mds::SmacofConfig smacof = config.smacof;
        smacof.threads = config.threads;
        const auto dmat = seqdiss::dissimilarity_matrix(seqs, config.metric, config.threads);
        const auto fit = mds::embed_train(dmat, config.K, smacof, responses.item_ids[j]);
        blk.train.values = fit.model.coords;
        blk.test.values.resize(static_cast<Eigen::Index>(test_rows.size()), fit.model.K);
        std::unique_ptr<seqdiss::SequenceCorpus> corpus;
        if (config.metric == "oss") corpus = std::make_unique<seqdiss::SequenceCorpus>(seqs);
        parallel_for(test_rows.size(), config.threads, [&](std::size_t i) {
          const auto& s = data.sequences[require(j, test_resp.person_ids[i])];
          const auto cross = corpus ? corpus->cross(s) : seqdiss::cross_dissimilarities(s, seqs, config.metric);
          blk.test.values.row(static_cast<Eigen::Index>(i)) = mds::embed_project(fit.model, cross).transpose();
        });
      } else {
        const auto& src = data.features[j].values;
        blk.train.values.resize(static_cast<Eigen::Index>(train_rows.size()), src.cols());
        blk.test.values.resize(static_cast<Eigen::Index>(test_rows.size()), src.cols());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
          blk.train.values.row(static_cast<Eigen::Index>(i)) =
              src.row(static_cast<Eigen::Index>(require(j, train_resp.person_ids[i])));
        }
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
          blk.test.values.row(static_cast<Eigen::Index>(i)) =
              src.row(static_cast<Eigen::Index>(require(j, test_resp.person_ids[i])));
        }
      }
    }

    std::vector<std::vector<double>> reference(report.partitions.size());
    for (std::size_t p = 0; p < report.partitions.size(); ++p) reference[p] = test_table.eap(test_persons, r_cols[p]);

    parallel_for(tasks.size(), config.threads, [&](std::size_t k) {
      const Task& task = tasks[k];
      const auto& plan = report.partitions[task.partition];
      const auto& ref = reference[task.partition];
      CellResult& cell = results[k][f];
      const std::string where = "partition " + std::to_string(task.partition + 1) + ", fold " +
                                std::to_string(f + 1) + ", t = " + std::to_string(task.t);

      std::vector<std::size_t> b1_cols;
      rbscore::ItemPartition part;
      for (auto b : task.b1) {
        b1_cols.push_back(s_cols[task.partition][b]);
        part.B1.push_back(plan.scoring_set[b]);
      }
      for (auto b : task.b2) part.B2.push_back(plan.scoring_set[b]);

      const auto resp = test_table.eap(test_persons, b1_cols);
      cell.resp_mse = mse(resp, ref);
      cell.resp_tau = tau_or_zero(resp, ref, where + " response", cell.warnings);
      if (task.b2.empty()) return;

      std::vector<mds::ItemFeatures> train_blocks, test_blocks;
      for (auto c : b1_cols) {
        train_blocks.push_back(blocks[c].train);
        test_blocks.push_back(blocks[c].test);
      }
      const auto train_x = mds::build_feature_matrix(train_blocks, train_resp.person_ids, &train_resp, config.augment);
      const auto test_x = mds::build_feature_matrix(test_blocks, test_resp.person_ids, &test_resp, config.augment);

      rbscore::TrainConfig tc;
      tc.augment = config.augment;
      tc.metric = config.metric;
      tc.ridge.folds = config.ridge_folds;
      tc.ridge.n_lambda = config.n_lambda;
      tc.ridge.seed = derive_seed(config.seed, "ridge", f);
      const auto trained = rbscore::train_scoring_rule(train_resp, train_x, part, grm.params, config.prior, tc);
      const auto& rule = trained.rule;
      for (const auto& w : rule.warnings) cell.warnings.push_back(where + ": " + w);
      std::vector<double> proc(test_rows.size(), rule.f2.intercept);
      if (!rule.constant_f2) {
        const Eigen::VectorXd tx = reg::ridge_predict(rule.f1, test_x.values);
        for (std::size_t i = 0; i < proc.size(); ++i) proc[i] = rule.f2.predict(tx(static_cast<Eigen::Index>(i)));
      }
      cell.has_process = true;
      cell.proc_mse = mse(proc, ref);
      cell.proc_tau = tau_or_zero(proc, ref, where + " process", cell.warnings);

      if (task.t != decile_t) return;
      try {
        const auto dec = residual_deciles(resp, proc);
        std::array<double, 10> se_r{}, se_p{};
        for (std::size_t i = 0; i < proc.size(); ++i) {
          const auto b = static_cast<std::size_t>(dec.bin[i]);
          se_r[b] += (resp[i] - ref[i]) * (resp[i] - ref[i]);
          se_p[b] += (proc[i] - ref[i]) * (proc[i] - ref[i]);
          cell.dec_size[b] += 1.0;
        }
        for (std::size_t b = 0; b < 10; ++b) {
          cell.dec_resp[b] = se_r[b] / cell.dec_size[b];
          cell.dec_proc[b] = se_p[b] / cell.dec_size[b];
        }
        cell.has_deciles = true;
      } catch (const DegenerateDesignError&) {
        cell.warnings.push_back(where + ": constant process estimates, residual deciles skipped");
      }
    });
  }

  // Assembly in fixed index order.
  const auto P = report.partitions.size();
  std::vector<std::vector<std::array<double, 4>>> sums(P, std::vector<std::array<double, 4>>(t_max + 1));
  std::array<double, 10> dec_r{}, dec_p{}, dec_n{};
  std::vector<std::array<double, 10>> pr(P), pp(P), pn(P);
  std::vector<std::size_t> dec_cells(P, 0);
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Task& task = tasks[k];
    const std::string subset = [&] {
      std::vector<std::string> ids;
      for (auto b : task.b1) ids.push_back(report.partitions[task.partition].scoring_set[b]);
      return join(ids);
    }();
    std::array<double, 4> fold_sum{};
    bool dec_all = true;
    std::array<double, 10> cr{}, cp{}, cn{};
    for (std::size_t f = 0; f < folds; ++f) {
      const CellResult& c = results[k][f];
      report.warnings.insert(report.warnings.end(), c.warnings.begin(), c.warnings.end());
      const int fold = static_cast<int>(f) + 1;
      const int part = static_cast<int>(task.partition) + 1;
      report.rows.push_back({part, task.t, subset, fold, "response", "mse", c.resp_mse});
      report.rows.push_back({part, task.t, subset, fold, "response", "tau", c.resp_tau});
      fold_sum[0] += c.resp_mse;
      fold_sum[1] += c.resp_tau;
      if (c.has_process) {
        report.rows.push_back({part, task.t, subset, fold, "process", "mse", c.proc_mse});
        report.rows.push_back({part, task.t, subset, fold, "process", "tau", c.proc_tau});
        fold_sum[2] += c.proc_mse;
        fold_sum[3] += c.proc_tau;
      }
      if (task.t == decile_t) {
        dec_all = dec_all && c.has_deciles;
        for (std::size_t b = 0; b < 10; ++b) {
          cr[b] += c.dec_resp[b];
          cp[b] += c.dec_proc[b];
          cn[b] += c.dec_size[b];
        }
      }
    }
    for (auto& v : fold_sum) v /= static_cast<double>(folds);
    auto& s = sums[task.partition][static_cast<std::size_t>(task.t)];
    for (std::size_t m = 0; m < 4; ++m) s[m] += fold_sum[m];
    if (task.t == decile_t && dec_all) {
      for (std::size_t b = 0; b < 10; ++b) {
        pr[task.partition][b] += cr[b] / static_cast<double>(folds);
        pp[task.partition][b] += cp[b] / static_cast<double>(folds);
        pn[task.partition][b] += cn[b] / static_cast<double>(folds);
      }
      ++dec_cells[task.partition];
    }
  }

  for (int t = 1; t <= t_max; ++t) {
    for (const std::string est : {"response", "process"}) {
      if (est == "process" && t == half) continue;
      const std::size_t off = est == "response" ? 0 : 2;
      std::vector<double> mses, taus;
      for (std::size_t p = 0; p < P; ++p) {
        const double n = static_cast<double>(n_subsets[p][static_cast<std::size_t>(t)]);
        PartitionMean pm{static_cast<int>(p) + 1, t, est, sums[p][static_cast<std::size_t>(t)][off] / n,
                         sums[p][static_cast<std::size_t>(t)][off + 1] / n};
        mses.push_back(pm.mse);
        taus.push_back(pm.tau);
        report.partition_means.push_back(pm);
      }
      SummaryRow row;
      row.t = t;
      row.estimator = est;
      row.mean_mse = std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(P);
      row.mean_tau = std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(P);
      row.median_mse = median(mses);
      row.median_tau = median(taus);
      report.summary.push_back(row);
    }
  }

  if (decile_t > 0) {
    std::size_t used = 0;
    for (std::size_t p = 0; p < P; ++p) {
      if (dec_cells[p] == 0) continue;
      ++used;
      const double n = static_cast<double>(dec_cells[p]);
      for (std::size_t b = 0; b < 10; ++b) {
        dec_r[b] += pr[p][b] / n;
        dec_p[b] += pp[p][b] / n;
        dec_n[b] += pn[p][b] / n;
      }
    }
    if (used > 0) {
      for (std::size_t b = 0; b < 10; ++b) {
        report.deciles.push_back({static_cast<int>(b) + 1, dec_r[b] / static_cast<double>(used),
                                  dec_p[b] / static_cast<double>(used), dec_n[b] / static_cast<double>(used)});
      }
    } else {
      report.warnings.push_back("no residual decile table: every decile cell was degenerate");
    }
  }
  return report;
}

}  // namespace procscore::eval

#include "procscore/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "procscore/error.hpp"
#include "procscore/eval.hpp"
#include "procscore/io.hpp"
#include "procscore/mds.hpp"
#include "procscore/rbscore.hpp"
#include "procscore/simgen.hpp"
#include "procscore/util.hpp"

namespace procscore::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Artifact bookkeeping for one command invocation.
class Run {
 public:
  Run(std::string command, fs::path out_dir) : command_(std::move(command)), dir_(std::move(out_dir)) {
    if (dir_.empty()) throw DomainError("--out is required");
    fs::create_directories(dir_);
  }

  std::string read(const std::string& path) {
    const std::string text = io::read_text(path);
    inputs_[path] = sha256_hex(text);
    return text;
  }

  void write(const std::string& name, const std::string& text) {
    io::write_text(dir_ / name, text);
    outputs_[name] = sha256_hex(text);
  }

  template <class F>
  void write_with(const std::string& name, F&& f) {
    std::ostringstream ss;
    f(ss);
    write(name, ss.str());
  }

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void count(const std::string& key, std::size_t n) { counts_[key] = n; }
  void warn(const std::string& w) { warnings_.push_back(w); }
  void warn_all(const std::vector<std::string>& ws) { warnings_.insert(warnings_.end(), ws.begin(), ws.end()); }

  void finish(const std::string& config_text) {
    ojson log{{"schema", io::kRunLogSchema}, {"command", command_}};
    log["seed"] = seed_ ? ojson(*seed_) : ojson(nullptr);
    log["config_hash"] = sha256_hex(config_text);
    log["inputs"] = inputs_;
    log["outputs"] = outputs_;
    log["counts"] = counts_;
    log["warnings"] = warnings_;
    io::write_text(dir_ / "run_log.json", log.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path dir_;
  std::optional<std::uint64_t> seed_;
  std::map<std::string, std::string> inputs_, outputs_;
  std::map<std::string, std::size_t> counts_;
  std::vector<std::string> warnings_;
};

// Options shared by the commands that ingest responses and sequences.
struct InputOptions {
  std::string responses, levels, sequences, features;
  std::string omission_policy = "exclude";
};

void add_responses(CLI::App* cmd, InputOptions& o, bool required) {
  auto* opt = cmd->add_option("--responses", o.responses, "responses CSV (person x item)");
  if (required) opt->required();
  cmd->add_option("--levels", o.levels, "levels JSON with the number of score categories per item");
}

void add_sequences(CLI::App* cmd, InputOptions& o) {
  cmd->add_option("--sequences", o.sequences, "action sequences JSONL");
  cmd->add_option("--omission-policy", o.omission_policy, "persons with omitted items: exclude or keep")
      ->check(CLI::IsMember({"exclude", "keep"}));
}

struct Inputs {
  irt::ResponseMatrix responses;
  std::vector<seqdiss::ActionSequence> sequences;
  bool has_responses = false;
};

Inputs load_inputs(Run& run, const InputOptions& o) {
  Inputs in;
  if (!o.responses.empty()) {
    std::optional<io::Levels> levels;
    if (!o.levels.empty()) {
      std::istringstream ls(run.read(o.levels));
      levels = io::read_levels_json(ls);
    }
    std::istringstream rs(run.read(o.responses));
    in.responses = io::read_responses_csv(rs, levels ? &*levels : nullptr);
    in.has_responses = true;
  }
  if (!o.sequences.empty()) {
    std::istringstream ss(run.read(o.sequences));
    in.sequences = io::read_sequences_jsonl(ss);
    std::size_t omitted = 0;
    for (const auto& s : in.sequences) omitted += s.is_omission() ? 1 : 0;
    run.count("omission_sequences", omitted);
    if (o.omission_policy == "exclude") {
      run.count("persons_excluded_for_omission", exclude_omissions(in.responses, in.sequences));
    }
  }
  return in;
}

mds::FeatureMatrix load_features(Run& run, const std::string& path) {
  std::istringstream fs_(run.read(path));
  return io::read_features_csv(fs_);
}

// Column blocks of a feature matrix, one per item in `items`.
std::vector<mds::ItemFeatures> feature_blocks(const mds::FeatureMatrix& f, const std::vector<std::string>& items) {
  std::vector<mds::ItemFeatures> out;
  for (const auto& item : items) {
    std::vector<Eigen::Index> cols;
    for (std::size_t k = 0; k < f.column_labels.size(); ++k) {
      const auto& label = f.column_labels[k];
      if (label.size() > item.size() && label.compare(0, item.size(), item) == 0 && label[item.size()] == '_' &&
          label.find('_', item.size() + 1) == std::string::npos) {
        cols.push_back(static_cast<Eigen::Index>(k));
      }
    }
    if (cols.empty()) throw DomainError("the feature file has no columns for item " + item);
    mds::ItemFeatures b{item, f.person_ids, Eigen::MatrixXd(f.values.rows(), static_cast<Eigen::Index>(cols.size()))};
    for (std::size_t c = 0; c < cols.size(); ++c) b.values.col(static_cast<Eigen::Index>(c)) = f.values.col(cols[c]);
    out.push_back(std::move(b));
  }
  return out;
}

std::map<std::string, std::map<std::string, const seqdiss::ActionSequence*>> index_sequences(
    const std::vector<seqdiss::ActionSequence>& seqs) {
  std::map<std::string, std::map<std::string, const seqdiss::ActionSequence*>> by_item;
  for (const auto& s : seqs) by_item[s.item_id][s.person_id] = &s;
  return by_item;
}

// Option values without the output directory, so reruns elsewhere hash alike.
std::string config_text(const CLI::App& cmd) {
  std::istringstream in(cmd.config_to_str(true, false));
  std::string text = cmd.get_name() + "\n", line;
  while (std::getline(in, line)) {
    if (line.rfind("out=", 0) != 0) text += line + "\n";
  }
  return text;
}

void write_error(std::ostream& err, const std::string& type, const std::string& message,
                 const std::vector<std::string>& details = {}) {
  ojson j{{"error", type}, {"message", message}, {"details", details}};
  err << j.dump() << '\n';
}

}  // namespace

std::size_t exclude_omissions(irt::ResponseMatrix& responses, std::vector<seqdiss::ActionSequence>& sequences) {
  std::unordered_set<std::string> drop;
  for (const auto& s : sequences) {
    if (s.is_omission()) drop.insert(s.person_id);
  }
  if (drop.empty()) return 0;
  std::erase_if(sequences, [&](const auto& s) { return drop.count(s.person_id) > 0; });
  if (!responses.person_ids.empty()) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < responses.n_persons(); ++i) {
      if (!drop.count(responses.person_ids[i])) keep.push_back(i);
    }
    responses = responses.select_persons(keep);
  }
  return drop.size();
}

std::vector<ItemDescriptives> describe(const irt::ResponseMatrix& responses,
                                       const std::vector<seqdiss::ActionSequence>& sequences) {
  const auto by_item = index_sequences(sequences);
  std::vector<ItemDescriptives> out;
  for (std::size_t j = 0; j < responses.n_items(); ++j) {
    ItemDescriptives d;
    d.item_id = responses.item_ids[j];
    d.score_levels = responses.n_categories[j];
    std::vector<double> scores;
    for (std::size_t i = 0; i < responses.n_persons(); ++i) {
      if (responses.at(i, j) != irt::kMissing) scores.push_back(responses.at(i, j));
    }
    d.persons = scores.size();
    d.median_score = median_of(scores);
    auto it = by_item.find(d.item_id);
    if (it != by_item.end()) {
      std::set<std::string> types;
      std::vector<double> lengths;
      for (const auto& [pid, s] : it->second) {
        types.insert(s->actions.begin(), s->actions.end());
        lengths.push_back(static_cast<double>(s->actions.size()));
      }
      d.action_types = types.size();
      d.min_length = static_cast<std::size_t>(*std::min_element(lengths.begin(), lengths.end()));
      d.max_length = static_cast<std::size_t>(*std::max_element(lengths.begin(), lengths.end()));
      d.median_length = median_of(lengths);
    }
    out.push_back(d);
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Process-data trait scoring: calibration, embedding, scoring and evaluation", "procscore"};
  app.set_config("--config", "", "TOML file with option values; flags given on the command line win");
  int threads = 1;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.require_subcommand(1);
  app.fallthrough();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic data set");
  simgen::SimConfig sim;
  std::string sim_out, sim_features = "sequences";
  sim_cmd->add_option("--out", sim_out, "output directory")->required();
  sim_cmd->add_option("--seed", sim.seed, "master seed")->required();
  sim_cmd->add_option("--persons", sim.N, "number of persons");
  sim_cmd->add_option("--items", sim.J, "number of items");
  sim_cmd->add_option("--feature-model", sim_features, "sequences, linear_gaussian, score_only, noise_only, exact_theta");
  sim_cmd->add_option("--dim", sim.K, "feature dimension per item for direct feature models");
  sim_cmd->add_option("--informativeness", sim.informativeness, "feature loading on the trait");
  sim_cmd->add_option("--noise", sim.noise, "feature noise sd");
  sim_cmd->add_option("--omission-rate", sim.omission_rate, "probability of skipping an item");

  // fit-irt
  auto* fit_cmd = app.add_subcommand("fit-irt", "calibrate the graded response model");
  InputOptions fit_in;
  std::string fit_out;
  irt::PriorSpec prior;
  irt::EmConfig em;
  add_responses(fit_cmd, fit_in, true);
  add_sequences(fit_cmd, fit_in);
  fit_cmd->add_option("--out", fit_out, "output directory")->required();
  fit_cmd->add_option("--prior-nodes", prior.nodes, "quadrature nodes");
  fit_cmd->add_option("--em-tol", em.tol, "relative log-likelihood tolerance");
  fit_cmd->add_option("--max-iter", em.max_iter, "EM iteration cap");

  // dissim
  auto* dis_cmd = app.add_subcommand("dissim", "dissimilarity matrix of one item");
  InputOptions dis_in;
  std::string dis_out, dis_item, dis_metric = "oss";
  add_sequences(dis_cmd, dis_in);
  dis_cmd->get_option("--sequences")->required();
  dis_cmd->add_option("--item", dis_item, "item id")->required();
  dis_cmd->add_option("--metric", dis_metric, "registered metric name");
  dis_cmd->add_option("--out", dis_out, "output directory")->required();

  // embed
  auto* emb_cmd = app.add_subcommand("embed", "embed the sequences of the given items");
  InputOptions emb_in;
  std::string emb_out, emb_items, emb_metric = "oss";
  int emb_K = 30;
  bool no_augment = false;
  mds::SmacofConfig smacof;
  add_responses(emb_cmd, emb_in, true);
  add_sequences(emb_cmd, emb_in);
  emb_cmd->get_option("--sequences")->required();
  emb_cmd->add_option("--items", emb_items, "comma-separated item ids")->required();
  emb_cmd->add_option("--dim", emb_K, "embedding dimension K");
  emb_cmd->add_option("--metric", emb_metric, "registered metric name");
  emb_cmd->add_option("--max-iter", smacof.max_iter, "SMACOF iteration cap");
  emb_cmd->add_flag("--no-augment", no_augment, "omit the score indicators from the feature matrix");
  emb_cmd->add_option("--out", emb_out, "output directory")->required();

  // train-score
  auto* tr_cmd = app.add_subcommand("train-score", "train the two-step scoring rule");
  InputOptions tr_in;
  std::string tr_out, tr_params, tr_b1, tr_b2, tr_embeddings;
  bool tr_no_augment = false;
  int ridge_folds = 10, n_lambda = 100;
  std::uint64_t tr_seed = 1;
  add_responses(tr_cmd, tr_in, true);
  add_sequences(tr_cmd, tr_in);
  tr_cmd->add_option("--params", tr_params, "item parameters JSON from fit-irt")->required();
  tr_cmd->add_option("--b1", tr_b1, "comma-separated items whose process data are scored")->required();
  tr_cmd->add_option("--b2", tr_b2, "comma-separated items providing the regression target")->required();
  tr_cmd->add_option("--embeddings", tr_embeddings, "embeddings JSON from embed (needs --sequences)");
  tr_cmd->add_option("--features", tr_in.features, "precomputed features CSV");
  tr_cmd->add_flag("--no-augment", tr_no_augment, "do not add score indicators to the features");
  tr_cmd->add_option("--ridge-folds", ridge_folds, "cross-validation folds for the ridge penalty");
  tr_cmd->add_option("--lambdas", n_lambda, "penalty grid size");
  tr_cmd->add_option("--seed", tr_seed, "seed for the ridge fold assignment");
  tr_cmd->add_option("--out", tr_out, "output directory")->required();

  // score
  auto* sc_cmd = app.add_subcommand("score", "score persons with a trained rule");
  InputOptions sc_in;
  std::string sc_out, sc_rule;
  add_responses(sc_cmd, sc_in, false);
  add_sequences(sc_cmd, sc_in);
  sc_cmd->add_option("--rule", sc_rule, "scoring rule JSON")->required();
  sc_cmd->add_option("--features", sc_in.features, "features CSV, for rules trained on precomputed features");
  sc_cmd->add_option("--out", sc_out, "output directory")->required();

  // evaluate
  auto* ev_cmd = app.add_subcommand("evaluate", "cross-validated comparison against reference-set estimates");
  InputOptions ev_in;
  std::string ev_out;
  eval::ProtocolConfig pc;
  bool ev_no_augment = false;
  add_responses(ev_cmd, ev_in, true);
  add_sequences(ev_cmd, ev_in);
  ev_cmd->add_option("--features", ev_in.features, "precomputed features CSV instead of sequences");
  ev_cmd->add_option("--seed", pc.seed, "master seed")->required();
  ev_cmd->add_option("--partitions", pc.n_partitions, "number of sampled item partitions");
  ev_cmd->add_option("--folds", pc.folds, "person folds");
  ev_cmd->add_option("--t-max", pc.t_max, "largest test length (0: half the items)");
  ev_cmd->add_option("--decile-t", pc.decile_t, "test length of the residual decile table (0: half the items - 1)");
  ev_cmd->add_option("--dim", pc.K, "embedding dimension K");
  ev_cmd->add_option("--ridge-folds", pc.ridge_folds, "cross-validation folds for the ridge penalty");
  ev_cmd->add_option("--lambdas", pc.n_lambda, "penalty grid size");
  ev_cmd->add_option("--metric", pc.metric, "registered metric name");
  ev_cmd->add_option("--max-iter", pc.smacof.max_iter, "SMACOF iteration cap");
  ev_cmd->add_flag("--no-augment", ev_no_augment, "do not add score indicators to the features");
  ev_cmd->add_option("--out", ev_out, "output directory")->required();

  // describe
  auto* de_cmd = app.add_subcommand("describe", "per-item descriptives");
  InputOptions de_in;
  std::string de_out;
  add_responses(de_cmd, de_in, true);
  add_sequences(de_cmd, de_in);
  de_cmd->get_option("--sequences")->required();
  de_cmd->add_option("--out", de_out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    write_error(err, "UsageError", e.what());
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd == sim_cmd) {
      sim.feature_model = simgen::feature_model_from_string(sim_features);
      sim.sequences = sim.feature_model == simgen::FeatureModel::Sequences;
      sim.threads = threads;
      Run r("simulate", sim_out);
      r.set_seed(sim.seed);
      const auto data = simgen::simulate_dataset(sim);
      r.write_with("responses.csv", [&](std::ostream& o) { io::write_responses_csv(o, data.responses); });
      r.write_with("levels.json", [&](std::ostream& o) { io::write_levels_json(o, io::levels_of(data.responses)); });
      if (sim.sequences) {
        r.write_with("sequences.jsonl", [&](std::ostream& o) { io::write_sequences_jsonl(o, data.sequences); });
      } else {
        const auto fm = mds::build_feature_matrix(data.features, data.responses.person_ids, nullptr, false);
        r.write_with("features.csv", [&](std::ostream& o) { io::write_features_csv(o, fm); });
      }
      ojson truth{{"schema", io::kTruthSchema}, {"seed", sim.seed}, {"person_ids", data.responses.person_ids},
                  {"theta", data.theta}};
      ojson params = ojson::array();
      for (const auto& p : data.params) params.push_back(ojson{{"item_id", p.item_id}, {"a", p.slope}, {"d", p.intercepts}});
      truth["params"] = params;
      r.write("truth.json", truth.dump(2) + "\n");
      r.finish(config_text(*cmd));
    } else if (cmd == fit_cmd) {
      Run r("fit-irt", fit_out);
      const auto in = load_inputs(r, fit_in);
      em.threads = threads;
      const auto fit = irt::fit_grm(in.responses, prior, em);
      r.warn_all(fit.warnings);
      r.count("em_iterations", static_cast<std::size_t>(fit.iterations));
      if (!fit.converged) r.warn("EM stopped at the iteration cap before converging");
      r.write_with("params.json", [&](std::ostream& o) { io::write_params_json(o, fit.params, prior); });
      const irt::LoglikTable table(in.responses, fit.params, prior);
      std::vector<std::size_t> persons(in.responses.n_persons()), items(in.responses.n_items());
      std::iota(persons.begin(), persons.end(), 0);
      std::iota(items.begin(), items.end(), 0);
      const auto theta = table.eap(persons, items);
      r.write_with("theta.csv", [&](std::ostream& o) { io::write_theta_csv(o, in.responses.person_ids, theta); });
      r.finish(config_text(*cmd));
    } else if (cmd == dis_cmd) {
      Run r("dissim", dis_out);
      const auto in = load_inputs(r, dis_in);
      std::vector<seqdiss::ActionSequence> seqs;
      for (const auto& s : in.sequences) {
        if (s.item_id == dis_item) seqs.push_back(s);
      }
      if (seqs.empty()) throw DomainError("no sequences for item " + dis_item);
      const auto d = seqdiss::dissimilarity_matrix(seqs, dis_metric, threads);
      r.write_with("dissim_" + dis_item + ".csv", [&](std::ostream& o) { io::write_dissimilarity_csv(o, d); });
      r.finish(config_text(*cmd));
    } else if (cmd == emb_cmd) {
      Run r("embed", emb_out);
      const auto in = load_inputs(r, emb_in);
      smacof.threads = threads;
      const auto items = split_list(emb_items);
      const auto res = rbscore::embed_training_items(in.sequences, items, in.responses.person_ids, in.responses, emb_K,
                                                     !no_augment, emb_metric, smacof);
      r.write_with("embeddings.json", [&](std::ostream& o) { io::write_embeddings_json(o, res.embedding.models); });
      r.write_with("features.csv", [&](std::ostream& o) { io::write_features_csv(o, res.features); });
      r.finish(config_text(*cmd));
    } else if (cmd == tr_cmd) {
      Run r("train-score", tr_out);
      r.set_seed(tr_seed);
      const auto in = load_inputs(r, tr_in);
      std::istringstream ps(r.read(tr_params));
      const auto pf = io::read_params_json(ps);
      const rbscore::ItemPartition part{split_list(tr_b1), split_list(tr_b2)};
      rbscore::TrainConfig tc;
      tc.augment = !tr_no_augment;
      tc.ridge.folds = ridge_folds;
      tc.ridge.n_lambda = n_lambda;
      tc.ridge.seed = tr_seed;
      tc.ridge.threads = threads;

      rbscore::TrainResult res;
      if (!tr_embeddings.empty()) {
        if (in.sequences.empty()) throw DomainError("--embeddings needs --sequences for the reference sequences");
        std::istringstream es(r.read(tr_embeddings));
        const auto models = io::read_embeddings_json(es);
        const auto by_item = index_sequences(in.sequences);
        rbscore::ProcessEmbedding emb;
        std::vector<mds::ItemFeatures> blocks;
        for (const auto& item : part.B1) {
          auto m = std::find_if(models.begin(), models.end(), [&](const auto& x) { return x.item_id == item; });
          if (m == models.end()) throw DomainError("the embeddings file has no model for item " + item);
          if (m->train_ids != models.front().train_ids) throw DomainError("embeddings were trained on different persons");
          auto it = by_item.find(item);
          std::vector<seqdiss::ActionSequence> refs;
          for (const auto& pid : m->train_ids) {
            if (it == by_item.end() || !it->second.count(pid)) {
              throw DomainError("person " + pid + " has no sequence for item " + item);
            }
            refs.push_back(*it->second.at(pid));
          }
          blocks.push_back(mds::training_features(*m));
          emb.models.push_back(*m);
          emb.sequences.push_back(std::move(refs));
        }
        const auto fm = mds::build_feature_matrix(blocks, emb.models.front().train_ids, &in.responses, tc.augment);
        res = rbscore::train_scoring_rule(in.responses, fm, part, pf.params, pf.prior, tc, &emb);
      } else if (!tr_in.features.empty()) {
        const auto f = load_features(r, tr_in.features);
        const auto blocks = feature_blocks(f, part.B1);
        const auto fm = mds::build_feature_matrix(blocks, f.person_ids, &in.responses, tc.augment);
        res = rbscore::train_scoring_rule(in.responses, fm, part, pf.params, pf.prior, tc);
      } else {
        throw DomainError("train-score needs --embeddings with --sequences, or --features");
      }
      r.warn_all(res.rule.warnings);
      r.write_with("rule.json", [&](std::ostream& o) { io::write_rule_json(o, res.rule); });
      std::vector<double> tx(res.t_x.data(), res.t_x.data() + res.t_x.size());
      std::vector<double> thx(res.theta_x.data(), res.theta_x.data() + res.theta_x.size());
      r.write_with("train_estimates.csv", [&](std::ostream& o) {
        o << "person_id,theta_b1,theta_b2,t_x,theta_x\n";
        for (std::size_t i = 0; i < res.person_ids.size(); ++i) {
          const auto k = static_cast<Eigen::Index>(i);
          o << res.person_ids[i] << ',' << format_double(res.theta_b1(k)) << ',' << format_double(res.theta_b2(k))
            << ',' << format_double(tx[i]) << ',' << format_double(thx[i]) << '\n';
        }
      });
      r.finish(config_text(*cmd));
    } else if (cmd == sc_cmd) {
      Run r("score", sc_out);
      const auto in = load_inputs(r, sc_in);
      std::istringstream rs(r.read(sc_rule));
      const auto rule = io::read_rule_json(rs);
      const rbscore::Scorer scorer(rule);
      std::vector<std::string> ids;
      std::vector<double> theta;
      std::vector<int> missing;
      std::unordered_map<std::string, std::size_t> row_of;
      for (std::size_t i = 0; i < in.responses.n_persons(); ++i) row_of[in.responses.person_ids[i]] = i;
      auto scores_of = [&](const std::string& pid) {
        std::map<std::string, int> s;
        auto it = row_of.find(pid);
        if (it == row_of.end()) return s;
        for (const auto& item : rule.partition.B1) {
          auto j = in.responses.item_index(item);
          if (j) s[item] = in.responses.at(it->second, *j);
        }
        return s;
      };
      if (rule.has_embeddings()) {
        if (in.sequences.empty()) throw DomainError("this rule scores action sequences: pass --sequences");
        const auto by_item = index_sequences(in.sequences);
        auto first = by_item.find(rule.partition.B1.front());
        if (first == by_item.end()) throw DomainError("no sequences for item " + rule.partition.B1.front());
        std::vector<std::string> persons;
        for (const auto& s : in.sequences) {
          if (s.item_id == rule.partition.B1.front()) persons.push_back(s.person_id);
        }
        ids = persons;
        theta.resize(persons.size());
        missing.resize(persons.size());
        std::vector<std::string> errors(persons.size());
        parallel_for(persons.size(), threads, [&](std::size_t i) {
          std::map<std::string, seqdiss::ActionSequence> seqs;
          for (const auto& item : rule.partition.B1) {
            auto it = by_item.find(item);
            if (it == by_item.end() || !it->second.count(persons[i])) {
              errors[i] = "person " + persons[i] + " has no sequence for item " + item;
              return;
            }
            seqs[item] = *it->second.at(persons[i]);
          }
          const auto outcome = scorer.score(seqs, scores_of(persons[i]));
          theta[i] = outcome.theta;
          missing[i] = outcome.missing_scores ? 1 : 0;
        });
        std::vector<std::string> details;
        for (const auto& e : errors) {
          if (!e.empty()) details.push_back(e);
        }
        if (!details.empty()) throw SchemaError("incomplete sequences for scoring", details);
      } else {
        if (sc_in.features.empty()) throw DomainError("this rule was trained on precomputed features: pass --features");
        const auto f = load_features(r, sc_in.features);
        const auto blocks = feature_blocks(f, rule.partition.B1);
        if (rule.augment && !in.has_responses) throw DomainError("this rule uses score indicators: pass --responses");
        const auto fm = mds::build_feature_matrix(blocks, f.person_ids, in.has_responses ? &in.responses : nullptr,
                                                  rule.augment);
        ids = f.person_ids;
        for (Eigen::Index i = 0; i < fm.values.rows(); ++i) {
          theta.push_back(scorer.score_features(fm.values.row(i)));
          missing.push_back(0);
        }
      }
      std::size_t n_missing = 0;
      r.write_with("scores.csv", [&](std::ostream& o) {
        o << "person_id,theta,missing_scores\n";
        for (std::size_t i = 0; i < ids.size(); ++i) {
          o << ids[i] << ',' << format_double(theta[i]) << ',' << missing[i] << '\n';
          n_missing += static_cast<std::size_t>(missing[i]);
        }
      });
      r.count("scored", ids.size());
      r.count("scored_without_scores", n_missing);
      r.finish(config_text(*cmd));
    } else if (cmd == ev_cmd) {
      Run r("evaluate", ev_out);
      r.set_seed(pc.seed);
      const auto in = load_inputs(r, ev_in);
      eval::ProtocolData data;
      data.responses = in.responses;
      if (!ev_in.features.empty()) {
        const auto f = load_features(r, ev_in.features);
        data.features = feature_blocks(f, in.responses.item_ids);
      } else if (!in.sequences.empty()) {
        data.sequences = in.sequences;
      } else {
        throw DomainError("evaluate needs --sequences or --features");
      }
      pc.augment = !ev_no_augment;
      pc.threads = threads;
      const auto report = eval::run_protocol(data, pc);
      r.warn_all(report.warnings);
      r.write_with("eval_rows.csv", [&](std::ostream& o) { io::write_eval_rows_csv(o, report); });
      r.write_with("partition_means.csv", [&](std::ostream& o) { io::write_partition_means_csv(o, report); });
      r.write_with("deciles.csv", [&](std::ostream& o) { io::write_deciles_csv(o, report); });
      r.write_with("summary.json", [&](std::ostream& o) { io::write_summary_json(o, report); });
      r.finish(config_text(*cmd));
    } else if (cmd == de_cmd) {
      Run r("describe", de_out);
      const auto in = load_inputs(r, de_in);
      const auto rows = describe(in.responses, in.sequences);
      r.write_with("descriptives.csv", [&](std::ostream& o) {
        o << "item,persons,score_levels,median_score,action_types,min_length,max_length,median_length\n";
        for (const auto& d : rows) {
          o << d.item_id << ',' << d.persons << ',' << d.score_levels << ',' << format_double(d.median_score) << ','
            << d.action_types << ',' << d.min_length << ',' << d.max_length << ',' << format_double(d.median_length)
            << '\n';
        }
      });
      r.finish(config_text(*cmd));
    }
  } catch (const SchemaError& e) {
    write_error(err, "SchemaError", e.what(), e.details());
    return 1;
  } catch (const CalibrationError& e) {
    write_error(err, "CalibrationError", e.what(), {e.item_id()});
    return 1;
  } catch (const ValidationError& e) {
    write_error(err, "ValidationError", e.what());
    return 1;
  } catch (const DegenerateDesignError& e) {
    write_error(err, "DegenerateDesignError", e.what());
    return 1;
  } catch (const DomainError& e) {
    write_error(err, "DomainError", e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error(err, "Error", e.what());
    return 1;
  }
  return 0;
}

}  // namespace procscore::cli

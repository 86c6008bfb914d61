#include "procscore/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "procscore/error.hpp"
#include "procscore/util.hpp"

namespace procscore::io {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw DomainError(std::string(what) + " '" + s + "' cannot be written to CSV (contains a separator or quote)");
  }
}

json parse_json(std::istream& in, const char* what) {
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

void require_schema(const json& j, const char* expected) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string()) {
    throw SchemaError(std::string("missing schema field, expected ") + expected);
  }
  const auto got = j["schema"].get<std::string>();
  if (got != expected) throw SchemaError("schema version mismatch: file has " + got + ", expected " + expected);
}

template <class T>
T get(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw SchemaError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

double parse_double(const std::string& s, bool* ok) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  *ok = r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty();
  return v;
}

ojson params_to_json(const irt::GrmItemParams& p) {
  return ojson{{"item_id", p.item_id}, {"a", p.slope}, {"d", p.intercepts}};
}

irt::GrmItemParams params_from_json(const json& j) {
  irt::GrmItemParams p;
  p.item_id = get<std::string>(j, "item_id", "item parameters");
  p.slope = get<double>(j, "a", "item parameters");
  p.intercepts = get<std::vector<double>>(j, "d", "item parameters");
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw SchemaError(std::string("invalid item parameters: ") + e.what());
  }
  return p;
}

ojson prior_to_json(const irt::PriorSpec& p) { return ojson{{"nodes", p.nodes}, {"lo", p.lo}, {"hi", p.hi}}; }

irt::PriorSpec prior_from_json(const json& j) {
  irt::PriorSpec p;
  p.nodes = get<int>(j, "nodes", "prior");
  p.lo = get<double>(j, "lo", "prior");
  p.hi = get<double>(j, "hi", "prior");
  return p;
}

ojson matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) flat.push_back(m(i, k));
  }
  return flat;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw SchemaError(std::string(what) + ": expected " + std::to_string(rows * cols) + " values");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
  }
  return m;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ojson embedding_to_json(const mds::EmbeddingModel& m) {
  return ojson{{"item_id", m.item_id},          {"K", m.K},
               {"train_ids", m.train_ids},      {"coords", matrix_to_json(m.coords)},
               {"final_stress", m.final_stress}, {"augment_with_score", m.augment_with_score}};
}

mds::EmbeddingModel embedding_from_json(const json& j) {
  mds::EmbeddingModel m;
  m.item_id = get<std::string>(j, "item_id", "embedding");
  m.K = get<int>(j, "K", "embedding");
  m.train_ids = get<std::vector<std::string>>(j, "train_ids", "embedding");
  m.final_stress = get<double>(j, "final_stress", "embedding");
  m.augment_with_score = get<bool>(j, "augment_with_score", "embedding");
  if (!j.contains("coords")) throw SchemaError("embedding: missing field 'coords'");
  m.coords = matrix_from_json(j["coords"], static_cast<Eigen::Index>(m.train_ids.size()), m.K, "embedding coords");
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw SchemaError(std::string("invalid embedding: ") + e.what());
  }
  return m;
}

void write_json(std::ostream& out, const ojson& j) { out << j.dump(2) << '\n'; }

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DomainError("cannot write " + path.string());
  out << text;
  if (!out) throw DomainError("write failed: " + path.string());
}

irt::ResponseMatrix read_responses_csv(std::istream& in, const Levels* levels) {
  std::string line;
  if (!next_line(in, line)) throw SchemaError("responses CSV is empty");
  const auto header = split(line);
  if (header.size() < 2) throw SchemaError("responses CSV header needs a person column and at least one item");
  irt::ResponseMatrix r;
  r.item_ids.assign(header.begin() + 1, header.end());
  std::vector<std::string> errors;
  std::set<std::string> seen_items;
  for (const auto& id : r.item_ids) {
    if (id.empty()) errors.push_back("line 1: empty item id");
    if (!seen_items.insert(id).second) errors.push_back("line 1: repeated item id " + id);
    if (levels != nullptr && !levels->count(id)) errors.push_back("line 1: no category count for item " + id);
  }
  if (!errors.empty()) throw SchemaError("responses CSV header is invalid", errors);

  const std::size_t J = r.item_ids.size();
  std::set<std::string> seen_persons;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = "line " + std::to_string(lineno);
    if (cells.size() != J + 1) {
      errors.push_back(where + ": expected " + std::to_string(J + 1) + " cells, got " + std::to_string(cells.size()));
      continue;
    }
    if (cells[0].empty()) errors.push_back(where + ": empty person id");
    if (!seen_persons.insert(cells[0]).second) errors.push_back(where + ": repeated person id " + cells[0]);
    r.person_ids.push_back(cells[0]);
    for (std::size_t j = 0; j < J; ++j) {
      const auto& c = cells[j + 1];
      if (c.empty()) {
        r.scores.push_back(irt::kMissing);
        continue;
      }
      int v = 0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size() || v < 0) {
        errors.push_back(where + ", column " + r.item_ids[j] + ": '" + c + "' is not a nonnegative integer score");
        r.scores.push_back(irt::kMissing);
        continue;
      }
      if (levels != nullptr) {
        const int n = levels->at(r.item_ids[j]);
        if (v >= n) {
          errors.push_back(where + ", column " + r.item_ids[j] + ": score " + c + " out of range 0.." +
                           std::to_string(n - 1));
        }
      }
      r.scores.push_back(v);
    }
  }
  if (!errors.empty()) throw SchemaError("responses CSV has invalid rows", errors);
  if (r.person_ids.empty()) throw SchemaError("responses CSV has no persons");

  for (std::size_t j = 0; j < J; ++j) {
    if (levels != nullptr) {
      r.n_categories.push_back(levels->at(r.item_ids[j]));
    } else {
      int mx = 0;
      for (std::size_t i = 0; i < r.n_persons(); ++i) mx = std::max(mx, r.at(i, j));
      r.n_categories.push_back(std::max(2, mx + 1));
    }
  }
  return r;
}

void write_responses_csv(std::ostream& out, const irt::ResponseMatrix& r) {
  out << "person_id";
  for (const auto& id : r.item_ids) {
    check_field(id, "item id");
    out << ',' << id;
  }
  out << '\n';
  for (std::size_t i = 0; i < r.n_persons(); ++i) {
    check_field(r.person_ids[i], "person id");
    out << r.person_ids[i];
    for (std::size_t j = 0; j < r.n_items(); ++j) {
      out << ',';
      if (r.at(i, j) != irt::kMissing) out << r.at(i, j);
    }
    out << '\n';
  }
}

Levels read_levels_json(std::istream& in) {
  const auto j = parse_json(in, "levels");
  require_schema(j, kLevelsSchema);
  const auto levels = get<Levels>(j, "levels", "levels");
  for (const auto& [id, n] : levels) {
    if (n < 2) throw SchemaError("levels: item " + id + " needs at least 2 categories");
  }
  return levels;
}

void write_levels_json(std::ostream& out, const Levels& levels) {
  ojson j{{"schema", kLevelsSchema}, {"levels", levels}};
  write_json(out, j);
}

Levels levels_of(const irt::ResponseMatrix& r) {
  Levels out;
  for (std::size_t j = 0; j < r.n_items(); ++j) out[r.item_ids[j]] = r.n_categories[j];
  return out;
}

std::vector<seqdiss::ActionSequence> read_sequences_jsonl(std::istream& in) {
  std::vector<seqdiss::ActionSequence> out;
  std::vector<std::string> errors;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      errors.push_back(where + ": invalid JSON");
      continue;
    }
    if (!j.is_object() || !j.contains("pid") || !j["pid"].is_string() || !j.contains("item") ||
        !j["item"].is_string() || !j.contains("actions") || !j["actions"].is_array()) {
      errors.push_back(where + ": expected {\"pid\": string, \"item\": string, \"actions\": [string, ...]}");
      continue;
    }
    seqdiss::ActionSequence s;
    s.person_id = j["pid"].get<std::string>();
    s.item_id = j["item"].get<std::string>();
    bool ok = true;
    for (const auto& a : j["actions"]) {
      if (!a.is_string()) {
        ok = false;
        break;
      }
      s.actions.push_back(a.get<std::string>());
    }
    if (!ok) {
      errors.push_back(where + ": actions must be strings");
      continue;
    }
    try {
      s.validate();
    } catch (const DomainError& e) {
      errors.push_back(where + ": " + e.what());
      continue;
    }
    if (!seen.emplace(s.person_id, s.item_id).second) {
      errors.push_back(where + ": repeated sequence for person " + s.person_id + " and item " + s.item_id);
      continue;
    }
    out.push_back(std::move(s));
  }
  if (!errors.empty()) throw SchemaError("sequences JSONL has invalid rows", errors);
  return out;
}

void write_sequences_jsonl(std::ostream& out, const std::vector<seqdiss::ActionSequence>& seqs) {
  for (const auto& s : seqs) {
    ojson j{{"pid", s.person_id}, {"item", s.item_id}, {"actions", s.actions}};
    out << j.dump() << '\n';
  }
}

ParamsFile read_params_json(std::istream& in) {
  const auto j = parse_json(in, "item parameters");
  require_schema(j, kParamsSchema);
  ParamsFile f;
  if (!j.contains("items") || !j["items"].is_array()) throw SchemaError("item parameters: missing 'items' array");
  for (const auto& item : j["items"]) f.params.push_back(params_from_json(item));
  if (j.contains("prior")) f.prior = prior_from_json(j["prior"]);
  return f;
}

void write_params_json(std::ostream& out, const std::vector<irt::GrmItemParams>& params,
                       const irt::PriorSpec& prior) {
  ojson items = ojson::array();
  for (const auto& p : params) items.push_back(params_to_json(p));
  write_json(out, ojson{{"schema", kParamsSchema}, {"prior", prior_to_json(prior)}, {"items", items}});
}

void write_theta_csv(std::ostream& out, const std::vector<std::string>& ids, const std::vector<double>& theta,
                     const std::string& column) {
  if (ids.size() != theta.size()) throw DomainError("theta CSV: ids and values differ in length");
  out << "person_id," << column << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << format_double(theta[i]) << '\n';
}

seqdiss::DissimilarityMatrix read_dissimilarity_csv(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw SchemaError("dissimilarity CSV is empty");
  const auto header = split(line);
  seqdiss::DissimilarityMatrix d;
  d.ids.assign(header.begin() + 1, header.end());
  const auto n = static_cast<Eigen::Index>(d.ids.size());
  d.values.resize(n, n);
  std::vector<std::string> errors;
  Eigen::Index row = 0;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = "line " + std::to_string(lineno);
    if (row >= n || static_cast<Eigen::Index>(cells.size()) != n + 1) {
      errors.push_back(where + ": unexpected row shape");
      continue;
    }
    if (cells[0] != d.ids[static_cast<std::size_t>(row)]) errors.push_back(where + ": row id differs from the header");
    for (Eigen::Index k = 0; k < n; ++k) {
      bool ok = false;
      d.values(row, k) = parse_double(cells[static_cast<std::size_t>(k) + 1], &ok);
      if (!ok) errors.push_back(where + ": cell " + std::to_string(k + 1) + " is not a number");
    }
    ++row;
  }
  if (row != n) errors.push_back("expected " + std::to_string(n) + " rows, got " + std::to_string(row));
  if (!errors.empty()) throw SchemaError("dissimilarity CSV is invalid", errors);
  return d;
}

void write_dissimilarity_csv(std::ostream& out, const seqdiss::DissimilarityMatrix& d) {
  out << "person_id";
  for (const auto& id : d.ids) {
    check_field(id, "person id");
    out << ',' << id;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    out << d.ids[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < d.values.cols(); ++k) out << ',' << format_double(d.values(i, k));
    out << '\n';
  }
}

std::vector<mds::EmbeddingModel> read_embeddings_json(std::istream& in) {
  const auto j = parse_json(in, "embeddings");
  require_schema(j, kEmbeddingSchema);
  if (!j.contains("models") || !j["models"].is_array()) throw SchemaError("embeddings: missing 'models' array");
  std::vector<mds::EmbeddingModel> out;
  for (const auto& m : j["models"]) out.push_back(embedding_from_json(m));
  return out;
}

void write_embeddings_json(std::ostream& out, const std::vector<mds::EmbeddingModel>& models) {
  ojson arr = ojson::array();
  for (const auto& m : models) arr.push_back(embedding_to_json(m));
  write_json(out, ojson{{"schema", kEmbeddingSchema}, {"models", arr}});
}

mds::FeatureMatrix read_features_csv(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw SchemaError("features CSV is empty");
  const auto header = split(line);
  if (header.size() < 2) throw SchemaError("features CSV needs at least one feature column");
  mds::FeatureMatrix f;
  f.column_labels.assign(header.begin() + 1, header.end());
  for (const auto& label : f.column_labels) {
    const auto cut = label.rfind('_');
    if (cut == std::string::npos || cut == 0) throw SchemaError("features CSV: column label '" + label + "' has no item prefix");
    const auto item = label.substr(0, cut);
    if (f.item_ids.empty() || f.item_ids.back() != item) f.item_ids.push_back(item);
  }
  std::vector<std::vector<double>> rows;
  std::vector<std::string> errors;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = "line " + std::to_string(lineno);
    if (cells.size() != header.size()) {
      errors.push_back(where + ": expected " + std::to_string(header.size()) + " cells");
      continue;
    }
    f.person_ids.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      bool ok = false;
      row.push_back(parse_double(cells[k], &ok));
      if (!ok) errors.push_back(where + ", column " + header[k] + ": not a number");
    }
    rows.push_back(std::move(row));
  }
  if (!errors.empty()) throw SchemaError("features CSV is invalid", errors);
  f.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.column_labels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return f;
}

void write_features_csv(std::ostream& out, const mds::FeatureMatrix& f) {
  out << "person_id";
  for (const auto& c : f.column_labels) {
    check_field(c, "column label");
    out << ',' << c;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
    out << f.person_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < f.values.cols(); ++k) out << ',' << format_double(f.values(i, k));
    out << '\n';
  }
}

rbscore::ScoringRule read_rule_json(std::istream& in) {
  const auto j = parse_json(in, "scoring rule");
  require_schema(j, rbscore::ScoringRule::kSchema);
  rbscore::ScoringRule rule;
  const auto& part = j.contains("partition") ? j["partition"] : json::object();
  rule.partition.B1 = get<std::vector<std::string>>(part, "B1", "scoring rule partition");
  rule.partition.B2 = get<std::vector<std::string>>(part, "B2", "scoring rule partition");
  if (!j.contains("grm_params") || !j["grm_params"].is_array()) throw SchemaError("scoring rule: missing grm_params");
  for (const auto& p : j["grm_params"]) rule.grm_params.push_back(params_from_json(p));
  if (!j.contains("prior")) throw SchemaError("scoring rule: missing prior");
  rule.prior = prior_from_json(j["prior"]);
  rule.feature_layout = get<std::vector<std::string>>(j, "feature_layout", "scoring rule");
  rule.augment = get<bool>(j, "augment", "scoring rule");
  rule.n_categories = get<std::vector<int>>(j, "n_categories", "scoring rule");
  rule.metric = get<std::string>(j, "metric", "scoring rule");

  if (j.contains("embeddings")) {
    for (const auto& e : j["embeddings"]) {
      rule.embedding.models.push_back(embedding_from_json(e));
      const auto& m = rule.embedding.models.back();
      const auto refs = get<std::vector<std::vector<std::string>>>(e, "reference_actions", "embedding");
      if (refs.size() != m.n_train()) throw SchemaError("embedding: reference sequences do not match train_ids");
      std::vector<seqdiss::ActionSequence> seqs;
      for (std::size_t i = 0; i < refs.size(); ++i) seqs.push_back({m.train_ids[i], m.item_id, refs[i]});
      rule.embedding.sequences.push_back(std::move(seqs));
    }
  }

  const auto& f1 = j.contains("f1") ? j["f1"] : json::object();
  rule.f1.weights = from_vec(get<std::vector<double>>(f1, "weights", "f1"));
  rule.f1.intercept = get<double>(f1, "intercept", "f1");
  rule.f1.lambda = get<double>(f1, "lambda", "f1");
  rule.f1.means = from_vec(get<std::vector<double>>(f1, "means", "f1"));
  rule.f1.scales = from_vec(get<std::vector<double>>(f1, "scales", "f1"));
  const auto& f2 = j.contains("f2") ? j["f2"] : json::object();
  rule.f2.slope = get<double>(f2, "slope", "f2");
  rule.f2.intercept = get<double>(f2, "intercept", "f2");
  rule.constant_f2 = get<bool>(j, "constant_f2", "scoring rule");
  if (j.contains("warnings")) rule.warnings = get<std::vector<std::string>>(j, "warnings", "scoring rule");
  try {
    rule.validate();
  } catch (const DomainError& e) {
    throw SchemaError(std::string("invalid scoring rule: ") + e.what());
  }
  return rule;
}

void write_rule_json(std::ostream& out, const rbscore::ScoringRule& rule) {
  ojson params = ojson::array();
  for (const auto& p : rule.grm_params) params.push_back(params_to_json(p));
  ojson j{{"schema", rbscore::ScoringRule::kSchema},
          {"partition", ojson{{"B1", rule.partition.B1}, {"B2", rule.partition.B2}}},
          {"grm_params", params},
          {"prior", prior_to_json(rule.prior)},
          {"feature_layout", rule.feature_layout},
          {"augment", rule.augment},
          {"n_categories", rule.n_categories},
          {"metric", rule.metric}};
  if (rule.has_embeddings()) {
    ojson arr = ojson::array();
    for (std::size_t b = 0; b < rule.embedding.models.size(); ++b) {
      ojson e = embedding_to_json(rule.embedding.models[b]);
      ojson refs = ojson::array();
      for (const auto& s : rule.embedding.sequences[b]) refs.push_back(s.actions);
      e["reference_actions"] = refs;
      arr.push_back(e);
    }
    j["embeddings"] = arr;
  }
  j["f1"] = ojson{{"weights", to_vec(rule.f1.weights)},
                  {"intercept", rule.f1.intercept},
                  {"lambda", rule.f1.lambda},
                  {"means", to_vec(rule.f1.means)},
                  {"scales", to_vec(rule.f1.scales)}};
  j["f2"] = ojson{{"slope", rule.f2.slope}, {"intercept", rule.f2.intercept}};
  j["constant_f2"] = rule.constant_f2;
  j["warnings"] = rule.warnings;
  write_json(out, j);
}

void write_eval_rows_csv(std::ostream& out, const eval::EvalReport& report) {
  out << "partition,t,subset,fold,estimator,metric,value\n";
  for (const auto& r : report.rows) {
    out << r.partition << ',' << r.t << ',' << r.subset << ',' << r.fold << ',' << r.estimator << ',' << r.metric
        << ',' << format_double(r.value) << '\n';
  }
}

void write_partition_means_csv(std::ostream& out, const eval::EvalReport& report) {
  out << "partition,t,estimator,mse,tau\n";
  for (const auto& m : report.partition_means) {
    out << m.partition << ',' << m.t << ',' << m.estimator << ',' << format_double(m.mse) << ','
        << format_double(m.tau) << '\n';
  }
}

void write_deciles_csv(std::ostream& out, const eval::EvalReport& report) {
  out << "decile,mse_response,mse_process,mean_size\n";
  for (const auto& d : report.deciles) {
    out << d.decile << ',' << format_double(d.mse_response) << ',' << format_double(d.mse_process) << ','
        << format_double(d.mean_size) << '\n';
  }
}

void write_summary_json(std::ostream& out, const eval::EvalReport& report) {
  ojson rows = ojson::array();
  for (const auto& s : report.summary) {
    rows.push_back(ojson{{"t", s.t},
                         {"estimator", s.estimator},
                         {"mean_mse", s.mean_mse},
                         {"median_mse", s.median_mse},
                         {"mean_tau", s.mean_tau},
                         {"median_tau", s.median_tau}});
  }
  ojson parts = ojson::array();
  for (const auto& p : report.partitions) {
    parts.push_back(ojson{{"scoring_set", p.scoring_set}, {"reference_set", p.reference_set}});
  }
  write_json(out, ojson{{"schema", kSummarySchema},
                        {"partitions", parts},
                        {"summary", rows},
                        {"decile_t", report.decile_t},
                        {"warnings", report.warnings}});
}

}  // namespace procscore::io

#pragma once

// File formats. Every JSON artifact carries a "schema" field and readers
// refuse any other version. CSV and JSONL readers report all offending rows
// at once through SchemaError::details.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "procscore/eval.hpp"
#include "procscore/irt.hpp"
#include "procscore/mds.hpp"
#include "procscore/rbscore.hpp"
#include "procscore/seqdiss.hpp"

namespace procscore::io {

inline constexpr const char* kParamsSchema = "procscore.params.v1";
inline constexpr const char* kLevelsSchema = "procscore.levels.v1";
inline constexpr const char* kEmbeddingSchema = "procscore.embedding.v1";
inline constexpr const char* kSummarySchema = "procscore.eval_summary.v1";
inline constexpr const char* kTruthSchema = "procscore.truth.v1";
inline constexpr const char* kRunLogSchema = "procscore.runlog.v1";

std::string read_text(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate then write, LF only.
void write_text(const std::filesystem::path& path, const std::string& text);

// Number of score categories per item id.
using Levels = std::map<std::string, int>;

// Header "person_id,<item ids>", one row per person, empty cell = missing.
// Without `levels` each item gets max observed score + 1 categories (at
// least 2); with it, out-of-range cells are errors naming row and column.
irt::ResponseMatrix read_responses_csv(std::istream& in, const Levels* levels = nullptr);
void write_responses_csv(std::ostream& out, const irt::ResponseMatrix& r);

Levels read_levels_json(std::istream& in);
void write_levels_json(std::ostream& out, const Levels& levels);
Levels levels_of(const irt::ResponseMatrix& r);

// One {"pid", "item", "actions"} object per line.
std::vector<seqdiss::ActionSequence> read_sequences_jsonl(std::istream& in);
void write_sequences_jsonl(std::ostream& out, const std::vector<seqdiss::ActionSequence>& seqs);

struct ParamsFile {
  std::vector<irt::GrmItemParams> params;
  irt::PriorSpec prior;
};
ParamsFile read_params_json(std::istream& in);
void write_params_json(std::ostream& out, const std::vector<irt::GrmItemParams>& params,
                       const irt::PriorSpec& prior);

// "person_id,theta" rows.
void write_theta_csv(std::ostream& out, const std::vector<std::string>& ids, const std::vector<double>& theta,
                     const std::string& column = "theta");

seqdiss::DissimilarityMatrix read_dissimilarity_csv(std::istream& in);
void write_dissimilarity_csv(std::ostream& out, const seqdiss::DissimilarityMatrix& d);

// A set of per-item embedding models.
std::vector<mds::EmbeddingModel> read_embeddings_json(std::istream& in);
void write_embeddings_json(std::ostream& out, const std::vector<mds::EmbeddingModel>& models);

mds::FeatureMatrix read_features_csv(std::istream& in);
void write_features_csv(std::ostream& out, const mds::FeatureMatrix& f);

rbscore::ScoringRule read_rule_json(std::istream& in);
void write_rule_json(std::ostream& out, const rbscore::ScoringRule& rule);

void write_eval_rows_csv(std::ostream& out, const eval::EvalReport& report);
void write_partition_means_csv(std::ostream& out, const eval::EvalReport& report);
void write_deciles_csv(std::ostream& out, const eval::EvalReport& report);
void write_summary_json(std::ostream& out, const eval::EvalReport& report);

}  // namespace procscore::io

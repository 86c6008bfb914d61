#pragma once

// The procscore command-line tool.
//
//   procscore simulate     synthetic responses, sequences or features, truth
//   procscore fit-irt      GRM calibration and EAP estimates
//   procscore dissim       dissimilarity matrix of one item
//   procscore embed        per-item embeddings and the feature matrix
//   procscore train-score  two-step scoring rule
//   procscore score        scores for new persons
//   procscore evaluate     cross-validated comparison report
//   procscore describe     per-item descriptives
//
// Every command writes run_log.json next to its outputs. Failures print a
// JSON object {"error", "message", "details"} on stderr.

#include <iosfwd>
#include <string>
#include <vector>

#include "procscore/irt.hpp"
#include "procscore/seqdiss.hpp"

namespace procscore::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ItemDescriptives {
  std::string item_id;
  std::size_t persons = 0;
  int score_levels = 0;
  double median_score = 0.0;
  std::size_t action_types = 0;
  std::size_t min_length = 0;
  std::size_t max_length = 0;
  double median_length = 0.0;
};

// One row per item of `responses`; sequences of other items are ignored.
std::vector<ItemDescriptives> describe(const irt::ResponseMatrix& responses,
                                       const std::vector<seqdiss::ActionSequence>& sequences);

// Drops every person with an omission sequence from both inputs and returns
// how many were dropped.
std::size_t exclude_omissions(irt::ResponseMatrix& responses, std::vector<seqdiss::ActionSequence>& sequences);

std::string sha256_hex(const std::string& bytes);

}  // namespace procscore::cli

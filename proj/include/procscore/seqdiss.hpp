#pragma once

// Action sequences and order-based sequence dissimilarity.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace procscore::seqdiss {

struct ActionSequence {
  std::string person_id;
  std::string item_id;
  std::vector<std::string> actions;

  // Throws DomainError on an empty sequence or an empty token.
  void validate() const;
  // ("Start", "Next", "Next_OK"): the person skipped the item.
  bool is_omission() const;
};

struct DissimilarityMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};

// Any symmetric map into [0, 1] with zero self-dissimilarity.
using SequenceMetric = std::function<double(const ActionSequence&, const ActionSequence&)>;

// Order-based sequence similarity. Occurrences of each shared token are
// paired greedily in order (k-th occurrence in s with k-th in t); matched
// pairs contribute |i/|s| - j/|t|| with 1-based positions, every unmatched
// occurrence contributes 1, and the total is divided by |s| + |t|.
double oss(const ActionSequence& s, const ActionSequence& t);

// Named metrics; "oss" is always registered.
void register_metric(const std::string& name, SequenceMetric metric);
SequenceMetric find_metric(const std::string& name);
std::vector<std::string> metric_names();

DissimilarityMatrix dissimilarity_matrix(std::span<const ActionSequence> seqs,
                                         const std::string& metric = "oss",
                                         int threads = 1);

// Entry i is d(train_i, new_seq).
std::vector<double> cross_dissimilarities(const ActionSequence& new_seq,
                                          std::span<const ActionSequence> train_seqs,
                                          const std::string& metric = "oss");

// Training sequences of one item, pre-tokenized so that many new sequences
// can be compared against them. Only the "oss" metric is accelerated.
class SequenceCorpus {
 public:
  explicit SequenceCorpus(std::vector<ActionSequence> seqs);
  ~SequenceCorpus();
  SequenceCorpus(SequenceCorpus&&) noexcept;
  SequenceCorpus& operator=(SequenceCorpus&&) noexcept;

  const std::vector<ActionSequence>& sequences() const { return seqs_; }
  const std::string& item_id() const;
  std::vector<double> cross(const ActionSequence& new_seq) const;

 private:
  struct Encoded;
  std::vector<ActionSequence> seqs_;
  std::unique_ptr<Encoded> encoded_;
};

}  // namespace procscore::seqdiss

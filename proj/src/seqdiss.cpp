#include "procscore/seqdiss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <unordered_set>

#include "procscore/error.hpp"
#include "procscore/util.hpp"

namespace procscore::seqdiss {

namespace {

// Token occurrences sorted by (token id, position). Ids follow the
// lexicographic order of the token strings, so the accumulation order in
// oss_encoded does not depend on which vocabulary produced them.
struct EncodedSequence {
  std::vector<std::pair<int, int>> occurrences;
  int length = 0;
};

using Vocabulary = std::map<std::string, int, std::less<>>;

Vocabulary build_vocabulary(std::span<const ActionSequence* const> seqs) {
  Vocabulary vocab;
  for (const auto* s : seqs) {
    for (const auto& a : s->actions) vocab.emplace(a, 0);
  }
  int next = 0;
  for (auto& [token, id] : vocab) id = next++;
  return vocab;
}

EncodedSequence encode(const ActionSequence& s, const Vocabulary& vocab) {
  EncodedSequence e;
  e.length = static_cast<int>(s.actions.size());
  e.occurrences.reserve(s.actions.size());
  for (int pos = 0; pos < e.length; ++pos) {
    e.occurrences.emplace_back(vocab.find(s.actions[pos])->second, pos + 1);
  }
  std::sort(e.occurrences.begin(), e.occurrences.end());
  return e;
}

double oss_encoded(const EncodedSequence& s, const EncodedSequence& t) {
  const auto& a = s.occurrences;
  const auto& b = t.occurrences;
  const double ls = s.length;
  const double lt = t.length;
  double matched = 0.0;
  long unmatched = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      ++unmatched;
      ++i;
    } else if (i == a.size() || b[j].first < a[i].first) {
      ++unmatched;
      ++j;
    } else {
      matched += std::abs(a[i].second / ls - b[j].second / lt);
      ++i;
      ++j;
    }
  }
  return (matched + static_cast<double>(unmatched)) / (ls + lt);
}

void check_pair(const ActionSequence& s, const ActionSequence& t) {
  s.validate();
  t.validate();
  if (s.item_id != t.item_id) {
    throw DomainError("sequences belong to different items: " + s.item_id + " vs " + t.item_id);
  }
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, SequenceMetric>& registry() {
  static std::map<std::string, SequenceMetric> r{{"oss", &oss}};
  return r;
}

}  // namespace

void ActionSequence::validate() const {
  if (actions.empty()) throw DomainError("empty action sequence for person " + person_id + " item " + item_id);
  for (const auto& a : actions) {
    if (a.empty()) throw DomainError("empty action token for person " + person_id + " item " + item_id);
  }
}

bool ActionSequence::is_omission() const {
  return actions.size() == 3 && actions[0] == "Start" && actions[1] == "Next" && actions[2] == "Next_OK";
}

double oss(const ActionSequence& s, const ActionSequence& t) {
  check_pair(s, t);
  const ActionSequence* both[] = {&s, &t};
  const Vocabulary vocab = build_vocabulary(both);
  return oss_encoded(encode(s, vocab), encode(t, vocab));
}

void register_metric(const std::string& name, SequenceMetric metric) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[name] = std::move(metric);
}

SequenceMetric find_metric(const std::string& name) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  auto it = registry().find(name);
  if (it == registry().end()) throw DomainError("unknown dissimilarity metric: " + name);
  return it->second;
}

std::vector<std::string> metric_names() {
  std::lock_guard<std::mutex> lock(registry_mutex());
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

DissimilarityMatrix dissimilarity_matrix(std::span<const ActionSequence> seqs,
                                         const std::string& metric, int threads) {
  const std::size_t n = seqs.size();
  DissimilarityMatrix out;
  out.values = Eigen::MatrixXd::Zero(n, n);
  std::unordered_set<std::string> seen;
  for (const auto& s : seqs) {
    s.validate();
    if (!seqs.empty() && s.item_id != seqs[0].item_id) {
      throw DomainError("dissimilarity_matrix: sequences span several items");
    }
    if (!seen.insert(s.person_id).second) {
      throw DomainError("dissimilarity_matrix: duplicate person id " + s.person_id);
    }
    out.ids.push_back(s.person_id);
  }

  if (metric == "oss") {
    std::vector<const ActionSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    const Vocabulary vocab = build_vocabulary(ptrs);
    std::vector<EncodedSequence> enc;
    enc.reserve(n);
    for (const auto& s : seqs) enc.push_back(encode(s, vocab));
    parallel_for(n, threads, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < n; ++j) out.values(i, j) = oss_encoded(enc[i], enc[j]);
    });
  } else {
    const SequenceMetric fn = find_metric(metric);
    parallel_for(n, threads, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < n; ++j) out.values(i, j) = fn(seqs[i], seqs[j]);
    });
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.values(j, i) = out.values(i, j);
  }
  return out;
}

std::vector<double> cross_dissimilarities(const ActionSequence& new_seq,
                                          std::span<const ActionSequence> train_seqs,
                                          const std::string& metric) {
  std::vector<double> out;
  out.reserve(train_seqs.size());
  for (const auto& t : train_seqs) check_pair(t, new_seq);
  if (metric == "oss") {
    return SequenceCorpus({train_seqs.begin(), train_seqs.end()}).cross(new_seq);
  } else {
    const SequenceMetric fn = find_metric(metric);
    for (const auto& t : train_seqs) out.push_back(fn(t, new_seq));
  }
  return out;
}

struct SequenceCorpus::Encoded {
  Vocabulary vocab;
  std::vector<EncodedSequence> seqs;
};

SequenceCorpus::SequenceCorpus(std::vector<ActionSequence> seqs)
    : seqs_(std::move(seqs)), encoded_(std::make_unique<Encoded>()) {
  if (seqs_.empty()) throw DomainError("SequenceCorpus: no sequences");
  std::vector<const ActionSequence*> ptrs;
  for (const auto& s : seqs_) {
    s.validate();
    if (s.item_id != seqs_[0].item_id) throw DomainError("SequenceCorpus: sequences span several items");
    ptrs.push_back(&s);
  }
  encoded_->vocab = build_vocabulary(ptrs);
  for (const auto& s : seqs_) encoded_->seqs.push_back(encode(s, encoded_->vocab));
}

SequenceCorpus::~SequenceCorpus() = default;
SequenceCorpus::SequenceCorpus(SequenceCorpus&&) noexcept = default;
SequenceCorpus& SequenceCorpus::operator=(SequenceCorpus&&) noexcept = default;

const std::string& SequenceCorpus::item_id() const { return seqs_.front().item_id; }

std::vector<double> SequenceCorpus::cross(const ActionSequence& new_seq) const {
  check_pair(seqs_.front(), new_seq);
  // Tokens unseen in training never match, so their ids only need to be
  // distinct from the vocabulary.
  const int base = static_cast<int>(encoded_->vocab.size());
  std::map<std::string, int, std::less<>> unseen;
  EncodedSequence target;
  target.length = static_cast<int>(new_seq.actions.size());
  for (int pos = 0; pos < target.length; ++pos) {
    const auto& a = new_seq.actions[pos];
    int id;
    if (auto it = encoded_->vocab.find(a); it != encoded_->vocab.end()) {
      id = it->second;
    } else {
      id = unseen.emplace(a, base + static_cast<int>(unseen.size())).first->second;
    }
    target.occurrences.emplace_back(id, pos + 1);
  }
  std::sort(target.occurrences.begin(), target.occurrences.end());
  std::vector<double> out;
  out.reserve(seqs_.size());
  for (const auto& e : encoded_->seqs) out.push_back(oss_encoded(e, target));
  return out;
}

}  // namespace procscore::seqdiss

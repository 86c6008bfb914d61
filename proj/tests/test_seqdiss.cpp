#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "procscore/error.hpp"
#include "procscore/seqdiss.hpp"

using namespace procscore;
using namespace procscore::seqdiss;

namespace {

ActionSequence seq(std::string pid, std::vector<std::string> actions, std::string item = "U01a") {
  return {std::move(pid), std::move(item), std::move(actions)};
}

std::vector<ActionSequence> random_corpus(int n, std::uint64_t seed, int vocab = 8) {
  std::mt19937_64 rng(seed);
  std::vector<ActionSequence> out;
  for (int i = 0; i < n; ++i) {
    const int len = 1 + static_cast<int>(rng() % 15);
    std::vector<std::string> a;
    for (int k = 0; k < len; ++k) a.push_back("A" + std::to_string(rng() % vocab));
    out.push_back(seq("p" + std::to_string(i), a));
  }
  return out;
}

// Literal reading of the definition: walk s left to right, pair each token
// with the first still-unpaired occurrence of the same token in t.
double oss_bruteforce(const ActionSequence& s, const ActionSequence& t) {
  const auto& a = s.actions;
  const auto& b = t.actions;
  std::vector<bool> used(b.size(), false);
  std::vector<std::pair<std::string, double>> terms;
  int matched = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (!used[j] && b[j] == a[i]) {
        used[j] = true;
        terms.emplace_back(a[i], std::abs((i + 1.0) / a.size() - (j + 1.0) / b.size()));
        ++matched;
        break;
      }
    }
  }
  long double m = 0;
  for (const auto& [tok, v] : terms) m += v;
  const double unmatched = static_cast<double>(a.size() + b.size() - 2 * matched);
  return static_cast<double>((m + unmatched) / (a.size() + b.size()));
}

}  // namespace

TEST_CASE("oss identity, disjointness and symmetry") {
  const auto s = seq("p1", {"Start", "Click_W2", "Click_Learn_More", "Toolbar_Bookmark", "Next", "Next_OK"});
  CHECK(oss(s, s) == 0.0);

  const auto a = seq("p1", {"a", "b", "c"});
  const auto b = seq("p2", {"d", "e", "f", "g", "h"});
  CHECK(oss(a, b) == 1.0);

  const auto corpus = random_corpus(200, 7);
  for (int k = 0; k < 100; ++k) {
    const auto& x = corpus[2 * k];
    const auto& y = corpus[2 * k + 1];
    const double d = oss(x, y);
    CHECK(d == oss(y, x));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(std::abs(d - oss_bruteforce(x, y)) < 1e-12);
    CHECK((d == 0.0) == (x.actions == y.actions));
  }
}

TEST_CASE("oss hand example with repeated tokens") {
  // s = (A, B, A), t = (A, A): A1<->A1 |1/3-1/2|, A3<->A2 |3/3-2/2|, B unmatched.
  const auto s = seq("p1", {"A", "B", "A"});
  const auto t = seq("p2", {"A", "A"});
  CHECK(oss(s, t) == doctest::Approx((1.0 / 6.0 + 0.0 + 1.0) / 5.0).epsilon(1e-15));
}

TEST_CASE("oss error paths") {
  const auto a = seq("p1", {"a"});
  CHECK_THROWS_AS(oss(a, seq("p2", {})), DomainError);
  CHECK_THROWS_AS(oss(a, seq("p2", {"a"}, "other")), DomainError);
  CHECK_THROWS_AS(oss(a, seq("p2", {""})), DomainError);
}

TEST_CASE("dissimilarity matrix") {
  SUBCASE("single sequence") {
    const std::vector<ActionSequence> one{seq("p1", {"a", "b"})};
    const auto m = dissimilarity_matrix(one);
    REQUIRE(m.values.rows() == 1);
    CHECK(m.values(0, 0) == 0.0);
  }
  SUBCASE("identical sequences") {
    const std::vector<ActionSequence> three{seq("p1", {"a", "b"}), seq("p2", {"c"}), seq("p3", {"a", "b"})};
    const auto m = dissimilarity_matrix(three);
    CHECK(m.values(0, 2) == 0.0);
    CHECK(m.values(0, 1) > 0.0);
  }
  SUBCASE("matches looped pairwise calls") {
    const auto corpus = random_corpus(50, 3);
    const auto m = dissimilarity_matrix(corpus, "oss", 3);
    for (int i = 0; i < 50; ++i) {
      CHECK(m.values(i, i) == 0.0);
      for (int j = 0; j < 50; ++j) {
        CHECK(m.values(i, j) == oss(corpus[i], corpus[j]));
        CHECK(m.values(i, j) == m.values(j, i));
        CHECK(m.values(i, j) >= 0.0);
        CHECK(m.values(i, j) <= 1.0);
      }
    }
  }
  SUBCASE("duplicate person ids are rejected") {
    const std::vector<ActionSequence> dup{seq("p1", {"a"}), seq("p1", {"b"})};
    CHECK_THROWS_AS(dissimilarity_matrix(dup), DomainError);
  }
  SUBCASE("relabeling equivariance") {
    auto corpus = random_corpus(30, 9);
    const auto m = dissimilarity_matrix(corpus);
    std::vector<int> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
    std::vector<ActionSequence> permuted;
    for (int k : perm) permuted.push_back(corpus[k]);
    const auto mp = dissimilarity_matrix(permuted);
    for (int i = 0; i < 30; ++i) {
      for (int j = 0; j < 30; ++j) CHECK(mp.values(i, j) == m.values(perm[i], perm[j]));
    }
  }
}

TEST_CASE("omission sequences are ordinary sequences") {
  const auto omit = seq("p1", {"Start", "Next", "Next_OK"});
  CHECK(omit.is_omission());
  CHECK_FALSE(seq("p2", {"Start", "Next"}).is_omission());
  CHECK(oss(omit, omit) == 0.0);
}

TEST_CASE("cross dissimilarities") {
  const auto train = random_corpus(20, 5);
  SUBCASE("identical to a training sequence") {
    auto probe = train[4];
    probe.person_id = "new";
    const auto d = cross_dissimilarities(probe, train);
    CHECK(d[4] == 0.0);
  }
  SUBCASE("singleton training set") {
    const std::vector<ActionSequence> one{train[0]};
    const auto d = cross_dissimilarities(train[1], one);
    REQUIRE(d.size() == 1);
    CHECK(d[0] == oss(train[0], train[1]));
  }
  SUBCASE("matches looped calls, including unseen tokens") {
    auto probe = seq("new", {"A1", "Zzz", "A3", "A1", "Yyy"});
    const auto d = cross_dissimilarities(probe, train);
    const SequenceCorpus corpus(train);
    const auto d2 = corpus.cross(probe);
    for (std::size_t i = 0; i < train.size(); ++i) {
      CHECK(d[i] == oss(train[i], probe));
      CHECK(d2[i] == d[i]);
    }
  }
  SUBCASE("item mismatch") {
    CHECK_THROWS_AS(cross_dissimilarities(seq("x", {"a"}, "other"), train), DomainError);
  }
}

TEST_CASE("metric registry") {
  register_metric("length_gap", [](const ActionSequence& a, const ActionSequence& b) {
    const double la = a.actions.size(), lb = b.actions.size();
    return std::abs(la - lb) / (la + lb);
  });
  const auto corpus = random_corpus(10, 2);
  const auto m = dissimilarity_matrix(corpus, "length_gap");
  CHECK(m.values(0, 0) == 0.0);
  CHECK(m.values(1, 2) == m.values(2, 1));
  CHECK_THROWS_AS(find_metric("nope"), DomainError);
  const auto names = metric_names();
  CHECK(std::find(names.begin(), names.end(), "oss") != names.end());
}

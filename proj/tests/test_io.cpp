#include <doctest.h>

#include <sstream>

#include "procscore/error.hpp"
#include "procscore/io.hpp"
#include "procscore/simgen.hpp"

using namespace procscore;

namespace {

template <class F>
std::vector<std::string> schema_details(F&& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e.details();
  }
  FAIL("expected a SchemaError");
  return {};
}

bool contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("responses CSV round trip") {
  irt::ResponseMatrix r;
  r.person_ids = {"P1", "P2", "P3"};
  r.item_ids = {"A", "B"};
  r.n_categories = {4, 2};
  r.scores = {3, 0, irt::kMissing, 1, 0, irt::kMissing};
  std::stringstream ss;
  io::write_responses_csv(ss, r);
  CHECK(ss.str() == "person_id,A,B\nP1,3,0\nP2,,1\nP3,0,\n");

  const auto levels = io::levels_of(r);
  const auto back = io::read_responses_csv(ss, &levels);
  CHECK(back.person_ids == r.person_ids);
  CHECK(back.item_ids == r.item_ids);
  CHECK(back.scores == r.scores);
  CHECK(back.n_categories == r.n_categories);

  // Without levels the counts come from the data.
  std::stringstream again("person_id,A,B\nP1,3,0\nP2,,1\n");
  CHECK(io::read_responses_csv(again).n_categories == std::vector<int>{4, 2});
}

TEST_CASE("responses CSV errors name row and column") {
  const io::Levels levels{{"A", 4}, {"B", 2}};
  std::stringstream bad("person_id,A,B\nP1,5,0\nP2,x,1\nP3,1\nP1,0,0\n");
  const auto details = schema_details([&] { io::read_responses_csv(bad, &levels); });
  CHECK(contains(details, "line 2, column A: score 5 out of range 0..3"));
  CHECK(contains(details, "line 3, column A: 'x'"));
  CHECK(contains(details, "line 4: expected 3 cells, got 2"));
  CHECK(contains(details, "line 5: repeated person id P1"));

  std::stringstream unknown("person_id,A,C\nP1,0,0\n");
  CHECK(contains(schema_details([&] { io::read_responses_csv(unknown, &levels); }), "no category count for item C"));
}

TEST_CASE("levels and params refuse other schema versions") {
  std::stringstream ss;
  io::write_levels_json(ss, {{"A", 3}});
  CHECK(io::read_levels_json(ss).at("A") == 3);

  std::stringstream wrong(R"({"schema": "procscore.levels.v0", "levels": {"A": 3}})");
  CHECK_THROWS_WITH_AS(io::read_levels_json(wrong), doctest::Contains("schema version mismatch"), SchemaError);
  std::stringstream none(R"({"levels": {"A": 3}})");
  CHECK_THROWS_AS(io::read_levels_json(none), SchemaError);

  std::vector<irt::GrmItemParams> params{{"A", 1.25, {0.75, -0.5}}, {"B", 0.1 + 0.2, {0.0}}};
  irt::PriorSpec prior{41, -5.0, 5.0};
  std::stringstream ps;
  io::write_params_json(ps, params, prior);
  const auto back = io::read_params_json(ps);
  REQUIRE(back.params.size() == 2);
  CHECK(back.params[1].slope == params[1].slope);
  CHECK(back.params[0].intercepts == params[0].intercepts);
  CHECK(back.prior.nodes == 41);

  std::stringstream rule_as_params(R"({"schema": "procscore.rule.v1"})");
  CHECK_THROWS_AS(io::read_params_json(rule_as_params), SchemaError);
  std::stringstream bad_params(R"({"schema": "procscore.params.v1", "items": [{"item_id": "A", "a": -1, "d": [0]}]})");
  CHECK_THROWS_AS(io::read_params_json(bad_params), SchemaError);
}

TEST_CASE("sequences JSONL") {
  std::vector<seqdiss::ActionSequence> seqs{{"P1", "A", {"Start", "x", "Next", "Next_OK"}},
                                            {"P2", "A", {"Start", "Next", "Next_OK"}}};
  std::stringstream ss;
  io::write_sequences_jsonl(ss, seqs);
  CHECK(ss.str().find(R"({"pid":"P1","item":"A","actions":["Start","x","Next","Next_OK"]})") == 0);
  const auto back = io::read_sequences_jsonl(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].is_omission());
  CHECK(back[0].actions == seqs[0].actions);

  std::stringstream bad(
      "{\"pid\":\"P1\",\"item\":\"A\",\"actions\":[\"a\"]}\n"
      "not json\n"
      "{\"pid\":\"P2\",\"item\":\"A\",\"actions\":[]}\n"
      "{\"pid\":\"P3\",\"item\":\"A\",\"actions\":[1]}\n"
      "\n"
      "{\"pid\":\"P1\",\"item\":\"A\",\"actions\":[\"b\"]}\n");
  const auto details = schema_details([&] { io::read_sequences_jsonl(bad); });
  CHECK(details.size() == 4);
  CHECK(contains(details, "line 2: invalid JSON"));
  CHECK(contains(details, "line 3"));
  CHECK(contains(details, "line 4: actions must be strings"));
  CHECK(contains(details, "line 6: repeated sequence"));
}

TEST_CASE("dissimilarity, embedding and feature files round trip exactly") {
  simgen::SimConfig sc;
  sc.N = 30;
  sc.J = 2;
  sc.seed = 4;
  const auto sim = simgen::simulate_dataset(sc);
  std::vector<seqdiss::ActionSequence> item0;
  for (const auto& s : sim.sequences) {
    if (s.item_id == "I01") item0.push_back(s);
  }
  const auto d = seqdiss::dissimilarity_matrix(item0);
  std::stringstream ds;
  io::write_dissimilarity_csv(ds, d);
  const auto dback = io::read_dissimilarity_csv(ds);
  CHECK(dback.ids == d.ids);
  CHECK(dback.values == d.values);

  const auto fit = mds::embed_train(d, 3, {}, "I01");
  std::stringstream es;
  io::write_embeddings_json(es, {fit.model});
  const auto models = io::read_embeddings_json(es);
  REQUIRE(models.size() == 1);
  CHECK(models[0].coords == fit.model.coords);
  CHECK(models[0].train_ids == fit.model.train_ids);
  CHECK(models[0].final_stress == fit.model.final_stress);

  const std::vector<mds::ItemFeatures> blocks{mds::training_features(fit.model)};
  const auto fm = mds::build_feature_matrix(blocks, fit.model.train_ids, &sim.responses, true);
  std::stringstream fs;
  io::write_features_csv(fs, fm);
  const auto fback = io::read_features_csv(fs);
  CHECK(fback.column_labels == fm.column_labels);
  CHECK(fback.item_ids == std::vector<std::string>{"I01"});
  CHECK(fback.values == fm.values);
}

TEST_CASE("scoring rule round trip keeps scores bit-identical") {
  simgen::SimConfig sc;
  sc.N = 80;
  sc.J = 3;
  sc.seed = 6;
  const auto sim = simgen::simulate_dataset(sc);
  const rbscore::ItemPartition part{{"I01"}, {"I02", "I03"}};
  std::vector<std::string> train(sim.responses.person_ids.begin(), sim.responses.person_ids.begin() + 60);
  const auto emb = rbscore::embed_training_items(sim.sequences, part.B1, train, sim.responses, 3, true);
  const auto res = rbscore::train_scoring_rule(sim.responses, emb.features, part, sim.params, {}, {}, &emb.embedding);

  std::stringstream rs;
  io::write_rule_json(rs, res.rule);
  const std::string text = rs.str();
  const auto back = io::read_rule_json(rs);
  std::stringstream again;
  io::write_rule_json(again, back);
  CHECK(again.str() == text);

  const rbscore::Scorer s1(res.rule), s2(back);
  for (std::size_t i = 60; i < 80; ++i) {
    std::map<std::string, seqdiss::ActionSequence> seq{{"I01", sim.sequences[i * 3]}};
    std::map<std::string, int> score{{"I01", sim.responses.at(i, 0)}};
    CHECK(s1.score(seq, score).theta == s2.score(seq, score).theta);
  }

  std::stringstream tampered(text.substr(0, text.find("procscore.rule.v1")) + "procscore.rule.v2" +
                             text.substr(text.find("procscore.rule.v1") + 17));
  CHECK_THROWS_WITH_AS(io::read_rule_json(tampered), doctest::Contains("schema version mismatch"), SchemaError);
}

TEST_CASE("report writers") {
  eval::EvalReport r;
  r.rows.push_back({1, 2, "I01+I03", 3, "process", "tau", 0.125});
  r.partition_means.push_back({1, 2, "process", 0.5, 0.25});
  r.deciles.push_back({1, 0.75, 0.5, 40});
  std::stringstream a, b, c;
  io::write_eval_rows_csv(a, r);
  io::write_partition_means_csv(b, r);
  io::write_deciles_csv(c, r);
  CHECK(a.str() == "partition,t,subset,fold,estimator,metric,value\n1,2,I01+I03,3,process,tau,0.125\n");
  CHECK(b.str() == "partition,t,estimator,mse,tau\n1,2,process,0.5,0.25\n");
  CHECK(c.str() == "decile,mse_response,mse_process,mean_size\n1,0.75,0.5,40\n");
  std::stringstream j;
  io::write_summary_json(j, r);
  CHECK(j.str().find("\"schema\": \"procscore.eval_summary.v1\"") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <set>

#include "chembed/synth.hpp"
#include "chembed/util.hpp"

using namespace chembed;

namespace {

PassageStore store_of(std::vector<std::pair<std::string, std::string>> items) {
  PassageStore store;
  for (auto& [id, text] : items) {
    Passage p;
    p.id = id;
    p.text = text;
    store.add(std::move(p));
  }
  return store;
}

ClientConfig fast_config() {
  ClientConfig cfg;
  cfg.requests_per_minute = 1e9;
  cfg.retry_backoff_ms = 0;
  cfg.concurrency = 4;
  cfg.model = "mock-model";
  return cfg;
}

}  // namespace

TEST_CASE("prompt: embeds passage exactly once and states the constraints") {
  Passage p;
  p.id = "p1";
  p.text = "Benzene undergoes electrophilic aromatic substitution.";
  const std::string prompt = render_query_prompt(p);

  std::size_t count = 0, pos = 0;
  while ((pos = prompt.find(p.text, pos)) != std::string::npos) {
    ++count;
    pos += p.text.size();
  }
  CHECK(count == 1);
  CHECK(prompt.find("according to this paragraph") != std::string::npos);
  CHECK(prompt.find("UNSUITABLE") != std::string::npos);
  CHECK(prompt.find("yes/no") != std::string::npos);
  CHECK(prompt.find("funding") != std::string::npos);

  Passage empty;
  empty.id = "e";
  CHECK_THROWS_AS(render_query_prompt(empty), std::invalid_argument);
}

TEST_CASE("validate_query: rule table") {
  CHECK(!validate_query("Does benzene boil at 80 \xC2\xB0"
                        "C?")
           .ok);
  CHECK(validate_query("What reagent reduces ketones under mild conditions?").ok);
  CHECK(!validate_query("According to this paragraph, what is X?").ok);
  CHECK(!validate_query("").ok);
  CHECK(!validate_query("   ").ok);
  CHECK(!validate_query("Is water polar?").ok);
  CHECK(!validate_query("Can lithium reduce that? And why?").ok);
  CHECK(!validate_query("What does the text say about acids?").ok);
  CHECK(validate_query("How does temperature affect reaction rate").ok);
}

TEST_CASE("generate: mock transport produces one pair per passage") {
  const auto store = store_of({
      {"p1", "Palladium catalysts enable cross coupling reactions efficiently."},
      {"p2", "Chromatography separates mixtures based on polarity differences."},
  });
  auto [pairs, refusals] = generate_pairs(fast_config(), store, make_mock_transport());
  CHECK(pairs.size() == 2);
  CHECK(refusals.entries.empty());
  CHECK(pairs[0].passage_id == "p1");
  CHECK(pairs[1].passage_id == "p2");
  for (const auto& p : pairs) CHECK(validate_query(p.query).ok);
}

TEST_CASE("generate: sentinel goes to the refusal log") {
  const auto store = store_of({{"p1", "Catalysis accelerates reactions."},
                               {"p2", "ok"}});
  Transport transport = [](const std::string& prompt) -> TransportResult {
    if (prompt.find("Catalysis") != std::string::npos)
      return {true, "What catalyst accelerates reactions in this context?", ""};
    return {true, "UNSUITABLE", ""};
  };
  auto [pairs, refusals] = generate_pairs(fast_config(), store, transport);
  CHECK(pairs.size() == 1);
  REQUIRE(refusals.entries.size() == 1);
  CHECK(refusals.entries[0].first == "p2");
  CHECK(refusals.entries[0].second == RefusalReason::model_refused);
}

TEST_CASE("generate: invalid replies are validation failures") {
  const auto store = store_of({{"p1", "Some passage text here."}});
  Transport transport = [](const std::string&) -> TransportResult {
    return {true, "Is this a yes/no question?", ""};
  };
  auto [pairs, refusals] = generate_pairs(fast_config(), store, transport);
  CHECK(pairs.empty());
  REQUIRE(refusals.entries.size() == 1);
  CHECK(refusals.entries[0].second == RefusalReason::validation_failed);
}

TEST_CASE("generate: transport errors exhaust retries then continue") {
  const auto store = store_of({{"p1", "First passage text."}, {"p2", "Second passage text."}});
  std::atomic<int> p1_attempts{0};
  Transport transport = [&](const std::string& prompt) -> TransportResult {
    if (prompt.find("First") != std::string::npos) {
      ++p1_attempts;
      return {false, "", "boom"};
    }
    return {true, "What distinguishes the second passage topic from others?", ""};
  };
  ClientConfig cfg = fast_config();
  cfg.max_retries = 2;
  auto [pairs, refusals] = generate_pairs(cfg, store, transport);
  CHECK(p1_attempts == 3);  // initial try + 2 retries
  CHECK(pairs.size() == 1);
  REQUIRE(refusals.entries.size() == 1);
  CHECK(refusals.entries[0].second == RefusalReason::transport_error);
}

TEST_CASE("generate: conservation over the store") {
  std::vector<std::pair<std::string, std::string>> items;
  for (int i = 0; i < 37; ++i)
    items.push_back({"p" + std::to_string(i),
                     "Passage number " + std::to_string(i) + " describes reaction kinetics."});
  const auto store = store_of(items);
  Rng rng(7);
  Transport transport = [&](const std::string& prompt) -> TransportResult {
    const double roll = static_cast<double>(fnv1a64(prompt) % 100) / 100.0;
    if (roll < 0.2) return {true, "UNSUITABLE", ""};
    if (roll < 0.3) return {true, "is it?", ""};
    return {true, "What governs the kinetics described in passage " +
                      std::to_string(fnv1a64(prompt) % 1000) + "?", ""};
  };
  auto [pairs, refusals] = generate_pairs(fast_config(), store, transport);
  CHECK(pairs.size() + refusals.entries.size() == store.size());
  // Emitted pairs all satisfy the validator; logs and pairs are disjoint.
  std::set<std::string> pair_ids, refusal_ids;
  for (const auto& p : pairs) {
    CHECK(validate_query(p.query).ok);
    pair_ids.insert(p.passage_id);
  }
  for (const auto& [id, reason] : refusals.entries) refusal_ids.insert(id);
  for (const auto& id : pair_ids) CHECK(!refusal_ids.count(id));
}

TEST_CASE("generate: checkpoint resume skips processed ids and is byte-stable") {
  std::vector<std::pair<std::string, std::string>> items;
  for (int i = 0; i < 10; ++i)
    items.push_back({"p" + std::to_string(i),
                     "Stable passage " + std::to_string(i) + " about electrochemistry cells."});
  const auto store = store_of(items);

  const std::string ck = "test_synth_checkpoint.txt";
  std::remove(ck.c_str());

  // Full run without checkpoint: the reference output.
  auto [all_pairs, all_refusals] = generate_pairs(fast_config(), store, make_mock_transport());

  // Half store first, then the full store with the checkpoint.
  ClientConfig cfg = fast_config();
  cfg.checkpoint_path = ck;
  PassageStore half;
  for (int i = 0; i < 5; ++i) half.add(store.at(static_cast<std::size_t>(i)));
  auto [first_pairs, first_refusals] = generate_pairs(cfg, half, make_mock_transport());
  auto [second_pairs, second_refusals] = generate_pairs(cfg, store, make_mock_transport());

  std::vector<PairRecord> combined = first_pairs;
  combined.insert(combined.end(), second_pairs.begin(), second_pairs.end());
  REQUIRE(combined.size() == all_pairs.size());
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(combined[i].passage_id == all_pairs[i].passage_id);
    CHECK(combined[i].query == all_pairs[i].query);
  }
  std::remove(ck.c_str());
}

TEST_CASE("generate: contract errors") {
  CHECK_THROWS_AS(generate_pairs(fast_config(), PassageStore{}, make_mock_transport()),
                  std::invalid_argument);
  const auto store = store_of({{"p1", "text"}});
  CHECK_THROWS_AS(generate_pairs(fast_config(), store, Transport{}), std::invalid_argument);
}

TEST_CASE("split: sizes, disjointness, single-relevant qrels") {
  std::vector<PairRecord> pairs;
  for (int i = 0; i < 10; ++i) {
    pairs.push_back({"What about topic " + std::to_string(i) + "?",
                     "p" + std::to_string(i),
                     "Passage text " + std::to_string(i), "mock", Split::train});
  }
  const SplitResult split = split_train_eval(pairs, 0.2, 42);
  CHECK(split.train.size() == 8);
  CHECK(split.eval.queries.size() == 2);
  CHECK(split.eval.corpus.size() == 2);

  std::set<std::string> eval_ids;
  for (const auto& p : split.eval.corpus.passages()) eval_ids.insert(p.id);
  for (const auto& p : split.train) CHECK(!eval_ids.count(p.passage_id));

  for (const auto& [qid, text] : split.eval.queries) {
    REQUIRE(split.eval.qrels.count(qid));
    CHECK(split.eval.qrels.at(qid).size() == 1);
  }

  // Deterministic under the same seed.
  const SplitResult again = split_train_eval(pairs, 0.2, 42);
  REQUIRE(again.train.size() == split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i)
    CHECK(again.train[i].passage_id == split.train[i].passage_id);

  CHECK_THROWS_AS(split_train_eval({pairs[0]}, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_train_eval(pairs, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_train_eval(pairs, 1.0, 1), std::invalid_argument);
}

TEST_CASE("eval bundle files round trip") {
  std::vector<PairRecord> pairs;
  for (int i = 0; i < 6; ++i) {
    pairs.push_back({"How does compound " + std::to_string(i) + " react?",
                     "p" + std::to_string(i),
                     "Compound " + std::to_string(i) + " reacts with acids.", "mock",
                     Split::train});
  }
  const SplitResult split = split_train_eval(pairs, 0.34, 5);
  write_eval_bundle(split.eval, "test_synth_bundle");
  const EvalBundle loaded = read_eval_bundle("test_synth_bundle/corpus.jsonl",
                                             "test_synth_bundle/queries.jsonl",
                                             "test_synth_bundle/qrels.tsv");
  CHECK(loaded.corpus.size() == split.eval.corpus.size());
  CHECK(loaded.queries.size() == split.eval.queries.size());
  for (const auto& [qid, pids] : split.eval.qrels) {
    REQUIRE(loaded.qrels.count(qid));
    CHECK(loaded.qrels.at(qid) == pids);
  }
}

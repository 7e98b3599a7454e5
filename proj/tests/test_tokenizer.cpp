#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "chembed/util.hpp"
#include "chembed/wordpiece.hpp"
#include "oracles.hpp"

using namespace chembed;

namespace {

WordPieceVocab make_vocab(std::vector<std::string> extra) {
  std::vector<std::string> tokens = WordPieceVocab::default_specials();
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  return WordPieceVocab(tokens, WordPieceVocab::default_specials());
}

}  // namespace

TEST_CASE("trainer: first merge follows pair scores") {
  // corpus "abb": score(a,##b) = 1/(1*2) = 0.5 beats score(##b,##b) = 0.25
  const auto specials = WordPieceVocab::default_specials();
  const std::size_t target = 2 + specials.size() + 1;
  const TrainedVocab trained = train_wordpiece({"abb"}, target, 1);
  CHECK(trained.vocab.contains("ab"));
  CHECK(trained.vocab.size() == target);

  // Cross-check against the brute-force pair-score enumeration.
  auto scores = oracles::enumerate_pair_scores({{{"a", "##b", "##b"}, 1}});
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.merged < b.merged;
  });
  REQUIRE(!scores.empty());
  CHECK(scores[0].merged == "ab");
  CHECK(scores[0].score == doctest::Approx(0.5));
}

TEST_CASE("trainer: no merge possible") {
  const auto specials = WordPieceVocab::default_specials();
  const TrainedVocab trained = train_wordpiece({"a"}, 1 + specials.size(), 1);
  CHECK(trained.vocab.size() == specials.size() + 1);
  CHECK(trained.vocab.contains("a"));
}

TEST_CASE("trainer: errors") {
  CHECK_THROWS_WITH_AS(train_wordpiece({}, 100, 1), "empty corpus", std::runtime_error);
  CHECK_THROWS_WITH_AS(train_wordpiece({"   "}, 100, 1), "empty corpus", std::runtime_error);
  CHECK_THROWS_AS(train_wordpiece({"abc"}, 2, 1), std::invalid_argument);
}

TEST_CASE("trainer: min_frequency gates merges") {
  const auto specials = WordPieceVocab::default_specials();
  // Every pair occurs once; min_frequency 2 stops training immediately.
  const TrainedVocab trained = train_wordpiece({"abc"}, specials.size() + 10, 2);
  CHECK(trained.vocab.size() == specials.size() + 3);
}

TEST_CASE("trainer: monotone growth up to target") {
  for (std::size_t target = 9; target < 16; ++target) {
    const TrainedVocab trained =
        train_wordpiece({"abab abab baba", "abba"}, target, 1);
    CHECK(trained.vocab.size() <= target);
    // Larger targets never shrink the learned vocabulary.
    if (target > 9) {
      const TrainedVocab prev =
          train_wordpiece({"abab abab baba", "abba"}, target - 1, 1);
      CHECK(prev.vocab.size() <= trained.vocab.size());
    }
  }
}

TEST_CASE("encode: greedy longest match") {
  const auto vocab = make_vocab({"a", "ab", "##b", "##c"});
  const auto pieces = wordpiece_encode_pieces(vocab, "abc");
  CHECK(pieces == std::vector<std::string>{"ab", "##c"});
  CHECK(wordpiece_encode_pieces(vocab, "abd") == std::vector<std::string>{"[UNK]"});
  CHECK(wordpiece_encode(vocab, "").empty());
}

TEST_CASE("encode: lowercasing and word length cap") {
  const auto vocab = make_vocab({"a", "ab", "##b", "##c"});
  CHECK(wordpiece_encode_pieces(vocab, "ABC") == std::vector<std::string>{"ab", "##c"});
  std::string long_word(101, 'a');
  CHECK(wordpiece_encode_pieces(vocab, long_word) == std::vector<std::string>{"[UNK]"});
}

TEST_CASE("encode: matches exhaustive oracle on random vocabularies") {
  Rng rng(20240817);
  for (int trial = 0; trial < 1000; ++trial) {
    // Random vocab of <= 50 pieces over a 3-letter alphabet.
    std::set<std::string> piece_set = {"a", "b", "c", "##a", "##b", "##c"};
    const int extra = static_cast<int>(rng.uniform_int(44));
    for (int i = 0; i < extra; ++i) {
      const bool cont = rng.uniform() < 0.5;
      std::string piece = cont ? "##" : "";
      const int len = 1 + static_cast<int>(rng.uniform_int(4));
      for (int j = 0; j < len; ++j)
        piece += static_cast<char>('a' + rng.uniform_int(3));
      piece_set.insert(piece);
    }
    // Drop a few singles sometimes so unmatchable words exist.
    if (rng.uniform() < 0.4) piece_set.erase("##b");
    if (rng.uniform() < 0.2) piece_set.erase("c");

    std::vector<std::string> pieces(piece_set.begin(), piece_set.end());
    auto vocab = make_vocab(pieces);

    std::string word;
    const int len = 1 + static_cast<int>(rng.uniform_int(12));
    for (int j = 0; j < len; ++j) word += static_cast<char>('a' + rng.uniform_int(3));

    const auto got = wordpiece_encode_pieces(vocab, word);
    const auto want = oracles::encode_word_oracle(word, piece_set);
    CHECK(got == want);
  }
}

TEST_CASE("vocab: round-trip id consistency and save/load") {
  const auto vocab = make_vocab({"a", "ab", "##b", "[unused0]", "[unused1]"});
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    CHECK(*vocab.id_of(vocab.token_at(static_cast<int>(i))) == static_cast<int>(i));
  }
  CHECK(vocab.unused_ids().size() == 2);

  const std::string path = "test_vocab_roundtrip.txt";
  vocab.save(path);
  const auto loaded = WordPieceVocab::load(path);
  CHECK(loaded.tokens() == vocab.tokens());
  CHECK(loaded.unused_ids() == vocab.unused_ids());
}

TEST_CASE("vocab: unused marker pattern") {
  CHECK(WordPieceVocab::is_unused_marker("[unused0]"));
  CHECK(WordPieceVocab::is_unused_marker("[unused993]"));
  CHECK(!WordPieceVocab::is_unused_marker("[unused]"));
  CHECK(!WordPieceVocab::is_unused_marker("[unusedx]"));
  CHECK(!WordPieceVocab::is_unused_marker("unused0"));
}

TEST_CASE("patch: direct rule application") {
  // Base of size 10 with unused ids {2,3,4}; "a" is already present.
  std::vector<std::string> tokens = {"[PAD]", "[UNK]",     "[unused0]", "[unused1]",
                                     "[unused2]", "a",     "b",         "##a",
                                     "##b",   "c"};
  WordPieceVocab base(tokens, {"[PAD]", "[UNK]"});
  REQUIRE(base.unused_ids() == std::vector<int>{2, 3, 4});

  auto [patched, report] = build_chemvocab_patch(base, {"xx", "a", "yy"}, 2);
  REQUIRE(report.injected.size() == 2);
  CHECK(report.injected[0].token == "xx");
  CHECK(report.injected[0].assigned_id == 2);
  CHECK(report.injected[0].source_rank == 1);
  CHECK(report.injected[1].token == "yy");
  CHECK(report.injected[1].assigned_id == 3);
  CHECK(report.skipped_duplicates == std::vector<std::string>{"a"});
  CHECK(report.remaining_unused == 1);
  CHECK(patched.size() == base.size());
  CHECK(patched.token_at(2) == "xx");
  CHECK(patched.token_at(3) == "yy");
  CHECK(patched.token_at(4) == "[unused2]");
}

TEST_CASE("patch: identity and error cases") {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[unused0]", "a"};
  WordPieceVocab base(tokens, {"[PAD]", "[UNK]"});

  auto [same, report] = build_chemvocab_patch(base, {"x", "y"}, 0);
  CHECK(same.tokens() == base.tokens());
  CHECK(report.injected.empty());

  CHECK_THROWS_AS(build_chemvocab_patch(base, {"x", "y"}, 5), std::invalid_argument);
}

TEST_CASE("patch: injection conservation") {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[unused0]", "[unused1]",
                                     "alpha", "beta", "##ga"};
  WordPieceVocab base(tokens, {"[PAD]", "[UNK]"});
  auto [patched, report] = build_chemvocab_patch(base, {"gamma", "##xx"}, 2);
  CHECK(patched.size() == base.size());
  // Non-unused base tokens survive unchanged.
  std::multiset<std::string> base_keep, patched_keep;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!WordPieceVocab::is_unused_marker(base.token_at(static_cast<int>(i))))
      base_keep.insert(base.token_at(static_cast<int>(i)));
  }
  for (const auto& t : base_keep) CHECK(patched.contains(t));
}

TEST_CASE("patch: non-destructive for untouched encodings") {
  Rng rng(99);
  std::vector<std::string> base_tokens = WordPieceVocab::default_specials();
  for (int i = 0; i < 10; ++i) base_tokens.push_back("[unused" + std::to_string(i) + "]");
  for (char c = 'a'; c <= 'z'; ++c) {
    base_tokens.push_back(std::string(1, c));
    base_tokens.push_back("##" + std::string(1, c));
  }
  base_tokens.push_back("the");
  base_tokens.push_back("cat");
  WordPieceVocab base(base_tokens, WordPieceVocab::default_specials());
  auto [patched, report] = build_chemvocab_patch(base, {"qqqz", "##zzz"}, 2);

  for (const std::string text : {"the cat", "dog house", "every word here"}) {
    const auto before = wordpiece_encode(base, text);
    bool touches_injected = false;
    for (const auto& piece : wordpiece_encode_pieces(patched, text)) {
      for (const auto& inj : report.injected) {
        if (piece == inj.token) touches_injected = true;
      }
    }
    if (!touches_injected) CHECK(wordpiece_encode(patched, text) == before);
  }
}

TEST_CASE("fragmentation report") {
  const auto vocab = make_vocab({"a", "ab", "##b", "##c"});
  const FragmentationStats stats = fragmentation_report(vocab, {"abc", "abd"});
  CHECK(stats.name_count == 2);
  CHECK(stats.mean_tokens_per_name == doctest::Approx(1.5));
  CHECK(stats.unk_word_rate == doctest::Approx(0.5));

  const FragmentationStats single = fragmentation_report(vocab, {"ab", "ab"});
  CHECK(single.mean_tokens_per_name == doctest::Approx(1.0));
  CHECK(single.unk_word_rate == doctest::Approx(0.0));

  CHECK_THROWS_AS(fragmentation_report(vocab, {}), std::invalid_argument);
}

TEST_CASE("candidate ranking: frequency then lexicographic") {
  // "xy" appears 3 times, "ab" twice -> xy first.
  const auto specials = WordPieceVocab::default_specials();
  const TrainedVocab trained =
      train_wordpiece({"xy xy xy ab ab"}, specials.size() + 4 + 2, 1);
  const auto ranked = rank_candidates(trained);
  REQUIRE(!ranked.empty());
  // Full-word tokens outrank rarer pieces; the top candidate covers the
  // most frequent corpus material.
  CHECK(std::find(ranked.begin(), ranked.end(), "xy") != ranked.end());
  const auto pos_xy = std::find(ranked.begin(), ranked.end(), "xy") - ranked.begin();
  const auto pos_ab = std::find(ranked.begin(), ranked.end(), "ab") - ranked.begin();
  if (pos_ab < static_cast<std::ptrdiff_t>(ranked.size())) CHECK(pos_xy < pos_ab);
}

TEST_CASE("normalization: accents and case fold before matching") {
  const auto vocab = make_vocab({"ethanol", "uber"});
  CHECK(wordpiece_encode_pieces(vocab, "Ethanol") == std::vector<std::string>{"ethanol"});
  CHECK(wordpiece_encode_pieces(vocab, "\xC3\x9C"
                                       "ber") == std::vector<std::string>{"uber"});
}

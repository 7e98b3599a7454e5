#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace chembed {

// WordPiece vocabulary: ordered token list, id = position. Immutable after
// construction; safe to share across threads.
class WordPieceVocab {
 public:
  static constexpr const char* kContinuationPrefix = "##";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr std::size_t kMaxWordChars = 100;

  WordPieceVocab() = default;
  WordPieceVocab(std::vector<std::string> tokens, std::vector<std::string> specials);

  static WordPieceVocab load(const std::string& path,
                             std::vector<std::string> specials = default_specials());
  void save(const std::string& path) const;

  static std::vector<std::string> default_specials() {
    return {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& specials() const { return specials_; }
  const std::vector<int>& unused_ids() const { return unused_ids_; }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  std::optional<int> id_of(const std::string& token) const;
  const std::string& token_at(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int unk_id() const;

  static bool is_unused_marker(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> specials_;
  std::vector<int> unused_ids_;
  std::unordered_map<std::string, int> index_;
};

struct TrainedVocab {
  WordPieceVocab vocab;
  // Learned token -> weighted occurrence count when encoding the training
  // corpus with the final vocabulary. Basis for candidate ranking.
  std::unordered_map<std::string, long long> token_counts;
};

struct InjectionReport {
  struct Injected {
    std::string token;
    int assigned_id;
    int source_rank;  // 1 = best candidate
  };
  std::vector<Injected> injected;
  std::vector<std::string> skipped_duplicates;
  int remaining_unused = 0;
};

struct FragmentationStats {
  std::size_t name_count = 0;
  double mean_tokens_per_name = 0.0;
  double unk_word_rate = 0.0;
};

TrainedVocab train_wordpiece(const std::vector<std::string>& texts,
                             std::size_t target_size,
                             long long min_frequency,
                             std::vector<std::string> specials = WordPieceVocab::default_specials());

// Greedy longest-prefix encoding; a word with no full segmentation maps to
// a single [UNK].
std::vector<int> wordpiece_encode(const WordPieceVocab& vocab, const std::string& text);
std::vector<std::string> wordpiece_encode_pieces(const WordPieceVocab& vocab,
                                                 const std::string& text);

// Candidates ranked by training-corpus frequency, descending, ties broken
// lexicographically. Specials and [unusedN] markers excluded.
std::vector<std::string> rank_candidates(const TrainedVocab& trained);

std::pair<WordPieceVocab, InjectionReport> build_chemvocab_patch(
    const WordPieceVocab& base,
    const std::vector<std::string>& candidates,
    std::size_t max_inject);

FragmentationStats fragmentation_report(const WordPieceVocab& vocab,
                                        const std::vector<std::string>& names);

}  // namespace chembed

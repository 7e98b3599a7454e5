#include "chembed/wordpiece.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "chembed/text.hpp"

namespace chembed {

WordPieceVocab::WordPieceVocab(std::vector<std::string> tokens,
                               std::vector<std::string> specials)
    : tokens_(std::move(tokens)), specials_(std::move(specials)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted) throw std::runtime_error("duplicate token in vocabulary: " + tokens_[i]);
    if (is_unused_marker(tokens_[i])) unused_ids_.push_back(static_cast<int>(i));
  }
  for (const auto& s : specials_) {
    if (!index_.count(s)) throw std::runtime_error("special token missing from vocabulary: " + s);
  }
}

bool WordPieceVocab::is_unused_marker(const std::string& token) {
  // Pattern: [unusedN]
  static const std::string kPrefix = "[unused";
  if (token.size() < kPrefix.size() + 2) return false;
  if (token.compare(0, kPrefix.size(), kPrefix) != 0) return false;
  if (token.back() != ']') return false;
  for (std::size_t i = kPrefix.size(); i + 1 < token.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(token[i]))) return false;
  }
  return true;
}

std::optional<int> WordPieceVocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int WordPieceVocab::unk_id() const {
  auto id = id_of(kUnk);
  if (!id) throw std::runtime_error("vocabulary has no [UNK] token");
  return *id;
}

WordPieceVocab WordPieceVocab::load(const std::string& path,
                                    std::vector<std::string> specials) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    tokens.push_back(line);
  }
  // Keep only specials actually present so partial vocabularies load too.
  std::vector<std::string> present;
  for (auto& s : specials) {
    if (std::find(tokens.begin(), tokens.end(), s) != tokens.end()) present.push_back(s);
  }
  return WordPieceVocab(std::move(tokens), std::move(present));
}

void WordPieceVocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << "\n";
}

namespace {

struct Word {
  std::vector<std::string> symbols;
  long long freq = 0;
};

std::string merge_token(const std::string& left, const std::string& right) {
  const std::string prefix = WordPieceVocab::kContinuationPrefix;
  std::string r = right;
  if (r.compare(0, prefix.size(), prefix) == 0) r = r.substr(prefix.size());
  return left + r;
}

}  // namespace

TrainedVocab train_wordpiece(const std::vector<std::string>& texts,
                             std::size_t target_size,
                             long long min_frequency,
                             std::vector<std::string> specials) {
  if (min_frequency < 1) throw std::invalid_argument("min_frequency must be >= 1");

  // Word frequency table over normalized whitespace words.
  std::map<std::string, long long> word_freq;
  for (const auto& text : texts) {
    for (const auto& w : whitespace_words(normalize_text(text))) ++word_freq[w];
  }
  if (word_freq.empty()) throw std::runtime_error("empty corpus");

  // Initial segmentation: word-initial codepoint, then ##-continuations.
  std::vector<Word> words;
  std::set<std::string> alphabet;
  for (const auto& [w, freq] : word_freq) {
    Word word;
    word.freq = freq;
    auto cps = utf8_codepoints(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string sym = (i == 0) ? cps[i]
                                 : WordPieceVocab::kContinuationPrefix + cps[i];
      word.symbols.push_back(sym);
      alphabet.insert(sym);
    }
    words.push_back(std::move(word));
  }

  if (target_size < alphabet.size() + specials.size()) {
    std::ostringstream msg;
    msg << "target_size " << target_size << " below alphabet (" << alphabet.size()
        << ") + specials (" << specials.size() << ")";
    throw std::invalid_argument(msg.str());
  }

  std::vector<std::string> tokens(specials.begin(), specials.end());
  tokens.insert(tokens.end(), alphabet.begin(), alphabet.end());
  std::set<std::string> token_set(tokens.begin(), tokens.end());

  while (tokens.size() < target_size) {
    // Symbol and adjacent-pair counts, weighted by word frequency.
    std::map<std::string, long long> sym_count;
    std::map<std::pair<std::string, std::string>, long long> pair_count;
    for (const auto& word : words) {
      for (std::size_t i = 0; i < word.symbols.size(); ++i) {
        sym_count[word.symbols[i]] += word.freq;
        if (i + 1 < word.symbols.size()) {
          pair_count[{word.symbols[i], word.symbols[i + 1]}] += word.freq;
        }
      }
    }

    // Best pair by score = count(pair) / (count(left) * count(right));
    // ties broken by lexicographically smallest merged token.
    bool found = false;
    std::pair<std::string, std::string> best_pair;
    std::string best_merged;
    double best_score = -1.0;
    for (const auto& [pr, cnt] : pair_count) {
      if (cnt < min_frequency) continue;
      const std::string merged = merge_token(pr.first, pr.second);
      if (token_set.count(merged)) continue;
      const double score = static_cast<double>(cnt) /
                           (static_cast<double>(sym_count[pr.first]) *
                            static_cast<double>(sym_count[pr.second]));
      if (!found || score > best_score ||
          (score == best_score && merged < best_merged)) {
        found = true;
        best_score = score;
        best_pair = pr;
        best_merged = merged;
      }
    }
    if (!found) break;

    tokens.push_back(best_merged);
    token_set.insert(best_merged);
    for (auto& word : words) {
      std::vector<std::string> out;
      out.reserve(word.symbols.size());
      std::size_t i = 0;
      while (i < word.symbols.size()) {
        if (i + 1 < word.symbols.size() && word.symbols[i] == best_pair.first &&
            word.symbols[i + 1] == best_pair.second) {
          out.push_back(best_merged);
          i += 2;
        } else {
          out.push_back(word.symbols[i]);
          ++i;
        }
      }
      word.symbols = std::move(out);
    }
  }

  TrainedVocab result;
  result.vocab = WordPieceVocab(tokens, specials);

  // Token usage counts under the final vocabulary, for candidate ranking.
  for (const auto& [w, freq] : word_freq) {
    for (const auto& piece : wordpiece_encode_pieces(result.vocab, w)) {
      result.token_counts[piece] += freq;
    }
  }
  return result;
}

std::vector<std::string> wordpiece_encode_pieces(const WordPieceVocab& vocab,
                                                 const std::string& text) {
  std::vector<std::string> out;
  for (const auto& word : whitespace_words(normalize_text(text))) {
    const auto cps = utf8_codepoints(word);
    if (cps.size() > WordPieceVocab::kMaxWordChars) {
      out.push_back(WordPieceVocab::kUnk);
      continue;
    }
    std::vector<std::string> pieces;
    bool bad = false;
    std::size_t start = 0;
    while (start < cps.size()) {
      std::size_t end = cps.size();
      std::string match;
      while (start < end) {
        std::string sub;
        if (start > 0) sub = WordPieceVocab::kContinuationPrefix;
        for (std::size_t i = start; i < end; ++i) sub += cps[i];
        if (vocab.contains(sub)) {
          match = sub;
          break;
        }
        --end;
      }
      if (match.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(match);
      start = end;
    }
    if (bad) {
      out.push_back(WordPieceVocab::kUnk);
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  return out;
}

std::vector<int> wordpiece_encode(const WordPieceVocab& vocab, const std::string& text) {
  std::vector<int> ids;
  for (const auto& piece : wordpiece_encode_pieces(vocab, text)) {
    if (piece == WordPieceVocab::kUnk) {
      ids.push_back(vocab.unk_id());
    } else {
      ids.push_back(*vocab.id_of(piece));
    }
  }
  return ids;
}

std::vector<std::string> rank_candidates(const TrainedVocab& trained) {
  std::vector<std::pair<std::string, long long>> entries;
  std::set<std::string> special_set(trained.vocab.specials().begin(),
                                    trained.vocab.specials().end());
  for (const auto& [token, count] : trained.token_counts) {
    if (special_set.count(token)) continue;
    if (WordPieceVocab::is_unused_marker(token)) continue;
    entries.emplace_back(token, count);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (auto& [t, c] : entries) out.push_back(t);
  return out;
}

std::pair<WordPieceVocab, InjectionReport> build_chemvocab_patch(
    const WordPieceVocab& base,
    const std::vector<std::string>& candidates,
    std::size_t max_inject) {
  const auto& slots = base.unused_ids();
  if (max_inject > slots.size()) {
    std::ostringstream msg;
    msg << "max_inject " << max_inject << " exceeds available unused slots "
        << slots.size() << " (short by " << (max_inject - slots.size()) << ")";
    throw std::invalid_argument(msg.str());
  }

  InjectionReport report;
  std::vector<std::string> tokens = base.tokens();
  std::set<std::string> seen;
  std::size_t slot_idx = 0;
  for (std::size_t rank = 0; rank < candidates.size(); ++rank) {
    if (report.injected.size() >= max_inject) break;
    const std::string& cand = candidates[rank];
    if (!seen.insert(cand).second) continue;
    if (base.contains(cand)) {
      report.skipped_duplicates.push_back(cand);
      continue;
    }
    const int slot = slots[slot_idx++];
    tokens[static_cast<std::size_t>(slot)] = cand;
    report.injected.push_back({cand, slot, static_cast<int>(rank) + 1});
  }
  report.remaining_unused = static_cast<int>(slots.size() - report.injected.size());
  WordPieceVocab patched(std::move(tokens), base.specials());
  return {std::move(patched), std::move(report)};
}

FragmentationStats fragmentation_report(const WordPieceVocab& vocab,
                                        const std::vector<std::string>& names) {
  if (names.empty()) throw std::invalid_argument("empty names list");
  FragmentationStats stats;
  stats.name_count = names.size();
  std::size_t total_tokens = 0;
  std::size_t total_words = 0;
  std::size_t unk_words = 0;
  for (const auto& name : names) {
    total_tokens += wordpiece_encode(vocab, name).size();
    for (const auto& word : whitespace_words(normalize_text(name))) {
      ++total_words;
      const auto pieces = wordpiece_encode_pieces(vocab, word);
      if (pieces.size() == 1 && pieces[0] == WordPieceVocab::kUnk) ++unk_words;
    }
  }
  stats.mean_tokens_per_name =
      static_cast<double>(total_tokens) / static_cast<double>(names.size());
  stats.unk_word_rate =
      total_words == 0 ? 0.0
                       : static_cast<double>(unk_words) / static_cast<double>(total_words);
  return stats;
}

}  // namespace chembed

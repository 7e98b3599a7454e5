#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace chembed {

enum class PassageSource { pubchem, s2orc, chemrxiv, synthetic, other };

struct Passage {
  std::string id;
  std::string title;
  std::string text;
  std::string section;  // optional metadata, used by section filtering
  PassageSource source = PassageSource::other;
};

// Ordered, id-indexed passage collection. Read-only after ingestion.
class PassageStore {
 public:
  void add(Passage p);
  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  const Passage& at(std::size_t i) const { return passages_.at(i); }
  const Passage* find(const std::string& id) const;
  const std::vector<Passage>& passages() const { return passages_; }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct UnigramLM {
  std::unordered_map<std::string, long long> counts;
  long long total = 0;

  // Natural-log probability; words unseen by the LM get add-one style
  // smoothing: 1 / (total + |types| + 1).
  double log_prob(const std::string& word) const;
  double avg_log_prob(const std::string& text) const;
};

struct FilterDecision {
  std::string passage_id;
  bool kept = false;
  bool too_short = false;
  bool low_logprob = false;
};

PassageStore ingest_passages(std::istream& jsonl);
PassageStore ingest_passages_file(const std::string& path);

UnigramLM build_unigram_lm(const PassageStore& store);

std::pair<PassageStore, std::vector<FilterDecision>> filter_passages(
    const PassageStore& store, const UnigramLM& lm,
    std::size_t min_words = 50, double min_avg_logprob = -20.0);

void write_passages_jsonl(const PassageStore& store, const std::string& path);
void write_decisions_jsonl(const std::vector<FilterDecision>& decisions,
                           const std::string& path);

}  // namespace chembed

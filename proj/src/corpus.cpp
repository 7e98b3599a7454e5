#include "chembed/corpus.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "chembed/text.hpp"

namespace chembed {

using nlohmann::json;

void PassageStore::add(Passage p) {
  if (p.text.empty()) throw std::runtime_error("passage has empty text: " + p.id);
  auto [it, inserted] = by_id_.emplace(p.id, passages_.size());
  if (!inserted) throw std::runtime_error("duplicate passage id: " + p.id);
  passages_.push_back(std::move(p));
}

const Passage* PassageStore::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return nullptr;
  return &passages_[it->second];
}

namespace {

PassageSource parse_source(const std::string& s) {
  if (s == "pubchem") return PassageSource::pubchem;
  if (s == "s2orc") return PassageSource::s2orc;
  if (s == "chemrxiv") return PassageSource::chemrxiv;
  if (s == "synthetic") return PassageSource::synthetic;
  return PassageSource::other;
}

const char* source_name(PassageSource s) {
  switch (s) {
    case PassageSource::pubchem: return "pubchem";
    case PassageSource::s2orc: return "s2orc";
    case PassageSource::chemrxiv: return "chemrxiv";
    case PassageSource::synthetic: return "synthetic";
    default: return "other";
  }
}

}  // namespace

PassageStore ingest_passages(std::istream& jsonl) {
  PassageStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(jsonl, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      std::ostringstream msg;
      msg << "malformed JSON at line " << line_no << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
    if (!rec.contains("_id") || !rec.contains("text")) {
      std::ostringstream msg;
      msg << "line " << line_no << " missing required field "
          << (rec.contains("_id") ? "\"text\"" : "\"_id\"");
      throw std::runtime_error(msg.str());
    }
    Passage p;
    p.id = rec["_id"].get<std::string>();
    p.text = rec["text"].get<std::string>();
    p.title = rec.value("title", "");
    p.section = rec.value("section", "");
    p.source = parse_source(rec.value("source", "other"));
    store.add(std::move(p));
  }
  return store;
}

PassageStore ingest_passages_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  return ingest_passages(in);
}

double UnigramLM::log_prob(const std::string& word) const {
  auto it = counts.find(word);
  if (it == counts.end() || it->second == 0) {
    return std::log(1.0 / (static_cast<double>(total) +
                           static_cast<double>(counts.size()) + 1.0));
  }
  return std::log(static_cast<double>(it->second) / static_cast<double>(total));
}

double UnigramLM::avg_log_prob(const std::string& text) const {
  const auto words = whitespace_words(to_lower_ascii(text));
  if (words.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& w : words) sum += log_prob(w);
  return sum / static_cast<double>(words.size());
}

UnigramLM build_unigram_lm(const PassageStore& store) {
  if (store.empty()) throw std::runtime_error("empty store");
  UnigramLM lm;
  for (const auto& p : store.passages()) {
    for (const auto& w : whitespace_words(to_lower_ascii(p.text))) {
      ++lm.counts[w];
      ++lm.total;
    }
  }
  return lm;
}

std::pair<PassageStore, std::vector<FilterDecision>> filter_passages(
    const PassageStore& store, const UnigramLM& lm,
    std::size_t min_words, double min_avg_logprob) {
  PassageStore kept;
  std::vector<FilterDecision> decisions;
  decisions.reserve(store.size());
  for (const auto& p : store.passages()) {
    FilterDecision d;
    d.passage_id = p.id;
    const auto words = whitespace_words(to_lower_ascii(p.text));
    if (words.size() < min_words) d.too_short = true;
    if (lm.avg_log_prob(p.text) < min_avg_logprob) d.low_logprob = true;
    d.kept = !d.too_short && !d.low_logprob;
    if (d.kept) kept.add(p);
    decisions.push_back(std::move(d));
  }
  return {std::move(kept), std::move(decisions)};
}

void write_passages_jsonl(const PassageStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& p : store.passages()) {
    json rec{{"_id", p.id}, {"title", p.title}, {"text", p.text}};
    if (!p.section.empty()) rec["section"] = p.section;
    rec["source"] = source_name(p.source);
    out << rec.dump() << "\n";
  }
}

void write_decisions_jsonl(const std::vector<FilterDecision>& decisions,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& d : decisions) {
    json reasons = json::array();
    if (d.too_short) reasons.push_back("too_short");
    if (d.low_logprob) reasons.push_back("low_logprob");
    json rec{{"passage_id", d.passage_id}, {"kept", d.kept}, {"reasons", reasons}};
    out << rec.dump() << "\n";
  }
}

}  // namespace chembed

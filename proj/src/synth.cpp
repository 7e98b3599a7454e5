#include "chembed/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "chembed/text.hpp"
#include "chembed/util.hpp"

namespace chembed {

using nlohmann::json;

// Versioned prompt template. The generation constraints live here: one
// question, no yes/no or superficial questions, no self-references, and an
// explicit refusal sentinel for unsuitable passages.
namespace {
constexpr const char* kPromptVersion = "chembed-query-prompt/1";

constexpr const char* kPromptHeader =
    "You are helping build a chemistry literature search benchmark.\n"
    "Read the passage below and produce exactly one clear, meaningful "
    "chemistry question that the passage can answer.\n"
    "Rules:\n"
    "- Write exactly one question and nothing else.\n"
    "- Do not write superficial or yes/no questions.\n"
    "- Do not refer to the text itself; never use phrases such as "
    "\"according to this paragraph\" or \"the text\".\n"
    "- If the passage has no usable scientific content (for example funding "
    "acknowledgments, overly general conclusions, or short uninformative "
    "segments), answer with the single token UNSUITABLE.\n\nPassage:\n";
}  // namespace

std::string render_query_prompt(const Passage& passage) {
  if (passage.text.empty()) throw std::invalid_argument("passage text is empty");
  std::string prompt = kPromptHeader;
  prompt += passage.text;
  prompt += "\n\nQuestion:";
  return prompt;
}

ValidationResult validate_query(const std::string& query) {
  std::string trimmed = query;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
    trimmed.erase(trimmed.begin());
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
    trimmed.pop_back();
  if (trimmed.empty()) return {false, "empty"};

  const std::string lower = to_lower_ascii(trimmed);
  const auto words = whitespace_words(lower);
  static const std::set<std::string> kYesNoLead = {"is",  "are", "does", "do",
                                                  "can", "did", "was",  "were"};
  std::string first = words.empty() ? "" : words[0];
  while (!first.empty() && !std::isalpha(static_cast<unsigned char>(first.back())))
    first.pop_back();
  if (kYesNoLead.count(first)) return {false, "yes/no form"};

  for (const char* phrase : {"this paragraph", "this passage", "the text"}) {
    if (lower.find(phrase) != std::string::npos) return {false, "self-reference"};
  }
  const auto qmarks = std::count(lower.begin(), lower.end(), '?');
  if (qmarks > 1) return {false, "multiple questions"};
  return {true, ""};
}

namespace {

// Serializes request starts so the configured requests-per-minute rate is
// respected across worker threads.
class RatePacer {
 public:
  explicit RatePacer(double requests_per_minute) {
    if (requests_per_minute <= 0) throw std::invalid_argument("requests_per_minute must be > 0");
    interval_ = std::chrono::duration<double>(60.0 / requests_per_minute);
    next_ = std::chrono::steady_clock::now();
  }

  void acquire() {
    std::chrono::steady_clock::time_point wait_until;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      if (next_ < now) next_ = now;
      wait_until = next_;
      next_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval_);
    }
    std::this_thread::sleep_until(wait_until);
  }

 private:
  std::mutex mu_;
  std::chrono::duration<double> interval_{};
  std::chrono::steady_clock::time_point next_;
};

struct Outcome {
  bool processed_before = false;
  bool is_pair = false;
  RefusalReason reason = RefusalReason::model_refused;
  std::string query;
};

std::set<std::string> load_checkpoint(const std::string& path) {
  std::set<std::string> done;
  if (path.empty()) return done;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) done.insert(line);
  }
  return done;
}

}  // namespace

std::pair<std::vector<PairRecord>, RefusalLog> generate_pairs(
    const ClientConfig& config, const PassageStore& store, const Transport& transport) {
  if (!transport) throw std::invalid_argument("transport not callable");
  if (store.empty()) throw std::invalid_argument("empty store");

  const auto done = load_checkpoint(config.checkpoint_path);
  std::vector<Outcome> outcomes(store.size());
  RatePacer pacer(config.requests_per_minute);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= store.size()) return;
      const Passage& p = store.at(i);
      Outcome& out = outcomes[i];
      if (done.count(p.id)) {
        out.processed_before = true;
        continue;
      }
      const std::string prompt = render_query_prompt(p);
      TransportResult res;
      for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        if (attempt > 0 && config.retry_backoff_ms > 0) {
          std::this_thread::sleep_for(
              std::chrono::milliseconds(config.retry_backoff_ms * (1 << (attempt - 1))));
        }
        pacer.acquire();
        res = transport(prompt);
        if (res.ok) break;
      }
      if (!res.ok) {
        out.reason = RefusalReason::transport_error;
        continue;
      }
      std::string reply = res.text;
      while (!reply.empty() && std::isspace(static_cast<unsigned char>(reply.back())))
        reply.pop_back();
      while (!reply.empty() && std::isspace(static_cast<unsigned char>(reply.front())))
        reply.erase(reply.begin());
      if (reply == kRefusalSentinel || reply.empty()) {
        out.reason = RefusalReason::model_refused;
        continue;
      }
      if (!validate_query(reply).ok) {
        out.reason = RefusalReason::validation_failed;
        continue;
      }
      out.is_pair = true;
      out.query = reply;
    }
  };

  const int n_workers = std::max(1, config.concurrency);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  // Assemble in input order; checkpoint records newly processed ids.
  std::vector<PairRecord> pairs;
  RefusalLog refusals;
  std::ofstream ck;
  if (!config.checkpoint_path.empty())
    ck.open(config.checkpoint_path, std::ios::app);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Outcome& out = outcomes[i];
    if (out.processed_before) continue;
    const Passage& p = store.at(i);
    if (out.is_pair) {
      pairs.push_back({out.query, p.id, p.text, config.model, Split::train});
    } else {
      refusals.entries.emplace_back(p.id, out.reason);
    }
    if (ck.is_open()) ck << p.id << "\n";
  }
  return {std::move(pairs), std::move(refusals)};
}

Transport make_mock_transport(const std::string& generator_tag) {
  (void)generator_tag;
  return [](const std::string& prompt) -> TransportResult {
    // Pull the passage text back out of the rendered prompt.
    const std::string marker = "Passage:\n";
    const auto start = prompt.find(marker);
    std::string passage =
        start == std::string::npos ? prompt : prompt.substr(start + marker.size());
    const auto tail = passage.rfind("\n\nQuestion:");
    if (tail != std::string::npos) passage = passage.substr(0, tail);

    std::vector<std::string> informative;
    for (const auto& w : whitespace_words(to_lower_ascii(passage))) {
      std::string clean;
      for (char c : w) {
        if (std::isalnum(static_cast<unsigned char>(c))) clean.push_back(c);
      }
      if (clean.size() >= 4) informative.push_back(clean);
      if (informative.size() == 3) break;
    }
    if (informative.size() < 3) return {true, kRefusalSentinel, ""};
    std::ostringstream q;
    q << "What is known about " << informative[0] << " " << informative[1] << " "
      << informative[2] << "?";
    return {true, q.str(), ""};
  };
}

Transport make_http_transport(const ClientConfig& config) {
  // endpoint = scheme://host[:port]/path
  const auto scheme_end = config.endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("endpoint must be an http(s) URL: " + config.endpoint);
  const auto path_start = config.endpoint.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos
                               ? config.endpoint
                               : config.endpoint.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : config.endpoint.substr(path_start);

  const char* key = std::getenv(config.api_key_env.c_str());
  const std::string api_key = key ? key : "";
  const std::string model = config.model;
  const double temperature = config.temperature;

  return [base, path, api_key, model, temperature](const std::string& prompt) -> TransportResult {
    httplib::Client cli(base);
    cli.set_connection_timeout(30);
    cli.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    json body{
        {"model", model},
        {"temperature", temperature},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
    };
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) return {false, "", "connection failed"};
    if (res->status != 200) {
      return {false, "", "http status " + std::to_string(res->status) + ": " + res->body};
    }
    try {
      json reply = json::parse(res->body);
      return {true, reply.at("choices").at(0).at("message").at("content").get<std::string>(), ""};
    } catch (const std::exception& e) {
      return {false, "", std::string("bad response body: ") + e.what()};
    }
  };
}

SplitResult split_train_eval(const std::vector<PairRecord>& pairs,
                             double eval_fraction, std::uint64_t seed) {
  if (pairs.size() < 2) throw std::invalid_argument("need at least 2 pairs to split");
  if (eval_fraction <= 0.0 || eval_fraction >= 1.0)
    throw std::invalid_argument("eval_fraction must be in (0, 1)");

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  deterministic_shuffle(order, rng);

  std::size_t n_eval = static_cast<std::size_t>(
      std::llround(eval_fraction * static_cast<double>(pairs.size())));
  n_eval = std::max<std::size_t>(1, std::min(n_eval, pairs.size() - 1));

  SplitResult result;
  std::set<std::string> eval_passage_ids;
  std::size_t q_index = 0;
  for (std::size_t k = 0; k < n_eval; ++k) {
    PairRecord rec = pairs[order[k]];
    rec.split = Split::eval;
    if (!result.eval.corpus.find(rec.passage_id)) {
      Passage p;
      p.id = rec.passage_id;
      p.text = rec.passage_text;
      p.source = PassageSource::synthetic;
      result.eval.corpus.add(std::move(p));
    }
    std::ostringstream qid;
    qid << "q" << q_index++;
    result.eval.queries.emplace_back(qid.str(), rec.query);
    result.eval.qrels[qid.str()] = {rec.passage_id};
    eval_passage_ids.insert(rec.passage_id);
  }
  for (std::size_t k = n_eval; k < order.size(); ++k) {
    PairRecord rec = pairs[order[k]];
    // Train and eval passage ids stay disjoint.
    if (eval_passage_ids.count(rec.passage_id)) continue;
    rec.split = Split::train;
    result.train.push_back(std::move(rec));
  }
  if (result.train.empty()) throw std::runtime_error("split left no training pairs");
  return result;
}

std::vector<PairRecord> read_pairs_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file: " + path);
  std::vector<PairRecord> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("malformed pairs line " + std::to_string(line_no) + ": " + e.what());
    }
    pairs.push_back({rec.at("query").get<std::string>(),
                     rec.at("passage_id").get<std::string>(),
                     rec.at("passage_text").get<std::string>(),
                     rec.value("generator", ""), Split::train});
  }
  return pairs;
}

void write_pairs_jsonl(const std::vector<PairRecord>& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pairs file: " + path);
  for (const auto& p : pairs) {
    json rec{{"query", p.query},
             {"passage_id", p.passage_id},
             {"passage_text", p.passage_text},
             {"generator", p.generator}};
    out << rec.dump() << "\n";
  }
}

void write_refusals_jsonl(const RefusalLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write refusals file: " + path);
  for (const auto& [id, reason] : log.entries) {
    const char* name = reason == RefusalReason::model_refused     ? "model_refused"
                       : reason == RefusalReason::validation_failed ? "validation_failed"
                                                                    : "transport_error";
    out << json{{"passage_id", id}, {"reason", name}}.dump() << "\n";
  }
}

void write_eval_bundle(const EvalBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_passages_jsonl(bundle.corpus, dir + "/corpus.jsonl");
  {
    std::ofstream out(dir + "/queries.jsonl", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write queries file");
    for (const auto& [qid, text] : bundle.queries) {
      out << json{{"_id", qid}, {"text", text}}.dump() << "\n";
    }
  }
  {
    std::ofstream out(dir + "/qrels.tsv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write qrels file");
    out << "query-id\tcorpus-id\tscore\n";
    for (const auto& [qid, text] : bundle.queries) {
      auto it = bundle.qrels.find(qid);
      if (it == bundle.qrels.end()) continue;
      for (const auto& pid : it->second) out << qid << "\t" << pid << "\t1\n";
    }
  }
}

EvalBundle read_eval_bundle(const std::string& corpus_path,
                            const std::string& queries_path,
                            const std::string& qrels_path) {
  EvalBundle bundle;
  bundle.corpus = ingest_passages_file(corpus_path);
  {
    std::ifstream in(queries_path);
    if (!in) throw std::runtime_error("cannot open queries file: " + queries_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json rec = json::parse(line);
      bundle.queries.emplace_back(rec.at("_id").get<std::string>(),
                                  rec.at("text").get<std::string>());
    }
  }
  {
    std::ifstream in(qrels_path);
    if (!in) throw std::runtime_error("cannot open qrels file: " + qrels_path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (first) {
        first = false;
        if (line.rfind("query-id", 0) == 0) continue;
      }
      std::istringstream row(line);
      std::string qid, pid, score;
      if (!std::getline(row, qid, '\t') || !std::getline(row, pid, '\t') ||
          !std::getline(row, score, '\t')) {
        throw std::runtime_error("malformed qrels row: " + line);
      }
      if (std::stoi(score) > 0) bundle.qrels[qid].push_back(pid);
    }
  }
  return bundle;
}

}  // namespace chembed

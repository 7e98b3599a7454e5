#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chembed/corpus.hpp"

namespace chembed {

// Response sentinel the prompt asks for when a passage has no usable
// scientific content.
inline constexpr const char* kRefusalSentinel = "UNSUITABLE";

enum class Split { train, eval };

struct PairRecord {
  std::string query;
  std::string passage_id;
  std::string passage_text;
  std::string generator;
  Split split = Split::train;
};

enum class RefusalReason { model_refused, validation_failed, transport_error };

struct RefusalLog {
  std::vector<std::pair<std::string, RefusalReason>> entries;
};

struct ClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  double temperature = 0.7;
  int max_retries = 3;
  double requests_per_minute = 60.0;
  std::string api_key_env = "CHEMBED_API_KEY";
  int concurrency = 4;
  int retry_backoff_ms = 200;
  std::string checkpoint_path;  // optional resume file: one processed id per line
};

struct TransportResult {
  bool ok = false;
  std::string text;   // model reply when ok
  std::string error;  // transport failure detail when !ok
};

// Pluggable request function: rendered prompt in, model reply out.
using Transport = std::function<TransportResult(const std::string& prompt)>;

std::string render_query_prompt(const Passage& passage);

struct ValidationResult {
  bool ok = false;
  std::string reason;
};
ValidationResult validate_query(const std::string& query);

std::pair<std::vector<PairRecord>, RefusalLog> generate_pairs(
    const ClientConfig& config, const PassageStore& store, const Transport& transport);

// OpenAI-compatible chat-completions transport over HTTP(S).
Transport make_http_transport(const ClientConfig& config);

// Deterministic offline transport used by --mock runs and tests: derives a
// content-bearing question from the passage words.
Transport make_mock_transport(const std::string& generator_tag = "mock");

struct EvalBundle {
  PassageStore corpus;
  std::vector<std::pair<std::string, std::string>> queries;  // (query id, text)
  std::unordered_map<std::string, std::vector<std::string>> qrels;  // qid -> relevant ids
};

struct SplitResult {
  std::vector<PairRecord> train;
  EvalBundle eval;
};

SplitResult split_train_eval(const std::vector<PairRecord>& pairs,
                             double eval_fraction, std::uint64_t seed);

std::vector<PairRecord> read_pairs_jsonl(const std::string& path);
void write_pairs_jsonl(const std::vector<PairRecord>& pairs, const std::string& path);
void write_refusals_jsonl(const RefusalLog& log, const std::string& path);

// BEIR-style eval bundle files: corpus.jsonl, queries.jsonl, qrels.tsv.
void write_eval_bundle(const EvalBundle& bundle, const std::string& dir);
EvalBundle read_eval_bundle(const std::string& corpus_path,
                            const std::string& queries_path,
                            const std::string& qrels_path);

}  // namespace chembed

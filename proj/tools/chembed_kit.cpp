// chembed-kit: domain-adaptation pipeline CLI — tokenizer training and
// vocabulary patching, corpus filtering, synthetic pair generation,
// negative mining, contrastive training, and retrieval evaluation.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chembed/corpus.hpp"
#include "chembed/encoder.hpp"
#include "chembed/eval.hpp"
#include "chembed/manifest.hpp"
#include "chembed/synth.hpp"
#include "chembed/train.hpp"
#include "chembed/util.hpp"
#include "chembed/wordpiece.hpp"

using nlohmann::json;
using namespace chembed;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<int> injected_ids_from_report(const std::string& path) {
  json report = json::parse(read_file(path));
  std::vector<int> ids;
  for (const auto& entry : report.at("injected")) {
    ids.push_back(entry.at("assigned_id").get<int>());
  }
  return ids;
}

void write_injection_report(const InjectionReport& report, const std::string& path) {
  json injected = json::array();
  for (const auto& i : report.injected) {
    injected.push_back({{"token", i.token},
                        {"assigned_id", i.assigned_id},
                        {"source_rank", i.source_rank}});
  }
  json doc{{"injected", injected},
           {"skipped_duplicates", report.skipped_duplicates},
           {"remaining_unused", report.remaining_unused}};
  write_file(path, doc.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chembed-kit: chemistry retrieval adaptation pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value configuration file; flags take precedence");

  std::string manifest_path = "chembed_manifest.json";
  int threads = 4;
  app.add_option("--manifest", manifest_path, "Run manifest output path");
  app.add_option("--threads", threads, "Worker pool cap for parallel stages");

  RunManifest manifest;
  std::function<void()> action;
  const auto t_start = std::chrono::steady_clock::now();

  // ---- tokenizer ----
  auto* tokenizer = app.add_subcommand("tokenizer", "WordPiece vocabulary tools");
  tokenizer->require_subcommand(1);

  {
    auto* cmd = tokenizer->add_subcommand("train", "Train a WordPiece vocabulary");
    auto opts = std::make_shared<std::map<std::string, std::string>>();
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("vocab.txt");
    auto candidates_out = std::make_shared<std::string>();
    auto target_size = std::make_shared<std::size_t>(4000);
    auto min_frequency = std::make_shared<long long>(2);
    cmd->add_option("--input", *input, "Text file, one training string per line")->required();
    cmd->add_option("--out", *out, "Output vocab.txt");
    cmd->add_option("--candidates-out", *candidates_out, "Ranked candidate tokens output");
    cmd->add_option("--target-size", *target_size, "Vocabulary size to train to");
    cmd->add_option("--min-frequency", *min_frequency, "Minimum pair frequency for merges");
    cmd->callback([&, input, out, candidates_out, target_size, min_frequency]() {
      action = [&, input, out, candidates_out, target_size, min_frequency]() {
        manifest.command = "tokenizer train";
        manifest.add_input(*input);
        const auto texts = read_lines(*input);
        const TrainedVocab trained = train_wordpiece(texts, *target_size, *min_frequency);
        trained.vocab.save(*out);
        manifest.add_output(*out);
        if (!candidates_out->empty()) {
          std::ostringstream body;
          for (const auto& t : rank_candidates(trained)) body << t << "\n";
          write_file(*candidates_out, body.str());
          manifest.add_output(*candidates_out);
        }
        manifest.config = {{"target_size", std::to_string(*target_size)},
                           {"min_frequency", std::to_string(*min_frequency)}};
        std::cout << "trained vocabulary of " << trained.vocab.size() << " tokens -> "
                  << *out << "\n";
      };
    });
  }

  {
    auto* cmd = tokenizer->add_subcommand("patch", "Inject candidates into unused slots");
    auto base = std::make_shared<std::string>();
    auto candidates = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("patched_vocab.txt");
    auto report_out = std::make_shared<std::string>("injection_report.json");
    auto max_inject = std::make_shared<std::size_t>(900);
    cmd->add_option("--base", *base, "Base vocab.txt (with [unusedN] slots)")->required();
    cmd->add_option("--candidates", *candidates, "Ranked candidate token file")->required();
    cmd->add_option("--out", *out, "Patched vocab.txt");
    cmd->add_option("--report-out", *report_out, "Injection report JSON");
    cmd->add_option("--max-inject", *max_inject, "Maximum tokens to inject");
    cmd->callback([&, base, candidates, out, report_out, max_inject]() {
      action = [&, base, candidates, out, report_out, max_inject]() {
        manifest.command = "tokenizer patch";
        manifest.add_input(*base);
        manifest.add_input(*candidates);
        const WordPieceVocab base_vocab = WordPieceVocab::load(*base);
        const auto cand_list = read_lines(*candidates);
        auto [patched, report] = build_chemvocab_patch(base_vocab, cand_list, *max_inject);
        patched.save(*out);
        write_injection_report(report, *report_out);
        manifest.add_output(*out);
        manifest.add_output(*report_out);
        manifest.config = {{"max_inject", std::to_string(*max_inject)}};
        std::cout << "injected " << report.injected.size() << " tokens, "
                  << report.remaining_unused << " unused slots remain -> " << *out << "\n";
      };
    });
  }

  {
    auto* cmd = tokenizer->add_subcommand("frag-report", "Fragmentation statistics");
    auto vocab_path = std::make_shared<std::string>();
    auto names_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--vocab", *vocab_path, "vocab.txt")->required();
    cmd->add_option("--names", *names_path, "Name list, one per line")->required();
    cmd->add_option("--out", *out, "Optional JSON output path");
    cmd->callback([&, vocab_path, names_path, out]() {
      action = [&, vocab_path, names_path, out]() {
        manifest.command = "tokenizer frag-report";
        manifest.add_input(*vocab_path);
        manifest.add_input(*names_path);
        const WordPieceVocab vocab = WordPieceVocab::load(*vocab_path);
        const auto names = read_lines(*names_path);
        const FragmentationStats stats = fragmentation_report(vocab, names);
        json doc{{"name_count", stats.name_count},
                 {"mean_tokens_per_name", stats.mean_tokens_per_name},
                 {"unk_word_rate", stats.unk_word_rate}};
        std::cout << doc.dump(2) << "\n";
        if (!out->empty()) {
          write_file(*out, doc.dump(2) + "\n");
          manifest.add_output(*out);
        }
      };
    });
  }

  // ---- corpus ----
  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus quality filtering");
  corpus_cmd->require_subcommand(1);
  {
    auto* cmd = corpus_cmd->add_subcommand("filter", "Drop short/low-logprob passages");
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("kept.jsonl");
    auto decisions_out = std::make_shared<std::string>("decisions.jsonl");
    auto min_words = std::make_shared<std::size_t>(50);
    auto min_avg_logprob = std::make_shared<double>(-20.0);
    cmd->add_option("--input", *input, "Corpus JSONL")->required();
    cmd->add_option("--out", *out, "Kept passages JSONL");
    cmd->add_option("--decisions-out", *decisions_out, "Per-passage decisions JSONL");
    cmd->add_option("--min-words", *min_words, "Minimum word count");
    cmd->add_option("--min-avg-logprob", *min_avg_logprob, "Minimum average unigram log probability");
    cmd->callback([&, input, out, decisions_out, min_words, min_avg_logprob]() {
      action = [&, input, out, decisions_out, min_words, min_avg_logprob]() {
        manifest.command = "corpus filter";
        manifest.add_input(*input);
        const PassageStore store = ingest_passages_file(*input);
        const UnigramLM lm = build_unigram_lm(store);
        auto [kept, decisions] = filter_passages(store, lm, *min_words, *min_avg_logprob);
        write_passages_jsonl(kept, *out);
        write_decisions_jsonl(decisions, *decisions_out);
        manifest.add_output(*out);
        manifest.add_output(*decisions_out);
        manifest.config = {{"min_words", std::to_string(*min_words)},
                           {"min_avg_logprob", std::to_string(*min_avg_logprob)}};
        std::cout << "kept " << kept.size() << " of " << store.size() << " passages -> "
                  << *out << "\n";
      };
    });
  }

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Synthetic query generation");
  synth->require_subcommand(1);
  {
    auto* cmd = synth->add_subcommand("generate", "Generate one query per passage");
    auto corpus_path = std::make_shared<std::string>();
    auto pairs_out = std::make_shared<std::string>("pairs.jsonl");
    auto refusals_out = std::make_shared<std::string>("refusals.jsonl");
    auto mock = std::make_shared<bool>(false);
    auto cfg = std::make_shared<ClientConfig>();
    cmd->add_option("--corpus", *corpus_path, "Filtered corpus JSONL")->required();
    cmd->add_option("--pairs-out", *pairs_out, "Pairs JSONL output");
    cmd->add_option("--refusals-out", *refusals_out, "Refusal log JSONL output");
    cmd->add_flag("--mock", *mock, "Use the deterministic offline transport");
    cmd->add_option("--endpoint", cfg->endpoint, "Chat-completions endpoint URL");
    cmd->add_option("--model", cfg->model, "Model identifier");
    cmd->add_option("--temperature", cfg->temperature, "Sampling temperature");
    cmd->add_option("--max-retries", cfg->max_retries, "Retries per request");
    cmd->add_option("--rpm", cfg->requests_per_minute, "Requests per minute");
    cmd->add_option("--api-key-env", cfg->api_key_env, "Environment variable holding the API key");
    cmd->add_option("--checkpoint", cfg->checkpoint_path, "Resume file of processed passage ids");
    cmd->callback([&, corpus_path, pairs_out, refusals_out, mock, cfg]() {
      action = [&, corpus_path, pairs_out, refusals_out, mock, cfg]() {
        manifest.command = "synth generate";
        manifest.add_input(*corpus_path);
        cfg->concurrency = std::max(1, threads);
        if (*mock) {
          cfg->model = "mock";
          cfg->requests_per_minute = 1e9;
          cfg->retry_backoff_ms = 0;
        }
        const PassageStore store = ingest_passages_file(*corpus_path);
        const Transport transport = *mock ? make_mock_transport() : make_http_transport(*cfg);
        auto [pairs, refusals] = generate_pairs(*cfg, store, transport);

        // Resume runs append so earlier output is preserved.
        const bool resuming = !cfg->checkpoint_path.empty() &&
                              std::ifstream(*pairs_out).good();
        if (resuming) {
          std::ofstream pout(*pairs_out, std::ios::app | std::ios::binary);
          for (const auto& p : pairs) {
            pout << json{{"query", p.query},
                         {"passage_id", p.passage_id},
                         {"passage_text", p.passage_text},
                         {"generator", p.generator}}
                        .dump()
                 << "\n";
          }
          std::ofstream rout(*refusals_out, std::ios::app | std::ios::binary);
          for (const auto& [id, reason] : refusals.entries) {
            const char* name = reason == RefusalReason::model_refused ? "model_refused"
                               : reason == RefusalReason::validation_failed
                                   ? "validation_failed"
                                   : "transport_error";
            rout << json{{"passage_id", id}, {"reason", name}}.dump() << "\n";
          }
        } else {
          write_pairs_jsonl(pairs, *pairs_out);
          write_refusals_jsonl(refusals, *refusals_out);
        }
        manifest.add_output(*pairs_out);
        manifest.add_output(*refusals_out);
        manifest.config = {{"model", cfg->model}, {"mock", *mock ? "true" : "false"}};
        std::cout << pairs.size() << " pairs, " << refusals.entries.size()
                  << " refusals -> " << *pairs_out << "\n";
      };
    });
  }
  {
    auto* cmd = synth->add_subcommand("split", "Train/eval split with BEIR-style eval files");
    auto pairs_path = std::make_shared<std::string>();
    auto train_out = std::make_shared<std::string>("train_pairs.jsonl");
    auto eval_dir = std::make_shared<std::string>("eval_bundle");
    auto eval_fraction = std::make_shared<double>(0.2);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--pairs", *pairs_path, "Pairs JSONL")->required();
    cmd->add_option("--train-out", *train_out, "Training pairs output");
    cmd->add_option("--eval-dir", *eval_dir, "Eval bundle directory (corpus/queries/qrels)");
    cmd->add_option("--eval-fraction", *eval_fraction, "Fraction of pairs held out");
    cmd->add_option("--seed", *seed, "Split seed");
    cmd->callback([&, pairs_path, train_out, eval_dir, eval_fraction, seed]() {
      action = [&, pairs_path, train_out, eval_dir, eval_fraction, seed]() {
        manifest.command = "synth split";
        manifest.seed = *seed;
        manifest.add_input(*pairs_path);
        const auto pairs = read_pairs_jsonl(*pairs_path);
        const SplitResult split = split_train_eval(pairs, *eval_fraction, *seed);
        write_pairs_jsonl(split.train, *train_out);
        write_eval_bundle(split.eval, *eval_dir);
        manifest.add_output(*train_out);
        manifest.add_output(*eval_dir + "/corpus.jsonl");
        manifest.add_output(*eval_dir + "/queries.jsonl");
        manifest.add_output(*eval_dir + "/qrels.tsv");
        manifest.config = {{"eval_fraction", std::to_string(*eval_fraction)}};
        std::cout << split.train.size() << " train pairs, " << split.eval.queries.size()
                  << " eval queries -> " << *eval_dir << "\n";
      };
    });
  }

  // ---- mine ----
  {
    auto* cmd = app.add_subcommand("mine", "Mine negatives into triplets");
    auto checkpoint = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto pairs_path = std::make_shared<std::string>();
    auto corpus_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>("triplets.jsonl");
    auto strategy = std::make_shared<std::string>("hard");
    auto h = std::make_shared<int>(7);
    auto seed = std::make_shared<std::uint64_t>(0);
    cmd->add_option("--checkpoint", *checkpoint, "Encoder checkpoint")->required();
    cmd->add_option("--vocab", *vocab_path, "vocab.txt")->required();
    cmd->add_option("--pairs", *pairs_path, "Training pairs JSONL")->required();
    cmd->add_option("--corpus", *corpus_path, "Corpus JSONL to mine from")->required();
    cmd->add_option("--out", *out, "Triplets JSONL output");
    cmd->add_option("--strategy", *strategy, "hard | random | mixed");
    cmd->add_option("--H", *h, "Negatives per query");
    cmd->add_option("--seed", *seed, "Sampling seed");
    cmd->callback([&, checkpoint, vocab_path, pairs_path, corpus_path, out, strategy, h, seed]() {
      action = [&, checkpoint, vocab_path, pairs_path, corpus_path, out, strategy, h, seed]() {
        manifest.command = "mine";
        manifest.seed = *seed;
        for (const auto& p : {*checkpoint, *vocab_path, *pairs_path, *corpus_path})
          manifest.add_input(p);
        const EncoderParams params = load_checkpoint(*checkpoint);
        const WordPieceVocab vocab = WordPieceVocab::load(*vocab_path);
        const auto pairs = read_pairs_jsonl(*pairs_path);
        const PassageStore corpus = ingest_passages_file(*corpus_path);
        const auto triplets = mine_negatives(params, vocab, pairs, corpus,
                                             parse_mining_strategy(*strategy), *h, *seed);
        write_triplets_jsonl(triplets, *out);
        manifest.add_output(*out);
        manifest.config = {{"strategy", *strategy}, {"H", std::to_string(*h)}};
        std::cout << triplets.size() << " triplets -> " << *out << "\n";
      };
    });
  }

  // ---- train ----
  {
    auto* cmd = app.add_subcommand("train", "Contrastive training");
    auto variant = std::make_shared<std::string>("vanilla");
    auto vocab_path = std::make_shared<std::string>();
    auto pairs_path = std::make_shared<std::string>();
    auto triplets_path = std::make_shared<std::string>();
    auto corpus_path = std::make_shared<std::string>();
    auto injected_from = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>("run");
    auto eval_corpus = std::make_shared<std::string>();
    auto eval_queries = std::make_shared<std::string>();
    auto eval_qrels = std::make_shared<std::string>();
    auto negatives = std::make_shared<std::string>("in-batch");
    auto strategy = std::make_shared<std::string>("hard");
    auto cfg = std::make_shared<TrainConfig>();
    auto dim = std::make_shared<int>(64);
    cmd->add_option("--variant", *variant, "vanilla | full | plug | progressive");
    cmd->add_option("--vocab", *vocab_path, "vocab.txt")->required();
    cmd->add_option("--pairs", *pairs_path, "Training pairs JSONL (in-batch mode)");
    cmd->add_option("--triplets", *triplets_path, "Triplets JSONL (triplets mode)");
    cmd->add_option("--corpus", *corpus_path, "Corpus JSONL (triplets mode lookup)");
    cmd->add_option("--injected-from", *injected_from, "Injection report JSON with injected ids");
    cmd->add_option("--out-dir", *out_dir, "Checkpoint/report directory");
    cmd->add_option("--eval-corpus", *eval_corpus, "Per-epoch eval corpus JSONL");
    cmd->add_option("--eval-queries", *eval_queries, "Per-epoch eval queries JSONL");
    cmd->add_option("--eval-qrels", *eval_qrels, "Per-epoch eval qrels TSV");
    cmd->add_option("--dim", *dim, "Embedding dimension");
    cmd->add_option("--tau", cfg->tau, "InfoNCE temperature");
    cmd->add_option("--negatives", *negatives, "in-batch | triplets");
    cmd->add_option("--H", cfg->negatives_per_query, "Negatives per query (triplets)");
    cmd->add_option("--strategy", *strategy, "hard | random | mixed (metadata)");
    cmd->add_option("--batch-size", cfg->batch_size, "Batch size");
    cmd->add_option("--epochs", cfg->epochs, "Training epochs");
    cmd->add_option("--peak-lr", cfg->peak_lr, "Peak learning rate");
    cmd->add_option("--warmup-fraction", cfg->warmup_fraction, "Linear warmup fraction");
    cmd->add_option("--phase1-fraction", cfg->phase1_fraction, "Progressive phase-1 fraction of epochs");
    cmd->add_option("--seed", cfg->seed, "Training seed");
    cmd->callback([&, variant, vocab_path, pairs_path, triplets_path, corpus_path,
                   injected_from, out_dir, eval_corpus, eval_queries, eval_qrels,
                   negatives, strategy, cfg, dim]() {
      action = [&, variant, vocab_path, pairs_path, triplets_path, corpus_path,
                injected_from, out_dir, eval_corpus, eval_queries, eval_qrels,
                negatives, strategy, cfg, dim]() {
        manifest.command = "train";
        manifest.seed = cfg->seed;
        manifest.add_input(*vocab_path);
        cfg->negative_mode =
            *negatives == "triplets" ? NegativeMode::triplets : NegativeMode::in_batch;
        cfg->mining_strategy = parse_mining_strategy(*strategy);

        const WordPieceVocab vocab = WordPieceVocab::load(*vocab_path);
        TrainData data;
        PassageStore corpus_store;
        if (cfg->negative_mode == NegativeMode::in_batch) {
          if (pairs_path->empty()) throw std::runtime_error("--pairs required for in-batch mode");
          manifest.add_input(*pairs_path);
          data.pairs = read_pairs_jsonl(*pairs_path);
        } else {
          if (triplets_path->empty() || corpus_path->empty())
            throw std::runtime_error("--triplets and --corpus required for triplets mode");
          manifest.add_input(*triplets_path);
          manifest.add_input(*corpus_path);
          data.triplets = read_triplets_jsonl(*triplets_path);
          corpus_store = ingest_passages_file(*corpus_path);
          data.corpus = &corpus_store;
          // Triplet queries also need their positive text for tokenization;
          // the corpus lookup covers it.
        }

        std::vector<int> injected;
        if (!injected_from->empty()) {
          manifest.add_input(*injected_from);
          injected = injected_ids_from_report(*injected_from);
        }
        const TrainVariant tv = parse_train_variant(*variant);
        if (tv != TrainVariant::vanilla && injected.empty() &&
            (tv == TrainVariant::plug || tv == TrainVariant::progressive)) {
          throw std::runtime_error(std::string(*variant) +
                                   " variant requires --injected-from with injected ids");
        }

        EncoderParams init = init_encoder(vocab, *dim, cfg->seed, injected);

        EvalBundle bundle;
        const EvalBundle* bundle_ptr = nullptr;
        if (!eval_corpus->empty()) {
          bundle = read_eval_bundle(*eval_corpus, *eval_queries, *eval_qrels);
          bundle_ptr = &bundle;
        }

        const TrainOutcome outcome =
            run_training(tv, data, vocab, std::move(init), *cfg, bundle_ptr, *out_dir);
        const std::string final_path = *out_dir + "/checkpoint_final.bin";
        save_checkpoint(outcome.params, final_path);
        const std::string report_path = *out_dir + "/train_report.json";
        write_train_report_json(outcome.report, report_path);
        manifest.add_output(final_path);
        manifest.add_output(report_path);
        manifest.config = {{"variant", *variant},
                           {"tau", std::to_string(cfg->tau)},
                           {"negatives", *negatives},
                           {"batch_size", std::to_string(cfg->batch_size)},
                           {"epochs", std::to_string(cfg->epochs)},
                           {"peak_lr", std::to_string(cfg->peak_lr)},
                           {"warmup_fraction", std::to_string(cfg->warmup_fraction)},
                           {"dim", std::to_string(*dim)}};
        std::cout << "trained " << cfg->epochs << " epochs -> " << final_path << "\n";
      };
    });
  }

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Retrieval evaluation");
  eval_cmd->require_subcommand(1);
  {
    auto* cmd = eval_cmd->add_subcommand("run", "Embed, search, and score a benchmark");
    auto checkpoint = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto corpus_path = std::make_shared<std::string>();
    auto queries_path = std::make_shared<std::string>();
    auto qrels_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto k = std::make_shared<int>(10);
    cmd->add_option("--checkpoint", *checkpoint, "Encoder checkpoint")->required();
    cmd->add_option("--vocab", *vocab_path, "vocab.txt")->required();
    cmd->add_option("--corpus", *corpus_path, "Corpus JSONL")->required();
    cmd->add_option("--queries", *queries_path, "Queries JSONL")->required();
    cmd->add_option("--qrels", *qrels_path, "Qrels TSV")->required();
    cmd->add_option("--out", *out, "Optional report JSON output path");
    cmd->add_option("--k", *k, "Cutoff rank");
    cmd->callback([&, checkpoint, vocab_path, corpus_path, queries_path, qrels_path, out, k]() {
      action = [&, checkpoint, vocab_path, corpus_path, queries_path, qrels_path, out, k]() {
        manifest.command = "eval run";
        for (const auto& p : {*checkpoint, *vocab_path, *corpus_path, *queries_path, *qrels_path})
          manifest.add_input(p);
        const EncoderParams params = load_checkpoint(*checkpoint);
        const WordPieceVocab vocab = WordPieceVocab::load(*vocab_path);
        const BenchmarkResult result =
            benchmark(params, vocab, *corpus_path, *queries_path, *qrels_path, *k);
        std::cout << result.report_json;
        if (!out->empty()) {
          write_file(*out, result.report_json);
          manifest.add_output(*out);
        }
        manifest.config = {{"k", std::to_string(*k)}};
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    action();
    const auto t_end = std::chrono::steady_clock::now();
    manifest.wall_time_seconds =
        std::chrono::duration<double>(t_end - t_start).count();
    manifest.write(manifest_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "chembed/corpus.hpp"
#include "chembed/encoder.hpp"

namespace chembed {

struct EmbeddingIndex {
  std::vector<std::string> ids;  // retrievable passages, input order
  Eigen::MatrixXd vectors;       // |ids| x dim, unit rows
  std::vector<std::string> skipped_ids;  // empty tokenization, excluded
};

struct ScoredHit {
  std::string passage_id;
  double score = 0.0;
};

// query id -> descending-score hits, ties broken by ascending passage id.
using RankedRun = std::map<std::string, std::vector<ScoredHit>>;

struct MetricReport {
  double map_at_k = 0.0;
  double mrr_at_k = 0.0;
  double ndcg_at_k = 0.0;
  int k = 10;
  std::map<std::string, double> per_query_map;
  std::map<std::string, double> per_query_mrr;
  std::map<std::string, double> per_query_ndcg;
};

using Qrels = std::unordered_map<std::string, std::unordered_set<std::string>>;

EmbeddingIndex build_index(const EncoderParams& params, const WordPieceVocab& vocab,
                           const PassageStore& corpus);

std::vector<ScoredHit> search_top_k(const EmbeddingIndex& index,
                                    const Eigen::VectorXd& query_vec, int k = 10);

MetricReport compute_metrics(const RankedRun& run, const Qrels& qrels, int k = 10);

struct BenchmarkResult {
  MetricReport metrics;
  std::string report_json;  // metrics + config fingerprint
};

BenchmarkResult benchmark(const EncoderParams& params, const WordPieceVocab& vocab,
                          const std::string& corpus_path, const std::string& queries_path,
                          const std::string& qrels_path, int k = 10, double tau = 0.05);

}  // namespace chembed

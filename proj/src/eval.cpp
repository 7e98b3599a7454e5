#include "chembed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "chembed/synth.hpp"
#include "chembed/util.hpp"

namespace chembed {

using nlohmann::json;

namespace {

std::string params_digest(const EncoderParams& params) {
  std::string bytes;
  auto append = [&bytes](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float v = static_cast<float>(m(r, c));
        bytes.append(reinterpret_cast<const char*>(&v), sizeof(float));
      }
    }
  };
  append(params.embedding);
  append(params.projection);
  return fnv1a64_hex(bytes);
}

}  // namespace

EmbeddingIndex build_index(const EncoderParams& params, const WordPieceVocab& vocab,
                           const PassageStore& corpus) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  EmbeddingIndex index;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& p : corpus.passages()) {
    const auto ids = wordpiece_encode(vocab, p.text);
    if (ids.empty()) {
      index.skipped_ids.push_back(p.id);
      continue;
    }
    index.ids.push_back(p.id);
    rows.push_back(embed_text(params, ids));
  }
  if (rows.empty()) throw std::runtime_error("all passages tokenize to nothing");
  index.vectors.resize(static_cast<Eigen::Index>(rows.size()), params.dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    index.vectors.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return index;
}

std::vector<ScoredHit> search_top_k(const EmbeddingIndex& index,
                                    const Eigen::VectorXd& query_vec, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (index.ids.empty()) throw std::invalid_argument("empty index");
  const Eigen::VectorXd scores = index.vectors * query_vec;

  std::vector<std::size_t> order(index.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return index.ids[a] < index.ids[b];
  };
  const std::size_t take = std::min(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), better);

  std::vector<ScoredHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({index.ids[order[i]], scores(static_cast<Eigen::Index>(order[i]))});
  }
  return hits;
}

MetricReport compute_metrics(const RankedRun& run, const Qrels& qrels, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  MetricReport report;
  report.k = k;
  if (run.empty()) return report;

  for (const auto& [qid, hits] : run) {
    auto q_it = qrels.find(qid);
    if (q_it == qrels.end())
      throw std::runtime_error("query missing from qrels: " + qid);
    const auto& relevant = q_it->second;

    double mrr = 0.0;
    double dcg = 0.0;
    double precision_sum = 0.0;
    int hit_count = 0;
    const int depth = std::min<int>(k, static_cast<int>(hits.size()));
    for (int rank = 1; rank <= depth; ++rank) {
      if (!relevant.count(hits[static_cast<std::size_t>(rank - 1)].passage_id)) continue;
      if (hit_count == 0) mrr = 1.0 / static_cast<double>(rank);
      ++hit_count;
      dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      precision_sum += static_cast<double>(hit_count) / static_cast<double>(rank);
    }
    const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
    double idcg = 0.0;
    for (int rank = 1; rank <= ideal; ++rank)
      idcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    const double ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
    const double ap = ideal > 0 ? precision_sum / static_cast<double>(ideal) : 0.0;

    report.per_query_map[qid] = ap;
    report.per_query_mrr[qid] = mrr;
    report.per_query_ndcg[qid] = ndcg;
  }

  const double n = static_cast<double>(run.size());
  for (const auto& [qid, v] : report.per_query_map) report.map_at_k += v / n;
  for (const auto& [qid, v] : report.per_query_mrr) report.mrr_at_k += v / n;
  for (const auto& [qid, v] : report.per_query_ndcg) report.ndcg_at_k += v / n;
  return report;
}

BenchmarkResult benchmark(const EncoderParams& params, const WordPieceVocab& vocab,
                          const std::string& corpus_path, const std::string& queries_path,
                          const std::string& qrels_path, int k, double tau) {
  EvalBundle bundle = read_eval_bundle(corpus_path, queries_path, qrels_path);

  // Dangling qrels ids fail early.
  for (const auto& [qid, pids] : bundle.qrels) {
    for (const auto& pid : pids) {
      if (!bundle.corpus.find(pid))
        throw std::runtime_error("qrels references unknown corpus id: " + pid);
    }
    const auto known = std::find_if(
        bundle.queries.begin(), bundle.queries.end(),
        [&](const auto& q) { return q.first == qid; });
    if (known == bundle.queries.end())
      throw std::runtime_error("qrels references unknown query id: " + qid);
  }

  const EmbeddingIndex index = build_index(params, vocab, bundle.corpus);
  RankedRun run;
  Qrels qrels;
  for (const auto& [qid, text] : bundle.queries) {
    const auto ids = wordpiece_encode(vocab, text);
    if (ids.empty()) continue;
    run[qid] = search_top_k(index, embed_text(params, ids), k);
    auto it = bundle.qrels.find(qid);
    qrels[qid] = it == bundle.qrels.end()
                     ? std::unordered_set<std::string>{}
                     : std::unordered_set<std::string>(it->second.begin(), it->second.end());
  }

  BenchmarkResult result;
  result.metrics = compute_metrics(run, qrels, k);

  std::string vocab_blob;
  for (const auto& t : vocab.tokens()) {
    vocab_blob += t;
    vocab_blob += '\n';
  }
  json report{{"map_at_k", result.metrics.map_at_k},
              {"mrr_at_k", result.metrics.mrr_at_k},
              {"ndcg_at_k", result.metrics.ndcg_at_k},
              {"k", k},
              {"num_queries", run.size()},
              {"num_passages", index.ids.size()},
              {"fingerprint",
               {{"vocab_hash", fnv1a64_hex(vocab_blob)},
                {"checkpoint_hash", params_digest(params)},
                {"checkpoint_variant", params.variant},
                {"dim", params.dim},
                {"k", k},
                {"tau", tau}}}};
  result.report_json = report.dump(2) + "\n";
  return result;
}

}  // namespace chembed

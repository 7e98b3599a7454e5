#include "chembed/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "chembed/eval.hpp"
#include "chembed/util.hpp"

namespace chembed {

using nlohmann::json;

MiningStrategy parse_mining_strategy(const std::string& name) {
  if (name == "hard") return MiningStrategy::hard;
  if (name == "random") return MiningStrategy::random;
  if (name == "mixed" || name == "mixed_3h4r") return MiningStrategy::mixed_3h4r;
  throw std::invalid_argument("unknown mining strategy: " + name);
}

TrainVariant parse_train_variant(const std::string& name) {
  if (name == "vanilla") return TrainVariant::vanilla;
  if (name == "full") return TrainVariant::full;
  if (name == "plug") return TrainVariant::plug;
  if (name == "progressive") return TrainVariant::progressive;
  throw std::invalid_argument("unknown training variant: " + name);
}

const char* train_variant_name(TrainVariant v) {
  switch (v) {
    case TrainVariant::vanilla: return "vanilla";
    case TrainVariant::full: return "full";
    case TrainVariant::plug: return "plug";
    case TrainVariant::progressive: return "progressive";
  }
  return "unknown";
}

InfoNceResult info_nce_loss(const Eigen::MatrixXd& queries,
                            const Eigen::MatrixXd& positives,
                            const std::vector<Eigen::MatrixXd>* negatives,
                            double tau) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
  const Eigen::Index n = queries.rows();
  const Eigen::Index dim = queries.cols();
  if (positives.rows() != n || positives.cols() != dim)
    throw std::invalid_argument("queries/positives shape mismatch");
  const bool in_batch = (negatives == nullptr);
  if (in_batch && n < 2)
    throw std::invalid_argument("no negatives available: in-batch mode needs N >= 2");
  if (!in_batch && static_cast<Eigen::Index>(negatives->size()) != n)
    throw std::invalid_argument("negatives count must match query count");

  InfoNceResult result;
  result.grad_queries = Eigen::MatrixXd::Zero(n, dim);
  result.grad_positives = Eigen::MatrixXd::Zero(n, dim);
  if (!in_batch) {
    result.grad_negatives.reserve(static_cast<std::size_t>(n));
    for (const auto& negs : *negatives)
      result.grad_negatives.push_back(Eigen::MatrixXd::Zero(negs.rows(), negs.cols()));
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  double total_loss = 0.0;

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd q = queries.row(i).transpose();
    const double z_pos = q.dot(positives.row(i).transpose()) / tau;

    // Logit differences z_neg - z_pos for every negative candidate.
    std::vector<double> diffs;
    if (in_batch) {
      diffs.reserve(static_cast<std::size_t>(n) - 1);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        diffs.push_back(q.dot(positives.row(j).transpose()) / tau - z_pos);
      }
    } else {
      const Eigen::MatrixXd& negs = (*negatives)[static_cast<std::size_t>(i)];
      diffs.reserve(static_cast<std::size_t>(negs.rows()));
      for (Eigen::Index h = 0; h < negs.rows(); ++h) {
        diffs.push_back(q.dot(negs.row(h).transpose()) / tau - z_pos);
      }
    }

    // Stable softmax-cross-entropy in shifted form; exact for tiny losses.
    double max_diff = 0.0;
    for (double d : diffs) max_diff = std::max(max_diff, d);
    double sum_shifted = 0.0;
    for (double d : diffs) sum_shifted += std::exp(d - max_diff);
    double loss_i;
    if (max_diff == 0.0) {
      loss_i = std::log1p(sum_shifted);
    } else {
      loss_i = max_diff + std::log(std::exp(-max_diff) + sum_shifted);
    }
    total_loss += loss_i;

    const double denom = std::exp(-max_diff) + sum_shifted;
    const double p_pos = std::exp(-max_diff) / denom;

    // dL/dz for the positive, scaled into the aggregate mean.
    const double dz_pos = (p_pos - 1.0) * inv_n;
    result.grad_queries.row(i) += dz_pos / tau * positives.row(i);
    result.grad_positives.row(i) += dz_pos / tau * queries.row(i);

    std::size_t d_idx = 0;
    if (in_batch) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double p_j = std::exp(diffs[d_idx] - max_diff) / denom;
        const double dz = p_j * inv_n;
        result.grad_queries.row(i) += dz / tau * positives.row(j);
        result.grad_positives.row(j) += dz / tau * queries.row(i);
        ++d_idx;
      }
    } else {
      const Eigen::MatrixXd& negs = (*negatives)[static_cast<std::size_t>(i)];
      for (Eigen::Index h = 0; h < negs.rows(); ++h) {
        const double p_h = std::exp(diffs[d_idx] - max_diff) / denom;
        const double dz = p_h * inv_n;
        result.grad_queries.row(i) += dz / tau * negs.row(h);
        result.grad_negatives[static_cast<std::size_t>(i)].row(h) +=
            dz / tau * queries.row(i);
        ++d_idx;
      }
    }
  }

  result.loss = total_loss * inv_n;
  return result;
}

double lr_at_step(long long step, long long total_steps, double peak_lr,
                  double warmup_fraction, bool constant_after_warmup) {
  if (total_steps <= 0) throw std::invalid_argument("total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("step out of range [0, total_steps]");
  if (warmup_fraction <= 0.0 || warmup_fraction >= 1.0)
    throw std::invalid_argument("warmup_fraction must be in (0, 1)");

  const long long warmup_steps = static_cast<long long>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps)));
  if (step <= warmup_steps) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (constant_after_warmup) return peak_lr;
  return peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup_steps);
}

std::vector<TripletRecord> mine_negatives(const EncoderParams& params,
                                          const WordPieceVocab& vocab,
                                          const std::vector<PairRecord>& pairs,
                                          const PassageStore& corpus,
                                          MiningStrategy strategy,
                                          int negatives_per_query,
                                          std::uint64_t seed) {
  if (negatives_per_query < 1) throw std::invalid_argument("H must be >= 1");
  const std::size_t h = static_cast<std::size_t>(negatives_per_query);
  if (corpus.size() <= h) {
    throw std::invalid_argument("corpus too small: need more than " +
                                std::to_string(h) + " passages");
  }

  // Embed the whole corpus once against the current parameter snapshot.
  std::vector<std::string> cand_ids;
  std::vector<Eigen::VectorXd> cand_vecs;
  for (const auto& p : corpus.passages()) {
    const auto ids = wordpiece_encode(vocab, p.text);
    if (ids.empty()) continue;
    cand_ids.push_back(p.id);
    cand_vecs.push_back(embed_text(params, ids));
  }
  if (cand_ids.size() <= h) throw std::invalid_argument("corpus too small after tokenization");

  std::vector<TripletRecord> out;
  out.reserve(pairs.size());
  for (std::size_t qi = 0; qi < pairs.size(); ++qi) {
    const PairRecord& pair = pairs[qi];
    const auto q_ids = wordpiece_encode(vocab, pair.query);
    if (q_ids.empty()) throw std::runtime_error("query tokenizes to nothing: " + pair.query);
    const Eigen::VectorXd q_vec = embed_text(params, q_ids);

    // Candidates scored by cosine, excluding the positive.
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(cand_ids.size());
    for (std::size_t c = 0; c < cand_ids.size(); ++c) {
      if (cand_ids[c] == pair.passage_id) continue;
      scored.emplace_back(q_vec.dot(cand_vecs[c]), c);
    }
    if (scored.size() < h) throw std::invalid_argument("corpus too small for query " + pair.passage_id);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return cand_ids[a.second] < cand_ids[b.second];
    });

    TripletRecord rec;
    rec.query = pair.query;
    rec.positive_id = pair.passage_id;
    std::set<std::string> chosen;

    const std::size_t hard_count =
        strategy == MiningStrategy::hard ? h
        : strategy == MiningStrategy::random ? 0
                                             : std::min<std::size_t>(3, h);
    for (std::size_t k = 0; k < hard_count; ++k) {
      rec.negative_ids.push_back(cand_ids[scored[k].second]);
      chosen.insert(rec.negative_ids.back());
    }

    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (qi + 1)));
    while (rec.negative_ids.size() < h) {
      const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(cand_ids.size()));
      const std::string& id = cand_ids[pick];
      if (id == pair.passage_id || chosen.count(id)) continue;
      rec.negative_ids.push_back(id);
      chosen.insert(id);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

struct AdamState {
  Eigen::MatrixXd m_embedding, v_embedding, m_projection, v_projection;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;

  explicit AdamState(const EncoderParams& p)
      : m_embedding(Eigen::MatrixXd::Zero(p.embedding.rows(), p.embedding.cols())),
        v_embedding(Eigen::MatrixXd::Zero(p.embedding.rows(), p.embedding.cols())),
        m_projection(Eigen::MatrixXd::Zero(p.projection.rows(), p.projection.cols())),
        v_projection(Eigen::MatrixXd::Zero(p.projection.rows(), p.projection.cols())) {}

  void step(EncoderParams& params, const Eigen::MatrixXd& grad_embedding,
            const Eigen::MatrixXd& grad_projection, const FreezeMask& mask, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (Eigen::Index r = 0; r < params.embedding.rows(); ++r) {
      if (!mask.embedding_rows_trainable[static_cast<std::size_t>(r)]) continue;
      for (Eigen::Index c = 0; c < params.embedding.cols(); ++c) {
        const double g = grad_embedding(r, c);
        double& m = m_embedding(r, c);
        double& v = v_embedding(r, c);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        params.embedding(r, c) -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
      }
    }
    if (mask.projection_trainable) {
      for (Eigen::Index r = 0; r < params.projection.rows(); ++r) {
        for (Eigen::Index c = 0; c < params.projection.cols(); ++c) {
          const double g = grad_projection(r, c);
          double& m = m_projection(r, c);
          double& v = v_projection(r, c);
          m = beta1 * m + (1.0 - beta1) * g;
          v = beta2 * v + (1.0 - beta2) * g * g;
          params.projection(r, c) -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        }
      }
    }
  }
};

struct Example {
  std::vector<int> query_ids;
  std::vector<int> positive_ids;
  std::vector<std::vector<int>> negative_ids;  // triplets mode
};

std::vector<Example> tokenize_dataset(const TrainData& data, const WordPieceVocab& vocab,
                                      NegativeMode mode) {
  std::vector<Example> examples;
  if (mode == NegativeMode::in_batch) {
    if (data.pairs.empty()) throw std::invalid_argument("empty training dataset");
    for (const auto& pair : data.pairs) {
      Example ex;
      ex.query_ids = wordpiece_encode(vocab, pair.query);
      ex.positive_ids = wordpiece_encode(vocab, pair.passage_text);
      if (ex.query_ids.empty() || ex.positive_ids.empty())
        throw std::runtime_error("pair tokenizes to nothing: " + pair.passage_id);
      examples.push_back(std::move(ex));
    }
  } else {
    if (data.triplets.empty()) throw std::invalid_argument("empty training dataset");
    if (!data.corpus) throw std::invalid_argument("triplets mode requires a corpus");
    for (const auto& t : data.triplets) {
      Example ex;
      ex.query_ids = wordpiece_encode(vocab, t.query);
      const Passage* pos = data.corpus->find(t.positive_id);
      if (!pos) throw std::runtime_error("positive id missing from corpus: " + t.positive_id);
      ex.positive_ids = wordpiece_encode(vocab, pos->text);
      if (ex.query_ids.empty() || ex.positive_ids.empty())
        throw std::runtime_error("triplet tokenizes to nothing: " + t.positive_id);
      for (const auto& nid : t.negative_ids) {
        const Passage* neg = data.corpus->find(nid);
        if (!neg) throw std::runtime_error("negative id missing from corpus: " + nid);
        auto ids = wordpiece_encode(vocab, neg->text);
        if (ids.empty()) throw std::runtime_error("negative tokenizes to nothing: " + nid);
        ex.negative_ids.push_back(std::move(ids));
      }
      examples.push_back(std::move(ex));
    }
  }
  return examples;
}

double eval_ndcg(const EncoderParams& params, const WordPieceVocab& vocab,
                 const EvalBundle& bundle, int k) {
  const EmbeddingIndex index = build_index(params, vocab, bundle.corpus);
  RankedRun run;
  Qrels qrels;
  for (const auto& [qid, text] : bundle.queries) {
    const auto ids = wordpiece_encode(vocab, text);
    if (ids.empty()) continue;
    run[qid] = search_top_k(index, embed_text(params, ids), k);
    auto it = bundle.qrels.find(qid);
    if (it != bundle.qrels.end())
      qrels[qid] = std::unordered_set<std::string>(it->second.begin(), it->second.end());
  }
  return compute_metrics(run, qrels, k).ndcg_at_k;
}

}  // namespace

TrainOutcome run_training(TrainVariant variant, const TrainData& data,
                          const WordPieceVocab& vocab, EncoderParams initial,
                          const TrainConfig& config, const EvalBundle* eval_bundle,
                          const std::string& checkpoint_dir, const EpochObserver& observer) {
  if (config.tau <= 0.0) throw std::invalid_argument("tau must be positive");
  if (config.negative_mode == NegativeMode::in_batch && config.batch_size < 2)
    throw std::invalid_argument("in-batch mode needs batch_size >= 2");

  TrainOutcome out;
  out.params = std::move(initial);
  if (config.epochs == 0) return out;

  const auto examples = tokenize_dataset(data, vocab, config.negative_mode);

  // Batch layout is fixed across epochs; only the order is reshuffled.
  std::vector<std::vector<std::size_t>> batch_slots;
  {
    std::size_t i = 0;
    while (i < examples.size()) {
      const std::size_t end = std::min(examples.size(),
                                       i + static_cast<std::size_t>(config.batch_size));
      std::vector<std::size_t> slot(end - i);
      for (std::size_t j = i; j < end; ++j) slot[j - i] = j;
      // In-batch loss has no negatives for a singleton remainder batch.
      if (!(config.negative_mode == NegativeMode::in_batch && slot.size() < 2))
        batch_slots.push_back(std::move(slot));
      i = end;
    }
  }
  if (batch_slots.empty()) throw std::invalid_argument("dataset yields no usable batches");

  const long long total_steps =
      static_cast<long long>(config.epochs) * static_cast<long long>(batch_slots.size());

  const int phase1_epochs =
      variant == TrainVariant::progressive
          ? static_cast<int>(std::ceil(config.phase1_fraction * config.epochs))
          : 0;

  AdamState adam(out.params);
  long long global_step = 0;

  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Variant mask_variant;
    switch (variant) {
      case TrainVariant::vanilla: mask_variant = Variant::vanilla; break;
      case TrainVariant::full: mask_variant = Variant::full; break;
      case TrainVariant::plug: mask_variant = Variant::plug; break;
      case TrainVariant::progressive:
        mask_variant = epoch < phase1_epochs ? Variant::progressive_phase1
                                             : Variant::progressive_phase2;
        break;
    }
    const FreezeMask mask = build_freeze_mask(out.params, mask_variant);

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(config.seed ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(epoch) + 1)));
    deterministic_shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    double last_lr = 0.0;
    for (const auto& slot : batch_slots) {
      const long long step = ++global_step;  // 1-based for the schedule
      const double lr = lr_at_step(step, total_steps, config.peak_lr,
                                   config.warmup_fraction, config.constant_after_warmup);
      last_lr = lr;

      std::vector<EmbedCache> q_caches, p_caches;
      std::vector<std::vector<EmbedCache>> n_caches;
      const Eigen::Index b = static_cast<Eigen::Index>(slot.size());
      Eigen::MatrixXd q_mat(b, out.params.dim), p_mat(b, out.params.dim);
      std::vector<Eigen::MatrixXd> n_mats;
      for (Eigen::Index row = 0; row < b; ++row) {
        const Example& ex = examples[order[slot[static_cast<std::size_t>(row)]]];
        q_caches.push_back(embed_forward(out.params, ex.query_ids));
        p_caches.push_back(embed_forward(out.params, ex.positive_ids));
        q_mat.row(row) = q_caches.back().unit.transpose();
        p_mat.row(row) = p_caches.back().unit.transpose();
        if (config.negative_mode == NegativeMode::triplets) {
          std::vector<EmbedCache> negs;
          Eigen::MatrixXd n_mat(static_cast<Eigen::Index>(ex.negative_ids.size()), out.params.dim);
          for (std::size_t hh = 0; hh < ex.negative_ids.size(); ++hh) {
            negs.push_back(embed_forward(out.params, ex.negative_ids[hh]));
            n_mat.row(static_cast<Eigen::Index>(hh)) = negs.back().unit.transpose();
          }
          n_caches.push_back(std::move(negs));
          n_mats.push_back(std::move(n_mat));
        }
      }

      const InfoNceResult nce = info_nce_loss(
          q_mat, p_mat,
          config.negative_mode == NegativeMode::triplets ? &n_mats : nullptr, config.tau);
      if (!std::isfinite(nce.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", step " << step
            << " (lr=" << lr << ")";
        throw std::runtime_error(msg.str());
      }
      loss_sum += nce.loss;

      Eigen::MatrixXd grad_embedding =
          Eigen::MatrixXd::Zero(out.params.embedding.rows(), out.params.embedding.cols());
      Eigen::MatrixXd grad_projection =
          Eigen::MatrixXd::Zero(out.params.dim, out.params.dim);
      for (Eigen::Index row = 0; row < b; ++row) {
        embed_backward(out.params, q_caches[static_cast<std::size_t>(row)],
                       nce.grad_queries.row(row).transpose(), grad_embedding, grad_projection);
        embed_backward(out.params, p_caches[static_cast<std::size_t>(row)],
                       nce.grad_positives.row(row).transpose(), grad_embedding, grad_projection);
        if (config.negative_mode == NegativeMode::triplets) {
          const auto& negs = n_caches[static_cast<std::size_t>(row)];
          for (std::size_t hh = 0; hh < negs.size(); ++hh) {
            embed_backward(out.params, negs[hh],
                           nce.grad_negatives[static_cast<std::size_t>(row)]
                               .row(static_cast<Eigen::Index>(hh))
                               .transpose(),
                           grad_embedding, grad_projection);
          }
        }
      }
      adam.step(out.params, grad_embedding, grad_projection, mask, lr);
    }

    EpochReport report;
    report.epoch = epoch;
    report.mean_loss = loss_sum / static_cast<double>(batch_slots.size());
    report.final_lr = last_lr;
    if (eval_bundle) {
      report.eval_ndcg_at_k = eval_ndcg(out.params, vocab, *eval_bundle, config.eval_k);
    }
    if (!checkpoint_dir.empty()) {
      std::ostringstream path;
      path << checkpoint_dir << "/checkpoint_epoch_";
      path.fill('0');
      path.width(3);
      path << epoch;
      path << ".bin";
      EncoderParams snapshot = out.params;
      snapshot.variant = variant == TrainVariant::progressive
                             ? (epoch < phase1_epochs ? "progressive_phase1"
                                                      : "progressive_phase2")
                             : train_variant_name(variant);
      save_checkpoint(snapshot, path.str());
      report.checkpoint_path = path.str();
    }
    out.report.epochs.push_back(std::move(report));
    if (observer) observer(epoch, out.params);
  }
  out.params.variant = train_variant_name(variant);
  return out;
}

std::vector<TripletRecord> read_triplets_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open triplets file: " + path);
  std::vector<TripletRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    out.push_back({rec.at("query").get<std::string>(),
                   rec.at("positive_id").get<std::string>(),
                   rec.at("negative_ids").get<std::vector<std::string>>()});
  }
  return out;
}

void write_triplets_jsonl(const std::vector<TripletRecord>& triplets,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write triplets file: " + path);
  for (const auto& t : triplets) {
    out << json{{"query", t.query},
                {"positive_id", t.positive_id},
                {"negative_ids", t.negative_ids}}
               .dump()
        << "\n";
  }
}

void write_train_report_json(const TrainReport& report, const std::string& path) {
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    json rec{{"epoch", e.epoch},
             {"mean_loss", e.mean_loss},
             {"final_lr", e.final_lr},
             {"checkpoint", e.checkpoint_path}};
    if (e.eval_ndcg_at_k) rec["eval_ndcg_at_10"] = *e.eval_ndcg_at_k;
    epochs.push_back(rec);
  }
  write_file(path, json{{"epochs", epochs}}.dump(2) + "\n");
}

}  // namespace chembed

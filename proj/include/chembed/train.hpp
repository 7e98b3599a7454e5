#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chembed/encoder.hpp"
#include "chembed/synth.hpp"

namespace chembed {

enum class NegativeMode { in_batch, triplets };
enum class MiningStrategy { hard, random, mixed_3h4r };

MiningStrategy parse_mining_strategy(const std::string& name);

struct TrainConfig {
  double tau = 0.05;
  NegativeMode negative_mode = NegativeMode::in_batch;
  int negatives_per_query = 7;  // H, triplets mode
  MiningStrategy mining_strategy = MiningStrategy::hard;
  int batch_size = 64;
  int epochs = 10;
  double peak_lr = 2e-5;
  double warmup_fraction = 0.05;
  double phase1_fraction = 0.2;  // progressive only
  std::uint64_t seed = 0;
  bool constant_after_warmup = false;
  int eval_k = 10;
};

struct TripletRecord {
  std::string query;
  std::string positive_id;
  std::vector<std::string> negative_ids;
};

struct EpochReport {
  int epoch = 0;
  double mean_loss = 0.0;
  double final_lr = 0.0;
  std::optional<double> eval_ndcg_at_k;
  std::string checkpoint_path;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
};

// InfoNCE over unit vectors (rows). In-batch mode: negatives for query i
// are the other positives; triplets mode: the attached H negatives.
struct InfoNceResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_queries;
  Eigen::MatrixXd grad_positives;
  std::vector<Eigen::MatrixXd> grad_negatives;  // per query, H x dim
};

InfoNceResult info_nce_loss(const Eigen::MatrixXd& queries,
                            const Eigen::MatrixXd& positives,
                            const std::vector<Eigen::MatrixXd>* negatives,
                            double tau);

// Linear warmup to peak over ceil(warmup_fraction * total) steps, then
// linear decay to zero (or constant when requested).
double lr_at_step(long long step, long long total_steps, double peak_lr,
                  double warmup_fraction = 0.05, bool constant_after_warmup = false);

std::vector<TripletRecord> mine_negatives(const EncoderParams& params,
                                          const WordPieceVocab& vocab,
                                          const std::vector<PairRecord>& pairs,
                                          const PassageStore& corpus,
                                          MiningStrategy strategy,
                                          int negatives_per_query,
                                          std::uint64_t seed);

enum class TrainVariant { vanilla, full, plug, progressive };
TrainVariant parse_train_variant(const std::string& name);
const char* train_variant_name(TrainVariant v);

struct TrainData {
  std::vector<PairRecord> pairs;                 // in_batch mode
  std::vector<TripletRecord> triplets;           // triplets mode
  const PassageStore* corpus = nullptr;          // id -> text lookup for triplets
};

struct TrainOutcome {
  EncoderParams params;
  TrainReport report;
};

// Optional per-epoch observer; receives the parameters after the epoch's
// optimizer updates.
using EpochObserver = std::function<void(int epoch, const EncoderParams&)>;

TrainOutcome run_training(TrainVariant variant, const TrainData& data,
                          const WordPieceVocab& vocab, EncoderParams initial,
                          const TrainConfig& config,
                          const EvalBundle* eval_bundle = nullptr,
                          const std::string& checkpoint_dir = "",
                          const EpochObserver& observer = nullptr);

std::vector<TripletRecord> read_triplets_jsonl(const std::string& path);
void write_triplets_jsonl(const std::vector<TripletRecord>& triplets,
                          const std::string& path);
void write_train_report_json(const TrainReport& report, const std::string& path);

}  // namespace chembed

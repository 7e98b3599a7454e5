#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chembed/wordpiece.hpp"

namespace chembed {

enum class Variant { vanilla, full, plug, progressive_phase1, progressive_phase2 };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct EncoderParams {
  Eigen::MatrixXd embedding;   // vocab_size x dim
  Eigen::MatrixXd projection;  // dim x dim
  std::vector<int> injected_ids;
  int dim = 0;
  std::uint64_t seed = 0;
  std::string variant = "init";

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
};

struct FreezeMask {
  std::vector<char> embedding_rows_trainable;
  bool projection_trainable = true;
};

// Injected rows draw from N(0, 0.2^2); all other rows from N(0, 0.02^2);
// projection is identity plus N(0, 0.01^2) noise. Deterministic per seed.
EncoderParams init_encoder(const WordPieceVocab& vocab, int dim, std::uint64_t seed,
                           const std::vector<int>& injected_ids);

// Mean-pool embedding rows, project, L2-normalize.
Eigen::VectorXd embed_text(const EncoderParams& params, const std::vector<int>& ids);

// Forward pass retaining intermediates needed for the backward pass.
struct EmbedCache {
  std::vector<int> ids;
  Eigen::VectorXd mean;
  Eigen::VectorXd projected;
  double norm = 0.0;
  Eigen::VectorXd unit;
};
EmbedCache embed_forward(const EncoderParams& params, const std::vector<int>& ids);

// Accumulates gradients of the unit output into dE (vocab x dim) and
// dP (dim x dim) given d(loss)/d(unit output).
void embed_backward(const EncoderParams& params, const EmbedCache& cache,
                    const Eigen::VectorXd& grad_unit,
                    Eigen::MatrixXd& grad_embedding, Eigen::MatrixXd& grad_projection);

FreezeMask build_freeze_mask(const EncoderParams& params, Variant variant);

// Checkpoint layout: one JSON header line {vocab_size, dim, injected_ids,
// seed, variant} then row-major little-endian float32 blocks, embedding
// first, projection second.
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace chembed

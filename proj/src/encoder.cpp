#include "chembed/encoder.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "chembed/util.hpp"

namespace chembed {

using nlohmann::json;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::full: return "full";
    case Variant::plug: return "plug";
    case Variant::progressive_phase1: return "progressive_phase1";
    case Variant::progressive_phase2: return "progressive_phase2";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "vanilla") return Variant::vanilla;
  if (name == "full") return Variant::full;
  if (name == "plug") return Variant::plug;
  if (name == "progressive_phase1") return Variant::progressive_phase1;
  if (name == "progressive_phase2") return Variant::progressive_phase2;
  throw std::invalid_argument("unknown variant: " + name);
}

EncoderParams init_encoder(const WordPieceVocab& vocab, int dim, std::uint64_t seed,
                           const std::vector<int>& injected_ids) {
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  const int vocab_size = static_cast<int>(vocab.size());
  std::set<int> injected(injected_ids.begin(), injected_ids.end());
  for (int id : injected) {
    if (id < 0 || id >= vocab_size)
      throw std::invalid_argument("injected id out of vocabulary range: " + std::to_string(id));
  }

  EncoderParams params;
  params.dim = dim;
  params.seed = seed;
  params.injected_ids.assign(injected.begin(), injected.end());
  params.embedding.resize(vocab_size, dim);
  params.projection.resize(dim, dim);

  Rng rng(seed);
  for (int row = 0; row < vocab_size; ++row) {
    const double sigma = injected.count(row) ? 0.2 : 0.02;
    for (int c = 0; c < dim; ++c) params.embedding(row, c) = rng.normal(0.0, sigma);
  }
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      params.projection(r, c) = (r == c ? 1.0 : 0.0) + rng.normal(0.0, 0.01);
    }
  }
  return params;
}

EmbedCache embed_forward(const EncoderParams& params, const std::vector<int>& ids) {
  if (ids.empty()) throw std::invalid_argument("empty input");
  EmbedCache cache;
  cache.ids = ids;
  cache.mean = Eigen::VectorXd::Zero(params.dim);
  for (int id : ids) {
    if (id < 0 || id >= params.vocab_size())
      throw std::out_of_range("token id out of range: " + std::to_string(id));
    cache.mean += params.embedding.row(id).transpose();
  }
  cache.mean /= static_cast<double>(ids.size());
  cache.projected = params.projection * cache.mean;
  cache.norm = cache.projected.norm();
  if (cache.norm < 1e-12) throw std::runtime_error("degenerate embedding");
  cache.unit = cache.projected / cache.norm;
  return cache;
}

Eigen::VectorXd embed_text(const EncoderParams& params, const std::vector<int>& ids) {
  return embed_forward(params, ids).unit;
}

void embed_backward(const EncoderParams& params, const EmbedCache& cache,
                    const Eigen::VectorXd& grad_unit,
                    Eigen::MatrixXd& grad_embedding, Eigen::MatrixXd& grad_projection) {
  // d(v/|v|) backprop: dv = (g - e (e.g)) / |v|
  const Eigen::VectorXd dv =
      (grad_unit - cache.unit * cache.unit.dot(grad_unit)) / cache.norm;
  grad_projection += dv * cache.mean.transpose();
  const Eigen::VectorXd dmean = params.projection.transpose() * dv;
  const double inv_len = 1.0 / static_cast<double>(cache.ids.size());
  for (int id : cache.ids) {
    grad_embedding.row(id) += (dmean * inv_len).transpose();
  }
}

FreezeMask build_freeze_mask(const EncoderParams& params, Variant variant) {
  FreezeMask mask;
  const std::size_t n = static_cast<std::size_t>(params.vocab_size());
  switch (variant) {
    case Variant::vanilla:
    case Variant::full:
    case Variant::progressive_phase2:
      mask.embedding_rows_trainable.assign(n, 1);
      mask.projection_trainable = true;
      break;
    case Variant::plug:
    case Variant::progressive_phase1: {
      if (params.injected_ids.empty()) {
        throw std::invalid_argument(std::string(variant_name(variant)) +
                                    " variant requires non-empty injected_ids");
      }
      mask.embedding_rows_trainable.assign(n, 0);
      for (int id : params.injected_ids)
        mask.embedding_rows_trainable[static_cast<std::size_t>(id)] = 1;
      mask.projection_trainable = (variant == Variant::plug);
      break;
    }
  }
  return mask;
}

namespace {

void write_f32_block(std::ofstream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float v = static_cast<float>(m(r, c));
      out.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
  }
}

void read_f32_block(std::ifstream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      float v = 0.0f;
      in.read(reinterpret_cast<char*>(&v), sizeof(float));
      m(r, c) = static_cast<double>(v);
    }
  }
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  json header{{"vocab_size", params.vocab_size()},
              {"dim", params.dim},
              {"injected_ids", params.injected_ids},
              {"seed", params.seed},
              {"variant", params.variant}};
  out << header.dump() << "\n";
  write_f32_block(out, params.embedding);
  write_f32_block(out, params.projection);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("checkpoint missing header: " + path);
  json header = json::parse(header_line);

  EncoderParams params;
  const int vocab_size = header.at("vocab_size").get<int>();
  params.dim = header.at("dim").get<int>();
  params.injected_ids = header.at("injected_ids").get<std::vector<int>>();
  params.seed = header.at("seed").get<std::uint64_t>();
  params.variant = header.at("variant").get<std::string>();
  params.embedding.resize(vocab_size, params.dim);
  params.projection.resize(params.dim, params.dim);
  read_f32_block(in, params.embedding);
  read_f32_block(in, params.projection);
  if (!in) throw std::runtime_error("checkpoint truncated: " + path);
  return params;
}

}  // namespace chembed

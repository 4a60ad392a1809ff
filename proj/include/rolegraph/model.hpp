#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rolegraph/answer_head.hpp"
#include "rolegraph/embed.hpp"
#include "rolegraph/gcn.hpp"
#include "rolegraph/para_select.hpp"
#include "rolegraph/sf_chain.hpp"

namespace rolegraph {

struct ModelDims {
  std::size_t embed_dim = 300;  // D (GloVe-style word vectors)
  std::size_t d_model = 64;
  std::size_t h_sel = 32;
  std::size_t f1 = 128;
  std::size_t f2 = 64;
  std::size_t rnn_hidden = 64;
  std::size_t head_hidden = 64;
  // Seed of the OOV hashing in VocabEmbeddings; part of the model identity,
  // so it travels with the checkpoint.
  std::uint64_t oov_seed = 0x517c0de5eedULL;
  bool operator==(const ModelDims&) const = default;
};

struct ModelParams {
  ModelDims dims;
  EncoderParams encoder;      // trained jointly (stage 2)
  EncoderParams sel_encoder;  // owned by paragraph selection (stage 1)
  SelectorParams selector;
  GcnParams gcn;
  RnnParams rnn;
  HeadParams heads;
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

// Stable order; drives the optimizer state, checkpoints, and gradient checks.
std::vector<NamedTensor> param_refs(ModelParams& p);

// Tensors trained in stage 2 (everything except the selection stack).
bool is_stage2_tensor(const std::string& name);

// Zero-shaped ModelParams (weights sized per dims).
ModelParams make_params(const ModelDims& dims);
// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] init, per-tensor seeded streams.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace rolegraph

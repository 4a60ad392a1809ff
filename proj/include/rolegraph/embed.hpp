#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rolegraph/data_model.hpp"
#include "rolegraph/tensor.hpp"

namespace rolegraph {

// Fixed word vectors (GloVe-style file) plus deterministic unit-norm hashed
// vectors for out-of-vocabulary tokens.
struct VocabEmbeddings {
  std::size_t dim = 300;
  std::uint64_t oov_seed = 0x9e3779b9ULL;
  std::unordered_map<std::string, std::vector<double>> table;
};

VocabEmbeddings load_word_vectors(const std::string& path, std::uint64_t oov_seed);
inline VocabEmbeddings make_hashed_vocab(std::size_t dim, std::uint64_t oov_seed) {
  return VocabEmbeddings{dim, oov_seed, {}};
}

std::vector<double> lookup(const VocabEmbeddings& v, std::string_view token);
// Arithmetic mean of per-token lookups; throws EmptyPhrase on an empty list.
std::vector<double> embed_phrase(const VocabEmbeddings& v, std::span<const std::string> tokens);

// Deterministic sequence-summary encoder standing in for a pretrained LM.
//
// Summary features over a (left, right) token pair, layout (F = 2D+3):
//   [0,   D)   mean vector of left tokens
//   [D,  2D)   mean vector of right tokens (zero when right is empty)
//   [2D]       fraction of right token occurrences whose token appears in left
//   [2D+1]     len(left)  / (len(left)+len(right))
//   [2D+2]     len(right) / (len(left)+len(right))
// summarize_sequence = tanh(features^T w_sum + b_sum).
//
// Per-token features, layout (F = D+1): [lookup(token); (t+1)/len].
// encode_tokens row t = tanh(features_t^T w_tok + b_tok).
struct EncoderParams {
  Matrix w_sum;  // (2D+3) x d_model
  Matrix b_sum;  // 1 x d_model
  Matrix w_tok;  // (D+1) x d_model
  Matrix b_tok;  // 1 x d_model
};

inline std::size_t summary_feature_dim(std::size_t d) { return 2 * d + 3; }
inline std::size_t token_feature_dim(std::size_t d) { return d + 1; }

std::vector<double> summary_features(const VocabEmbeddings& v, std::span<const std::string> left,
                                     std::span<const std::string> right);
Matrix token_features(const VocabEmbeddings& v, std::span<const std::string> tokens);

std::vector<double> project_summary(const EncoderParams& enc, std::span<const double> features);
Matrix project_tokens(const EncoderParams& enc, const Matrix& features);

std::vector<double> summarize_sequence(const EncoderParams& enc, const VocabEmbeddings& v,
                                       std::span<const std::string> left,
                                       std::span<const std::string> right);
Matrix encode_tokens(const EncoderParams& enc, const VocabEmbeddings& v,
                     std::span<const std::string> tokens);

// Reverse mode for the projections; accumulates into dw/db. The feature
// vectors are constants, so no gradient flows past them.
void project_summary_backward(std::span<const double> features, std::span<const double> out,
                              std::span<const double> dout, Matrix& dw, Matrix& db);
void project_tokens_backward(const Matrix& features, const Matrix& out, const Matrix& dout,
                             Matrix& dw, Matrix& db);

}  // namespace rolegraph

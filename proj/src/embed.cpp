#include "rolegraph/embed.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "rolegraph/rng.hpp"

namespace rolegraph {

namespace {

std::vector<double> oov_vector(std::string_view token, std::uint64_t seed, std::size_t dim) {
  Rng rng(fnv1a64(token) ^ (seed * 0xda942042e4dd58b5ULL + 1));
  std::vector<double> v(dim);
  double norm_sq = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm_sq += x * x;
  }
  if (norm_sq < 1e-24) {
    v[0] = 1.0;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (auto& x : v) x *= inv;
  return v;
}

}  // namespace

VocabEmbeddings load_word_vectors(const std::string& path, std::uint64_t oov_seed) {
  std::ifstream in(path);
  require(in.good(), Errc::config_error, "cannot open word-vector file: " + path);
  VocabEmbeddings v;
  v.oov_seed = oov_seed;
  v.dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> vec;
    double x;
    while (ss >> x) vec.push_back(x);
    require(!token.empty() && !vec.empty(), Errc::malformed_record,
            "word-vector line needs a token and at least one float");
    if (v.dim == 0) v.dim = vec.size();
    require(vec.size() == v.dim, Errc::malformed_record,
            "inconsistent vector length for token " + token);
    v.table.emplace(std::move(token), std::move(vec));
  }
  require(v.dim > 0, Errc::malformed_record, "word-vector file is empty: " + path);
  return v;
}

std::vector<double> lookup(const VocabEmbeddings& v, std::string_view token) {
  auto it = v.table.find(std::string(token));
  if (it != v.table.end()) return it->second;
  return oov_vector(token, v.oov_seed, v.dim);
}

std::vector<double> embed_phrase(const VocabEmbeddings& v, std::span<const std::string> tokens) {
  require(!tokens.empty(), Errc::empty_phrase, "embed_phrase: empty token list");
  std::vector<double> mean(v.dim, 0.0);
  for (const auto& t : tokens) {
    const auto vec = lookup(v, t);
    kernels::axpy(1.0, vec.data(), mean.data(), v.dim);
  }
  kernels::scale(1.0 / static_cast<double>(tokens.size()), mean.data(), v.dim);
  return mean;
}

std::vector<double> summary_features(const VocabEmbeddings& v, std::span<const std::string> left,
                                     std::span<const std::string> right) {
  require(!left.empty(), Errc::empty_left_sequence, "summarize_sequence: empty left sequence");
  const std::size_t d = v.dim;
  std::vector<double> phi(summary_feature_dim(d), 0.0);

  const auto mean_left = embed_phrase(v, left);
  std::copy(mean_left.begin(), mean_left.end(), phi.begin());

  if (!right.empty()) {
    const auto mean_right = embed_phrase(v, right);
    std::copy(mean_right.begin(), mean_right.end(), phi.begin() + static_cast<long>(d));
    std::unordered_set<std::string_view> left_set(left.begin(), left.end());
    std::size_t hits = 0;
    for (const auto& t : right)
      if (left_set.count(t)) ++hits;
    phi[2 * d] = static_cast<double>(hits) / static_cast<double>(right.size());
  }
  const double total = static_cast<double>(left.size() + right.size());
  phi[2 * d + 1] = static_cast<double>(left.size()) / total;
  phi[2 * d + 2] = static_cast<double>(right.size()) / total;
  return phi;
}

Matrix token_features(const VocabEmbeddings& v, std::span<const std::string> tokens) {
  require(!tokens.empty(), Errc::empty_sequence, "encode_tokens: empty token list");
  const std::size_t d = v.dim;
  Matrix f(tokens.size(), token_feature_dim(d));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto vec = lookup(v, tokens[t]);
    std::copy(vec.begin(), vec.end(), f.row(t));
    f.at(t, d) = static_cast<double>(t + 1) / static_cast<double>(tokens.size());
  }
  return f;
}

std::vector<double> project_summary(const EncoderParams& enc, std::span<const double> features) {
  require(features.size() == enc.w_sum.rows, Errc::shape_mismatch,
          "project_summary: feature length does not match w_sum");
  std::vector<double> out(enc.w_sum.cols);
  kernels::matmul_nn(features.data(), enc.w_sum.data.data(), out.data(), 1, enc.w_sum.rows,
                     enc.w_sum.cols);
  kernels::axpy(1.0, enc.b_sum.data.data(), out.data(), out.size());
  tanh_inplace(out);
  return out;
}

Matrix project_tokens(const EncoderParams& enc, const Matrix& features) {
  require(features.cols == enc.w_tok.rows, Errc::shape_mismatch,
          "project_tokens: feature width does not match w_tok");
  Matrix out = matmul(features, enc.w_tok);
  for (std::size_t r = 0; r < out.rows; ++r)
    kernels::axpy(1.0, enc.b_tok.data.data(), out.row(r), out.cols);
  tanh_inplace(out.data);
  return out;
}

std::vector<double> summarize_sequence(const EncoderParams& enc, const VocabEmbeddings& v,
                                       std::span<const std::string> left,
                                       std::span<const std::string> right) {
  return project_summary(enc, summary_features(v, left, right));
}

Matrix encode_tokens(const EncoderParams& enc, const VocabEmbeddings& v,
                     std::span<const std::string> tokens) {
  return project_tokens(enc, token_features(v, tokens));
}

void project_summary_backward(std::span<const double> features, std::span<const double> out,
                              std::span<const double> dout, Matrix& dw, Matrix& db) {
  // d tanh(z) = (1 - out^2) dout
  std::vector<double> dz(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) dz[i] = dout[i] * (1.0 - out[i] * out[i]);
  kernels::axpy(1.0, dz.data(), db.data.data(), dz.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    kernels::axpy(features[i], dz.data(), dw.row(i), dz.size());
}

void project_tokens_backward(const Matrix& features, const Matrix& out, const Matrix& dout,
                             Matrix& dw, Matrix& db) {
  require(out.same_shape(dout), Errc::shape_mismatch, "project_tokens_backward: shape mismatch");
  Matrix dz(out.rows, out.cols);
  for (std::size_t i = 0; i < out.size(); ++i)
    dz.data[i] = dout.data[i] * (1.0 - out.data[i] * out.data[i]);
  for (std::size_t r = 0; r < dz.rows; ++r)
    kernels::axpy(1.0, dz.row(r), db.data.data(), dz.cols);
  // dw += features^T dz
  Matrix dw_add = matmul_tn(features, dz);
  add_inplace(dw, dw_add);
}

}  // namespace rolegraph

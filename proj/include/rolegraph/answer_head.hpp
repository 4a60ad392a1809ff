#pragma once

#include "rolegraph/graph_build.hpp"
#include "rolegraph/tensor.hpp"

namespace rolegraph {

// Two fully connected layers with a relu hidden activation.
struct Mlp2 {
  Matrix w1;  // in x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x out
  Matrix b2;  // 1 x out
};

struct HeadParams {
  Mlp2 type_mlp;   // d_model -> 3 (yes / no / span)
  Mlp2 start_mlp;  // (d_model + F2) -> 1
  Mlp2 end_mlp;    // (d_model + F2) -> 1
};

// A (sentence ref, within-sentence index) per context-stream token.
struct StreamToken {
  SentenceRef ref;
  int index = 0;
};

// The argument node each token reads its G_Arg row from: the argument whose
// occurrence span covers the token, shortest span first, earliest start on
// ties; -1 when no span covers it.
std::vector<int> token_arg_map(const HeteroGraph& g, std::span<const StreamToken> tokens);

std::vector<double> mlp2_forward(const Mlp2& m, std::span<const double> in);

// softmax over the 3-way type MLP.
std::vector<double> classify_type(const HeadParams& hp, std::span<const double> summary);

// Per-token start/end logits over [token rep ; arg row].
std::pair<std::vector<double>, std::vector<double>> span_logits(const HeadParams& hp,
                                                                const Matrix& token_reps,
                                                                const Matrix& arg_rows);

// argmax over i <= j <= i+max_len-1 of start[i]+end[j]; ties take the
// smallest i, then smallest j.
std::pair<int, int> decode_span(std::span<const double> start, std::span<const double> end,
                                int max_len);

struct AnswerLossResult {
  double l_type = 0.0;
  double l_ans = 0.0;
};

// gold_type indexes {0: yes, 1: no, 2: span}; the span terms apply only when
// gold_type is span.
AnswerLossResult answer_losses(std::span<const double> type_dist, int gold_type,
                               std::span<const double> start_logits,
                               std::span<const double> end_logits, int gold_start, int gold_end);

// --- training-side caches and reverse passes ---

struct Mlp2Forward {
  std::vector<double> in, hidden_pre, hidden, out;
};
Mlp2Forward mlp2_forward_cached(const Mlp2& m, std::span<const double> in);

struct Mlp2Grads {
  Matrix* dw1;
  Matrix* db1;
  Matrix* dw2;
  Matrix* db2;
};
// Accumulates parameter gradients through the pointers; returns d(in).
std::vector<double> mlp2_backward(const Mlp2& m, const Mlp2Forward& fwd,
                                  std::span<const double> dout, const Mlp2Grads& grads);

}  // namespace rolegraph

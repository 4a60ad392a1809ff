#pragma once

#include "rolegraph/data_model.hpp"
#include "rolegraph/embed.hpp"
#include "rolegraph/tensor.hpp"

namespace rolegraph {

// Two-layer relevance MLP: score = w_b . relu(w_a^T summary + b_a) + b_b.
struct SelectorParams {
  Matrix w_a;  // d_model x h_sel
  Matrix b_a;  // 1 x h_sel
  Matrix w_b;  // h_sel x 1
  Matrix b_b;  // 1 x 1
};

// Title and sentences flattened into one right-hand sequence.
TokenList paragraph_tokens(const Paragraph& p);

double score_from_summary(const SelectorParams& sel, std::span<const double> summary);
double score_paragraph(const SelectorParams& sel, const EncoderParams& enc,
                       const VocabEmbeddings& v, const TokenList& question, const Paragraph& p);

struct SelectionResult {
  int first = -1;
  int second = -1;
  TokenList q_new;  // question ++ first-selected paragraph tokens, capped
};

// Round 1 argmax over all paragraphs, round 2 argmax over the rest scored
// against q_new; ties break to the smallest index.
SelectionResult select_two_rounds(const SelectorParams& sel, const EncoderParams& enc,
                                  const VocabEmbeddings& v, const QAInstance& inst,
                                  std::size_t max_qnew_tokens);

// Mean binary cross-entropy of sigmoid(scores) against a 0/1 mask.
double binary_cross_entropy(std::span<const double> scores, std::span<const int> mask);
// The spec's selector loss: requires exactly two gold paragraphs in the mask.
double selector_loss(std::span<const double> scores, std::span<const int> mask);

// Cached per-paragraph forward state for stage-1 training.
struct SelectorForward {
  std::vector<double> features;  // summary features (constant)
  std::vector<double> summary;   // tanh output
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  double score = 0.0;
};

SelectorForward selector_forward(const SelectorParams& sel, const EncoderParams& enc,
                                 std::span<const double> features);

struct SelectorGrads {
  Matrix* dw_a;
  Matrix* db_a;
  Matrix* dw_b;
  Matrix* db_b;    // selector MLP
  Matrix* dw_sum;
  Matrix* db_sum;  // selection encoder summary projection
};

// Accumulates gradients of (dscore * score) through the pointers.
void selector_backward(const SelectorParams& sel, const SelectorForward& fwd, double dscore,
                       const SelectorGrads& grads);

}  // namespace rolegraph

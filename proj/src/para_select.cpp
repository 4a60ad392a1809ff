#include "rolegraph/para_select.hpp"

#include <cmath>

namespace rolegraph {

TokenList paragraph_tokens(const Paragraph& p) {
  TokenList out = p.title;
  for (const auto& s : p.sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

double score_from_summary(const SelectorParams& sel, std::span<const double> summary) {
  require(summary.size() == sel.w_a.rows, Errc::shape_mismatch,
          "selector: summary length does not match w_a");
  std::vector<double> hidden(sel.w_a.cols);
  kernels::matmul_nn(summary.data(), sel.w_a.data.data(), hidden.data(), 1, sel.w_a.rows,
                     sel.w_a.cols);
  kernels::axpy(1.0, sel.b_a.data.data(), hidden.data(), hidden.size());
  std::vector<double> act(hidden.size());
  kernels::relu(hidden.data(), act.data(), hidden.size());
  double score = sel.b_b.at(0, 0);
  score += kernels::dot(act.data(), sel.w_b.data.data(), act.size());
  return score;
}

double score_paragraph(const SelectorParams& sel, const EncoderParams& enc,
                       const VocabEmbeddings& v, const TokenList& question, const Paragraph& p) {
  const auto summary = summarize_sequence(enc, v, question, paragraph_tokens(p));
  return score_from_summary(sel, summary);
}

SelectionResult select_two_rounds(const SelectorParams& sel, const EncoderParams& enc,
                                  const VocabEmbeddings& v, const QAInstance& inst,
                                  std::size_t max_qnew_tokens) {
  require(inst.contexts.size() >= 2, Errc::too_few_paragraphs,
          inst.id + ": need at least two candidate paragraphs");
  SelectionResult res;

  double best = 0.0;
  for (std::size_t i = 0; i < inst.contexts.size(); ++i) {
    const double s = score_paragraph(sel, enc, v, inst.question, inst.contexts[i]);
    if (res.first < 0 || s > best) {
      res.first = static_cast<int>(i);
      best = s;
    }
  }

  res.q_new = inst.question;
  const TokenList chosen = paragraph_tokens(inst.contexts[static_cast<std::size_t>(res.first)]);
  res.q_new.insert(res.q_new.end(), chosen.begin(), chosen.end());
  if (res.q_new.size() > max_qnew_tokens) res.q_new.resize(max_qnew_tokens);

  best = 0.0;
  for (std::size_t i = 0; i < inst.contexts.size(); ++i) {
    if (static_cast<int>(i) == res.first) continue;
    const double s = score_paragraph(sel, enc, v, res.q_new, inst.contexts[i]);
    if (res.second < 0 || s > best) {
      res.second = static_cast<int>(i);
      best = s;
    }
  }
  return res;
}

double binary_cross_entropy(std::span<const double> scores, std::span<const int> mask) {
  require(scores.size() == mask.size() && !scores.empty(), Errc::bad_mask,
          "scores and mask must be equal-length and non-empty");
  // -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s)
  const auto softplus = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    loss += mask[i] ? softplus(-scores[i]) : softplus(scores[i]);
  return loss / static_cast<double>(scores.size());
}

double selector_loss(std::span<const double> scores, std::span<const int> mask) {
  require(scores.size() >= 2, Errc::bad_mask, "selector_loss: need at least two paragraphs");
  int ones = 0;
  for (int m : mask) {
    require(m == 0 || m == 1, Errc::bad_mask, "selector_loss: mask entries must be 0/1");
    ones += m;
  }
  require(ones == 2, Errc::bad_mask, "selector_loss: mask must contain exactly two gold paragraphs");
  return binary_cross_entropy(scores, mask);
}

SelectorForward selector_forward(const SelectorParams& sel, const EncoderParams& enc,
                                 std::span<const double> features) {
  SelectorForward fwd;
  fwd.features.assign(features.begin(), features.end());
  fwd.summary = project_summary(enc, features);
  fwd.hidden_pre.resize(sel.w_a.cols);
  kernels::matmul_nn(fwd.summary.data(), sel.w_a.data.data(), fwd.hidden_pre.data(), 1,
                     sel.w_a.rows, sel.w_a.cols);
  kernels::axpy(1.0, sel.b_a.data.data(), fwd.hidden_pre.data(), fwd.hidden_pre.size());
  fwd.hidden.resize(fwd.hidden_pre.size());
  kernels::relu(fwd.hidden_pre.data(), fwd.hidden.data(), fwd.hidden_pre.size());
  fwd.score = sel.b_b.at(0, 0) + kernels::dot(fwd.hidden.data(), sel.w_b.data.data(), fwd.hidden.size());
  return fwd;
}

void selector_backward(const SelectorParams& sel, const SelectorForward& fwd, double dscore,
                       const SelectorGrads& grads) {
  grads.db_b->at(0, 0) += dscore;
  kernels::axpy(dscore, fwd.hidden.data(), grads.dw_b->data.data(), fwd.hidden.size());

  std::vector<double> dhidden(fwd.hidden.size(), 0.0);
  kernels::axpy(dscore, sel.w_b.data.data(), dhidden.data(), dhidden.size());
  std::vector<double> dpre(dhidden.size());
  kernels::relu_mask_mul(fwd.hidden_pre.data(), dhidden.data(), dpre.data(), dhidden.size());

  kernels::axpy(1.0, dpre.data(), grads.db_a->data.data(), dpre.size());
  for (std::size_t i = 0; i < fwd.summary.size(); ++i)
    kernels::axpy(fwd.summary[i], dpre.data(), grads.dw_a->row(i), dpre.size());

  std::vector<double> dsummary(fwd.summary.size(), 0.0);
  kernels::matmul_nt(dpre.data(), sel.w_a.data.data(), dsummary.data(), 1, dpre.size(),
                     fwd.summary.size());
  project_summary_backward(fwd.features, fwd.summary, dsummary, *grads.dw_sum, *grads.db_sum);
}

}  // namespace rolegraph

#include "rolegraph/answer_head.hpp"

#include <cmath>

namespace rolegraph {

std::vector<int> token_arg_map(const HeteroGraph& g, std::span<const StreamToken> tokens) {
  std::vector<int> map(tokens.size(), -1);
  std::vector<int> best_len(tokens.size(), 0);
  std::vector<int> best_start(tokens.size(), 0);

  for (std::size_t a = g.doc_count; a < g.nodes.size(); ++a) {
    for (const auto& occ : g.nodes[a].occurrences) {
      const int span_len = occ.end - occ.start;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t].ref != occ.ref) continue;
        if (tokens[t].index < occ.start || tokens[t].index >= occ.end) continue;
        const bool take = map[t] < 0 || span_len < best_len[t] ||
                          (span_len == best_len[t] && occ.start < best_start[t]);
        if (take) {
          map[t] = static_cast<int>(a);
          best_len[t] = span_len;
          best_start[t] = occ.start;
        }
      }
    }
  }
  return map;
}

Mlp2Forward mlp2_forward_cached(const Mlp2& m, std::span<const double> in) {
  require(in.size() == m.w1.rows, Errc::shape_mismatch, "mlp2: input dimension mismatch");
  Mlp2Forward fwd;
  fwd.in.assign(in.begin(), in.end());
  fwd.hidden_pre.resize(m.w1.cols);
  kernels::matmul_nn(in.data(), m.w1.data.data(), fwd.hidden_pre.data(), 1, m.w1.rows, m.w1.cols);
  kernels::axpy(1.0, m.b1.data.data(), fwd.hidden_pre.data(), fwd.hidden_pre.size());
  fwd.hidden.resize(fwd.hidden_pre.size());
  kernels::relu(fwd.hidden_pre.data(), fwd.hidden.data(), fwd.hidden_pre.size());
  fwd.out.resize(m.w2.cols);
  kernels::matmul_nn(fwd.hidden.data(), m.w2.data.data(), fwd.out.data(), 1, m.w2.rows, m.w2.cols);
  kernels::axpy(1.0, m.b2.data.data(), fwd.out.data(), fwd.out.size());
  return fwd;
}

std::vector<double> mlp2_forward(const Mlp2& m, std::span<const double> in) {
  return mlp2_forward_cached(m, in).out;
}

std::vector<double> mlp2_backward(const Mlp2& m, const Mlp2Forward& fwd,
                                  std::span<const double> dout, const Mlp2Grads& grads) {
  kernels::axpy(1.0, dout.data(), grads.db2->data.data(), dout.size());
  for (std::size_t i = 0; i < fwd.hidden.size(); ++i)
    kernels::axpy(fwd.hidden[i], dout.data(), grads.dw2->row(i), dout.size());

  std::vector<double> dhidden(fwd.hidden.size(), 0.0);
  kernels::matmul_nt(dout.data(), m.w2.data.data(), dhidden.data(), 1, dout.size(),
                     fwd.hidden.size());
  std::vector<double> dpre(dhidden.size());
  kernels::relu_mask_mul(fwd.hidden_pre.data(), dhidden.data(), dpre.data(), dhidden.size());

  kernels::axpy(1.0, dpre.data(), grads.db1->data.data(), dpre.size());
  for (std::size_t i = 0; i < fwd.in.size(); ++i)
    kernels::axpy(fwd.in[i], dpre.data(), grads.dw1->row(i), dpre.size());

  std::vector<double> din(fwd.in.size(), 0.0);
  kernels::matmul_nt(dpre.data(), m.w1.data.data(), din.data(), 1, dpre.size(), fwd.in.size());
  return din;
}

std::vector<double> classify_type(const HeadParams& hp, std::span<const double> summary) {
  const auto logits = mlp2_forward(hp.type_mlp, summary);
  return softmax(logits);
}

std::pair<std::vector<double>, std::vector<double>> span_logits(const HeadParams& hp,
                                                                const Matrix& token_reps,
                                                                const Matrix& arg_rows) {
  require(token_reps.rows == arg_rows.rows && token_reps.rows >= 1, Errc::length_mismatch,
          "span_logits: token and argument row counts differ");
  const std::size_t n = token_reps.rows;
  std::vector<double> start(n), end(n);
  std::vector<double> in(token_reps.cols + arg_rows.cols);
  for (std::size_t t = 0; t < n; ++t) {
    std::copy(token_reps.row(t), token_reps.row(t) + token_reps.cols, in.begin());
    std::copy(arg_rows.row(t), arg_rows.row(t) + arg_rows.cols,
              in.begin() + static_cast<long>(token_reps.cols));
    start[t] = mlp2_forward(hp.start_mlp, in)[0];
    end[t] = mlp2_forward(hp.end_mlp, in)[0];
  }
  return {start, end};
}

std::pair<int, int> decode_span(std::span<const double> start, std::span<const double> end,
                                int max_len) {
  require(!start.empty() && start.size() == end.size(), Errc::length_mismatch,
          "decode_span: start/end lengths differ or empty");
  require(max_len >= 1, Errc::config_error, "decode_span: max_len must be >= 1");
  int best_i = 0, best_j = 0;
  double best = start[0] + end[0];
  const int n = static_cast<int>(start.size());
  for (int i = 0; i < n; ++i) {
    const int j_hi = std::min(n - 1, i + max_len - 1);
    for (int j = i; j <= j_hi; ++j) {
      const double s = start[static_cast<std::size_t>(i)] + end[static_cast<std::size_t>(j)];
      if (s > best) {
        best = s;
        best_i = i;
        best_j = j;
      }
    }
  }
  return {best_i, best_j};
}

AnswerLossResult answer_losses(std::span<const double> type_dist, int gold_type,
                               std::span<const double> start_logits,
                               std::span<const double> end_logits, int gold_start, int gold_end) {
  require(type_dist.size() == 3 && gold_type >= 0 && gold_type < 3, Errc::shape_mismatch,
          "answer_losses: type distribution must have 3 entries");
  AnswerLossResult out;
  out.l_type = -std::log(std::max(type_dist[static_cast<std::size_t>(gold_type)], 1e-300));
  if (gold_type != 2) return out;

  const int n = static_cast<int>(start_logits.size());
  require(gold_start >= 0 && gold_end >= gold_start && gold_end < n, Errc::gold_span_out_of_range,
          "answer_losses: gold span outside token range");
  const auto ls = log_softmax(start_logits);
  const auto le = log_softmax(end_logits);
  out.l_ans = -ls[static_cast<std::size_t>(gold_start)] - le[static_cast<std::size_t>(gold_end)];
  return out;
}

}  // namespace rolegraph

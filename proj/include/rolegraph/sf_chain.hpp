#pragma once

#include <functional>
#include <optional>

#include "rolegraph/graph_build.hpp"
#include "rolegraph/tensor.hpp"

namespace rolegraph {

struct RnnParams {
  Matrix w;    // h x h
  Matrix u;    // h x d_in
  Matrix v;    // 1 x h
  Matrix b_h;  // 1 x h
  Matrix b_o;  // 1 x 1
};

// h_t = tanh(W h_prev + U x + b_h); o_t = V h_t + b_o
struct RnnStepOut {
  std::vector<double> h;
  double o = 0.0;
};
RnnStepOut rnn_step(const RnnParams& p, std::span<const double> h_prev, std::span<const double> x);

// Candidate representation: [G_S row of the node ; summary(q, node tokens)].
std::vector<double> candidate_rep(std::span<const double> g_s_row,
                                  std::span<const double> summary);

struct ReasoningPath {
  std::vector<int> nodes;  // starts at the question node
  std::vector<double> step_logits;
  double score = 0.0;  // sum of per-step frontier log-probabilities
};

// Candidate representation provider keyed by doc-node index.
using RepProvider = std::function<std::vector<double>(int)>;

// Beam over doc_adj starting at the question node with h_0 = 0. Per-step
// probabilities are softmaxed over each entry's unvisited frontier; paths end
// at length max_hops+1 or when no unvisited neighbour remains. Ties break to
// the lexicographically smallest node sequence. An isolated question node
// yields the singleton path.
std::vector<ReasoningPath> beam_search(const HeteroGraph& g, const RepProvider& reps,
                                       const RnnParams& p, int beam_width, int max_hops);

// Sentence nodes of the path mapped to (title, sentence index); question and
// title nodes are excluded.
SfSet sf_from_path(const HeteroGraph& g, const ReasoningPath& path);

// Ordering of the gold SF sentence nodes into a q -> n1 -> ... -> nk chain in
// doc_adj, length capped at max_hops; smallest such sequence if several.
std::optional<std::vector<int>> find_gold_chain(const HeteroGraph& g, const SfSet& gold_sf,
                                                int max_hops);

// Teacher-forced cross-entropy along the gold chain (softmax over each step's
// frontier). Throws GoldPathDisconnected when the chain cannot be walked.
double sf_loss(const HeteroGraph& g, const RepProvider& reps, const RnnParams& p,
               const std::vector<int>& gold_chain);

struct SfGrads {
  Matrix dw, du, dv, db_h, db_o;
  // Gradient w.r.t. each candidate rep consumed during the walk, keyed by
  // (step, node); summed per node for downstream use.
  std::map<int, std::vector<double>> dreps;
};

// Forward + reverse of sf_loss; gradients accumulate into `grads`.
double sf_loss_backward(const HeteroGraph& g, const RepProvider& reps, const RnnParams& p,
                        const std::vector<int>& gold_chain, SfGrads& grads);

}  // namespace rolegraph

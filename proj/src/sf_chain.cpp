#include "rolegraph/sf_chain.hpp"

#include <algorithm>
#include <cmath>

namespace rolegraph {

RnnStepOut rnn_step(const RnnParams& p, std::span<const double> h_prev, std::span<const double> x) {
  const std::size_t h = p.w.rows;
  require(p.w.cols == h && p.u.rows == h && p.v.cols == h && p.b_h.cols == h && h_prev.size() == h,
          Errc::shape_mismatch, "rnn_step: hidden dimensions do not conform");
  require(x.size() == p.u.cols, Errc::shape_mismatch, "rnn_step: input dimension mismatch");

  RnnStepOut out;
  out.h.assign(p.b_h.data.begin(), p.b_h.data.end());
  // W h_prev + U x
  for (std::size_t i = 0; i < h; ++i) {
    out.h[i] += kernels::dot(p.w.row(i), h_prev.data(), h);
    out.h[i] += kernels::dot(p.u.row(i), x.data(), x.size());
  }
  tanh_inplace(out.h);
  out.o = p.b_o.at(0, 0) + kernels::dot(p.v.data.data(), out.h.data(), h);
  return out;
}

std::vector<double> candidate_rep(std::span<const double> g_s_row,
                                  std::span<const double> summary) {
  std::vector<double> rep;
  rep.reserve(g_s_row.size() + summary.size());
  rep.insert(rep.end(), g_s_row.begin(), g_s_row.end());
  rep.insert(rep.end(), summary.begin(), summary.end());
  return rep;
}

namespace {

struct BeamEntry {
  std::vector<int> nodes;
  std::vector<double> step_logits;
  double score = 0.0;
  std::vector<double> hidden;
};

std::vector<int> frontier_of(const HeteroGraph& g, const std::vector<int>& visited_path) {
  const int cur = visited_path.back();
  std::vector<int> frontier;
  for (int nb : g.doc_adj[static_cast<std::size_t>(cur)]) {
    if (std::find(visited_path.begin(), visited_path.end(), nb) == visited_path.end())
      frontier.push_back(nb);
  }
  return frontier;
}

bool better_path(const ReasoningPath& a, const ReasoningPath& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.nodes < b.nodes;
}

}  // namespace

std::vector<ReasoningPath> beam_search(const HeteroGraph& g, const RepProvider& reps,
                                       const RnnParams& p, int beam_width, int max_hops) {
  require(beam_width >= 1 && max_hops >= 1, Errc::config_error,
          "beam_search: beam_width and max_hops must be >= 1");
  const std::size_t h = p.w.rows;

  std::vector<BeamEntry> beam;
  beam.push_back({{0}, {}, 0.0, std::vector<double>(h, 0.0)});
  std::vector<ReasoningPath> done;

  while (!beam.empty()) {
    std::vector<BeamEntry> extensions;
    for (const auto& entry : beam) {
      if (static_cast<int>(entry.nodes.size()) >= max_hops + 1) {
        done.push_back({entry.nodes, entry.step_logits, entry.score});
        continue;
      }
      const auto frontier = frontier_of(g, entry.nodes);
      if (frontier.empty()) {
        done.push_back({entry.nodes, entry.step_logits, entry.score});
        continue;
      }
      std::vector<RnnStepOut> steps;
      std::vector<double> logits;
      steps.reserve(frontier.size());
      for (int cand : frontier) {
        steps.push_back(rnn_step(p, entry.hidden, reps(cand)));
        logits.push_back(steps.back().o);
      }
      const auto logp = log_softmax(logits);
      for (std::size_t c = 0; c < frontier.size(); ++c) {
        BeamEntry ext = entry;
        ext.nodes.push_back(frontier[c]);
        ext.step_logits.push_back(logits[c]);
        ext.score += logp[c];
        ext.hidden = std::move(steps[c].h);
        extensions.push_back(std::move(ext));
      }
    }
    if (extensions.empty()) break;
    std::sort(extensions.begin(), extensions.end(), [](const BeamEntry& a, const BeamEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.nodes < b.nodes;
    });
    if (static_cast<int>(extensions.size()) > beam_width)
      extensions.resize(static_cast<std::size_t>(beam_width));
    beam = std::move(extensions);
  }

  std::sort(done.begin(), done.end(), better_path);
  return done;
}

SfSet sf_from_path(const HeteroGraph& g, const ReasoningPath& path) {
  SfSet out;
  for (int node : path.nodes) {
    const Node& n = g.nodes[static_cast<std::size_t>(node)];
    if (n.kind != NodeKind::sentence) continue;
    out.emplace(g.paragraph_titles[static_cast<std::size_t>(n.paragraph)], n.sentence);
  }
  return out;
}

std::optional<std::vector<int>> find_gold_chain(const HeteroGraph& g, const SfSet& gold_sf,
                                                int max_hops) {
  std::vector<int> gold_nodes;
  for (std::size_t i = 1; i < g.doc_count; ++i) {
    const Node& n = g.nodes[i];
    if (n.kind != NodeKind::sentence) continue;
    if (gold_sf.count({g.paragraph_titles[static_cast<std::size_t>(n.paragraph)], n.sentence}))
      gold_nodes.push_back(static_cast<int>(i));
  }
  if (gold_nodes.size() != gold_sf.size()) return std::nullopt;
  if (static_cast<int>(gold_nodes.size()) > max_hops) return std::nullopt;

  const auto adjacent = [&](int a, int b) {
    const auto& nb = g.doc_adj[static_cast<std::size_t>(a)];
    return std::binary_search(nb.begin(), nb.end(), b);
  };

  std::sort(gold_nodes.begin(), gold_nodes.end());
  // Gold sets are tiny (HotpotQA chains); try orderings lexicographically so
  // the first valid one is the smallest.
  do {
    int prev = 0;
    bool ok = true;
    for (int node : gold_nodes) {
      if (!adjacent(prev, node)) {
        ok = false;
        break;
      }
      prev = node;
    }
    if (ok) return gold_nodes;
  } while (std::next_permutation(gold_nodes.begin(), gold_nodes.end()));
  return std::nullopt;
}

double sf_loss(const HeteroGraph& g, const RepProvider& reps, const RnnParams& p,
               const std::vector<int>& gold_chain) {
  SfGrads scratch;
  scratch.dw = p.w.like_zeros();
  scratch.du = p.u.like_zeros();
  scratch.dv = p.v.like_zeros();
  scratch.db_h = p.b_h.like_zeros();
  scratch.db_o = p.b_o.like_zeros();
  return sf_loss_backward(g, reps, p, gold_chain, scratch);
}

double sf_loss_backward(const HeteroGraph& g, const RepProvider& reps, const RnnParams& p,
                        const std::vector<int>& gold_chain, SfGrads& grads) {
  const std::size_t h = p.w.rows;

  struct StepCache {
    std::vector<int> frontier;
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> hs;
    std::vector<double> probs;
    std::size_t gold_pos = 0;
    std::vector<double> h_prev;
  };
  std::vector<StepCache> steps;

  std::vector<int> path{0};
  std::vector<double> hidden(h, 0.0);
  double loss = 0.0;

  for (int gold : gold_chain) {
    StepCache cache;
    cache.h_prev = hidden;
    cache.frontier = frontier_of(g, path);
    auto pos = std::find(cache.frontier.begin(), cache.frontier.end(), gold);
    require(pos != cache.frontier.end(), Errc::gold_path_disconnected,
            "gold supporting-fact chain is not connected in the graph");
    cache.gold_pos = static_cast<std::size_t>(pos - cache.frontier.begin());

    std::vector<double> logits;
    for (int cand : cache.frontier) {
      cache.xs.push_back(reps(cand));
      auto step = rnn_step(p, hidden, cache.xs.back());
      logits.push_back(step.o);
      cache.hs.push_back(std::move(step.h));
    }
    const auto logp = log_softmax(logits);
    loss -= logp[cache.gold_pos];
    cache.probs = softmax(logits);

    hidden = cache.hs[cache.gold_pos];
    path.push_back(gold);
    steps.push_back(std::move(cache));
  }

  // Backward through time along the gold chain.
  std::vector<double> dh_next(h, 0.0);
  for (std::size_t t = steps.size(); t-- > 0;) {
    const StepCache& cache = steps[t];
    std::vector<double> dh_prev(h, 0.0);
    for (std::size_t c = 0; c < cache.frontier.size(); ++c) {
      const double dlogit = cache.probs[c] - (c == cache.gold_pos ? 1.0 : 0.0);
      // o = V h + b_o
      grads.db_o.at(0, 0) += dlogit;
      kernels::axpy(dlogit, cache.hs[c].data(), grads.dv.data.data(), h);
      std::vector<double> dh(h, 0.0);
      kernels::axpy(dlogit, p.v.data.data(), dh.data(), h);
      if (c == cache.gold_pos) kernels::axpy(1.0, dh_next.data(), dh.data(), h);

      // h = tanh(W h_prev + U x + b_h)
      std::vector<double> dz(h);
      for (std::size_t i = 0; i < h; ++i)
        dz[i] = dh[i] * (1.0 - cache.hs[c][i] * cache.hs[c][i]);

      kernels::axpy(1.0, dz.data(), grads.db_h.data.data(), h);
      for (std::size_t i = 0; i < h; ++i) {
        kernels::axpy(dz[i], cache.h_prev.data(), grads.dw.row(i), h);
        kernels::axpy(dz[i], cache.xs[c].data(), grads.du.row(i), cache.xs[c].size());
      }
      // dx += U^T dz (the same node can sit in several frontiers)
      const std::size_t d_in = cache.xs[c].size();
      std::vector<double> dx_add(d_in);
      kernels::matmul_tn(p.u.data.data(), dz.data(), dx_add.data(), d_in, h, 1);
      auto& dx = grads.dreps[cache.frontier[c]];
      if (dx.empty()) dx.assign(d_in, 0.0);
      kernels::axpy(1.0, dx_add.data(), dx.data(), d_in);
      // dh_prev += W^T dz
      for (std::size_t i = 0; i < h; ++i) kernels::axpy(dz[i], p.w.row(i), dh_prev.data(), h);
    }
    dh_next = std::move(dh_prev);
  }
  return loss;
}

}  // namespace rolegraph

#include "rolegraph/train_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rolegraph/rng.hpp"

namespace rolegraph {

double joint_loss(double l_ans, double l_sf, double l_type, const Hyper& h) {
  require(std::isfinite(l_ans) && std::isfinite(l_sf) && std::isfinite(l_type) && l_ans >= 0 &&
              l_sf >= 0 && l_type >= 0,
          Errc::non_finite_loss, "joint_loss: component losses must be finite and non-negative");
  return h.lambda1 * l_ans + h.lambda2 * l_sf + h.lambda3 * l_type;
}

AdamState make_adam_state(ModelParams& params) {
  AdamState st;
  for (auto& [name, tensor] : param_refs(params)) {
    st.m.push_back(tensor->like_zeros());
    st.v.push_back(tensor->like_zeros());
  }
  return st;
}

void adam_step(ModelParams& params, ModelParams& grads, AdamState& st, const Hyper& h) {
  auto pr = param_refs(params);
  auto gr = param_refs(grads);
  require(st.m.size() == pr.size(), Errc::shape_mismatch, "adam state misaligned with parameters");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < pr.size(); ++i) {
    Matrix& theta = *pr[i].tensor;
    const Matrix& g = *gr[i].tensor;
    require(theta.same_shape(g) && theta.same_shape(st.m[i]), Errc::shape_mismatch,
            "adam_step: gradient shape mismatch at " + pr[i].name);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      double& m = st.m[i].data[k];
      double& v = st.v[i].data[k];
      const double gk = g.data[k];
      m = h.beta1 * m + (1.0 - h.beta1) * gk;
      v = h.beta2 * v + (1.0 - h.beta2) * gk * gk;
      theta.data[k] -= h.lr * (m / bc1) / (std::sqrt(v / bc2) + h.eps_adam);
    }
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

std::string normalize_answer(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned += static_cast<char>(std::tolower(c));
  }
  std::istringstream ss(cleaned);
  std::string tok, out;
  while (ss >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

AnswerScore answer_metrics(const std::string& pred, const std::string& gold) {
  const auto pt = split_ws(normalize_answer(pred));
  const auto gt = split_ws(normalize_answer(gold));
  AnswerScore s;
  if (pt.empty() || gt.empty()) {
    const double eq = pt == gt ? 1.0 : 0.0;
    s.em = s.f1 = s.precision = s.recall = eq;
    return s;
  }
  s.em = pt == gt ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gt) counts[t] += 1;
  int common = 0;
  for (const auto& t : pt) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return s;
  s.precision = static_cast<double>(common) / static_cast<double>(pt.size());
  s.recall = static_cast<double>(common) / static_cast<double>(gt.size());
  s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

SfJointScore sf_and_joint_metrics(const SfSet& pred_sf, const SfSet& gold_sf,
                                  const AnswerScore& ans) {
  int tp = 0;
  for (const auto& e : pred_sf) tp += gold_sf.count(e) ? 1 : 0;
  const int fp = static_cast<int>(pred_sf.size()) - tp;
  const int fn = static_cast<int>(gold_sf.size()) - tp;

  SfJointScore s;
  const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.sf_f1 = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  s.sf_em = (fp == 0 && fn == 0) ? 1.0 : 0.0;

  const double jp = p * ans.precision;
  const double jr = r * ans.recall;
  s.joint_f1 = jp + jr > 0 ? 2.0 * jp * jr / (jp + jr) : 0.0;
  s.joint_em = s.sf_em * ans.em;
  return s;
}

// ---------------------------------------------------------------------------
// Data plumbing
// ---------------------------------------------------------------------------

Dataset load_dataset(const std::string& instances_path, const std::string& srl_path) {
  Dataset d;
  d.instances = load_instances(instances_path);
  d.srl = load_srl(srl_path, d.instances);
  return d;
}

QAInstance truncate_instance(const QAInstance& inst, std::size_t max_para_tokens) {
  QAInstance out = inst;
  for (auto& p : out.contexts) p = truncate_paragraph(p, max_para_tokens);
  return out;
}

SrlAnnotation filter_srl_to(const SrlAnnotation& srl, const QAInstance& inst) {
  SrlAnnotation out;
  for (const auto& [ref, frames] : srl.groups) {
    const TokenList* sentence = nullptr;
    if (ref.is_question()) {
      sentence = &inst.question;
    } else {
      if (ref.paragraph < 0 || ref.paragraph >= static_cast<int>(inst.contexts.size())) continue;
      const auto& para = inst.contexts[static_cast<std::size_t>(ref.paragraph)];
      if (ref.sentence < 0 || ref.sentence >= static_cast<int>(para.sentences.size())) continue;
      sentence = &para.sentences[static_cast<std::size_t>(ref.sentence)];
    }
    const int len = static_cast<int>(sentence->size());
    for (const auto& frame : frames) {
      if (frame.predicate < 0 || frame.predicate >= len) continue;
      SrlFrame kept = frame;
      kept.arguments.clear();
      for (const auto& arg : frame.arguments)
        if (arg.start >= 0 && arg.start < arg.end && arg.end <= len) kept.arguments.push_back(arg);
      out.groups[ref].push_back(std::move(kept));
    }
  }
  return out;
}

std::pair<int, int> gold_paragraph_indices(const QAInstance& inst) {
  int first = -1, second = -1;
  for (std::size_t i = 0; i < inst.contexts.size(); ++i) {
    if (!inst.gold_titles.count(title_text(inst.contexts[i]))) continue;
    if (first < 0)
      first = static_cast<int>(i);
    else if (second < 0)
      second = static_cast<int>(i);
  }
  return {first, second};
}

PreparedInstance prepare_instance(const QAInstance& inst, const SrlAnnotation& srl,
                                  const VocabEmbeddings& v, const Hyper& h, int first_idx,
                                  int second_idx) {
  PreparedInstance prep;
  prep.id = inst.id;
  prep.truncated = truncate_instance(inst, h.max_para_tokens);
  prep.first_idx = first_idx;
  prep.second_idx = second_idx;

  const SrlAnnotation filtered = filter_srl_to(srl, prep.truncated);
  const SrlAnnotation remapped = remap_srl_for_slots(filtered, first_idx, second_idx);
  const std::array<Paragraph, 2> selected = {
      prep.truncated.contexts[static_cast<std::size_t>(first_idx)],
      prep.truncated.contexts[static_cast<std::size_t>(second_idx)]};

  prep.graph = build_graph(prep.truncated.question, selected, remapped, h.graph_config());
  prep.a_hat = normalize_adjacency(prep.graph.adjacency);
  prep.features = assemble_features(prep.graph, v, h.ablation.use_arg_semantics);

  for (int slot = 0; slot < 2; ++slot) {
    const auto& para = selected[static_cast<std::size_t>(slot)];
    for (std::size_t s = 0; s < para.sentences.size(); ++s) {
      for (std::size_t k = 0; k < para.sentences[s].size(); ++k) {
        prep.stream.push_back(para.sentences[s][k]);
        prep.stream_refs.push_back({SentenceRef{slot, static_cast<int>(s)}, static_cast<int>(k)});
      }
    }
  }
  prep.tok_arg_nodes = token_arg_map(prep.graph, prep.stream_refs);
  if (!prep.stream.empty()) prep.token_feats = token_features(v, prep.stream);
  prep.type_phi = summary_features(v, prep.truncated.question, prep.stream);

  prep.cand_phi.resize(prep.graph.doc_count);
  for (std::size_t i = 0; i < prep.graph.doc_count; ++i)
    prep.cand_phi[i] = summary_features(v, prep.truncated.question, prep.graph.nodes[i].tokens);

  if (auto chain = find_gold_chain(prep.graph, prep.truncated.gold_sf, h.max_hops)) {
    prep.gold_chain = *chain;
    prep.sf_usable = true;
  }

  switch (prep.truncated.answer.type) {
    case AnswerType::yes: prep.gold_type = 0; break;
    case AnswerType::no: prep.gold_type = 1; break;
    case AnswerType::span: prep.gold_type = 2; break;
  }
  if (prep.gold_type == 2 && !prep.stream.empty()) {
    // Gold span: first stream occurrence of the answer tokens inside gold SF
    // sentences.
    std::set<SentenceRef> gold_refs;
    for (const auto& [title, idx] : prep.truncated.gold_sf) {
      for (int slot = 0; slot < 2; ++slot)
        if (prep.graph.paragraph_titles[static_cast<std::size_t>(slot)] == title)
          gold_refs.insert(SentenceRef{slot, idx});
    }
    const auto answer_tokens = split_ws(prep.truncated.answer.text);
    const std::size_t alen = answer_tokens.size();
    if (alen > 0 && alen <= prep.stream.size()) {
      for (std::size_t p = 0; p + alen <= prep.stream.size(); ++p) {
        bool ok = true;
        for (std::size_t k = 0; k < alen && ok; ++k) {
          ok = prep.stream[p + k] == answer_tokens[k] &&
               gold_refs.count(prep.stream_refs[p + k].ref) > 0;
        }
        if (ok) {
          prep.gold_start = static_cast<int>(p);
          prep.gold_end = static_cast<int>(p + alen - 1);
          prep.span_usable = true;
          break;
        }
      }
    }
  }
  return prep;
}

// ---------------------------------------------------------------------------
// Joint objective: forward + reverse
// ---------------------------------------------------------------------------

namespace {

struct InstanceLosses {
  double l_ans = 0, l_sf = 0, l_type = 0;
};

// Forward pass over one prepared instance; accumulates scaled gradients into
// *grads when given. inv_batch folds the batch-mean into each loss term.
InstanceLosses instance_pass(const ModelParams& params, const PreparedInstance& prep,
                             const Hyper& h, ModelParams* grads, double inv_batch) {
  const bool use_graph = h.ablation.use_graph;
  const std::size_t n = prep.graph.nodes.size();
  const std::size_t f2 = params.dims.f2;
  InstanceLosses L;

  GcnActivations acts;
  Matrix g_rows(n, f2);
  if (use_graph) {
    acts = gcn_forward(prep.a_hat, prep.features, params.gcn, prep.graph.doc_count);
    g_rows = acts.g;
  }
  Matrix dg(n, f2);
  bool any_dg = false;

  // Answer type head on the (question, context) summary.
  const auto type_summary = project_summary(params.encoder, prep.type_phi);
  const auto type_fwd = mlp2_forward_cached(params.heads.type_mlp, type_summary);
  const auto type_probs = softmax(type_fwd.out);
  L.l_type = -std::log(std::max(type_probs[static_cast<std::size_t>(prep.gold_type)], 1e-300));

  // Span head over the context stream.
  Matrix tok_out;
  std::vector<Mlp2Forward> start_fwd, end_fwd;
  std::vector<double> start_logits, end_logits;
  const bool span_active = prep.gold_type == 2 && prep.span_usable && !prep.stream.empty();
  if (span_active) {
    tok_out = project_tokens(params.encoder, prep.token_feats);
    const std::size_t len = prep.stream.size();
    start_fwd.reserve(len);
    end_fwd.reserve(len);
    std::vector<double> in(tok_out.cols + f2);
    for (std::size_t t = 0; t < len; ++t) {
      std::copy(tok_out.row(t), tok_out.row(t) + tok_out.cols, in.begin());
      const int arg = prep.tok_arg_nodes[t];
      if (arg >= 0)
        std::copy(g_rows.row(static_cast<std::size_t>(arg)),
                  g_rows.row(static_cast<std::size_t>(arg)) + f2,
                  in.begin() + static_cast<long>(tok_out.cols));
      else
        std::fill(in.begin() + static_cast<long>(tok_out.cols), in.end(), 0.0);
      start_fwd.push_back(mlp2_forward_cached(params.heads.start_mlp, in));
      end_fwd.push_back(mlp2_forward_cached(params.heads.end_mlp, in));
      start_logits.push_back(start_fwd.back().out[0]);
      end_logits.push_back(end_fwd.back().out[0]);
    }
    const auto ls = log_softmax(start_logits);
    const auto le = log_softmax(end_logits);
    L.l_ans = -ls[static_cast<std::size_t>(prep.gold_start)] -
              le[static_cast<std::size_t>(prep.gold_end)];
  }

  // Supporting-fact chain, teacher forced along the gold path.
  std::map<int, std::vector<double>> summary_cache;
  const auto provider = [&](int node) {
    auto it = summary_cache.find(node);
    if (it == summary_cache.end())
      it = summary_cache
               .emplace(node, project_summary(params.encoder,
                                              prep.cand_phi[static_cast<std::size_t>(node)]))
               .first;
    return candidate_rep(
        {g_rows.row(static_cast<std::size_t>(node)), f2}, it->second);
  };
  SfGrads sf_grads;
  if (prep.sf_usable) {
    if (grads != nullptr) {
      sf_grads.dw = params.rnn.w.like_zeros();
      sf_grads.du = params.rnn.u.like_zeros();
      sf_grads.dv = params.rnn.v.like_zeros();
      sf_grads.db_h = params.rnn.b_h.like_zeros();
      sf_grads.db_o = params.rnn.b_o.like_zeros();
      L.l_sf = sf_loss_backward(prep.graph, provider, params.rnn, prep.gold_chain, sf_grads);
    } else {
      L.l_sf = sf_loss(prep.graph, provider, params.rnn, prep.gold_chain);
    }
  }

  if (grads == nullptr) return L;

  // ---- reverse ----
  const double w_type = h.lambda3 * inv_batch;
  if (w_type != 0.0) {
    std::vector<double> dlogits(3);
    for (int c = 0; c < 3; ++c)
      dlogits[static_cast<std::size_t>(c)] =
          w_type * (type_probs[static_cast<std::size_t>(c)] - (c == prep.gold_type ? 1.0 : 0.0));
    const Mlp2Grads tg{&grads->heads.type_mlp.w1, &grads->heads.type_mlp.b1,
                       &grads->heads.type_mlp.w2, &grads->heads.type_mlp.b2};
    const auto dsummary = mlp2_backward(params.heads.type_mlp, type_fwd, dlogits, tg);
    project_summary_backward(prep.type_phi, type_summary, dsummary, grads->encoder.w_sum,
                             grads->encoder.b_sum);
  }

  const double w_ans = h.lambda1 * inv_batch;
  if (span_active && w_ans != 0.0) {
    const auto ps = softmax(start_logits);
    const auto pe = softmax(end_logits);
    Matrix dtok(tok_out.rows, tok_out.cols);
    const Mlp2Grads sg{&grads->heads.start_mlp.w1, &grads->heads.start_mlp.b1,
                       &grads->heads.start_mlp.w2, &grads->heads.start_mlp.b2};
    const Mlp2Grads eg{&grads->heads.end_mlp.w1, &grads->heads.end_mlp.b1,
                       &grads->heads.end_mlp.w2, &grads->heads.end_mlp.b2};
    for (std::size_t t = 0; t < prep.stream.size(); ++t) {
      const double dstart =
          w_ans * (ps[t] - (static_cast<int>(t) == prep.gold_start ? 1.0 : 0.0));
      const double dend = w_ans * (pe[t] - (static_cast<int>(t) == prep.gold_end ? 1.0 : 0.0));
      const std::vector<double> ds{dstart}, de{dend};
      const auto din_s = mlp2_backward(params.heads.start_mlp, start_fwd[t], ds, sg);
      const auto din_e = mlp2_backward(params.heads.end_mlp, end_fwd[t], de, eg);
      for (std::size_t c = 0; c < tok_out.cols; ++c)
        dtok.at(t, c) += din_s[c] + din_e[c];
      const int arg = prep.tok_arg_nodes[t];
      if (arg >= 0 && use_graph) {
        for (std::size_t c = 0; c < f2; ++c)
          dg.at(static_cast<std::size_t>(arg), c) +=
              din_s[tok_out.cols + c] + din_e[tok_out.cols + c];
        any_dg = true;
      }
    }
    project_tokens_backward(prep.token_feats, tok_out, dtok, grads->encoder.w_tok,
                            grads->encoder.b_tok);
  }

  const double w_sf = h.lambda2 * inv_batch;
  if (prep.sf_usable && w_sf != 0.0) {
    axpy_inplace(w_sf, sf_grads.dw, grads->rnn.w);
    axpy_inplace(w_sf, sf_grads.du, grads->rnn.u);
    axpy_inplace(w_sf, sf_grads.dv, grads->rnn.v);
    axpy_inplace(w_sf, sf_grads.db_h, grads->rnn.b_h);
    axpy_inplace(w_sf, sf_grads.db_o, grads->rnn.b_o);
    for (const auto& [node, drep] : sf_grads.dreps) {
      if (use_graph) {
        for (std::size_t c = 0; c < f2; ++c)
          dg.at(static_cast<std::size_t>(node), c) += w_sf * drep[c];
        any_dg = true;
      }
      std::vector<double> dsummary(drep.begin() + static_cast<long>(f2), drep.end());
      kernels::scale(w_sf, dsummary.data(), dsummary.size());
      project_summary_backward(prep.cand_phi[static_cast<std::size_t>(node)],
                               summary_cache.at(node), dsummary, grads->encoder.w_sum,
                               grads->encoder.b_sum);
    }
  }

  if (use_graph && any_dg) {
    const auto gg = gcn_backward(prep.a_hat, prep.features, params.gcn, acts, dg,
                                 nullptr, /*want_dx=*/false);
    add_inplace(grads->gcn.w1, gg.dw1);
    add_inplace(grads->gcn.w2, gg.dw2);
  }
  return L;
}

}  // namespace

GradResult compute_gradients(const ModelParams& params, const VocabEmbeddings& v,
                             PreparedBatch batch, const Hyper& h) {
  (void)v;
  require(!batch.empty(), Errc::config_error, "compute_gradients: empty batch");
  GradResult res;
  res.grads = make_params(params.dims);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const PreparedInstance* prep : batch) {
    const auto L = instance_pass(params, *prep, h, &res.grads, inv_batch);
    res.l_ans += L.l_ans * inv_batch;
    res.l_sf += L.l_sf * inv_batch;
    res.l_type += L.l_type * inv_batch;
  }
  res.loss = joint_loss(res.l_ans, res.l_sf, res.l_type, h);
  require(std::isfinite(res.loss), Errc::non_finite_loss, "compute_gradients: loss is not finite");
  return res;
}

double batch_loss(const ModelParams& params, const VocabEmbeddings& v, PreparedBatch batch,
                  const Hyper& h) {
  (void)v;
  require(!batch.empty(), Errc::config_error, "batch_loss: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double l_ans = 0, l_sf = 0, l_type = 0;
  for (const PreparedInstance* prep : batch) {
    const auto L = instance_pass(params, *prep, h, nullptr, inv_batch);
    l_ans += L.l_ans * inv_batch;
    l_sf += L.l_sf * inv_batch;
    l_type += L.l_type * inv_batch;
  }
  return joint_loss(l_ans, l_sf, l_type, h);
}

// ---------------------------------------------------------------------------
// Selector stage
// ---------------------------------------------------------------------------

SelectorPrepared prepare_selector(const QAInstance& truncated, const VocabEmbeddings& v,
                                  const Hyper& h) {
  require(truncated.contexts.size() >= 2, Errc::too_few_paragraphs,
          truncated.id + ": selector needs two candidate paragraphs");
  SelectorPrepared prep;
  for (const auto& para : truncated.contexts) {
    prep.round1_phi.push_back(summary_features(v, truncated.question, paragraph_tokens(para)));
    prep.round1_mask.push_back(truncated.gold_titles.count(title_text(para)) ? 1 : 0);
  }

  // Teacher-forced round 2: q_new from the first-listed gold paragraph.
  const auto [g1, g2] = gold_paragraph_indices(truncated);
  require(g1 >= 0 && g2 >= 0, Errc::bad_mask, truncated.id + ": needs two gold paragraphs");
  TokenList q_new = truncated.question;
  const TokenList chosen = paragraph_tokens(truncated.contexts[static_cast<std::size_t>(g1)]);
  q_new.insert(q_new.end(), chosen.begin(), chosen.end());
  if (q_new.size() > h.max_qnew_tokens) q_new.resize(h.max_qnew_tokens);

  for (std::size_t i = 0; i < truncated.contexts.size(); ++i) {
    if (static_cast<int>(i) == g1) continue;
    prep.round2_phi.push_back(summary_features(v, q_new, paragraph_tokens(truncated.contexts[i])));
    prep.round2_mask.push_back(static_cast<int>(i) == g2 ? 1 : 0);
  }
  return prep;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double selector_pass(const ModelParams& params, const SelectorPrepared& prep, ModelParams* grads,
                     double inv_batch) {
  double loss = 0.0;
  const auto run_round = [&](const std::vector<std::vector<double>>& phis,
                             const std::vector<int>& mask, bool exactly_two) {
    std::vector<SelectorForward> fwds;
    std::vector<double> scores;
    for (const auto& phi : phis) {
      fwds.push_back(selector_forward(params.selector, params.sel_encoder, phi));
      scores.push_back(fwds.back().score);
    }
    loss += exactly_two ? selector_loss(scores, mask) : binary_cross_entropy(scores, mask);
    if (grads == nullptr) return;
    const SelectorGrads acc{&grads->selector.w_a,     &grads->selector.b_a,
                            &grads->selector.w_b,     &grads->selector.b_b,
                            &grads->sel_encoder.w_sum, &grads->sel_encoder.b_sum};
    const double inv_n = 1.0 / static_cast<double>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double d = inv_batch * inv_n * (sigmoid(scores[i]) - static_cast<double>(mask[i]));
      selector_backward(params.selector, fwds[i], d, acc);
    }
  };

  run_round(prep.round1_phi, prep.round1_mask, /*exactly_two=*/true);
  if (!prep.round2_phi.empty()) run_round(prep.round2_phi, prep.round2_mask, false);
  return loss;
}

}  // namespace

SelectorGradResult selector_gradients(const ModelParams& params, SelectorBatch batch,
                                      const Hyper& h) {
  (void)h;
  require(!batch.empty(), Errc::config_error, "selector_gradients: empty batch");
  SelectorGradResult res;
  res.grads = make_params(params.dims);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const SelectorPrepared* prep : batch)
    res.loss += inv_batch * selector_pass(params, *prep, &res.grads, inv_batch);
  require(std::isfinite(res.loss), Errc::non_finite_loss, "selector loss is not finite");
  return res;
}

double selector_batch_loss(const ModelParams& params, SelectorBatch batch, const Hyper& h) {
  (void)h;
  require(!batch.empty(), Errc::config_error, "selector_batch_loss: empty batch");
  double loss = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const SelectorPrepared* prep : batch)
    loss += inv_batch * selector_pass(params, *prep, nullptr, inv_batch);
  return loss;
}

// ---------------------------------------------------------------------------
// Prediction / evaluation
// ---------------------------------------------------------------------------

Prediction predict_instance(const ModelParams& params, const VocabEmbeddings& v,
                            const QAInstance& inst, const SrlAnnotation& srl, const Hyper& h) {
  const QAInstance truncated = truncate_instance(inst, h.max_para_tokens);
  const auto sel =
      select_two_rounds(params.selector, params.sel_encoder, v, truncated, h.max_qnew_tokens);
  const PreparedInstance prep = prepare_instance(inst, srl, v, h, sel.first, sel.second);

  Prediction pred;
  pred.id = inst.id;
  pred.first_idx = sel.first;
  pred.second_idx = sel.second;

  const std::size_t n = prep.graph.nodes.size();
  const std::size_t f2 = params.dims.f2;
  Matrix g_rows(n, f2);
  if (h.ablation.use_graph) {
    const auto acts = gcn_forward(prep.a_hat, prep.features, params.gcn, prep.graph.doc_count);
    g_rows = acts.g;
  }

  const auto type_summary = project_summary(params.encoder, prep.type_phi);
  const auto type_dist = classify_type(params.heads, type_summary);
  std::copy(type_dist.begin(), type_dist.end(), pred.type_dist.begin());

  std::map<int, std::vector<double>> summary_cache;
  const auto provider = [&](int node) {
    auto it = summary_cache.find(node);
    if (it == summary_cache.end())
      it = summary_cache
               .emplace(node, project_summary(params.encoder,
                                              prep.cand_phi[static_cast<std::size_t>(node)]))
               .first;
    return candidate_rep({g_rows.row(static_cast<std::size_t>(node)), f2}, it->second);
  };
  const auto paths = beam_search(prep.graph, provider, params.rnn, h.beam_width, h.max_hops);
  pred.sf = sf_from_path(prep.graph, paths.front());
  pred.question_isolated = paths.front().nodes.size() == 1;
  for (const auto& path : paths) {
    std::vector<std::string> labels;
    for (int node : path.nodes) labels.push_back(node_label(prep.graph, node));
    pred.ranked_paths.emplace_back(std::move(labels), path.score);
  }

  const int type_arg =
      static_cast<int>(std::max_element(type_dist.begin(), type_dist.end()) - type_dist.begin());
  if (type_arg == 0) {
    pred.answer_text = "yes";
  } else if (type_arg == 1) {
    pred.answer_text = "no";
  } else if (!prep.stream.empty()) {
    const Matrix tok_out = project_tokens(params.encoder, prep.token_feats);
    Matrix arg_rows(prep.stream.size(), f2);
    for (std::size_t t = 0; t < prep.stream.size(); ++t) {
      const int arg = prep.tok_arg_nodes[t];
      if (arg >= 0)
        std::copy(g_rows.row(static_cast<std::size_t>(arg)),
                  g_rows.row(static_cast<std::size_t>(arg)) + f2, arg_rows.row(t));
    }
    const auto [start_logits, end_logits] = span_logits(params.heads, tok_out, arg_rows);
    const auto span = decode_span(start_logits, end_logits, h.max_answer_len);
    pred.span = span;
    std::string text;
    for (int t = span.first; t <= span.second; ++t) {
      if (t > span.first) text += ' ';
      text += prep.stream[static_cast<std::size_t>(t)];
    }
    pred.answer_text = text;
  }
  return pred;
}

bool gold_chain_connected(const HeteroGraph& g, const QAInstance& inst, int max_hops) {
  return find_gold_chain(g, inst.gold_sf, max_hops).has_value();
}

double graph_coverage(std::span<const QAInstance> instances,
                      const std::map<std::string, SrlAnnotation>& srl, const Hyper& h) {
  if (instances.empty()) return 0.0;
  int covered = 0;
  for (const auto& inst : instances) {
    const QAInstance truncated = truncate_instance(inst, h.max_para_tokens);
    const auto [a, b] = gold_paragraph_indices(truncated);
    if (a < 0 || b < 0) continue;
    static const SrlAnnotation empty_srl;
    const auto it = srl.find(inst.id);
    const SrlAnnotation& ann = it == srl.end() ? empty_srl : it->second;
    const SrlAnnotation remapped = remap_srl_for_slots(filter_srl_to(ann, truncated), a, b);
    const std::array<Paragraph, 2> selected = {truncated.contexts[static_cast<std::size_t>(a)],
                                               truncated.contexts[static_cast<std::size_t>(b)]};
    const HeteroGraph g = build_graph(truncated.question, selected, remapped, h.graph_config());
    if (gold_chain_connected(g, truncated, h.max_hops)) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(instances.size());
}

MetricsReport evaluate_predictions(std::span<const QAInstance> instances,
                                   std::span<const Prediction> preds, double coverage) {
  require(instances.size() == preds.size(), Errc::length_mismatch,
          "evaluate_predictions: instance/prediction counts differ");
  MetricsReport rep;
  rep.graph_coverage = coverage;
  if (instances.empty()) return rep;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    std::string gold_text;
    switch (inst.answer.type) {
      case AnswerType::yes: gold_text = "yes"; break;
      case AnswerType::no: gold_text = "no"; break;
      case AnswerType::span: gold_text = inst.answer.text; break;
    }
    const auto ans = answer_metrics(preds[i].answer_text, gold_text);
    const auto sfj = sf_and_joint_metrics(preds[i].sf, inst.gold_sf, ans);
    rep.ans_em += ans.em;
    rep.ans_f1 += ans.f1;
    rep.sf_em += sfj.sf_em;
    rep.sf_f1 += sfj.sf_f1;
    rep.joint_em += sfj.joint_em;
    rep.joint_f1 += sfj.joint_f1;
  }
  const double inv = 1.0 / static_cast<double>(instances.size());
  rep.ans_em *= inv;
  rep.ans_f1 *= inv;
  rep.sf_em *= inv;
  rep.sf_f1 *= inv;
  rep.joint_em *= inv;
  rep.joint_f1 *= inv;
  return rep;
}

MetricsReport evaluate(const ModelParams& params, const VocabEmbeddings& v, const Dataset& data,
                       const Hyper& h) {
  static const SrlAnnotation empty_srl;
  std::vector<Prediction> preds;
  preds.reserve(data.instances.size());
  for (const auto& inst : data.instances) {
    const auto it = data.srl.find(inst.id);
    preds.push_back(
        predict_instance(params, v, inst, it == data.srl.end() ? empty_srl : it->second, h));
  }
  const double coverage = graph_coverage(data.instances, data.srl, h);
  return evaluate_predictions(data.instances, preds, coverage);
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < count; at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(count, at + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<long>(at),
                         order.begin() + static_cast<long>(end));
  }
  return batches;
}

}  // namespace

std::vector<EpochMetrics> train_selector_stage(ModelParams& params, const VocabEmbeddings& v,
                                               const Dataset& train_data, const Hyper& h,
                                               std::uint64_t seed) {
  std::vector<SelectorPrepared> prepared;
  for (const auto& inst : train_data.instances) {
    const QAInstance truncated = truncate_instance(inst, h.max_para_tokens);
    const auto [g1, g2] = gold_paragraph_indices(truncated);
    if (truncated.contexts.size() < 2 || g1 < 0 || g2 < 0) continue;
    prepared.push_back(prepare_selector(truncated, v, h));
  }
  require(!prepared.empty(), Errc::config_error, "selector stage: no trainable instances");

  AdamState st = make_adam_state(params);
  Rng rng(seed ^ 0x5e1ec70aULL);
  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= h.selector_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : make_batches(prepared.size(), h.batch_size, rng)) {
      std::vector<const SelectorPrepared*> ptrs;
      for (std::size_t i : batch) ptrs.push_back(&prepared[i]);
      auto res = selector_gradients(params, ptrs, h);
      adam_step(params, res.grads, st, h);
      loss_sum += res.loss * static_cast<double>(ptrs.size());
      seen += ptrs.size();
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.stage = "selector";
    em.train_loss = loss_sum / static_cast<double>(seen);
    history.push_back(em);
  }
  return history;
}

std::vector<EpochMetrics> train_joint_stage(ModelParams& params, const VocabEmbeddings& v,
                                            const Dataset& train_data, const Dataset& dev_data,
                                            const Hyper& h, std::uint64_t seed) {
  static const SrlAnnotation empty_srl;
  std::vector<PreparedInstance> prepared;
  for (const auto& inst : train_data.instances) {
    const QAInstance truncated = truncate_instance(inst, h.max_para_tokens);
    const auto [g1, g2] = gold_paragraph_indices(truncated);
    if (g1 < 0 || g2 < 0) continue;
    const auto it = train_data.srl.find(inst.id);
    prepared.push_back(
        prepare_instance(inst, it == train_data.srl.end() ? empty_srl : it->second, v, h, g1, g2));
  }
  require(!prepared.empty(), Errc::config_error, "joint stage: no trainable instances");

  const double dev_coverage =
      dev_data.instances.empty() ? 0.0 : graph_coverage(dev_data.instances, dev_data.srl, h);

  AdamState st = make_adam_state(params);
  Rng rng(seed ^ 0x701a7e57ULL);
  std::vector<EpochMetrics> history;

  const auto eval_dev = [&]() -> MetricsReport {
    if (dev_data.instances.empty()) return {};
    std::vector<Prediction> preds;
    preds.reserve(dev_data.instances.size());
    for (const auto& inst : dev_data.instances) {
      const auto it = dev_data.srl.find(inst.id);
      preds.push_back(
          predict_instance(params, v, inst, it == dev_data.srl.end() ? empty_srl : it->second, h));
    }
    return evaluate_predictions(dev_data.instances, preds, dev_coverage);
  };

  const auto run_epochs = [&](int n_epochs, const Hyper& eff, const std::string& stage,
                              int epoch_offset) {
    for (int epoch = 1; epoch <= n_epochs; ++epoch) {
      double loss_sum = 0.0;
      std::size_t seen = 0;
      for (const auto& batch : make_batches(prepared.size(), eff.batch_size, rng)) {
        std::vector<const PreparedInstance*> ptrs;
        for (std::size_t i : batch) ptrs.push_back(&prepared[i]);
        auto res = compute_gradients(params, v, ptrs, eff);
        adam_step(params, res.grads, st, eff);
        loss_sum += res.loss * static_cast<double>(ptrs.size());
        seen += ptrs.size();
      }
      EpochMetrics em;
      em.epoch = epoch_offset + epoch;
      em.stage = stage;
      em.train_loss = loss_sum / static_cast<double>(seen);
      em.dev = eval_dev();
      history.push_back(em);
    }
  };

  if (h.ablation.joint_training) {
    run_epochs(h.epochs, h, "joint", 0);
  } else {
    // Table-2 style "w/o joint training": SF first, freeze, then answer heads.
    Hyper sf_only = h;
    sf_only.lambda1 = 0.0;
    sf_only.lambda3 = 0.0;
    Hyper ans_only = h;
    ans_only.lambda2 = 0.0;
    const int first = (h.epochs + 1) / 2;
    run_epochs(first, sf_only, "sf-only", 0);
    run_epochs(h.epochs - first, ans_only, "answer-only", first);
  }
  return history;
}

TrainResult train(const Dataset& train_data, const Dataset& dev_data, const Hyper& h,
                  std::uint64_t seed) {
  TrainResult res;
  res.params = init_params(h.dims, seed);
  const VocabEmbeddings v = make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed);
  auto hist1 = train_selector_stage(res.params, v, train_data, h, seed);
  auto hist2 = train_joint_stage(res.params, v, train_data, dev_data, h, seed);
  res.history = std::move(hist1);
  res.history.insert(res.history.end(), hist2.begin(), hist2.end());
  return res;
}

}  // namespace rolegraph

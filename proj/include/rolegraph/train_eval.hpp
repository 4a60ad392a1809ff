#pragma once

#include <array>
#include <optional>

#include "rolegraph/model.hpp"

namespace rolegraph {

struct AblationFlags {
  bool use_graph = true;          // zero G_S / G_Arg inputs when off
  bool use_arg_semantics = true;  // drop role tokens and predicate halves when off
  bool joint_training = true;     // off: SF stage to convergence, freeze, then answer stage
};

struct Hyper {
  double lambda1 = 1.0;  // answer span loss weight
  double lambda2 = 1.0;  // supporting-fact loss weight
  double lambda3 = 1.0;  // answer type loss weight
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int epochs = 50;
  int selector_epochs = 30;
  int batch_size = 8;
  int beam_width = 4;
  int max_hops = 3;  // T
  int max_answer_len = 30;
  int pmi_window = 10;
  double pmi_floor = 0.1;
  std::size_t max_para_tokens = 256;
  std::size_t max_qnew_tokens = 384;
  ModelDims dims;
  AblationFlags ablation;

  GraphConfig graph_config() const { return {pmi_window, pmi_floor}; }
};

double joint_loss(double l_ans, double l_sf, double l_type, const Hyper& h);

struct AdamState {
  std::vector<Matrix> m, v;  // aligned with param_refs order
  long t = 0;
};
AdamState make_adam_state(ModelParams& params);
// Bias-corrected Adam over every tensor; zero-gradient tensors stay put.
void adam_step(ModelParams& params, ModelParams& grads, AdamState& st, const Hyper& h);

// --- metrics ---

struct AnswerScore {
  double em = 0, f1 = 0, precision = 0, recall = 0;
};
// SQuAD-style: lowercase, strip punctuation, drop articles, collapse spaces.
std::string normalize_answer(const std::string& text);
AnswerScore answer_metrics(const std::string& pred, const std::string& gold);

struct SfJointScore {
  double sf_em = 0, sf_f1 = 0, joint_em = 0, joint_f1 = 0;
};
SfJointScore sf_and_joint_metrics(const SfSet& pred_sf, const SfSet& gold_sf,
                                  const AnswerScore& ans);

struct MetricsReport {
  double ans_em = 0, ans_f1 = 0;
  double sf_em = 0, sf_f1 = 0;
  double joint_em = 0, joint_f1 = 0;
  double graph_coverage = 0;
};

// --- data plumbing ---

struct Dataset {
  std::vector<QAInstance> instances;
  std::map<std::string, SrlAnnotation> srl;
};
Dataset load_dataset(const std::string& instances_path, const std::string& srl_path);

QAInstance truncate_instance(const QAInstance& inst, std::size_t max_para_tokens);
// Drops frames/arguments that no longer fit the (possibly truncated) instance.
SrlAnnotation filter_srl_to(const SrlAnnotation& srl, const QAInstance& inst);
// First two context indices whose titles are gold, in context order.
std::pair<int, int> gold_paragraph_indices(const QAInstance& inst);

// Everything about one instance that does not depend on trainable parameters.
struct PreparedInstance {
  std::string id;
  QAInstance truncated;
  int first_idx = -1, second_idx = -1;  // original context indices in slot order
  HeteroGraph graph;
  Matrix a_hat;
  Matrix features;  // GCN input X
  std::vector<std::string> stream;  // answer context: sentences of both slots
  std::vector<StreamToken> stream_refs;
  std::vector<int> tok_arg_nodes;  // argument node per stream token, -1 if none
  Matrix token_feats;
  std::vector<double> type_phi;  // summary features of (question, stream)
  std::vector<std::vector<double>> cand_phi;  // per doc node: features of (question, node tokens)
  std::vector<int> gold_chain;  // doc-node chain after the question; empty if disconnected
  bool sf_usable = false;
  int gold_type = 2;  // 0 yes, 1 no, 2 span
  int gold_start = -1, gold_end = -1;
  bool span_usable = false;
};

PreparedInstance prepare_instance(const QAInstance& inst, const SrlAnnotation& srl,
                                  const VocabEmbeddings& v, const Hyper& h, int first_idx,
                                  int second_idx);

// --- joint objective: forward and gradients ---

using PreparedBatch = std::span<const PreparedInstance* const>;

struct GradResult {
  double loss = 0, l_ans = 0, l_sf = 0, l_type = 0;  // batch means
  ModelParams grads;                                 // selector tensors stay zero
};
GradResult compute_gradients(const ModelParams& params, const VocabEmbeddings& v,
                             PreparedBatch batch, const Hyper& h);
// Forward-only batch-mean joint loss (the finite-difference oracle target).
double batch_loss(const ModelParams& params, const VocabEmbeddings& v, PreparedBatch batch,
                  const Hyper& h);

// --- selector stage ---

struct SelectorPrepared {
  std::vector<std::vector<double>> round1_phi;
  std::vector<int> round1_mask;
  std::vector<std::vector<double>> round2_phi;
  std::vector<int> round2_mask;
};
SelectorPrepared prepare_selector(const QAInstance& truncated, const VocabEmbeddings& v,
                                  const Hyper& h);
using SelectorBatch = std::span<const SelectorPrepared* const>;
struct SelectorGradResult {
  double loss = 0;
  ModelParams grads;  // only selector + sel_encoder tensors populated
};
SelectorGradResult selector_gradients(const ModelParams& params, SelectorBatch batch,
                                      const Hyper& h);
double selector_batch_loss(const ModelParams& params, SelectorBatch batch, const Hyper& h);

// --- prediction and evaluation ---

struct Prediction {
  std::string id;
  std::string answer_text;
  std::array<double, 3> type_dist{};
  std::optional<std::pair<int, int>> span;
  SfSet sf;
  std::vector<std::pair<std::vector<std::string>, double>> ranked_paths;  // node labels + score
  int first_idx = -1, second_idx = -1;
  bool question_isolated = false;
};

Prediction predict_instance(const ModelParams& params, const VocabEmbeddings& v,
                            const QAInstance& inst, const SrlAnnotation& srl, const Hyper& h);

bool gold_chain_connected(const HeteroGraph& g, const QAInstance& inst, int max_hops);
double graph_coverage(std::span<const QAInstance> instances,
                      const std::map<std::string, SrlAnnotation>& srl, const Hyper& h);

// Metrics over predictions vs gold; coverage must be supplied (or 0).
MetricsReport evaluate_predictions(std::span<const QAInstance> instances,
                                   std::span<const Prediction> preds, double coverage);
MetricsReport evaluate(const ModelParams& params, const VocabEmbeddings& v, const Dataset& data,
                       const Hyper& h);

// --- training loops ---

struct EpochMetrics {
  int epoch = 0;
  std::string stage;  // "selector", "joint", "sf-only", "answer-only"
  double train_loss = 0;
  MetricsReport dev;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> history;
};

// Stage 1 (selector) then stage 2 (joint, teacher-forced); deterministic in seed.
TrainResult train(const Dataset& train_data, const Dataset& dev_data, const Hyper& h,
                  std::uint64_t seed);
// Individual stages (the CLI drives them separately).
std::vector<EpochMetrics> train_selector_stage(ModelParams& params, const VocabEmbeddings& v,
                                               const Dataset& train_data, const Hyper& h,
                                               std::uint64_t seed);
std::vector<EpochMetrics> train_joint_stage(ModelParams& params, const VocabEmbeddings& v,
                                            const Dataset& train_data, const Dataset& dev_data,
                                            const Hyper& h, std::uint64_t seed);

}  // namespace rolegraph

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rolegraph/model.hpp"
#include "rolegraph/synth_gen.hpp"
#include "rolegraph/train_eval.hpp"

namespace rg = rolegraph;
using nlohmann::json;

namespace {

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    rg::require(out.good(), rg::Errc::config_error, "cannot write " + path);
    out << content;
    rg::require(out.good(), rg::Errc::config_error, "write failed for " + path);
  }
  std::filesystem::rename(tmp, path);
}

json metrics_json(const rg::MetricsReport& m) {
  return json{{"ans_em", m.ans_em},       {"ans_f1", m.ans_f1},       {"sf_em", m.sf_em},
              {"sf_f1", m.sf_f1},         {"joint_em", m.joint_em},   {"joint_f1", m.joint_f1},
              {"graph_coverage", m.graph_coverage}};
}

json prediction_json(const rg::Prediction& p) {
  json j;
  j["id"] = p.id;
  j["answer"] = p.answer_text;
  j["type_dist"] = json::array({p.type_dist[0], p.type_dist[1], p.type_dist[2]});
  if (p.span)
    j["span"] = json::array({p.span->first, p.span->second});
  else
    j["span"] = nullptr;
  json sf = json::array();
  for (const auto& [title, idx] : p.sf) sf.push_back(json::array({title, idx}));
  j["sf"] = std::move(sf);
  json paths = json::array();
  for (const auto& [labels, score] : p.ranked_paths)
    paths.push_back({{"nodes", labels}, {"score", score}});
  j["paths"] = std::move(paths);
  j["selected"] = json::array({p.first_idx, p.second_idx});
  j["question_isolated"] = p.question_isolated;
  return j;
}

std::string history_lines(const std::vector<rg::EpochMetrics>& history) {
  std::string out;
  for (const auto& em : history) {
    json j;
    j["epoch"] = em.epoch;
    j["stage"] = em.stage;
    j["train_loss"] = em.train_loss;
    j["dev"] = metrics_json(em.dev);
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct HyperCli {
  rg::Hyper h;
  std::uint64_t seed = 1;
};

void add_hyper_flags(CLI::App* cmd, HyperCli& hc) {
  auto& h = hc.h;
  cmd->add_option("--lambda1", h.lambda1, "Answer span loss weight");
  cmd->add_option("--lambda2", h.lambda2, "Supporting fact loss weight");
  cmd->add_option("--lambda3", h.lambda3, "Answer type loss weight");
  cmd->add_option("--lr", h.lr, "Adam learning rate");
  cmd->add_option("--beta1", h.beta1, "Adam beta1");
  cmd->add_option("--beta2", h.beta2, "Adam beta2");
  cmd->add_option("--eps-adam", h.eps_adam, "Adam epsilon");
  cmd->add_option("--epochs", h.epochs, "Joint-stage epochs");
  cmd->add_option("--selector-epochs", h.selector_epochs, "Selector-stage epochs");
  cmd->add_option("--batch-size", h.batch_size, "Batch size");
  cmd->add_option("--beam-width", h.beam_width, "Beam width");
  cmd->add_option("--max-hops", h.max_hops, "Maximum reasoning hops (T)");
  cmd->add_option("--max-answer-len", h.max_answer_len, "Maximum answer span length");
  cmd->add_option("--pmi-window", h.pmi_window, "PMI sliding-window width");
  cmd->add_option("--pmi-floor", h.pmi_floor, "Floor for argument-edge weights");
  cmd->add_option("--max-para-tokens", h.max_para_tokens, "Per-paragraph token cap");
  cmd->add_option("--max-qnew-tokens", h.max_qnew_tokens, "q_new token cap");
  cmd->add_option("--embed-dim", h.dims.embed_dim, "Word vector dimension D");
  cmd->add_option("--d-model", h.dims.d_model, "Encoder output width");
  cmd->add_option("--h-sel", h.dims.h_sel, "Selector MLP hidden width");
  cmd->add_option("--f1", h.dims.f1, "GCN layer-1 width");
  cmd->add_option("--f2", h.dims.f2, "GCN layer-2 width");
  cmd->add_option("--rnn-hidden", h.dims.rnn_hidden, "SF RNN hidden width");
  cmd->add_option("--head-hidden", h.dims.head_hidden, "Answer head hidden width");
  cmd->add_option("--oov-seed", h.dims.oov_seed, "OOV embedding hash seed");
  cmd->add_flag_callback("--no-graph", [&h] { h.ablation.use_graph = false; },
                         "Ablation: zero graph embeddings");
  cmd->add_flag_callback("--no-arg-semantics", [&h] { h.ablation.use_arg_semantics = false; },
                         "Ablation: drop argument types and semantic edges");
  cmd->add_flag_callback("--separate-training", [&h] { h.ablation.joint_training = false; },
                         "Ablation: SF stage then answer stage instead of joint");
  cmd->add_option("--seed", hc.seed, "Run seed");
}

rg::VocabEmbeddings vocab_for(const rg::ModelParams& params, const std::string& vectors_path) {
  if (vectors_path.empty())
    return rg::make_hashed_vocab(params.dims.embed_dim, params.dims.oov_seed);
  auto v = rg::load_word_vectors(vectors_path, params.dims.oov_seed);
  rg::require(v.dim == params.dims.embed_dim, rg::Errc::config_error,
              "word-vector dimension does not match --embed-dim");
  return v;
}

const rg::SrlAnnotation& srl_for(const std::map<std::string, rg::SrlAnnotation>& srl,
                                 const std::string& id) {
  static const rg::SrlAnnotation empty;
  const auto it = srl.find(id);
  return it == srl.end() ? empty : it->second;
}

rg::HeteroGraph graph_for_instance(const rg::Dataset& data, const std::string& id,
                                   const rg::Hyper& h, std::string* out_id) {
  const rg::QAInstance* inst = nullptr;
  for (const auto& cand : data.instances) {
    if (id.empty() || cand.id == id) {
      inst = &cand;
      break;
    }
  }
  rg::require(inst != nullptr, rg::Errc::config_error, "instance id not found: " + id);
  *out_id = inst->id;
  const rg::QAInstance truncated = rg::truncate_instance(*inst, h.max_para_tokens);
  const auto [a, b] = rg::gold_paragraph_indices(truncated);
  rg::require(a >= 0 && b >= 0, rg::Errc::config_error,
              inst->id + ": needs two gold paragraphs to build a graph");
  const rg::SrlAnnotation remapped =
      rg::remap_srl_for_slots(rg::filter_srl_to(srl_for(data.srl, inst->id), truncated), a, b);
  const std::array<rg::Paragraph, 2> selected = {
      truncated.contexts[static_cast<std::size_t>(a)],
      truncated.contexts[static_cast<std::size_t>(b)]};
  return rg::build_graph(truncated.question, selected, remapped, h.graph_config());
}

int run(int argc, char** argv) {
  CLI::App app{"Heterogeneous SRL-graph multi-hop QA pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file with long-option keys");
  app.fallthrough();

  HyperCli hc;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  rg::SynthConfig synth_cfg;
  std::string synth_instances, synth_srl;
  synth->add_option("--out-instances", synth_instances, "Instance file to write")->required();
  synth->add_option("--out-srl", synth_srl, "SRL file to write")->required();
  synth->add_option("--n", synth_cfg.n_instances, "Number of instances");
  synth->add_option("--distractors", synth_cfg.n_distractors, "Distractor paragraphs per instance");
  synth->add_option("--bridge-fraction", synth_cfg.bridge_fraction, "Fraction of bridge instances");
  synth->add_option("--vocab-size", synth_cfg.vocab_size, "Synthetic vocabulary size");
  synth->add_option("--gen-seed", synth_cfg.seed, "Generator seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate instance and SRL files");
  std::string in_instances, in_srl;
  ingest->add_option("--instances", in_instances)->required();
  ingest->add_option("--srl", in_srl)->required();

  // build-graph / export-graph
  auto* build = app.add_subcommand("build-graph", "Build one instance's graph (structured JSON)");
  auto* exportg = app.add_subcommand("export-graph", "Export one instance's graph");
  std::string graph_id, graph_out, graph_format = "structured";
  for (CLI::App* cmd : {build, exportg}) {
    cmd->add_option("--instances", in_instances)->required();
    cmd->add_option("--srl", in_srl)->required();
    cmd->add_option("--id", graph_id, "Instance id (default: first)");
    cmd->add_option("--out", graph_out, "Output file")->required();
  }
  exportg->add_option("--format", graph_format, "dot or structured")
      ->check(CLI::IsMember({"dot", "structured"}));

  // training / inference commands
  auto* train_sel = app.add_subcommand("train-selector", "Stage 1: train paragraph selection");
  auto* train_joint = app.add_subcommand("train-joint", "Stage 2: joint SF + answer training");
  auto* predict = app.add_subcommand("predict", "Write per-instance predictions");
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold");

  std::string dev_instances, dev_srl, ckpt_out, ckpt_init, metrics_out, preds_out, preds_in,
      vectors_path;
  for (CLI::App* cmd : {train_sel, train_joint, predict, evaluate}) {
    cmd->add_option("--instances", in_instances)->required();
    cmd->add_option("--srl", in_srl)->required();
    cmd->add_option("--vectors", vectors_path, "Optional word-vector file");
    add_hyper_flags(cmd, hc);
  }
  train_sel->add_option("--out", ckpt_out, "Checkpoint to write")->required();
  train_sel->add_option("--metrics", metrics_out, "Training history (JSONL)");
  train_joint->add_option("--init", ckpt_init, "Checkpoint to start from (default: fresh init)");
  train_joint->add_option("--out", ckpt_out, "Checkpoint to write")->required();
  train_joint->add_option("--dev-instances", dev_instances, "Dev instance file");
  train_joint->add_option("--dev-srl", dev_srl, "Dev SRL file");
  train_joint->add_option("--metrics", metrics_out, "Training history (JSONL)");
  predict->add_option("--checkpoint", ckpt_init, "Checkpoint to load")->required();
  predict->add_option("--out", preds_out, "Predictions file (JSONL)")->required();
  evaluate->add_option("--predictions", preds_in, "Predictions file (JSONL)")->required();
  evaluate->add_option("--out", metrics_out, "Metrics file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "ConfigError"}, {"detail", e.what()}}.dump() << '\n';
    return 2;
  }

  if (synth->parsed()) {
    const auto corpus = rg::generate_corpus(synth_cfg);
    rg::write_corpus(corpus, synth_instances + ".tmp", synth_srl + ".tmp");
    std::filesystem::rename(synth_instances + ".tmp", synth_instances);
    std::filesystem::rename(synth_srl + ".tmp", synth_srl);
    const auto report =
        rg::audit(corpus.instances, corpus.srl, hc.h.graph_config(), hc.h.max_hops);
    rg::require_audit(report);
    std::cout << json{{"instances", corpus.instances.size()}, {"coverage", report.coverage}}.dump()
              << '\n';
    return 0;
  }

  if (ingest->parsed()) {
    const rg::Dataset data = rg::load_dataset(in_instances, in_srl);
    std::size_t frames = 0, sf_pairs = 0;
    for (const auto& [id, ann] : data.srl)
      for (const auto& [ref, group] : ann.groups) frames += group.size();
    for (const auto& inst : data.instances) sf_pairs += inst.gold_sf.size();
    std::cout << json{{"instances", data.instances.size()},
                      {"srl_records", data.srl.size()},
                      {"frames", frames},
                      {"gold_sf_pairs", sf_pairs}}
                     .dump()
              << '\n';
    return 0;
  }

  if (build->parsed() || exportg->parsed()) {
    const rg::Dataset data = rg::load_dataset(in_instances, in_srl);
    std::string used_id;
    const rg::HeteroGraph g = graph_for_instance(data, graph_id, hc.h, &used_id);
    const bool dot = exportg->parsed() && graph_format == "dot";
    write_text_atomic(graph_out,
                      dot ? rg::export_graph_dot(g) : rg::export_graph_structured(g) + "\n");
    std::cout << json{{"id", used_id}, {"nodes", g.nodes.size()}, {"doc_nodes", g.doc_count}}.dump()
              << '\n';
    return 0;
  }

  if (train_sel->parsed()) {
    const rg::Dataset data = rg::load_dataset(in_instances, in_srl);
    rg::ModelParams params = rg::init_params(hc.h.dims, hc.seed);
    const auto v = vocab_for(params, vectors_path);
    const auto history = rg::train_selector_stage(params, v, data, hc.h, hc.seed);
    rg::save_checkpoint(ckpt_out, params);
    if (!metrics_out.empty()) write_text_atomic(metrics_out, history_lines(history));
    std::cout << json{{"checkpoint", ckpt_out},
                      {"final_selector_loss", history.empty() ? 0.0 : history.back().train_loss}}
                     .dump()
              << '\n';
    return 0;
  }

  if (train_joint->parsed()) {
    const rg::Dataset data = rg::load_dataset(in_instances, in_srl);
    rg::Dataset dev;
    if (!dev_instances.empty())
      dev = rg::load_dataset(dev_instances, dev_srl.empty() ? in_srl : dev_srl);
    rg::ModelParams params =
        ckpt_init.empty() ? rg::init_params(hc.h.dims, hc.seed) : rg::load_checkpoint(ckpt_init);
    hc.h.dims = params.dims;
    const auto v = vocab_for(params, vectors_path);
    const auto history = rg::train_joint_stage(params, v, data, dev, hc.h, hc.seed);
    rg::save_checkpoint(ckpt_out, params);
    if (!metrics_out.empty()) write_text_atomic(metrics_out, history_lines(history));
    json out{{"checkpoint", ckpt_out}};
    if (!history.empty()) {
      out["final_train_loss"] = history.back().train_loss;
      out["final_dev"] = metrics_json(history.back().dev);
    }
    std::cout << out.dump() << '\n';
    return 0;
  }

  if (predict->parsed()) {
    const rg::Dataset data = rg::load_dataset(in_instances, in_srl);
    const rg::ModelParams params = rg::load_checkpoint(ckpt_init);
    hc.h.dims = params.dims;
    const auto v = vocab_for(params, vectors_path);
    std::string lines;
    for (const auto& inst : data.instances) {
      const auto pred =
          rg::predict_instance(params, v, inst, srl_for(data.srl, inst.id), hc.h);
      lines += prediction_json(pred).dump();
      lines += '\n';
    }
    write_text_atomic(preds_out, lines);
    std::cout << json{{"predictions", data.instances.size()}, {"out", preds_out}}.dump() << '\n';
    return 0;
  }

  if (evaluate->parsed()) {
    const rg::Dataset data = rg::load_dataset(in_instances, in_srl);
    std::ifstream pin(preds_in);
    rg::require(pin.good(), rg::Errc::config_error, "cannot open predictions: " + preds_in);
    std::map<std::string, rg::Prediction> by_id;
    std::string line;
    while (std::getline(pin, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      rg::require(!j.is_discarded(), rg::Errc::malformed_record, "bad prediction line");
      rg::Prediction p;
      p.id = j.at("id").get<std::string>();
      p.answer_text = j.at("answer").get<std::string>();
      for (const auto& e : j.at("sf"))
        p.sf.emplace(e[0].get<std::string>(), e[1].get<int>());
      by_id.emplace(p.id, std::move(p));
    }
    std::vector<rg::Prediction> preds;
    for (const auto& inst : data.instances) {
      const auto it = by_id.find(inst.id);
      rg::require(it != by_id.end(), rg::Errc::config_error,
                  "prediction missing for instance " + inst.id);
      preds.push_back(it->second);
    }
    const double coverage = rg::graph_coverage(data.instances, data.srl, hc.h);
    const auto report = rg::evaluate_predictions(data.instances, preds, coverage);
    const std::string out = metrics_json(report).dump() + "\n";
    if (!metrics_out.empty()) write_text_atomic(metrics_out, out);
    std::cout << out;
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rg::Error& e) {
    std::cerr << json{{"error", rg::errc_name(e.code())}, {"detail", e.what()}}.dump() << '\n';
    return e.code() == rg::Errc::config_error ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "RuntimeError"}, {"detail", e.what()}}.dump() << '\n';
    return 1;
  }
}

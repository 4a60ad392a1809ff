#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "rolegraph/synth_gen.hpp"
#include "rolegraph/train_eval.hpp"

using namespace rolegraph;

namespace {

SynthConfig config(int n, double bridge_fraction, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_instances = n;
  cfg.n_distractors = 2;
  cfg.bridge_fraction = bridge_fraction;
  cfg.seed = seed;
  return cfg;
}

std::string corpus_text(const SynthCorpus& corpus) {
  std::string out;
  for (const auto& inst : corpus.instances) {
    out += serialize_instance(inst);
    out += '\n';
    out += serialize_srl(inst.id, corpus.srl.at(inst.id));
    out += '\n';
  }
  return out;
}

std::set<std::pair<std::string, std::string>> arg_keys_of(
    const QAInstance& inst, const SrlAnnotation& srl,
    const std::function<bool(const SentenceRef&)>& keep) {
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& [ref, frames] : srl.groups) {
    if (!keep(ref)) continue;
    const TokenList& sent = ref.is_question()
                                ? inst.question
                                : inst.contexts[static_cast<std::size_t>(ref.paragraph)]
                                      .sentences[static_cast<std::size_t>(ref.sentence)];
    for (const auto& f : frames) {
      for (const auto& a : f.arguments) {
        std::string phrase;
        for (int t = a.start; t < a.end; ++t) {
          if (t > a.start) phrase += ' ';
          phrase += sent[static_cast<std::size_t>(t)];
        }
        keys.emplace(phrase, a.role);
      }
    }
  }
  return keys;
}

}  // namespace

TEST_CASE("generation is deterministic given the seed") {
  const auto a = generate_corpus(config(20, 0.5, 42));
  const auto b = generate_corpus(config(20, 0.5, 42));
  CHECK(corpus_text(a) == corpus_text(b));
  const auto c = generate_corpus(config(20, 0.5, 43));
  CHECK(corpus_text(a) != corpus_text(c));
}

TEST_CASE("bridge instances share an argument between the two gold sentences") {
  const auto corpus = generate_corpus(config(12, 1.0, 7));
  Hyper h;
  for (const auto& inst : corpus.instances) {
    REQUIRE(inst.id.rfind("bridge-", 0) == 0);
    const auto [a, b] = gold_paragraph_indices(inst);
    REQUIRE(a >= 0);
    REQUIRE(b >= 0);
    const auto remapped = remap_srl_for_slots(corpus.srl.at(inst.id), a, b);
    const std::array<Paragraph, 2> selected = {inst.contexts[static_cast<std::size_t>(a)],
                                               inst.contexts[static_cast<std::size_t>(b)]};
    const HeteroGraph g = build_graph(inst.question, selected, remapped, h.graph_config());

    // the two gold sentence nodes are directly connected (rule 2)
    std::vector<int> gold_nodes;
    for (std::size_t i = 0; i < g.doc_count; ++i) {
      const Node& n = g.nodes[i];
      if (n.kind != NodeKind::sentence) continue;
      if (inst.gold_sf.count(
              {g.paragraph_titles[static_cast<std::size_t>(n.paragraph)], n.sentence}))
        gold_nodes.push_back(static_cast<int>(i));
    }
    REQUIRE(gold_nodes.size() == 2);
    CHECK(g.adjacency.at(static_cast<std::size_t>(gold_nodes[0]),
                         static_cast<std::size_t>(gold_nodes[1])) > 0.0);
  }
}

TEST_CASE("comparison templates mirror the two-entity question shape") {
  const auto corpus = generate_corpus(config(16, 0.0, 8));
  int span_count = 0, yesno_count = 0;
  for (const auto& inst : corpus.instances) {
    if (inst.id.rfind("cmpspan-", 0) == 0) {
      ++span_count;
      CHECK(inst.question[0] == "who");
      CHECK(std::find(inst.question.begin(), inst.question.end(), "or") != inst.question.end());
      CHECK(inst.answer.type == AnswerType::span);
      // both gold sentences carry a TEMPORAL argument
      int temporal = 0;
      for (const auto& [ref, frames] : corpus.srl.at(inst.id).groups)
        for (const auto& f : frames)
          for (const auto& arg : f.arguments)
            if (arg.role == "TEMPORAL") ++temporal;
      CHECK(temporal >= 2);
    } else {
      ++yesno_count;
      CHECK(inst.id.rfind("cmpyn-", 0) == 0);
      CHECK(inst.question[0] == "did");
      CHECK((inst.answer.type == AnswerType::yes || inst.answer.type == AnswerType::no));
    }
  }
  CHECK(span_count > 0);
  CHECK(yesno_count > 0);
  CHECK(span_count > yesno_count);
}

TEST_CASE("distractors never share argument keys with the question or gold sentences") {
  const auto corpus = generate_corpus(config(20, 0.5, 9));
  for (const auto& inst : corpus.instances) {
    const auto& srl = corpus.srl.at(inst.id);
    std::set<int> gold_paras;
    for (std::size_t i = 0; i < inst.contexts.size(); ++i)
      if (inst.gold_titles.count(title_text(inst.contexts[i])))
        gold_paras.insert(static_cast<int>(i));

    const auto gold_keys = arg_keys_of(inst, srl, [&](const SentenceRef& r) {
      return r.is_question() || gold_paras.count(r.paragraph) > 0;
    });
    const auto distractor_keys = arg_keys_of(inst, srl, [&](const SentenceRef& r) {
      return !r.is_question() && gold_paras.count(r.paragraph) == 0;
    });
    for (const auto& k : distractor_keys) CHECK(gold_keys.count(k) == 0);
  }
}

TEST_CASE("every generated answer passes exact-match against itself") {
  const auto corpus = generate_corpus(config(20, 0.5, 10));
  for (const auto& inst : corpus.instances) {
    const std::string text = inst.answer.type == AnswerType::span ? inst.answer.text
                             : inst.answer.type == AnswerType::yes ? "yes"
                                                                   : "no";
    CHECK(answer_metrics(text, text).em == 1.0);
  }
}

TEST_CASE("audit") {
  const auto corpus = generate_corpus(config(15, 0.5, 11));
  const GraphConfig gcfg;

  SUBCASE("fresh corpora pass with full coverage") {
    const auto report = audit(corpus.instances, corpus.srl, gcfg, 3);
    CHECK(report.ok());
    CHECK(report.coverage == doctest::Approx(1.0));
    CHECK_NOTHROW(require_audit(report));
  }

  SUBCASE("a broken gold chain is named") {
    auto broken = corpus;
    const std::string victim = broken.instances[3].id;
    broken.srl[victim].groups.clear();  // no frames: chain cannot connect
    const auto report = audit(broken.instances, broken.srl, gcfg, 3);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0] == victim);
    CHECK(report.coverage < 1.0);
    CHECK_THROWS_AS(require_audit(report), Error);
  }

  SUBCASE("audit coverage equals train-eval graph_coverage") {
    Hyper h;  // defaults match the audit's GraphConfig
    const auto report = audit(corpus.instances, corpus.srl, gcfg, h.max_hops);
    const double cov = graph_coverage(corpus.instances, corpus.srl, h);
    CHECK(report.coverage == doctest::Approx(cov));

    auto damaged = corpus;
    for (int k = 0; k < 5; ++k) damaged.srl[damaged.instances[static_cast<std::size_t>(k)].id].groups.clear();
    const auto report2 = audit(damaged.instances, damaged.srl, gcfg, h.max_hops);
    const double cov2 = graph_coverage(damaged.instances, damaged.srl, h);
    CHECK(report2.coverage == doctest::Approx(cov2));
  }
}

TEST_CASE("generated files parse back through the data model") {
  const auto corpus = generate_corpus(config(6, 0.5, 12));
  write_corpus(corpus, "/tmp/rolegraph_synth_inst.jsonl", "/tmp/rolegraph_synth_srl.jsonl");
  const auto instances = load_instances("/tmp/rolegraph_synth_inst.jsonl");
  REQUIRE(instances.size() == corpus.instances.size());
  const auto srl = load_srl("/tmp/rolegraph_synth_srl.jsonl", instances);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    CHECK(instances[i] == corpus.instances[i]);
    CHECK(srl.at(instances[i].id) == corpus.srl.at(instances[i].id));
  }
}

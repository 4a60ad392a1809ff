#include "rolegraph/synth_gen.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "rolegraph/rng.hpp"

namespace rolegraph {

namespace {

std::string pad_num(const char* prefix, std::uint64_t n, int width) {
  std::string digits = std::to_string(n);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return std::string(prefix) + digits;
}

// Token pools; instances draw disjoint sets per category so distractors can
// never share an argument with the gold chain.
struct Pools {
  int ents, verbs, attrs, locs, years;
  explicit Pools(int vocab_size) {
    ents = std::max(vocab_size, 50);
    verbs = std::max(vocab_size / 10, 20);
    attrs = std::max(vocab_size / 10, 20);
    locs = std::max(vocab_size / 10, 20);
    years = 100;
  }
};

class TokenSampler {
 public:
  TokenSampler(Rng& rng, const Pools& pools) : rng_(rng), pools_(pools) {}

  std::string ent() { return pad_num("ent", draw(used_ents_, pools_.ents), 4); }
  std::string verb() { return pad_num("vrb", draw(used_verbs_, pools_.verbs), 3); }
  std::string attr() { return pad_num("att", draw(used_attrs_, pools_.attrs), 3); }
  std::string loc() { return pad_num("loc", draw(used_locs_, pools_.locs), 3); }
  std::string year() { return pad_num("19", draw(used_years_, pools_.years), 2); }

 private:
  std::uint64_t draw(std::set<std::uint64_t>& used, int pool) {
    require(static_cast<int>(used.size()) < pool, Errc::config_error,
            "vocab_size too small for one instance's token needs");
    for (;;) {
      const std::uint64_t x = rng_.below(static_cast<std::uint64_t>(pool));
      if (used.insert(x).second) return x;
    }
  }

  Rng& rng_;
  const Pools& pools_;
  std::set<std::uint64_t> used_ents_, used_verbs_, used_attrs_, used_locs_, used_years_;
};

struct Builder {
  QAInstance inst;
  SrlAnnotation srl;
  // Frames are recorded against pre-shuffle paragraph order and remapped when
  // the context order is finalized.
  std::vector<std::vector<SrlFrame>> para_frames;

  int add_paragraph(const TokenList& title) {
    Paragraph p;
    p.title = title;
    inst.contexts.push_back(std::move(p));
    para_frames.emplace_back();
    return static_cast<int>(inst.contexts.size()) - 1;
  }

  int add_sentence(int para, const TokenList& tokens, std::vector<SrlFrame> frames) {
    auto& p = inst.contexts[static_cast<std::size_t>(para)];
    p.sentences.push_back(tokens);
    const int idx = static_cast<int>(p.sentences.size()) - 1;
    for (auto& f : frames) {
      f.ref = SentenceRef{para, idx};
      para_frames[static_cast<std::size_t>(para)].push_back(std::move(f));
    }
    return idx;
  }

  void add_question_frame(SrlFrame frame) {
    frame.ref = SentenceRef::question();
    srl.groups[SentenceRef::question()].push_back(std::move(frame));
  }

  void finalize(Rng& rng, const SfSet& gold_sf_pre, const std::set<int>& gold_paras) {
    std::vector<int> order(inst.contexts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    std::vector<Paragraph> shuffled;
    std::vector<int> new_pos(order.size());
    for (std::size_t to = 0; to < order.size(); ++to) {
      shuffled.push_back(inst.contexts[static_cast<std::size_t>(order[to])]);
      new_pos[static_cast<std::size_t>(order[to])] = static_cast<int>(to);
    }
    inst.contexts = std::move(shuffled);

    for (std::size_t from = 0; from < para_frames.size(); ++from) {
      for (SrlFrame f : para_frames[from]) {
        f.ref.paragraph = new_pos[from];
        srl.groups[f.ref].push_back(std::move(f));
      }
    }
    for (auto& [ref, frames] : srl.groups)
      std::stable_sort(frames.begin(), frames.end(),
                       [](const SrlFrame& a, const SrlFrame& b) { return a.predicate < b.predicate; });

    inst.gold_sf = gold_sf_pre;  // keyed by title text, unaffected by order
    for (int para : gold_paras)
      inst.gold_titles.insert(
          title_text(inst.contexts[static_cast<std::size_t>(new_pos[static_cast<std::size_t>(para)])]));
  }
};

SrlFrame frame(int predicate, std::vector<SrlArgument> args) {
  SrlFrame f;
  f.predicate = predicate;
  f.arguments = std::move(args);
  return f;
}

// One three-token filler sentence with its own entities. Filler frames use
// ARG0/ARG2 so the ARG1 and ARG roles stay exclusive to gold structure.
void add_filler(Builder& b, int para, TokenSampler& toks) {
  const std::string e1 = toks.ent();
  const std::string v = toks.verb();
  const std::string e2 = toks.ent();
  b.add_sentence(para, {e1, v, e2},
                 {frame(1, {{"ARG0", 0, 1}, {"ARG2", 2, 3}})});
}

void add_distractor(Builder& b, TokenSampler& toks, std::uint64_t& title_counter) {
  const int para = b.add_paragraph({toks.ent(), pad_num("u", title_counter++, 6)});
  for (int s = 0; s < 2; ++s) add_filler(b, para, toks);
}

// Gold sentence placed before or after the filler, decided by the rng.
int add_gold_sentence(Builder& b, int para, TokenSampler& toks, Rng& rng,
                      const TokenList& tokens, std::vector<SrlFrame> frames) {
  const bool gold_first = rng.below(2) == 0;
  if (!gold_first) add_filler(b, para, toks);
  const int idx = b.add_sentence(para, tokens, std::move(frames));
  if (gold_first) add_filler(b, para, toks);
  return idx;
}

QAInstance make_bridge(Rng& rng, const Pools& pools, int n_distractors, const std::string& id,
                       std::uint64_t& title_counter, SrlAnnotation& srl_out) {
  TokenSampler toks(rng, pools);
  Builder b;
  b.inst.id = id;

  const std::string ent_q = toks.ent();
  const std::string ent_bridge = toks.ent();
  const std::string ans = toks.ent();
  const std::string vrb_r = toks.verb();
  const std::string vrb_s = toks.verb();

  const int p1 = b.add_paragraph({ent_q, pad_num("u", title_counter++, 6)});
  const int idx_a = add_gold_sentence(b, p1, toks, rng, {ent_q, vrb_r, ent_bridge},
                                      {frame(1, {{"ARG0", 0, 1}, {"ARG1", 2, 3}})});

  const int p2 = b.add_paragraph({ent_bridge, pad_num("u", title_counter++, 6)});
  const int idx_b = add_gold_sentence(b, p2, toks, rng, {ans, vrb_s, ent_bridge},
                                      {frame(1, {{"ARG0", 0, 1}, {"ARG1", 2, 3}})});

  for (int d = 0; d < n_distractors; ++d) add_distractor(b, toks, title_counter);

  b.inst.question = {"who", "is", "it", "that", vrb_s, "the", "one", "that", ent_q, vrb_r};
  b.add_question_frame(frame(4, {{"ARG0", 0, 1}, {"ARG1", 5, 7}}));
  b.add_question_frame(frame(9, {{"ARG0", 8, 9}}));

  b.inst.answer = {AnswerType::span, ans};
  SfSet gold;
  gold.emplace(title_text(b.inst.contexts[static_cast<std::size_t>(p1)]), idx_a);
  gold.emplace(title_text(b.inst.contexts[static_cast<std::size_t>(p2)]), idx_b);
  b.finalize(rng, gold, {p1, p2});
  srl_out = std::move(b.srl);
  return std::move(b.inst);
}

// "Who is <attribute> X or Y" with TEMPORAL and LOC co-arguments; exactly one
// entity's sentence carries the queried attribute.
QAInstance make_comparison_span(Rng& rng, const Pools& pools, int n_distractors,
                                const std::string& id, std::uint64_t& title_counter,
                                SrlAnnotation& srl_out) {
  TokenSampler toks(rng, pools);
  Builder b;
  b.inst.id = id;

  const std::string ent_x = toks.ent();
  const std::string ent_y = toks.ent();
  const std::string attr_x = toks.attr();
  const std::string attr_y = toks.attr();
  const std::string year_x = toks.year();
  const std::string year_y = toks.year();
  const std::string shared_loc = toks.loc();
  const std::string vrb_born = toks.verb();
  const std::string vrb_in = toks.verb();

  const auto person_sentence = [&](const std::string& ent, const std::string& attr,
                                   const std::string& year) -> TokenList {
    return {ent, "is", attr, vrb_born, year, vrb_in, shared_loc};
  };
  // The location carries its own frame: it links the two sentences (rule 2)
  // without becoming a co-argument of the entity.
  const auto person_frames = [&]() -> std::vector<SrlFrame> {
    return {frame(1, {{"ARG0", 0, 1}, {"ARG", 2, 3}}),
            frame(3, {{"ARG0", 0, 1}, {"TEMPORAL", 4, 5}}),
            frame(5, {{"LOC", 6, 7}})};
  };

  const int p1 = b.add_paragraph({ent_x, pad_num("u", title_counter++, 6)});
  const int idx_a =
      add_gold_sentence(b, p1, toks, rng, person_sentence(ent_x, attr_x, year_x), person_frames());

  const int p2 = b.add_paragraph({ent_y, pad_num("u", title_counter++, 6)});
  const int idx_b =
      add_gold_sentence(b, p2, toks, rng, person_sentence(ent_y, attr_y, year_y), person_frames());

  for (int d = 0; d < n_distractors; ++d) add_distractor(b, toks, title_counter);

  const bool ask_x = rng.below(2) == 0;
  const std::string attr_q = ask_x ? attr_x : attr_y;
  b.inst.question = {"who", "of", "the", "two", "people", "is", attr_q, ent_x, "or", ent_y};
  // Only the queried attribute is annotated, so the question connects to the
  // asked-about sentence alone; the other gold sentence stays reachable
  // through the shared-location edge.
  b.add_question_frame(frame(5, {{"ARG0", 0, 1}, {"ARG", 6, 7}}));

  b.inst.answer = {AnswerType::span, ask_x ? ent_x : ent_y};
  SfSet gold;
  gold.emplace(title_text(b.inst.contexts[static_cast<std::size_t>(p1)]), idx_a);
  gold.emplace(title_text(b.inst.contexts[static_cast<std::size_t>(p2)]), idx_b);
  b.finalize(rng, gold, {p1, p2});
  srl_out = std::move(b.srl);
  return std::move(b.inst);
}

// "Did X and Y both <verb> <loc>" yes/no verification against LOC arguments.
QAInstance make_comparison_yesno(Rng& rng, const Pools& pools, int n_distractors,
                                 const std::string& id, std::uint64_t& title_counter,
                                 SrlAnnotation& srl_out) {
  TokenSampler toks(rng, pools);
  Builder b;
  b.inst.id = id;

  const std::string ent_x = toks.ent();
  const std::string ent_y = toks.ent();
  const std::string attr_shared = toks.attr();
  const std::string vrb_in = toks.verb();

  const std::uint64_t variant = rng.below(3);  // 0: yes, 1/2: no
  const std::string loc_q = toks.loc();
  std::string loc_a, loc_b;
  if (variant == 0) {
    loc_a = loc_b = loc_q;
  } else if (variant == 1) {
    loc_a = loc_q;
    loc_b = toks.loc();
  } else {
    loc_a = toks.loc();
    loc_b = toks.loc();
  }

  const auto person_sentence = [&](const std::string& ent, const std::string& loc) -> TokenList {
    return {ent, "is", attr_shared, vrb_in, loc};
  };
  const auto person_frames = [&]() -> std::vector<SrlFrame> {
    return {frame(1, {{"ARG0", 0, 1}, {"ARG", 2, 3}}),
            frame(3, {{"ARG0", 0, 1}, {"LOC", 4, 5}})};
  };

  const int p1 = b.add_paragraph({ent_x, pad_num("u", title_counter++, 6)});
  const int idx_a = b.add_sentence(p1, person_sentence(ent_x, loc_a), person_frames());

  const int p2 = b.add_paragraph({ent_y, pad_num("u", title_counter++, 6)});
  const int idx_b = b.add_sentence(p2, person_sentence(ent_y, loc_b), person_frames());

  for (int d = 0; d < n_distractors; ++d) add_distractor(b, toks, title_counter);

  b.inst.question = {"did", "the", "two", "of", "them", ent_x, "and", ent_y, "both", vrb_in,
                     loc_q};
  b.add_question_frame(frame(9, {{"ARG0", 5, 6}, {"ARG0", 7, 8}, {"LOC", 10, 11}}));

  b.inst.answer = {variant == 0 ? AnswerType::yes : AnswerType::no, ""};
  SfSet gold;
  gold.emplace(title_text(b.inst.contexts[static_cast<std::size_t>(p1)]), idx_a);
  gold.emplace(title_text(b.inst.contexts[static_cast<std::size_t>(p2)]), idx_b);
  b.finalize(rng, gold, {p1, p2});
  srl_out = std::move(b.srl);
  return std::move(b.inst);
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  require(cfg.n_instances >= 0 && cfg.n_distractors >= 0 && cfg.bridge_fraction >= 0.0 &&
              cfg.bridge_fraction <= 1.0,
          Errc::config_error, "invalid synth config");
  SynthCorpus corpus;
  Rng rng(cfg.seed);
  const Pools pools(cfg.vocab_size);
  std::uint64_t title_counter = 0;
  int cmp_counter = 0;

  for (int i = 0; i < cfg.n_instances; ++i) {
    const bool bridge = rng.uniform() < cfg.bridge_fraction;
    SrlAnnotation srl;
    QAInstance inst;
    if (bridge) {
      inst = make_bridge(rng, pools, cfg.n_distractors, pad_num("bridge-", static_cast<std::uint64_t>(i), 6),
                         title_counter, srl);
    } else if (cmp_counter++ % 4 == 3) {
      inst = make_comparison_yesno(rng, pools, cfg.n_distractors,
                                   pad_num("cmpyn-", static_cast<std::uint64_t>(i), 6),
                                   title_counter, srl);
    } else {
      inst = make_comparison_span(rng, pools, cfg.n_distractors,
                                  pad_num("cmpspan-", static_cast<std::uint64_t>(i), 6),
                                  title_counter, srl);
    }
    corpus.srl.emplace(inst.id, std::move(srl));
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::string& instances_path,
                  const std::string& srl_path) {
  std::ofstream inst_out(instances_path);
  require(inst_out.good(), Errc::config_error, "cannot write " + instances_path);
  std::ofstream srl_out(srl_path);
  require(srl_out.good(), Errc::config_error, "cannot write " + srl_path);
  for (const auto& inst : corpus.instances) {
    inst_out << serialize_instance(inst) << '\n';
    srl_out << serialize_srl(inst.id, corpus.srl.at(inst.id)) << '\n';
  }
}

AuditReport audit(const std::vector<QAInstance>& instances,
                  const std::map<std::string, SrlAnnotation>& srl, const GraphConfig& cfg,
                  int max_hops) {
  AuditReport report;
  report.total = static_cast<int>(instances.size());
  int connected = 0;
  static const SrlAnnotation empty_srl;

  for (const auto& inst : instances) {
    bool bad = false;

    // Two gold paragraphs present, in context order.
    int first = -1, second = -1;
    for (std::size_t i = 0; i < inst.contexts.size(); ++i) {
      if (!inst.gold_titles.count(title_text(inst.contexts[i]))) continue;
      (first < 0 ? first : second) = static_cast<int>(i);
    }
    if (first < 0 || second < 0) {
      report.failures.push_back(inst.id);
      continue;
    }

    const auto it = srl.find(inst.id);
    const SrlAnnotation remapped =
        remap_srl_for_slots(it == srl.end() ? empty_srl : it->second, first, second);
    const std::array<Paragraph, 2> selected = {inst.contexts[static_cast<std::size_t>(first)],
                                               inst.contexts[static_cast<std::size_t>(second)]};
    const HeteroGraph g = build_graph(inst.question, selected, remapped, cfg);

    // Connectivity of the gold chain, checked directly on the adjacency
    // matrix (independent of the sf-chain walker).
    std::vector<int> gold_nodes;
    for (std::size_t n = 1; n < g.doc_count; ++n) {
      const Node& node = g.nodes[n];
      if (node.kind != NodeKind::sentence) continue;
      if (inst.gold_sf.count(
              {g.paragraph_titles[static_cast<std::size_t>(node.paragraph)], node.sentence}))
        gold_nodes.push_back(static_cast<int>(n));
    }
    bool chain_ok = false;
    if (gold_nodes.size() == inst.gold_sf.size() &&
        static_cast<int>(gold_nodes.size()) <= max_hops) {
      std::sort(gold_nodes.begin(), gold_nodes.end());
      do {
        int prev = 0;
        bool ok = true;
        for (int node : gold_nodes) {
          if (!(g.adjacency.at(static_cast<std::size_t>(prev), static_cast<std::size_t>(node)) >
                0.0)) {
            ok = false;
            break;
          }
          prev = node;
        }
        if (ok) {
          chain_ok = true;
          break;
        }
      } while (std::next_permutation(gold_nodes.begin(), gold_nodes.end()));
    }
    if (chain_ok)
      ++connected;
    else
      bad = true;

    // Span answers must be recoverable from a gold SF sentence.
    if (inst.answer.type == AnswerType::span) {
      bool found = false;
      for (const auto& [title, idx] : inst.gold_sf) {
        for (std::size_t p = 0; p < inst.contexts.size(); ++p) {
          if (title_text(inst.contexts[p]) != title) continue;
          const auto& sent = inst.contexts[p].sentences[static_cast<std::size_t>(idx)];
          std::string joined;
          for (std::size_t k = 0; k < sent.size(); ++k) {
            if (k) joined += ' ';
            joined += sent[k];
          }
          if (joined.find(inst.answer.text) != std::string::npos) found = true;
        }
      }
      if (!found) bad = true;
    }

    if (bad) report.failures.push_back(inst.id);
  }
  report.coverage =
      instances.empty() ? 0.0 : static_cast<double>(connected) / static_cast<double>(instances.size());
  return report;
}

void require_audit(const AuditReport& report) {
  if (report.ok()) return;
  std::string ids;
  for (const auto& id : report.failures) {
    if (!ids.empty()) ids += ", ";
    ids += id;
  }
  fail(Errc::audit_failure, "audit failed for: " + ids);
}

}  // namespace rolegraph

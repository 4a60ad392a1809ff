#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "rolegraph/data_model.hpp"
#include "rolegraph/rng.hpp"

using namespace rolegraph;

namespace {

QAInstance fixture_instance() {
  QAInstance inst;
  inst.id = "fx-1";
  inst.question = {"who", "played", "ent1"};
  Paragraph p1;
  p1.title = {"alpha", "one"};
  p1.sentences = {{"ent1", "played", "ent2"}, {"ent3", "ran", "ent4"}};
  Paragraph p2;
  p2.title = {"beta", "two"};
  p2.sentences = {{"ent5", "became", "ent2"}, {"ent6", "sat", "ent7"}};
  inst.contexts = {p1, p2};
  inst.answer = {AnswerType::span, "ent5"};
  inst.gold_sf = {{"alpha one", 0}, {"beta two", 0}};
  inst.gold_titles = {"alpha one", "beta two"};
  return inst;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::config_error;
}

}  // namespace

TEST_CASE("parse_instance round trips a structural fixture") {
  const QAInstance inst = fixture_instance();
  const QAInstance parsed = parse_instance(serialize_instance(inst));
  CHECK(parsed == inst);
  CHECK(parsed.contexts.size() == 2);
  CHECK(parsed.contexts[0].sentences.size() + parsed.contexts[1].sentences.size() == 4);
  CHECK(parsed.answer.type == AnswerType::span);

  QAInstance yes = inst;
  yes.answer = {AnswerType::yes, ""};
  CHECK(parse_instance(serialize_instance(yes)).answer.type == AnswerType::yes);
}

TEST_CASE("parse_instance rejects bad records") {
  QAInstance inst = fixture_instance();
  inst.gold_sf = {{"alpha one", 9}};
  CHECK(code_of([&] { parse_instance(serialize_instance(inst)); }) ==
        Errc::dangling_supporting_fact);

  inst = fixture_instance();
  inst.gold_sf = {{"missing title", 0}};
  CHECK(code_of([&] { parse_instance(serialize_instance(inst)); }) ==
        Errc::dangling_supporting_fact);

  CHECK(code_of([] { parse_instance("{\"id\":\"x\"}"); }) == Errc::malformed_record);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","question":["q"],"contexts":[],"answer":{"type":"yes"},"gold_sf":[],"gold_titles":[]})");
        }) == Errc::malformed_record);
  CHECK(code_of([] { parse_instance("not json"); }) == Errc::malformed_record);
}

TEST_CASE("round trip holds on randomized instances") {
  Rng rng(99);
  for (int it = 0; it < 25; ++it) {
    QAInstance inst;
    inst.id = "rnd-" + std::to_string(it);
    const auto token = [&](const char* p) { return std::string(p) + std::to_string(rng.below(50)); };
    for (std::size_t q = 0; q < 1 + rng.below(5); ++q) inst.question.push_back(token("q"));
    const std::size_t n_paras = 1 + rng.below(4);
    for (std::size_t pi = 0; pi < n_paras; ++pi) {
      Paragraph p;
      p.title = {token("t"), std::to_string(pi)};
      const std::size_t n_sents = 1 + rng.below(3);
      for (std::size_t s = 0; s < n_sents; ++s) {
        TokenList sent;
        for (std::size_t w = 0; w < 1 + rng.below(6); ++w) sent.push_back(token("w"));
        p.sentences.push_back(std::move(sent));
      }
      inst.contexts.push_back(std::move(p));
    }
    const auto& para0 = inst.contexts[0];
    inst.gold_titles = {title_text(para0)};
    inst.gold_sf = {{title_text(para0), static_cast<int>(rng.below(para0.sentences.size()))}};
    inst.answer = rng.below(2) ? Answer{AnswerType::yes, ""}
                               : Answer{AnswerType::span, para0.sentences[0][0]};
    CHECK(parse_instance(serialize_instance(inst)) == inst);
  }
}

TEST_CASE("parse_srl validates refs and spans") {
  const QAInstance inst = fixture_instance();

  SrlAnnotation ann;
  SrlFrame f;
  f.ref = SentenceRef{0, 0};
  f.predicate = 1;
  f.arguments = {{"ARG0", 0, 1}, {"ARG1", 2, 3}};
  ann.groups[f.ref].push_back(f);
  SrlFrame fq;
  fq.ref = SentenceRef::question();
  fq.predicate = 1;
  fq.arguments = {{"ARG0", 2, 3}};
  ann.groups[fq.ref].push_back(fq);
  const SrlAnnotation parsed = parse_srl(serialize_srl(inst.id, ann), inst);
  CHECK(parsed == ann);

  const auto line_with = [&](const char* frame_json) {
    return std::string(R"({"id":"fx-1","frames":[)") + frame_json + "]}";
  };
  // empty span [3,3)
  CHECK(code_of([&] {
          parse_srl(line_with(
                        R"({"ref":[0,0],"predicate":1,"arguments":[{"role":"ARG0","start":3,"end":3}]})"),
                    inst);
        }) == Errc::span_out_of_range);
  // span past the sentence end
  CHECK(code_of([&] {
          parse_srl(line_with(
                        R"({"ref":[0,0],"predicate":1,"arguments":[{"role":"ARG0","start":1,"end":9}]})"),
                    inst);
        }) == Errc::span_out_of_range);
  // unknown paragraph
  CHECK(code_of([&] {
          parse_srl(line_with(
                        R"({"ref":[7,0],"predicate":0,"arguments":[{"role":"ARG0","start":0,"end":1}]})"),
                    inst);
        }) == Errc::unknown_sentence_ref);
  // frames get ordered by predicate index within a group
  const auto two = parse_srl(
      line_with(R"({"ref":[0,0],"predicate":2,"arguments":[{"role":"ARG1","start":0,"end":1}]},)"
                R"({"ref":[0,0],"predicate":0,"arguments":[{"role":"ARG0","start":0,"end":1}]})"),
      inst);
  const auto& group = two.groups.at(SentenceRef{0, 0});
  REQUIRE(group.size() == 2);
  CHECK(group[0].predicate == 0);
  CHECK(group[1].predicate == 2);
}

TEST_CASE("truncate_paragraph drops trailing sentences then tail tokens") {
  Paragraph p;
  p.title = {"t1", "t2", "t3", "t4"};
  for (int s = 0; s < 3; ++s) {
    TokenList sent;
    for (int w = 0; w < 10; ++w) sent.push_back("s" + std::to_string(s) + "w" + std::to_string(w));
    p.sentences.push_back(std::move(sent));
  }

  SUBCASE("under the limit: unchanged") { CHECK(truncate_paragraph(p, 256) == p); }

  SUBCASE("title + first sentence + head of the second") {
    const Paragraph t = truncate_paragraph(p, 20);
    CHECK(t.title == p.title);
    REQUIRE(t.sentences.size() == 2);
    CHECK(t.sentences[0] == p.sentences[0]);
    CHECK(t.sentences[1] == TokenList(p.sentences[1].begin(), p.sentences[1].begin() + 6));
  }

  SUBCASE("title alone over the limit") {
    const Paragraph t = truncate_paragraph(p, 1);
    CHECK(t.title == TokenList{"t1"});
    CHECK(t.sentences.empty());
  }

  SUBCASE("idempotent") {
    for (std::size_t limit : {1u, 5u, 14u, 20u, 33u, 100u}) {
      const Paragraph once = truncate_paragraph(p, limit);
      CHECK(truncate_paragraph(once, limit) == once);
    }
  }
}

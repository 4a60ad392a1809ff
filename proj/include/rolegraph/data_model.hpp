#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rolegraph/error.hpp"

namespace rolegraph {

using TokenList = std::vector<std::string>;

struct Paragraph {
  TokenList title;
  std::vector<TokenList> sentences;
  bool operator==(const Paragraph&) const = default;
};

// Title tokens joined with single spaces; the identity used in gold_sf pairs.
std::string title_text(const Paragraph& p);

enum class AnswerType { yes, no, span };

struct Answer {
  AnswerType type = AnswerType::span;
  std::string text;  // non-empty iff type == span
  bool operator==(const Answer&) const = default;
};

using SfSet = std::set<std::pair<std::string, int>>;  // (paragraph title, sentence index)

struct QAInstance {
  std::string id;
  TokenList question;
  std::vector<Paragraph> contexts;
  Answer answer;
  SfSet gold_sf;
  std::set<std::string> gold_titles;
  bool operator==(const QAInstance&) const = default;
};

// Sentence identity: (paragraph_index, sentence_index); {-1,-1} is the question.
struct SentenceRef {
  int paragraph = -1;
  int sentence = -1;
  static SentenceRef question() { return {}; }
  bool is_question() const { return paragraph < 0; }
  auto operator<=>(const SentenceRef&) const = default;
};

struct SrlArgument {
  std::string role;
  int start = 0;  // half-open token range [start, end)
  int end = 0;
  bool operator==(const SrlArgument&) const = default;
};

struct SrlFrame {
  SentenceRef ref;
  int predicate = 0;  // token index of the predicate
  std::vector<SrlArgument> arguments;
  bool operator==(const SrlFrame&) const = default;
};

struct SrlAnnotation {
  // One group per sentence ref; frames inside a group ordered by predicate index.
  std::map<SentenceRef, std::vector<SrlFrame>> groups;
  bool operator==(const SrlAnnotation&) const = default;
};

// Line-delimited record formats (see README for schemas).
QAInstance parse_instance(const std::string& line);
std::string serialize_instance(const QAInstance& inst);
SrlAnnotation parse_srl(const std::string& line, const QAInstance& inst);
std::string serialize_srl(const std::string& id, const SrlAnnotation& srl);

// Keeps the title, then whole sentences while they fit, then a head of the
// first sentence that does not; everything after is dropped.
Paragraph truncate_paragraph(const Paragraph& p, std::size_t max_tokens);

std::vector<QAInstance> load_instances(const std::string& path);
// Keyed by instance id; every record must match a loaded instance.
std::map<std::string, SrlAnnotation> load_srl(const std::string& path,
                                              const std::vector<QAInstance>& instances);

}  // namespace rolegraph

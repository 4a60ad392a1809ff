#include "rolegraph/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rolegraph {

using nlohmann::json;

namespace {

bool clean_token(const std::string& t) {
  if (t.empty()) return false;
  return std::none_of(t.begin(), t.end(),
                      [](unsigned char c) { return std::isspace(c); });
}

TokenList parse_token_list(const json& j, const char* what) {
  require(j.is_array() && !j.empty(), Errc::malformed_record,
          std::string(what) + " must be a non-empty token array");
  TokenList out;
  out.reserve(j.size());
  for (const auto& t : j) {
    require(t.is_string(), Errc::malformed_record, std::string(what) + " token must be a string");
    std::string tok = t.get<std::string>();
    require(clean_token(tok), Errc::malformed_record,
            std::string(what) + " token must be non-empty and whitespace-free");
    out.push_back(std::move(tok));
  }
  return out;
}

json token_list_json(const TokenList& tokens) { return json(tokens); }

json parse_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  require(!j.is_discarded() && j.is_object(), Errc::malformed_record, "record is not a JSON object");
  return j;
}

SentenceRef parse_ref(const json& j) {
  if (j.is_string()) {
    require(j.get<std::string>() == "q", Errc::malformed_record, "string ref must be \"q\"");
    return SentenceRef::question();
  }
  require(j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer(),
          Errc::malformed_record, "ref must be \"q\" or [paragraph, sentence]");
  return SentenceRef{j[0].get<int>(), j[1].get<int>()};
}

json ref_json(const SentenceRef& r) {
  if (r.is_question()) return json("q");
  return json::array({r.paragraph, r.sentence});
}

}  // namespace

std::string title_text(const Paragraph& p) {
  std::string out;
  for (std::size_t i = 0; i < p.title.size(); ++i) {
    if (i) out += ' ';
    out += p.title[i];
  }
  return out;
}

QAInstance parse_instance(const std::string& line) {
  const json j = parse_line(line);
  QAInstance inst;
  require(j.contains("id") && j["id"].is_string(), Errc::malformed_record, "missing id");
  inst.id = j["id"].get<std::string>();
  require(j.contains("question"), Errc::malformed_record, "missing question");
  inst.question = parse_token_list(j["question"], "question");

  require(j.contains("contexts") && j["contexts"].is_array() && !j["contexts"].empty(),
          Errc::malformed_record, "contexts must be a non-empty array");
  for (const auto& pj : j["contexts"]) {
    require(pj.is_object() && pj.contains("title") && pj.contains("sentences"),
            Errc::malformed_record, "paragraph needs title and sentences");
    Paragraph p;
    p.title = parse_token_list(pj["title"], "title");
    require(pj["sentences"].is_array() && !pj["sentences"].empty(), Errc::malformed_record,
            "paragraph must have at least one sentence");
    for (const auto& sj : pj["sentences"]) p.sentences.push_back(parse_token_list(sj, "sentence"));
    inst.contexts.push_back(std::move(p));
  }

  require(j.contains("answer") && j["answer"].is_object() && j["answer"].contains("type"),
          Errc::malformed_record, "missing answer.type");
  const std::string type = j["answer"]["type"].get<std::string>();
  if (type == "yes") {
    inst.answer = {AnswerType::yes, ""};
  } else if (type == "no") {
    inst.answer = {AnswerType::no, ""};
  } else if (type == "span") {
    require(j["answer"].contains("text") && j["answer"]["text"].is_string(),
            Errc::malformed_record, "span answer needs text");
    inst.answer = {AnswerType::span, j["answer"]["text"].get<std::string>()};
    require(!inst.answer.text.empty(), Errc::malformed_record, "span answer text must be non-empty");
  } else {
    fail(Errc::malformed_record, "answer type must be yes/no/span, got " + type);
  }

  std::map<std::string, int> title_to_para;
  for (std::size_t i = 0; i < inst.contexts.size(); ++i)
    title_to_para.emplace(title_text(inst.contexts[i]), static_cast<int>(i));

  require(j.contains("gold_sf") && j["gold_sf"].is_array(), Errc::malformed_record, "missing gold_sf");
  for (const auto& sfj : j["gold_sf"]) {
    require(sfj.is_array() && sfj.size() == 2 && sfj[0].is_string() && sfj[1].is_number_integer(),
            Errc::malformed_record, "gold_sf entry must be [title, index]");
    const std::string t = sfj[0].get<std::string>();
    const int idx = sfj[1].get<int>();
    auto it = title_to_para.find(t);
    require(it != title_to_para.end(), Errc::dangling_supporting_fact,
            inst.id + ": gold_sf title not in contexts: " + t);
    const auto& sents = inst.contexts[static_cast<std::size_t>(it->second)].sentences;
    require(idx >= 0 && idx < static_cast<int>(sents.size()), Errc::dangling_supporting_fact,
            inst.id + ": gold_sf sentence index out of range for " + t);
    inst.gold_sf.emplace(t, idx);
  }

  require(j.contains("gold_titles") && j["gold_titles"].is_array(), Errc::malformed_record,
          "missing gold_titles");
  for (const auto& tj : j["gold_titles"]) {
    require(tj.is_string(), Errc::malformed_record, "gold_titles entries must be strings");
    const std::string t = tj.get<std::string>();
    require(title_to_para.count(t) > 0, Errc::malformed_record,
            inst.id + ": gold title not in contexts: " + t);
    inst.gold_titles.insert(t);
  }
  return inst;
}

std::string serialize_instance(const QAInstance& inst) {
  json j;
  j["id"] = inst.id;
  j["question"] = token_list_json(inst.question);
  json ctx = json::array();
  for (const auto& p : inst.contexts) {
    json pj;
    pj["title"] = token_list_json(p.title);
    json sents = json::array();
    for (const auto& s : p.sentences) sents.push_back(token_list_json(s));
    pj["sentences"] = std::move(sents);
    ctx.push_back(std::move(pj));
  }
  j["contexts"] = std::move(ctx);
  switch (inst.answer.type) {
    case AnswerType::yes: j["answer"] = {{"type", "yes"}}; break;
    case AnswerType::no: j["answer"] = {{"type", "no"}}; break;
    case AnswerType::span: j["answer"] = {{"type", "span"}, {"text", inst.answer.text}}; break;
  }
  json sf = json::array();
  for (const auto& [t, i] : inst.gold_sf) sf.push_back(json::array({t, i}));
  j["gold_sf"] = std::move(sf);
  j["gold_titles"] = json(std::vector<std::string>(inst.gold_titles.begin(), inst.gold_titles.end()));
  return j.dump();
}

SrlAnnotation parse_srl(const std::string& line, const QAInstance& inst) {
  const json j = parse_line(line);
  require(j.contains("id") && j["id"].is_string() && j["id"].get<std::string>() == inst.id,
          Errc::malformed_record, "SRL record id does not match instance");
  require(j.contains("frames") && j["frames"].is_array(), Errc::malformed_record, "missing frames");

  SrlAnnotation out;
  for (const auto& fj : j["frames"]) {
    require(fj.is_object() && fj.contains("ref") && fj.contains("predicate") &&
                fj.contains("arguments"),
            Errc::malformed_record, "frame needs ref, predicate, arguments");
    SrlFrame frame;
    frame.ref = parse_ref(fj["ref"]);

    const TokenList* sentence = nullptr;
    if (frame.ref.is_question()) {
      sentence = &inst.question;
    } else {
      require(frame.ref.paragraph >= 0 &&
                  frame.ref.paragraph < static_cast<int>(inst.contexts.size()),
              Errc::unknown_sentence_ref,
              inst.id + ": frame paragraph index out of range");
      const auto& para = inst.contexts[static_cast<std::size_t>(frame.ref.paragraph)];
      require(frame.ref.sentence >= 0 &&
                  frame.ref.sentence < static_cast<int>(para.sentences.size()),
              Errc::unknown_sentence_ref, inst.id + ": frame sentence index out of range");
      sentence = &para.sentences[static_cast<std::size_t>(frame.ref.sentence)];
    }
    const int len = static_cast<int>(sentence->size());

    require(fj["predicate"].is_number_integer(), Errc::malformed_record, "predicate must be an integer");
    frame.predicate = fj["predicate"].get<int>();
    require(frame.predicate >= 0 && frame.predicate < len, Errc::span_out_of_range,
            inst.id + ": predicate index outside sentence");

    require(fj["arguments"].is_array(), Errc::malformed_record, "arguments must be an array");
    for (const auto& aj : fj["arguments"]) {
      require(aj.is_object() && aj.contains("role") && aj.contains("start") && aj.contains("end"),
              Errc::malformed_record, "argument needs role, start, end");
      SrlArgument arg;
      arg.role = aj["role"].get<std::string>();
      require(!arg.role.empty(), Errc::malformed_record, "argument role must be non-empty");
      arg.start = aj["start"].get<int>();
      arg.end = aj["end"].get<int>();
      require(arg.start >= 0 && arg.start < arg.end && arg.end <= len, Errc::span_out_of_range,
              inst.id + ": argument span [" + std::to_string(arg.start) + "," +
                  std::to_string(arg.end) + ") invalid for sentence of length " +
                  std::to_string(len));
      frame.arguments.push_back(std::move(arg));
    }
    out.groups[frame.ref].push_back(std::move(frame));
  }
  for (auto& [ref, frames] : out.groups) {
    std::stable_sort(frames.begin(), frames.end(),
                     [](const SrlFrame& a, const SrlFrame& b) { return a.predicate < b.predicate; });
  }
  return out;
}

std::string serialize_srl(const std::string& id, const SrlAnnotation& srl) {
  json j;
  j["id"] = id;
  json frames = json::array();
  for (const auto& [ref, group] : srl.groups) {
    for (const auto& f : group) {
      json fj;
      fj["ref"] = ref_json(f.ref);
      fj["predicate"] = f.predicate;
      json args = json::array();
      for (const auto& a : f.arguments)
        args.push_back({{"role", a.role}, {"start", a.start}, {"end", a.end}});
      fj["arguments"] = std::move(args);
      frames.push_back(std::move(fj));
    }
  }
  j["frames"] = std::move(frames);
  return j.dump();
}

Paragraph truncate_paragraph(const Paragraph& p, std::size_t max_tokens) {
  require(max_tokens >= 1, Errc::config_error, "truncate_paragraph: max_tokens must be >= 1");
  std::size_t total = p.title.size();
  for (const auto& s : p.sentences) total += s.size();
  if (total <= max_tokens) return p;

  Paragraph out;
  if (p.title.size() >= max_tokens) {
    out.title.assign(p.title.begin(), p.title.begin() + static_cast<long>(max_tokens));
    return out;
  }
  out.title = p.title;
  std::size_t budget = max_tokens - p.title.size();
  for (const auto& s : p.sentences) {
    if (budget == 0) break;
    if (s.size() <= budget) {
      out.sentences.push_back(s);
      budget -= s.size();
    } else {
      out.sentences.emplace_back(s.begin(), s.begin() + static_cast<long>(budget));
      budget = 0;
    }
  }
  return out;
}

std::vector<QAInstance> load_instances(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::config_error, "cannot open instance file: " + path);
  std::vector<QAInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_instance(line));
  }
  return out;
}

std::map<std::string, SrlAnnotation> load_srl(const std::string& path,
                                              const std::vector<QAInstance>& instances) {
  std::map<std::string, const QAInstance*> by_id;
  for (const auto& inst : instances) by_id.emplace(inst.id, &inst);

  std::ifstream in(path);
  require(in.good(), Errc::config_error, "cannot open SRL file: " + path);
  std::map<std::string, SrlAnnotation> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = parse_line(line);
    require(j.contains("id") && j["id"].is_string(), Errc::malformed_record, "SRL record missing id");
    const std::string id = j["id"].get<std::string>();
    auto it = by_id.find(id);
    require(it != by_id.end(), Errc::malformed_record, "SRL record for unknown instance: " + id);
    out[id] = parse_srl(line, *it->second);
  }
  return out;
}

}  // namespace rolegraph

#include "rolegraph/graph_build.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace rolegraph {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Merge key: lowercased whitespace-collapsed phrase plus role. Tokens are
// whitespace-free by the data-model invariant, so joining with single spaces
// is already collapsed.
std::string phrase_norm_of(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += lower(tokens[i]);
  }
  return out;
}

const TokenList& tokens_for_ref(const SentenceRef& ref, const TokenList& question,
                                std::span<const Paragraph> selected) {
  if (ref.is_question()) return question;
  return selected[static_cast<std::size_t>(ref.paragraph)]
      .sentences[static_cast<std::size_t>(ref.sentence)];
}

int doc_node_for_ref(const std::vector<Node>& nodes, const SentenceRef& ref) {
  if (ref.is_question()) return 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    if (n.kind == NodeKind::sentence && n.paragraph == ref.paragraph && n.sentence == ref.sentence)
      return static_cast<int>(i);
  }
  fail(Errc::unknown_sentence_ref, "no sentence node for SRL ref");
}

std::pair<int, int> canon(int i, int j) { return i < j ? std::make_pair(i, j) : std::make_pair(j, i); }

// The argument node owning a frame argument, identified through its recorded
// occurrence; -1 when absent (cannot happen for nodes built from the same SRL).
int resolve_arg_node(const std::vector<Node>& nodes, std::size_t doc_count, const SentenceRef& ref,
                     const SrlArgument& arg) {
  const ArgOccurrence occ{ref, arg.start, arg.end};
  for (std::size_t a = doc_count; a < nodes.size(); ++a) {
    const Node& n = nodes[a];
    if (n.role != arg.role) continue;
    if (std::find(n.occurrences.begin(), n.occurrences.end(), occ) != n.occurrences.end())
      return static_cast<int>(a);
  }
  return -1;
}

std::vector<int> frame_members(const std::vector<Node>& nodes, std::size_t doc_count,
                               const SrlFrame& frame) {
  std::vector<int> members;
  for (const auto& arg : frame.arguments) {
    const int node = resolve_arg_node(nodes, doc_count, frame.ref, arg);
    if (node >= 0) members.push_back(node);
  }
  return members;
}

// Start positions where `phrase` occurs as a contiguous subsequence.
std::vector<int> occurrence_starts(const std::vector<std::string>& stream_lower,
                                   const std::vector<std::string>& phrase_lower) {
  std::vector<int> starts;
  if (phrase_lower.empty() || phrase_lower.size() > stream_lower.size()) return starts;
  const std::size_t last = stream_lower.size() - phrase_lower.size();
  for (std::size_t s = 0; s <= last; ++s) {
    bool match = true;
    for (std::size_t k = 0; k < phrase_lower.size(); ++k) {
      if (stream_lower[s + k] != phrase_lower[k]) {
        match = false;
        break;
      }
    }
    if (match) starts.push_back(static_cast<int>(s));
  }
  return starts;
}

// Windows (by start index) containing at least one occurrence of the phrase.
std::vector<char> window_hits(const std::vector<int>& starts, int phrase_len, int window,
                              int total_windows) {
  std::vector<char> hit(static_cast<std::size_t>(total_windows), 0);
  if (phrase_len > window) return hit;
  for (int s : starts) {
    const int lo = std::max(0, s + phrase_len - window);
    const int hi = std::min(s, total_windows - 1);
    for (int w = lo; w <= hi; ++w) hit[static_cast<std::size_t>(w)] = 1;
  }
  return hit;
}

}  // namespace

const std::vector<PredicateSite>& HeteroGraph::predicates_between(int i, int j) const {
  static const std::vector<PredicateSite> empty;
  auto it = predicates.find(canon(i, j));
  return it == predicates.end() ? empty : it->second;
}

std::vector<Node> build_nodes(const TokenList& question, std::span<const Paragraph> selected,
                              const SrlAnnotation& srl) {
  std::vector<Node> nodes;
  {
    Node q;
    q.kind = NodeKind::question;
    q.tokens = question;
    nodes.push_back(std::move(q));
  }
  for (std::size_t p = 0; p < selected.size(); ++p) {
    Node t;
    t.kind = NodeKind::title;
    t.paragraph = static_cast<int>(p);
    t.tokens = selected[p].title;
    nodes.push_back(std::move(t));
    for (std::size_t s = 0; s < selected[p].sentences.size(); ++s) {
      Node n;
      n.kind = NodeKind::sentence;
      n.paragraph = static_cast<int>(p);
      n.sentence = static_cast<int>(s);
      n.tokens = selected[p].sentences[s];
      nodes.push_back(std::move(n));
    }
  }

  // Argument nodes in first-occurrence order; exact-match merge on
  // (normalized phrase, role).
  std::map<std::pair<std::string, std::string>, int> arg_index;
  for (const auto& [ref, frames] : srl.groups) {
    const TokenList& sentence = tokens_for_ref(ref, question, selected);
    for (const auto& frame : frames) {
      for (const auto& arg : frame.arguments) {
        std::vector<std::string> phrase(sentence.begin() + arg.start, sentence.begin() + arg.end);
        const std::string norm = phrase_norm_of(phrase);
        auto key = std::make_pair(norm, arg.role);
        auto it = arg_index.find(key);
        if (it == arg_index.end()) {
          Node n;
          n.kind = NodeKind::argument;
          n.tokens = std::move(phrase);
          n.phrase_norm = norm;
          n.role = arg.role;
          it = arg_index.emplace(key, static_cast<int>(nodes.size())).first;
          nodes.push_back(std::move(n));
        }
        Node& node = nodes[static_cast<std::size_t>(it->second)];
        const ArgOccurrence occ{ref, arg.start, arg.end};
        if (std::find(node.occurrences.begin(), node.occurrences.end(), occ) ==
            node.occurrences.end())
          node.occurrences.push_back(occ);
      }
    }
  }
  return nodes;
}

EdgeSet build_edges(const std::vector<Node>& nodes, std::size_t doc_count,
                    const SrlAnnotation& srl) {
  EdgeSet edges;

  // Rule 1: sentence-argument whenever the argument occurs in that sentence
  // (the question counts as a sentence node; titles carry no SRL refs).
  for (std::size_t a = doc_count; a < nodes.size(); ++a) {
    for (const auto& occ : nodes[a].occurrences) {
      const int s = doc_node_for_ref(nodes, occ.ref);
      edges.sent_arg.insert(canon(s, static_cast<int>(a)));
    }
  }

  // Rules 2 and 4: doc-doc edge whenever two doc nodes share an argument node.
  for (std::size_t a = doc_count; a < nodes.size(); ++a) {
    std::set<int> hosts;
    for (const auto& occ : nodes[a].occurrences) hosts.insert(doc_node_for_ref(nodes, occ.ref));
    for (auto i = hosts.begin(); i != hosts.end(); ++i) {
      for (auto j = std::next(i); j != hosts.end(); ++j) {
        auto e = canon(*i, *j);
        if (e.first == 0)
          edges.quest_sent.insert(e);
        else
          edges.sent_sent.insert(e);
      }
    }
  }

  // Rule 3: argument-argument whenever a predicate frame holds both.
  for (const auto& [ref, frames] : srl.groups) {
    for (const auto& frame : frames) {
      const auto members = frame_members(nodes, doc_count, frame);
      for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j)
          if (members[i] != members[j]) edges.arg_arg.insert(canon(members[i], members[j]));
    }
  }
  return edges;
}

PredicateMatrix build_K(const std::vector<Node>& nodes, std::size_t doc_count,
                        const SrlAnnotation& srl) {
  PredicateMatrix k;
  for (const auto& [ref, frames] : srl.groups) {
    for (const auto& frame : frames) {
      const auto members = frame_members(nodes, doc_count, frame);
      const PredicateSite site{frame.ref, frame.predicate};
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
          if (members[i] == members[j]) continue;
          auto& sites = k[canon(members[i], members[j])];
          if (std::find(sites.begin(), sites.end(), site) == sites.end()) sites.push_back(site);
        }
      }
    }
  }
  for (auto& [key, sites] : k) std::sort(sites.begin(), sites.end());
  return k;
}

std::map<std::pair<int, int>, double> compute_pmi_weights(
    const std::set<std::pair<int, int>>& arg_edges, const std::vector<Node>& nodes,
    const std::vector<std::string>& token_stream, int window, double floor) {
  require(window >= 2, Errc::config_error, "PMI window must be >= 2");
  std::map<std::pair<int, int>, double> weights;
  if (arg_edges.empty()) return weights;

  std::vector<std::string> stream_lower;
  stream_lower.reserve(token_stream.size());
  for (const auto& t : token_stream) stream_lower.push_back(lower(t));

  const int total_windows =
      stream_lower.empty()
          ? 0
          : std::max(1, static_cast<int>(stream_lower.size()) - window + 1);

  // Per-node window membership, computed once.
  std::map<int, std::vector<char>> hits;
  auto hits_for = [&](int node) -> const std::vector<char>& {
    auto it = hits.find(node);
    if (it != hits.end()) return it->second;
    std::vector<std::string> phrase_lower;
    for (const auto& t : nodes[static_cast<std::size_t>(node)].tokens)
      phrase_lower.push_back(lower(t));
    const auto starts = occurrence_starts(stream_lower, phrase_lower);
    return hits
        .emplace(node, window_hits(starts, static_cast<int>(phrase_lower.size()), window,
                                   total_windows))
        .first->second;
  };

  for (const auto& [i, j] : arg_edges) {
    double w = floor;
    if (total_windows > 0) {
      const auto& hi = hits_for(i);
      const auto& hj = hits_for(j);
      long cx = 0, cy = 0, cxy = 0;
      for (int t = 0; t < total_windows; ++t) {
        cx += hi[static_cast<std::size_t>(t)];
        cy += hj[static_cast<std::size_t>(t)];
        cxy += (hi[static_cast<std::size_t>(t)] && hj[static_cast<std::size_t>(t)]) ? 1 : 0;
      }
      if (cxy == total_windows) {
        w = 1.0;  // perfect-association limit of npmi
      } else if (cxy > 0) {
        const double n = static_cast<double>(total_windows);
        const double pxy = static_cast<double>(cxy) / n;
        const double px = static_cast<double>(cx) / n;
        const double py = static_cast<double>(cy) / n;
        const double npmi = std::log(pxy / (px * py)) / (-std::log(pxy));
        w = std::max(npmi, floor);
      }
    }
    weights[{i, j}] = w;
  }
  return weights;
}

std::vector<std::string> pmi_token_stream(const TokenList& question,
                                          std::span<const Paragraph> selected) {
  std::vector<std::string> stream = question;
  for (const auto& p : selected) {
    stream.insert(stream.end(), p.title.begin(), p.title.end());
    for (const auto& s : p.sentences) stream.insert(stream.end(), s.begin(), s.end());
  }
  return stream;
}

HeteroGraph build_graph(const TokenList& question, std::span<const Paragraph> selected,
                        const SrlAnnotation& srl, const GraphConfig& cfg) {
  require(selected.size() == 2, Errc::too_few_paragraphs, "build_graph expects two paragraphs");
  HeteroGraph g;
  g.nodes = build_nodes(question, selected, srl);
  g.doc_count = 1;  // question
  for (const auto& p : selected) g.doc_count += 1 + p.sentences.size();
  g.paragraph_titles = {title_text(selected[0]), title_text(selected[1])};

  const EdgeSet edges = build_edges(g.nodes, g.doc_count, srl);
  g.predicates = build_K(g.nodes, g.doc_count, srl);
  const auto pmi =
      compute_pmi_weights(edges.arg_arg, g.nodes, pmi_token_stream(question, selected),
                          cfg.pmi_window, cfg.pmi_floor);

  const std::size_t n = g.nodes.size();
  g.adjacency = Matrix(n, n);
  auto set_edge = [&](const std::pair<int, int>& e, double w) {
    g.adjacency.at(static_cast<std::size_t>(e.first), static_cast<std::size_t>(e.second)) = w;
    g.adjacency.at(static_cast<std::size_t>(e.second), static_cast<std::size_t>(e.first)) = w;
  };
  for (const auto& e : edges.sent_arg) set_edge(e, 1.0);
  for (const auto& e : edges.sent_sent) set_edge(e, 1.0);
  for (const auto& e : edges.quest_sent) set_edge(e, 1.0);
  for (const auto& [e, w] : pmi) set_edge(e, w);

  g.doc_adj.assign(g.doc_count, {});
  auto add_doc_edge = [&](const std::pair<int, int>& e) {
    g.doc_adj[static_cast<std::size_t>(e.first)].push_back(e.second);
    g.doc_adj[static_cast<std::size_t>(e.second)].push_back(e.first);
  };
  for (const auto& e : edges.sent_sent) add_doc_edge(e);
  for (const auto& e : edges.quest_sent) add_doc_edge(e);
  for (auto& nb : g.doc_adj) std::sort(nb.begin(), nb.end());
  return g;
}

SrlAnnotation remap_srl_for_slots(const SrlAnnotation& srl, int first_idx, int second_idx) {
  SrlAnnotation out;
  for (const auto& [ref, frames] : srl.groups) {
    SentenceRef mapped = ref;
    if (!ref.is_question()) {
      if (ref.paragraph == first_idx)
        mapped.paragraph = 0;
      else if (ref.paragraph == second_idx)
        mapped.paragraph = 1;
      else
        continue;
    }
    auto& group = out.groups[mapped];
    for (SrlFrame f : frames) {
      f.ref = mapped;
      group.push_back(std::move(f));
    }
  }
  return out;
}

std::string node_label(const HeteroGraph& g, int node) {
  const Node& n = g.nodes[static_cast<std::size_t>(node)];
  std::ostringstream ss;
  switch (n.kind) {
    case NodeKind::question: ss << "q"; break;
    case NodeKind::title: ss << "t" << (n.paragraph + 1); break;
    case NodeKind::sentence: ss << "s" << (n.paragraph + 1) << "." << n.sentence; break;
    case NodeKind::argument: ss << n.phrase_norm << " : " << n.role; break;
  }
  return ss.str();
}

std::string export_graph_dot(const HeteroGraph& g) {
  std::ostringstream out;
  out << "graph heterograph {\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const bool doc = i < g.doc_count;
    out << "  n" << i << " [shape=" << (doc ? "circle" : "box") << ", label=\""
        << node_label(g, static_cast<int>(i)) << "\"];\n";
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
      const double w = g.adjacency.at(i, j);
      if (w <= 0.0) continue;
      out << "  n" << i << " -- n" << j << " [weight=" << w;
      const auto& sites = g.predicates_between(static_cast<int>(i), static_cast<int>(j));
      if (!sites.empty()) {
        out << ", label=\"";
        for (std::size_t s = 0; s < sites.size(); ++s) {
          if (s) out << ",";
          // Predicate word resolved from the owning sentence.
          const Node* host = nullptr;
          if (sites[s].ref.is_question()) {
            host = &g.nodes[0];
          } else {
            for (std::size_t d = 1; d < g.doc_count; ++d) {
              const Node& c = g.nodes[d];
              if (c.kind == NodeKind::sentence && c.paragraph == sites[s].ref.paragraph &&
                  c.sentence == sites[s].ref.sentence) {
                host = &c;
                break;
              }
            }
          }
          if (host) out << host->tokens[static_cast<std::size_t>(sites[s].token_index)];
        }
        out << "\"";
      }
      out << "];\n";
    }
  }
  out << "}\n";
  return out.str();
}

namespace {

json ref_to_json(const SentenceRef& r) {
  if (r.is_question()) return json("q");
  return json::array({r.paragraph, r.sentence});
}

SentenceRef ref_from_json(const json& j) {
  if (j.is_string()) return SentenceRef::question();
  return SentenceRef{j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

std::string export_graph_structured(const HeteroGraph& g) {
  json j;
  j["doc_count"] = g.doc_count;
  j["titles"] = json::array({g.paragraph_titles[0], g.paragraph_titles[1]});
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json nj;
    switch (n.kind) {
      case NodeKind::question: nj["kind"] = "question"; break;
      case NodeKind::title: nj["kind"] = "title"; break;
      case NodeKind::sentence: nj["kind"] = "sentence"; break;
      case NodeKind::argument: nj["kind"] = "argument"; break;
    }
    nj["paragraph"] = n.paragraph;
    nj["sentence"] = n.sentence;
    nj["tokens"] = n.tokens;
    if (n.kind == NodeKind::argument) {
      nj["phrase"] = n.phrase_norm;
      nj["role"] = n.role;
      json occ = json::array();
      for (const auto& o : n.occurrences)
        occ.push_back({{"ref", ref_to_json(o.ref)}, {"start", o.start}, {"end", o.end}});
      nj["occurrences"] = std::move(occ);
    }
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);

  json edges = json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    for (std::size_t k = i + 1; k < g.nodes.size(); ++k)
      if (g.adjacency.at(i, k) > 0.0)
        edges.push_back({{"i", i}, {"j", k}, {"w", g.adjacency.at(i, k)}});
  j["edges"] = std::move(edges);

  json preds = json::array();
  for (const auto& [key, sites] : g.predicates) {
    json sj = json::array();
    for (const auto& s : sites)
      sj.push_back({{"ref", ref_to_json(s.ref)}, {"token", s.token_index}});
    preds.push_back({{"i", key.first}, {"j", key.second}, {"sites", std::move(sj)}});
  }
  j["predicates"] = std::move(preds);
  return j.dump();
}

HeteroGraph import_graph_structured(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded() && j.is_object(), Errc::malformed_record,
          "structured graph is not a JSON object");
  HeteroGraph g;
  g.doc_count = j.at("doc_count").get<std::size_t>();
  g.paragraph_titles = {j.at("titles")[0].get<std::string>(), j.at("titles")[1].get<std::string>()};
  for (const auto& nj : j.at("nodes")) {
    Node n;
    const std::string kind = nj.at("kind").get<std::string>();
    n.kind = kind == "question"  ? NodeKind::question
             : kind == "title"   ? NodeKind::title
             : kind == "sentence" ? NodeKind::sentence
                                  : NodeKind::argument;
    n.paragraph = nj.at("paragraph").get<int>();
    n.sentence = nj.at("sentence").get<int>();
    n.tokens = nj.at("tokens").get<std::vector<std::string>>();
    if (n.kind == NodeKind::argument) {
      n.phrase_norm = nj.at("phrase").get<std::string>();
      n.role = nj.at("role").get<std::string>();
      for (const auto& oj : nj.at("occurrences"))
        n.occurrences.push_back(
            {ref_from_json(oj.at("ref")), oj.at("start").get<int>(), oj.at("end").get<int>()});
    }
    g.nodes.push_back(std::move(n));
  }
  const std::size_t n = g.nodes.size();
  g.adjacency = Matrix(n, n);
  for (const auto& ej : j.at("edges")) {
    const auto i = ej.at("i").get<std::size_t>();
    const auto k = ej.at("j").get<std::size_t>();
    const double w = ej.at("w").get<double>();
    g.adjacency.at(i, k) = w;
    g.adjacency.at(k, i) = w;
  }
  for (const auto& pj : j.at("predicates")) {
    std::vector<PredicateSite> sites;
    for (const auto& sj : pj.at("sites"))
      sites.push_back({ref_from_json(sj.at("ref")), sj.at("token").get<int>()});
    g.predicates[{pj.at("i").get<int>(), pj.at("j").get<int>()}] = std::move(sites);
  }
  g.doc_adj.assign(g.doc_count, {});
  for (std::size_t i = 0; i < g.doc_count; ++i)
    for (std::size_t k = 0; k < g.doc_count; ++k)
      if (k != i && g.adjacency.at(i, k) > 0.0) g.doc_adj[i].push_back(static_cast<int>(k));
  return g;
}

}  // namespace rolegraph

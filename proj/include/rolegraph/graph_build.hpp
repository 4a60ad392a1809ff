#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rolegraph/data_model.hpp"
#include "rolegraph/tensor.hpp"

namespace rolegraph {

enum class NodeKind { question, title, sentence, argument };

struct ArgOccurrence {
  SentenceRef ref;  // paragraph index is the slot (0/1) within the selected pair
  int start = 0;
  int end = 0;
  auto operator<=>(const ArgOccurrence&) const = default;
};

struct Node {
  NodeKind kind = NodeKind::sentence;
  int paragraph = -1;  // slot for title/sentence nodes
  int sentence = -1;
  std::vector<std::string> tokens;  // sentence/title/question tokens; argument phrase tokens
  std::string phrase_norm;          // argument merge key: lowercased phrase
  std::string role;                 // argument merge key: role label
  std::vector<ArgOccurrence> occurrences;
  bool operator==(const Node&) const = default;
};

struct PredicateSite {
  SentenceRef ref;
  int token_index = 0;
  auto operator<=>(const PredicateSite&) const = default;
};

// K: accumulated predicate occurrences per argument pair, canonical key i < j.
using PredicateMatrix = std::map<std::pair<int, int>, std::vector<PredicateSite>>;

struct EdgeSet {
  std::set<std::pair<int, int>> sent_arg;   // rule 1
  std::set<std::pair<int, int>> sent_sent;  // rule 2
  std::set<std::pair<int, int>> arg_arg;    // rule 3
  std::set<std::pair<int, int>> quest_sent; // rule 4
};

struct HeteroGraph {
  std::vector<Node> nodes;  // doc nodes first (dense indices), then arguments
  std::size_t doc_count = 0;
  Matrix adjacency;  // symmetric weight matrix A, zero diagonal
  PredicateMatrix predicates;
  std::vector<std::vector<int>> doc_adj;          // sentence-sentence subset of A, incl. question edges
  std::array<std::string, 2> paragraph_titles{};  // title text per slot

  const std::vector<PredicateSite>& predicates_between(int i, int j) const;
  bool operator==(const HeteroGraph&) const = default;
};

struct GraphConfig {
  int pmi_window = 10;
  double pmi_floor = 0.1;
};

// Build stages (exposed individually for testing); build_graph runs them all.
std::vector<Node> build_nodes(const TokenList& question, std::span<const Paragraph> selected,
                              const SrlAnnotation& srl);
EdgeSet build_edges(const std::vector<Node>& nodes, std::size_t doc_count,
                    const SrlAnnotation& srl);
PredicateMatrix build_K(const std::vector<Node>& nodes, std::size_t doc_count,
                        const SrlAnnotation& srl);
// Normalized PMI per rule-3 edge over sliding windows of the token stream,
// floored at cfg.pmi_floor; pairs that never co-occur get the floor.
std::map<std::pair<int, int>, double> compute_pmi_weights(
    const std::set<std::pair<int, int>>& arg_edges, const std::vector<Node>& nodes,
    const std::vector<std::string>& token_stream, int window, double floor);

// `selected` holds exactly the two chosen paragraphs (slot order); SRL refs
// must already use slot paragraph indices 0/1 (see remap_srl_for_slots).
HeteroGraph build_graph(const TokenList& question, std::span<const Paragraph> selected,
                        const SrlAnnotation& srl, const GraphConfig& cfg);

// Filters an instance-level annotation down to the question plus the two
// selected paragraphs and rewrites paragraph indices to slots 0/1.
SrlAnnotation remap_srl_for_slots(const SrlAnnotation& srl, int first_idx, int second_idx);

// The PMI corpus: question plus both selected paragraphs (titles + sentences).
std::vector<std::string> pmi_token_stream(const TokenList& question,
                                          std::span<const Paragraph> selected);

std::string node_label(const HeteroGraph& g, int node);
std::string export_graph_dot(const HeteroGraph& g);
std::string export_graph_structured(const HeteroGraph& g);
HeteroGraph import_graph_structured(const std::string& text);

}  // namespace rolegraph

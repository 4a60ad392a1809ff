#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "rolegraph/rng.hpp"
#include "rolegraph/sf_chain.hpp"

using namespace rolegraph;

namespace {

RnnParams zero_rnn(std::size_t h, std::size_t d_in) {
  RnnParams p;
  p.w = Matrix(h, h);
  p.u = Matrix(h, d_in);
  p.v = Matrix(1, h);
  p.b_h = Matrix(1, h);
  p.b_o = Matrix(1, 1);
  return p;
}

RnnParams random_rnn(Rng& rng, std::size_t h, std::size_t d_in) {
  RnnParams p = zero_rnn(h, d_in);
  for (auto& x : p.w.data) x = rng.uniform(-0.5, 0.5);
  for (auto& x : p.u.data) x = rng.uniform(-0.5, 0.5);
  for (auto& x : p.v.data) x = rng.uniform(-0.5, 0.5);
  for (auto& x : p.b_h.data) x = rng.uniform(-0.5, 0.5);
  for (auto& x : p.b_o.data) x = rng.uniform(-0.5, 0.5);
  return p;
}

// A doc-only graph with given sentence adjacency; node 0 is the question.
HeteroGraph doc_graph(int n_sentences, const std::vector<std::pair<int, int>>& edges) {
  HeteroGraph g;
  Node q;
  q.kind = NodeKind::question;
  q.tokens = {"q"};
  g.nodes.push_back(q);
  for (int s = 0; s < n_sentences; ++s) {
    Node sn;
    sn.kind = NodeKind::sentence;
    sn.paragraph = s % 2;
    sn.sentence = s / 2;
    sn.tokens = {"tok" + std::to_string(s)};
    g.nodes.push_back(sn);
  }
  g.doc_count = g.nodes.size();
  g.paragraph_titles = {"title one", "title two"};
  g.adjacency = Matrix(g.nodes.size(), g.nodes.size());
  g.doc_adj.assign(g.doc_count, {});
  for (const auto& [a, b] : edges) {
    g.adjacency.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = 1.0;
    g.adjacency.at(static_cast<std::size_t>(b), static_cast<std::size_t>(a)) = 1.0;
    g.doc_adj[static_cast<std::size_t>(a)].push_back(b);
    g.doc_adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : g.doc_adj) std::sort(nb.begin(), nb.end());
  return g;
}

RepProvider hashed_reps(std::size_t d_in) {
  return [d_in](int node) {
    std::vector<double> rep(d_in);
    Rng rng(fnv1a64("rep" + std::to_string(node)));
    for (auto& x : rep) x = rng.uniform(-1.0, 1.0);
    return rep;
  };
}

// Exhaustive enumeration of all maximal simple paths with their scores,
// recomputing the RNN chain independently of beam_search.
void enumerate_paths(const HeteroGraph& g, const RepProvider& reps, const RnnParams& p,
                     int max_hops, std::vector<int>& path, const std::vector<double>& hidden,
                     double score, std::vector<ReasoningPath>& out) {
  std::vector<int> frontier;
  for (int nb : g.doc_adj[static_cast<std::size_t>(path.back())])
    if (std::find(path.begin(), path.end(), nb) == path.end()) frontier.push_back(nb);
  if (static_cast<int>(path.size()) >= max_hops + 1 || frontier.empty()) {
    out.push_back({path, {}, score});
    return;
  }
  std::vector<double> logits;
  std::vector<std::vector<double>> hs;
  for (int cand : frontier) {
    const auto step = rnn_step(p, hidden, reps(cand));
    logits.push_back(step.o);
    hs.push_back(step.h);
  }
  const auto logp = log_softmax(logits);
  for (std::size_t c = 0; c < frontier.size(); ++c) {
    path.push_back(frontier[c]);
    enumerate_paths(g, reps, p, max_hops, path, hs[c], score + logp[c], out);
    path.pop_back();
  }
}

}  // namespace

TEST_CASE("rnn_step") {
  SUBCASE("all zeros") {
    const RnnParams p = zero_rnn(3, 2);
    const std::vector<double> h(3, 0.0), x(2, 0.0);
    const auto out = rnn_step(p, h, x);
    CHECK(out.o == 0.0);
    for (double v : out.h) CHECK(v == 0.0);
  }

  SUBCASE("W = 0 makes the step independent of h_prev") {
    Rng rng(3);
    RnnParams p = random_rnn(rng, 3, 2);
    p.w.fill(0.0);
    const std::vector<double> x = {0.3, -0.2};
    const std::vector<double> h1 = {0.9, -0.9, 0.5};
    const std::vector<double> h2 = {-0.1, 0.4, 0.0};
    CHECK(rnn_step(p, h1, x).o == rnn_step(p, h2, x).o);
  }

  SUBCASE("h=2, d_in=2 hand oracle") {
    RnnParams p = zero_rnn(2, 2);
    p.w.at(0, 0) = 0.1;
    p.w.at(0, 1) = 0.2;
    p.w.at(1, 0) = -0.3;
    p.w.at(1, 1) = 0.4;
    p.u.at(0, 0) = 0.5;
    p.u.at(0, 1) = -0.6;
    p.u.at(1, 0) = 0.7;
    p.u.at(1, 1) = 0.8;
    p.v.at(0, 0) = 1.5;
    p.v.at(0, 1) = -2.0;
    p.b_h.at(0, 0) = 0.05;
    p.b_h.at(0, 1) = -0.15;
    p.b_o.at(0, 0) = 0.25;
    const std::vector<double> h_prev = {0.3, -0.4};
    const std::vector<double> x = {0.6, 0.9};

    const double z0 = 0.1 * 0.3 + 0.2 * -0.4 + 0.5 * 0.6 + -0.6 * 0.9 + 0.05;
    const double z1 = -0.3 * 0.3 + 0.4 * -0.4 + 0.7 * 0.6 + 0.8 * 0.9 + -0.15;
    const double h0 = std::tanh(z0), h1 = std::tanh(z1);
    const double o = 1.5 * h0 + -2.0 * h1 + 0.25;

    const auto out = rnn_step(p, h_prev, x);
    CHECK(out.h[0] == doctest::Approx(h0).epsilon(1e-12));
    CHECK(out.h[1] == doctest::Approx(h1).epsilon(1e-12));
    CHECK(out.o == doctest::Approx(o).epsilon(1e-12));
  }

  SUBCASE("shape mismatch throws") {
    const RnnParams p = zero_rnn(3, 2);
    const std::vector<double> h(3, 0.0), x(5, 0.0);
    CHECK_THROWS_AS(rnn_step(p, h, x), Error);
  }
}

TEST_CASE("candidate_rep concatenates the graph row and the summary") {
  const std::vector<double> g_row = {1, 2, 3};
  const std::vector<double> summary = {4, 5};
  const auto rep = candidate_rep(g_row, summary);
  CHECK(rep == std::vector<double>{1, 2, 3, 4, 5});
}

TEST_CASE("beam_search") {
  Rng rng(17);

  SUBCASE("chain graph has a single forced trajectory") {
    const HeteroGraph g = doc_graph(2, {{0, 1}, {1, 2}});
    const RnnParams p = random_rnn(rng, 4, 3);
    const auto paths = beam_search(g, hashed_reps(3), p, 4, 2);
    REQUIRE(!paths.empty());
    CHECK(paths.front().nodes == std::vector<int>{0, 1, 2});
  }

  SUBCASE("isolated question yields the singleton path") {
    const HeteroGraph g = doc_graph(2, {{1, 2}});
    const RnnParams p = random_rnn(rng, 4, 3);
    const auto paths = beam_search(g, hashed_reps(3), p, 4, 2);
    REQUIRE(paths.size() == 1);
    CHECK(paths.front().nodes == std::vector<int>{0});
    CHECK(sf_from_path(g, paths.front()).empty());
  }

  SUBCASE("wide beam equals exhaustive enumeration on random graphs") {
    for (int trial = 0; trial < 50; ++trial) {
      const int n_sent = 3 + static_cast<int>(rng.below(4));  // <= 7 doc nodes
      std::vector<std::pair<int, int>> edges;
      for (int i = 0; i <= n_sent; ++i)
        for (int j = i + 1; j <= n_sent; ++j)
          if (rng.uniform() < 0.45) edges.emplace_back(i, j);
      const HeteroGraph g = doc_graph(n_sent, edges);
      const RnnParams p = random_rnn(rng, 3, 3);
      const int max_hops = 3;

      std::vector<ReasoningPath> all;
      std::vector<int> path = {0};
      std::vector<double> h0(3, 0.0);
      enumerate_paths(g, hashed_reps(3), p, max_hops, path, h0, 0.0, all);
      std::sort(all.begin(), all.end(), [](const ReasoningPath& a, const ReasoningPath& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.nodes < b.nodes;
      });

      const auto beamed =
          beam_search(g, hashed_reps(3), p, static_cast<int>(all.size()), max_hops);
      REQUIRE(!beamed.empty());
      CHECK(beamed.front().nodes == all.front().nodes);
      CHECK(beamed.front().score == doctest::Approx(all.front().score).epsilon(1e-12));

      // paths never revisit and respect adjacency
      for (const auto& pth : beamed) {
        for (std::size_t i = 0; i < pth.nodes.size(); ++i)
          for (std::size_t j = i + 1; j < pth.nodes.size(); ++j)
            CHECK(pth.nodes[i] != pth.nodes[j]);
        for (std::size_t i = 1; i < pth.nodes.size(); ++i)
          CHECK(g.adjacency.at(static_cast<std::size_t>(pth.nodes[i - 1]),
                               static_cast<std::size_t>(pth.nodes[i])) > 0.0);
      }
    }
  }

  SUBCASE("adding a constant to a step's logits leaves ranking unchanged") {
    const HeteroGraph g = doc_graph(3, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
    RnnParams p = random_rnn(rng, 4, 3);
    const auto base = beam_search(g, hashed_reps(3), p, 8, 3);
    p.b_o.at(0, 0) += 25.0;  // shifts every candidate logit at every step
    const auto shifted = beam_search(g, hashed_reps(3), p, 8, 3);
    REQUIRE(base.size() == shifted.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].nodes == shifted[i].nodes);
      CHECK(base[i].score == doctest::Approx(shifted[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("sf_from_path maps sentence nodes and drops duplicates") {
  const HeteroGraph g = doc_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  // doc_graph assigns: node 1 -> (p0,s0), node 2 -> (p1,s0), node 3 -> (p0,s1), node 4 -> (p1,s1)
  ReasoningPath path;
  path.nodes = {0, 1, 2};
  const auto sf = sf_from_path(g, path);
  CHECK(sf == SfSet{{"title one", 0}, {"title two", 0}});

  ReasoningPath through_both;
  through_both.nodes = {0, 1, 3};  // two sentences of the same paragraph
  const auto sf2 = sf_from_path(g, through_both);
  CHECK(sf2.size() == 2);
  CHECK(sf2.count({"title one", 0}) == 1);
  CHECK(sf2.count({"title one", 1}) == 1);
}

TEST_CASE("find_gold_chain orders the gold set against doc adjacency") {
  const HeteroGraph g = doc_graph(3, {{0, 2}, {2, 1}, {1, 3}});
  SUBCASE("connected order is found") {
    // gold = nodes 2 and 1: q -> 2 -> 1 works (0-2, 2-1 edges)
    const SfSet gold = {{"title two", 0}, {"title one", 0}};
    const auto chain = find_gold_chain(g, gold, 3);
    REQUIRE(chain.has_value());
    CHECK(*chain == std::vector<int>{2, 1});
  }
  SUBCASE("disconnected gold returns nothing") {
    const SfSet gold = {{"title one", 0}, {"title one", 1}};  // nodes 1 and 3: q reaches neither
    CHECK(!find_gold_chain(g, gold, 3).has_value());
  }
  SUBCASE("hop cap applies") {
    const SfSet gold = {{"title two", 0}, {"title one", 0}};
    CHECK(!find_gold_chain(g, gold, 1).has_value());
  }
}

TEST_CASE("sf_loss") {
  Rng rng(5);
  SUBCASE("singleton frontier steps contribute zero loss") {
    const HeteroGraph g = doc_graph(2, {{0, 1}, {1, 2}});
    const RnnParams p = random_rnn(rng, 4, 3);
    const double loss = sf_loss(g, hashed_reps(3), p, {1, 2});
    CHECK(loss == doctest::Approx(0.0));
  }

  SUBCASE("uniform logits over k candidates cost ln k per step") {
    const HeteroGraph g = doc_graph(3, {{0, 1}, {0, 2}, {0, 3}});
    const RnnParams p = zero_rnn(4, 3);  // all logits zero -> uniform over 3
    const double loss = sf_loss(g, hashed_reps(3), p, {2});
    CHECK(loss == doctest::Approx(std::log(3.0)));
  }

  SUBCASE("multi-step fixture equals the sum of per-step cross-entropies") {
    const HeteroGraph g =
        doc_graph(4, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {3, 2}, {4, 2}});
    const RnnParams p = random_rnn(rng, 3, 3);
    const auto reps = hashed_reps(3);
    const std::vector<int> gold = {1, 3, 2};

    double expected = 0.0;
    std::vector<double> hidden(3, 0.0);
    std::vector<int> visited = {0};
    for (int next : gold) {
      std::vector<int> frontier;
      for (int nb : g.doc_adj[static_cast<std::size_t>(visited.back())])
        if (std::find(visited.begin(), visited.end(), nb) == visited.end())
          frontier.push_back(nb);
      std::vector<double> logits;
      std::vector<std::vector<double>> hs;
      for (int cand : frontier) {
        const auto step = rnn_step(p, hidden, reps(cand));
        logits.push_back(step.o);
        hs.push_back(step.h);
      }
      const auto logp = log_softmax(logits);
      const auto pos = std::find(frontier.begin(), frontier.end(), next) - frontier.begin();
      expected -= logp[static_cast<std::size_t>(pos)];
      hidden = hs[static_cast<std::size_t>(pos)];
      visited.push_back(next);
    }
    CHECK(sf_loss(g, reps, p, gold) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("disconnected gold chain throws") {
    const HeteroGraph g = doc_graph(2, {{0, 1}});
    const RnnParams p = zero_rnn(2, 3);
    CHECK_THROWS_AS(sf_loss(g, hashed_reps(3), p, {2}), Error);
  }
}

#include "rolegraph/gcn.hpp"

#include <cmath>
#include <set>

namespace rolegraph {

namespace {

// Dense product A_hat * M, falling back to a row-wise nonzero scan for large
// graphs where the dense pass would mostly multiply zeros.
Matrix adj_times(const Matrix& a_hat, const Matrix& m) {
  if (a_hat.rows <= 512) return matmul(a_hat, m);
  Matrix out(a_hat.rows, m.cols);
  for (std::size_t i = 0; i < a_hat.rows; ++i) {
    for (std::size_t j = 0; j < a_hat.cols; ++j) {
      const double w = a_hat.at(i, j);
      if (w != 0.0) kernels::axpy(w, m.row(j), out.row(i), m.cols);
    }
  }
  return out;
}

}  // namespace

Matrix assemble_features(const HeteroGraph& g, const VocabEmbeddings& v, bool use_arg_semantics) {
  const std::size_t d = v.dim;
  Matrix x(g.nodes.size(), 2 * d);

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (i < g.doc_count) {
      if (!n.tokens.empty()) {
        const auto mean = embed_phrase(v, n.tokens);
        std::copy(mean.begin(), mean.end(), x.row(i));
      }
      continue;
    }

    std::vector<std::string> phrase = n.tokens;
    if (use_arg_semantics) phrase.push_back(n.role);
    if (!phrase.empty()) {
      const auto emb = embed_phrase(v, phrase);
      std::copy(emb.begin(), emb.end(), x.row(i));
    }

    if (!use_arg_semantics) continue;
    // Mean embedding of the distinct predicate words attached through K(i,.).
    std::set<PredicateSite> sites;
    for (const auto& [key, ks] : g.predicates) {
      if (key.first != static_cast<int>(i) && key.second != static_cast<int>(i)) continue;
      sites.insert(ks.begin(), ks.end());
    }
    if (sites.empty()) continue;
    std::vector<double> mean(d, 0.0);
    for (const auto& site : sites) {
      const Node* host = nullptr;
      if (site.ref.is_question()) {
        host = &g.nodes[0];
      } else {
        for (std::size_t k = 1; k < g.doc_count; ++k) {
          const Node& c = g.nodes[k];
          if (c.kind == NodeKind::sentence && c.paragraph == site.ref.paragraph &&
              c.sentence == site.ref.sentence) {
            host = &c;
            break;
          }
        }
      }
      require(host != nullptr, Errc::unknown_sentence_ref, "predicate site has no sentence node");
      const auto vec = lookup(v, host->tokens[static_cast<std::size_t>(site.token_index)]);
      kernels::axpy(1.0, vec.data(), mean.data(), d);
    }
    kernels::scale(1.0 / static_cast<double>(sites.size()), mean.data(), d);
    std::copy(mean.begin(), mean.end(), x.row(i) + d);
  }
  return x;
}

Matrix normalize_adjacency(const Matrix& a) {
  require(a.rows == a.cols, Errc::shape_mismatch, "adjacency must be square");
  const std::size_t n = a.rows;
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self loop
    deg += kernels::sum(a.row(i), n);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double aij = a.at(i, j) + (i == j ? 1.0 : 0.0);
      if (aij != 0.0) out.at(i, j) = inv_sqrt_deg[i] * aij * inv_sqrt_deg[j];
    }
  }
  return out;
}

GcnActivations gcn_forward(const Matrix& a_hat, const Matrix& x, const GcnParams& p,
                           std::size_t doc_count) {
  require(a_hat.rows == x.rows && x.cols == p.w1.rows && p.w1.cols == p.w2.rows,
          Errc::shape_mismatch, "gcn_forward: shapes do not conform");
  GcnActivations acts;
  acts.doc_count = doc_count;
  acts.e1 = adj_times(a_hat, matmul(x, p.w1));
  acts.h = relu(acts.e1);
  acts.g = adj_times(a_hat, matmul(acts.h, p.w2));
  return acts;
}

GcnGrads gcn_backward(const Matrix& a_hat, const Matrix& x, const GcnParams& p,
                      const GcnActivations& acts, const Matrix& dg, const Matrix* de1_extra,
                      bool want_dx) {
  require(dg.same_shape(acts.g), Errc::shape_mismatch, "gcn_backward: dg shape mismatch");
  GcnGrads grads;

  // G = A_hat H W2, with A_hat symmetric.
  const Matrix adg = adj_times(a_hat, dg);
  grads.dw2 = matmul_tn(acts.h, adg);
  Matrix dh = matmul_nt(adg, p.w2);

  Matrix de1 = relu_backward(acts.e1, dh);
  if (de1_extra != nullptr) {
    require(de1_extra->same_shape(de1), Errc::shape_mismatch, "gcn_backward: de1 shape mismatch");
    add_inplace(de1, *de1_extra);
  }

  // E1 = A_hat X W1.
  const Matrix ade1 = adj_times(a_hat, de1);
  grads.dw1 = matmul_tn(x, ade1);
  if (want_dx) grads.dx = matmul_nt(ade1, p.w1);
  return grads;
}

}  // namespace rolegraph

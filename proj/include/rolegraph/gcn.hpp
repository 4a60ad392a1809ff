#pragma once

#include "rolegraph/embed.hpp"
#include "rolegraph/graph_build.hpp"
#include "rolegraph/tensor.hpp"

namespace rolegraph {

struct GcnParams {
  Matrix w1;  // F0 x F1
  Matrix w2;  // F1 x F2
};

// Node feature assembly, F0 = 2D.
//   sentence/title/question rows: [mean token embedding ; 0]
//   argument rows: [embed_phrase(phrase ++ role token) ; mean predicate-word embedding]
// The predicate half is zero when K(i,.) is empty. With use_arg_semantics off
// the role token is dropped and the predicate half stays zero.
Matrix assemble_features(const HeteroGraph& g, const VocabEmbeddings& v, bool use_arg_semantics);

// A_hat = D^{-1/2} (A + I) D^{-1/2}
Matrix normalize_adjacency(const Matrix& a);

struct GcnActivations {
  Matrix e1;  // A_hat X W1
  Matrix h;   // relu(e1)
  Matrix g;   // A_hat h W2
  std::size_t doc_count = 0;
};

// Views: g_s = rows [0, doc_count), g_arg = rows [doc_count, n).
GcnActivations gcn_forward(const Matrix& a_hat, const Matrix& x, const GcnParams& p,
                           std::size_t doc_count);

struct GcnGrads {
  Matrix dw1;
  Matrix dw2;
  Matrix dx;  // populated only when want_dx
};

// Exact reverse mode of gcn_forward. de1_extra, when given, is an additional
// upstream gradient on E1 from consumers of the first-layer output.
GcnGrads gcn_backward(const Matrix& a_hat, const Matrix& x, const GcnParams& p,
                      const GcnActivations& acts, const Matrix& dg,
                      const Matrix* de1_extra = nullptr, bool want_dx = false);

}  // namespace rolegraph

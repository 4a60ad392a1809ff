#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "rolegraph/rng.hpp"
#include "rolegraph/synth_gen.hpp"
#include "rolegraph/train_eval.hpp"

using namespace rolegraph;

namespace {

Hyper tiny_hyper() {
  Hyper h;
  h.dims.embed_dim = 8;
  h.dims.d_model = 6;
  h.dims.h_sel = 4;
  h.dims.f1 = 5;
  h.dims.f2 = 4;
  h.dims.rnn_hidden = 5;
  h.dims.head_hidden = 5;
  return h;
}

SynthCorpus tiny_corpus(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_instances = n;
  cfg.n_distractors = 2;
  cfg.bridge_fraction = 0.5;
  cfg.seed = seed;
  return generate_corpus(cfg);
}

Dataset to_dataset(SynthCorpus corpus) {
  return {std::move(corpus.instances), std::move(corpus.srl)};
}

std::vector<PreparedInstance> prepare_all(const Dataset& data, const VocabEmbeddings& v,
                                          const Hyper& h) {
  std::vector<PreparedInstance> out;
  for (const auto& inst : data.instances) {
    const auto [a, b] = gold_paragraph_indices(inst);
    REQUIRE(a >= 0);
    REQUIRE(b >= 0);
    out.push_back(prepare_instance(inst, data.srl.at(inst.id), v, h, a, b));
  }
  return out;
}

}  // namespace

TEST_CASE("joint_loss is the weighted sum") {
  Hyper h;
  h.lambda1 = 0;
  h.lambda2 = 0;
  h.lambda3 = 0;
  CHECK(joint_loss(2, 3, 4, h) == 0.0);
  h.lambda1 = h.lambda2 = h.lambda3 = 1;
  CHECK(joint_loss(2, 3, 4, h) == doctest::Approx(9.0));
  h.lambda1 = 0.5;
  h.lambda2 = 1.0;
  h.lambda3 = 2.0;
  CHECK(joint_loss(2, 3, 4, h) == doctest::Approx(12.0));
  CHECK_THROWS_AS(joint_loss(std::nan(""), 0, 0, h), Error);
}

TEST_CASE("adam_step") {
  Hyper h = tiny_hyper();

  SUBCASE("zero gradient leaves parameters unchanged") {
    ModelParams p = init_params(h.dims, 3);
    ModelParams grads = make_params(h.dims);
    AdamState st = make_adam_state(p);
    const ModelParams before = p;
    adam_step(p, grads, st, h);
    CHECK(param_refs(p).size() == param_refs(const_cast<ModelParams&>(before)).size());
    for (std::size_t i = 0; i < param_refs(p).size(); ++i)
      CHECK(*param_refs(p)[i].tensor ==
            *param_refs(const_cast<ModelParams&>(before))[i].tensor);
    CHECK(st.t == 1);
  }

  SUBCASE("scalar hand case with bias correction") {
    // theta=1, g=0.5, lr=0.1: m_hat=0.5, v_hat=0.25 -> theta' ~ 0.9
    Hyper h1 = h;
    h1.lr = 0.1;
    h1.beta1 = 0.9;
    h1.beta2 = 0.999;
    h1.eps_adam = 1e-8;
    ModelParams p = make_params(h.dims);
    ModelParams g = make_params(h.dims);
    p.rnn.b_o.at(0, 0) = 1.0;
    g.rnn.b_o.at(0, 0) = 0.5;
    AdamState st = make_adam_state(p);
    adam_step(p, g, st, h1);
    CHECK(p.rnn.b_o.at(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-9));
  }

  SUBCASE("two sequential steps replay identically") {
    ModelParams p1 = init_params(h.dims, 4);
    ModelParams p2 = init_params(h.dims, 4);
    ModelParams g1 = init_params(h.dims, 5);
    ModelParams g2 = init_params(h.dims, 6);
    AdamState s1 = make_adam_state(p1);
    AdamState s2 = make_adam_state(p2);
    adam_step(p1, g1, s1, h);
    adam_step(p1, g2, s1, h);
    adam_step(p2, g1, s2, h);
    adam_step(p2, g2, s2, h);
    for (std::size_t i = 0; i < param_refs(p1).size(); ++i)
      CHECK(*param_refs(p1)[i].tensor == *param_refs(p2)[i].tensor);
  }
}

TEST_CASE("answer_metrics fixtures") {
  SUBCASE("normalization forgives case and articles") {
    const auto s = answer_metrics("The Cat", "cat");
    CHECK(s.em == 1.0);
    CHECK(s.f1 == 1.0);
  }
  SUBCASE("half overlap") {
    // "x b" not "a b": the SQuAD-style normalizer strips the article "a"
    const auto s = answer_metrics("x b", "b c");
    CHECK(s.em == 0.0);
    CHECK(s.f1 == doctest::Approx(0.5));
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.5));
  }
  SUBCASE("empty prediction") {
    const auto s = answer_metrics("", "x");
    CHECK(s.em == 0.0);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("em and f1 are symmetric") {
    const char* pairs[][2] = {{"a b c", "c b"}, {"yes", "no"}, {"the cat", "cat"}, {"x", "x y"}};
    for (const auto& pr : pairs) {
      CHECK(answer_metrics(pr[0], pr[1]).em == answer_metrics(pr[1], pr[0]).em);
      CHECK(answer_metrics(pr[0], pr[1]).f1 ==
            doctest::Approx(answer_metrics(pr[1], pr[0]).f1));
    }
  }
  SUBCASE("punctuation stripped") {
    CHECK(answer_metrics("ent-42", "ent42").em == 1.0);
  }
}

TEST_CASE("sf_and_joint_metrics fixtures") {
  const SfSet gold = {{"t1", 0}, {"t2", 1}};
  const AnswerScore perfect{1, 1, 1, 1};

  SUBCASE("exact match everywhere") {
    const auto s = sf_and_joint_metrics(gold, gold, perfect);
    CHECK(s.sf_em == 1.0);
    CHECK(s.sf_f1 == 1.0);
    CHECK(s.joint_em == 1.0);
    CHECK(s.joint_f1 == 1.0);
  }
  SUBCASE("right SF but zero answer kills the joint score") {
    const AnswerScore wrong{0, 0, 0, 0};
    const auto s = sf_and_joint_metrics(gold, gold, wrong);
    CHECK(s.sf_f1 == 1.0);
    CHECK(s.joint_em == 0.0);
    CHECK(s.joint_f1 == 0.0);
  }
  SUBCASE("one of two recovered with perfect answer") {
    const SfSet pred = {{"t1", 0}};
    const auto s = sf_and_joint_metrics(pred, gold, perfect);
    CHECK(s.sf_em == 0.0);
    CHECK(s.sf_f1 == doctest::Approx(2.0 / 3.0));
    CHECK(s.joint_f1 == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("joint_em never exceeds its factors") {
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
      SfSet pred;
      if (rng.below(2)) pred.insert({"t1", 0});
      if (rng.below(2)) pred.insert({"t2", 1});
      if (rng.below(2)) pred.insert({"t3", 2});
      AnswerScore ans;
      ans.em = rng.below(2) ? 1.0 : 0.0;
      ans.f1 = ans.precision = ans.recall = ans.em ? 1.0 : rng.uniform(0, 1);
      const auto s = sf_and_joint_metrics(pred, gold, ans);
      CHECK(s.joint_em <= std::min(ans.em, s.sf_em) + 1e-12);
    }
  }
}

TEST_CASE("compute_gradients: zero lambdas give zero gradients") {
  Hyper h = tiny_hyper();
  h.lambda1 = h.lambda2 = h.lambda3 = 0.0;
  const VocabEmbeddings v = make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed);
  const Dataset data = to_dataset(tiny_corpus(2, 11));
  const auto prepared = prepare_all(data, v, h);
  const ModelParams params = init_params(h.dims, 7);

  std::vector<const PreparedInstance*> batch;
  for (const auto& p : prepared) batch.push_back(&p);
  auto res = compute_gradients(params, v, batch, h);
  CHECK(res.loss == 0.0);
  for (const auto& [name, tensor] : param_refs(res.grads))
    for (double x : tensor->data) CHECK(x == 0.0);
}

TEST_CASE("compute_gradients matches central finite differences") {
  Hyper h = tiny_hyper();
  const VocabEmbeddings v = make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed);
  const Dataset data = to_dataset(tiny_corpus(2, 12));
  const auto prepared = prepare_all(data, v, h);
  REQUIRE(prepared.size() == 2);
  std::vector<const PreparedInstance*> batch;
  for (const auto& p : prepared) batch.push_back(&p);

  ModelParams params = init_params(h.dims, 77);
  auto res = compute_gradients(params, v, batch, h);

  const double step = 1e-4;
  auto refs = param_refs(params);
  auto grefs = param_refs(res.grads);
  int checked = 0;
  for (std::size_t ti = 0; ti < refs.size(); ++ti) {
    if (!is_stage2_tensor(refs[ti].name)) continue;  // selector trained separately
    Matrix& tensor = *refs[ti].tensor;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor.data[i];
      tensor.data[i] = saved + step;
      const double up = batch_loss(params, v, batch, h);
      tensor.data[i] = saved - step;
      const double down = batch_loss(params, v, batch, h);
      tensor.data[i] = saved;
      const double fd = (up - down) / (2 * step);
      const double analytic = grefs[ti].tensor->data[i];
      const double tol = 1e-6 + 1e-3 * std::max(std::abs(fd), std::abs(analytic));
      if (std::abs(analytic - fd) > tol) {
        CAPTURE(refs[ti].name);
        CAPTURE(i);
        CHECK(std::abs(analytic - fd) <= tol);
      }
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("selector gradients match central finite differences") {
  Hyper h = tiny_hyper();
  const VocabEmbeddings v = make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed);
  const Dataset data = to_dataset(tiny_corpus(2, 13));

  std::vector<SelectorPrepared> prepared;
  for (const auto& inst : data.instances)
    prepared.push_back(prepare_selector(truncate_instance(inst, h.max_para_tokens), v, h));
  std::vector<const SelectorPrepared*> batch;
  for (const auto& p : prepared) batch.push_back(&p);

  ModelParams params = init_params(h.dims, 78);
  auto res = selector_gradients(params, batch, h);

  const double step = 1e-4;
  auto refs = param_refs(params);
  auto grefs = param_refs(res.grads);
  for (std::size_t ti = 0; ti < refs.size(); ++ti) {
    const bool selector_tensor = !is_stage2_tensor(refs[ti].name);
    Matrix& tensor = *refs[ti].tensor;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      if (!selector_tensor) {
        CHECK(grefs[ti].tensor->data[i] == 0.0);
        continue;
      }
      const double saved = tensor.data[i];
      tensor.data[i] = saved + step;
      const double up = selector_batch_loss(params, batch, h);
      tensor.data[i] = saved - step;
      const double down = selector_batch_loss(params, batch, h);
      tensor.data[i] = saved;
      const double fd = (up - down) / (2 * step);
      const double analytic = grefs[ti].tensor->data[i];
      const double tol = 1e-6 + 1e-3 * std::max(std::abs(fd), std::abs(analytic));
      CHECK(std::abs(analytic - fd) <= tol);
    }
  }
}

TEST_CASE("doubling lambda2 doubles exactly the SF gradient contribution") {
  Hyper h = tiny_hyper();
  const VocabEmbeddings v = make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed);
  const Dataset data = to_dataset(tiny_corpus(2, 14));
  const auto prepared = prepare_all(data, v, h);
  std::vector<const PreparedInstance*> batch;
  for (const auto& p : prepared) batch.push_back(&p);
  const ModelParams params = init_params(h.dims, 79);

  Hyper h0 = h, h1 = h, h2 = h;
  h0.lambda2 = 0.0;
  h1.lambda2 = 1.0;
  h2.lambda2 = 2.0;
  const auto g0 = compute_gradients(params, v, batch, h0);
  const auto g1 = compute_gradients(params, v, batch, h1);
  const auto g2 = compute_gradients(params, v, batch, h2);

  auto r0 = param_refs(const_cast<ModelParams&>(g0.grads));
  auto r1 = param_refs(const_cast<ModelParams&>(g1.grads));
  auto r2 = param_refs(const_cast<ModelParams&>(g2.grads));
  for (std::size_t ti = 0; ti < r0.size(); ++ti) {
    for (std::size_t i = 0; i < r0[ti].tensor->size(); ++i) {
      const double d1 = r1[ti].tensor->data[i] - r0[ti].tensor->data[i];
      const double d2 = r2[ti].tensor->data[i] - r0[ti].tensor->data[i];
      CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-9));
    }
  }
}

TEST_CASE("graph_coverage averages per-instance connectivity") {
  Hyper h = tiny_hyper();
  Dataset data = to_dataset(tiny_corpus(6, 15));
  CHECK(graph_coverage(data.instances, data.srl, h) == doctest::Approx(1.0));

  // Remove every frame of one instance's gold sentences: it becomes uncovered.
  const std::string victim = data.instances[0].id;
  data.srl[victim].groups.clear();
  const double cov = graph_coverage(data.instances, data.srl, h);
  CHECK(cov == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("train: epochs=0 keeps the initialization; same seed reproduces history") {
  Hyper h = tiny_hyper();
  h.epochs = 0;
  h.selector_epochs = 0;
  const Dataset train_data = to_dataset(tiny_corpus(4, 16));
  const Dataset dev_data = to_dataset(tiny_corpus(2, 17));

  const TrainResult r = train(train_data, dev_data, h, 99);
  ModelParams init = init_params(h.dims, 99);
  for (std::size_t i = 0; i < param_refs(init).size(); ++i)
    CHECK(*param_refs(const_cast<ModelParams&>(r.params))[i].tensor ==
          *param_refs(init)[i].tensor);
  CHECK(r.history.empty());

  Hyper h2 = h;
  h2.epochs = 2;
  h2.selector_epochs = 2;
  const TrainResult a = train(train_data, dev_data, h2, 123);
  const TrainResult b = train(train_data, dev_data, h2, 123);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].dev.ans_em == b.history[i].dev.ans_em);
    CHECK(a.history[i].dev.sf_em == b.history[i].dev.sf_em);
  }
  // different seed: different initialization, different first-epoch loss
  const TrainResult c = train(train_data, dev_data, h2, 124);
  CHECK(a.history.front().train_loss != c.history.front().train_loss);
}

TEST_CASE("separate-training ablation runs both stages") {
  Hyper h = tiny_hyper();
  h.epochs = 2;
  h.selector_epochs = 1;
  h.ablation.joint_training = false;
  const Dataset train_data = to_dataset(tiny_corpus(4, 18));
  const Dataset dev_data = to_dataset(tiny_corpus(2, 19));
  const TrainResult r = train(train_data, dev_data, h, 5);
  REQUIRE(r.history.size() == 3);  // 1 selector + 1 sf-only + 1 answer-only
  CHECK(r.history[1].stage == "sf-only");
  CHECK(r.history[2].stage == "answer-only");
}

TEST_CASE("no-graph ablation trains and predicts without error") {
  Hyper h = tiny_hyper();
  h.epochs = 1;
  h.selector_epochs = 1;
  h.ablation.use_graph = false;
  const Dataset train_data = to_dataset(tiny_corpus(4, 20));
  const Dataset dev_data = to_dataset(tiny_corpus(2, 21));
  const TrainResult r = train(train_data, dev_data, h, 6);
  CHECK(r.history.size() == 2);
  const MetricsReport rep = evaluate(r.params, make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed),
                                     dev_data, h);
  CHECK(rep.graph_coverage == doctest::Approx(1.0));
}

TEST_CASE("prepare_instance locates gold spans inside gold sentences") {
  Hyper h = tiny_hyper();
  const VocabEmbeddings v = make_hashed_vocab(h.dims.embed_dim, h.dims.oov_seed);
  const Dataset data = to_dataset(tiny_corpus(8, 22));
  for (const auto& inst : data.instances) {
    const auto [a, b] = gold_paragraph_indices(inst);
    const auto prep = prepare_instance(inst, data.srl.at(inst.id), v, h, a, b);
    CHECK(prep.sf_usable);
    if (inst.answer.type == AnswerType::span) {
      REQUIRE(prep.span_usable);
      CHECK(prep.stream[static_cast<std::size_t>(prep.gold_start)] == inst.answer.text);
    }
  }
}

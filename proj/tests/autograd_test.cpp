#include <catch2/catch_amalgamated.hpp>

#include "rexzero/autograd.hpp"
#include "testutil.hpp"

using namespace rexzero;
using namespace rexzero::test;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

// Gradient-checks a graph builder against finite differences over all the
// parameters it touches.
template <typename Builder>
void check_op(const std::string& label, ParamStore& store, Builder&& build,
              double tol = 1e-6) {
  std::mt19937_64 rng(fnv1a(label));
  auto forward = [&] {
    Tape tape;
    return build(tape).scalar();
  };
  auto backward = [&] {
    Tape tape;
    Expr loss = build(tape);
    tape.backward(loss);
  };
  auto result = finite_difference_check(store.all(), forward, backward, 4, rng);
  INFO(label << " max_rel_err=" << result.max_rel_err);
  REQUIRE(result.max_rel_err < tol);
}

}  // namespace

TEST_CASE("elementary op gradients match finite differences") {
  std::mt19937_64 rng(7);
  ParamStore store;
  Parameter& a = store.add("a", 4, 3);
  Parameter& b = store.add("b", 3, 5);
  Parameter& bias = store.add("bias", 1, 5);
  Parameter& c = store.add("c", 4, 5);
  a.value = random_matrix(rng, 4, 3);
  b.value = random_matrix(rng, 3, 5);
  bias.value = random_matrix(rng, 1, 5);
  c.value = random_matrix(rng, 4, 5);
  Matrix probe = random_matrix(rng, 4, 5);

  auto weigh = [&](Tape& t, Expr x) {  // scalarizes with a fixed probe
    return t.sum_all(t.mul_elem(x, t.input(probe.topLeftCorner(x.rows(), x.cols()))));
  };

  check_op("matmul+bias", store, [&](Tape& t) {
    return weigh(t, t.add_row_broadcast(t.matmul(t.param(a), t.param(b)), t.param(bias)));
  });
  check_op("add+mul_elem+scale", store, [&](Tape& t) {
    Expr x = t.add(t.matmul(t.param(a), t.param(b)), t.param(c));
    return weigh(t, t.scale(t.mul_elem(x, x), 0.37));
  });
  check_op("sigmoid+tanh+relu", store, [&](Tape& t) {
    Expr x = t.matmul(t.param(a), t.param(b));
    return weigh(t, t.sigmoid(t.add_scalar(t.tanh_(x), 0.2)));
  });
  check_op("softmax_rows", store, [&](Tape& t) {
    return weigh(t, t.softmax_rows(t.matmul(t.param(a), t.param(b))));
  });
  check_op("transpose+slice+concat", store, [&](Tape& t) {
    Expr x = t.matmul(t.param(a), t.param(b));  // 4x5
    Expr left = t.slice_cols(x, 0, 2);
    Expr right = t.slice_cols(x, 2, 3);
    Expr rejoined = t.concat_cols({left, right});
    Expr stacked = t.concat_rows({t.slice_rows(rejoined, 0, 2), t.slice_rows(rejoined, 2, 2)});
    return weigh(t, stacked);
  });
  check_op("mean_rows+broadcast_row", store, [&](Tape& t) {
    Expr x = t.matmul(t.param(a), t.param(b));
    return weigh(t, t.add(x, t.broadcast_row(t.mean_rows(x), 4)));
  });
}

TEST_CASE("relu gradient away from the kink") {
  ParamStore store;
  Parameter& a = store.add("a", 3, 3);
  std::mt19937_64 rng(11);
  a.value = random_matrix(rng, 3, 3);
  for (int i = 0; i < 3; ++i)  // keep entries off the kink at zero
    for (int j = 0; j < 3; ++j) a.value(i, j) += a.value(i, j) >= 0 ? 0.5 : -0.5;
  Matrix probe = random_matrix(rng, 3, 3);
  check_op("relu", store, [&](Tape& t) {
    return t.sum_all(t.mul_elem(t.relu(t.param(a)), t.input(probe)));
  });
}

TEST_CASE("layer_norm gradients") {
  ParamStore store;
  Parameter& x = store.add("x", 5, 8);
  Parameter& g = store.add("g", 1, 8);
  Parameter& b = store.add("b_", 1, 8);
  std::mt19937_64 rng(13);
  x.value = random_matrix(rng, 5, 8, 2.0);
  g.value = random_matrix(rng, 1, 8).array() + 1.5;
  b.value = random_matrix(rng, 1, 8);
  Matrix probe = random_matrix(rng, 5, 8);
  check_op("layer_norm", store, [&](Tape& t) {
    return t.sum_all(t.mul_elem(t.layer_norm(t.param(x), t.param(g), t.param(b)),
                                t.input(probe)));
  }, 1e-5);
}

TEST_CASE("loss op gradients") {
  ParamStore store;
  Parameter& z = store.add("z", 4, 6);
  std::mt19937_64 rng(17);
  z.value = random_matrix(rng, 4, 6, 2.0);
  Matrix targets(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) targets(i, j) = (rng() % 2) ? 1.0 : 0.0;
  check_op("bce_with_logits_sum", store, [&](Tape& t) {
    return t.bce_with_logits_sum(t.param(z), targets);
  });

  ParamStore store2;
  Parameter& logits = store2.add("logits", 1, 9);
  logits.value = random_matrix(rng, 1, 9, 3.0);
  check_op("softmax_ce", store2,
           [&](Tape& t) { return t.softmax_ce(t.param(logits), 4); });
}

TEST_CASE("gather_rows scatters gradients to the right rows") {
  ParamStore store;
  Parameter& emb = store.add("emb", 6, 4);
  std::mt19937_64 rng(19);
  emb.value = random_matrix(rng, 6, 4);
  Matrix probe = random_matrix(rng, 3, 4);
  std::vector<int> ids = {2, 2, 5};
  auto forward = [&] {
    Tape t;
    return t.sum_all(t.mul_elem(t.gather_rows(emb, ids), t.input(probe))).scalar();
  };
  auto backward = [&] {
    Tape t;
    Expr loss = t.sum_all(t.mul_elem(t.gather_rows(emb, ids), t.input(probe)));
    t.backward(loss);
  };
  std::mt19937_64 probe_rng(21);
  auto result = finite_difference_check(store.all(), forward, backward, 8, probe_rng);
  REQUIRE(result.max_rel_err < 1e-6);
  // untouched rows carry no gradient
  store.zero_grad();
  backward();
  REQUIRE(emb.grad.row(0).norm() == 0.0);
  REQUIRE(emb.grad.row(2).norm() > 0.0);
  REQUIRE_THROWS_AS([&] { Tape t; t.gather_rows(emb, {9}); }(), ContractError);
}

TEST_CASE("constants receive no gradient work") {
  ParamStore store;
  Parameter& a = store.add("a", 2, 2);
  a.value << 1, 2, 3, 4;
  Tape t;
  Expr k = t.input(Matrix::Ones(2, 2));
  Expr loss = t.sum_all(t.mul_elem(t.param(a), k));
  t.backward(loss);
  REQUIRE(a.grad.sum() == Catch::Approx(4.0));
  REQUIRE_FALSE(t.requires_grad(k.idx));
}

TEST_CASE("AdamW optimizes a quadratic and decouples weight decay") {
  ParamStore store;
  Parameter& w = store.add("w", 1, 1);
  w.value(0, 0) = 5.0;
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamW opt(store.all(), cfg);
  for (int i = 0; i < 300; ++i) {
    opt.zero_grad();
    w.grad(0, 0) = 2.0 * (w.value(0, 0) - 1.5);  // d/dw (w-1.5)^2
    opt.step();
  }
  REQUIRE(w.value(0, 0) == Catch::Approx(1.5).margin(1e-3));

  // pure decay with zero gradients shrinks the weight
  ParamStore store2;
  Parameter& v = store2.add("v", 1, 1);
  v.value(0, 0) = 1.0;
  AdamWConfig decay_cfg;
  decay_cfg.lr = 0.1;
  decay_cfg.weight_decay = 0.5;
  AdamW opt2(store2.all(), decay_cfg);
  opt2.step();
  REQUIRE(v.value(0, 0) == Catch::Approx(0.95).margin(1e-9));
}

TEST_CASE("gradient clipping caps the global norm") {
  ParamStore store;
  Parameter& w = store.add("w", 1, 2);
  w.value.setZero();
  AdamWConfig cfg;
  cfg.lr = 1.0;
  cfg.weight_decay = 0.0;
  cfg.clip_norm = 1.0;
  AdamW opt(store.all(), cfg);
  w.grad << 30.0, 40.0;  // norm 50
  opt.step();
  // post-clip gradient is (0.6, 0.8); adam normalizes magnitudes toward lr
  REQUIRE(std::abs(w.value(0, 0)) < 1.01);
  REQUIRE(std::abs(w.value(0, 1)) < 1.01);
}

TEST_CASE("param store save/load round trip") {
  auto dir = temp_dir("params");
  ParamStore store;
  store.add("alpha", 3, 2);
  store.add("beta_b", 1, 4);
  store.init_uniform(99);
  store.save(dir / "p.bin");

  ParamStore other;
  other.add("alpha", 3, 2);
  other.add("beta_b", 1, 4);
  other.load(dir / "p.bin");
  REQUIRE(other.get("alpha").value == store.get("alpha").value);

  // byte-identical on rewrite
  other.save(dir / "q.bin");
  REQUIRE(read_file(dir / "p.bin") == read_file(dir / "q.bin"));

  ParamStore wrong;
  wrong.add("alpha", 2, 3);
  wrong.add("beta_b", 1, 4);
  REQUIRE_THROWS_AS(wrong.load(dir / "p.bin"), DataError);

  ParamStore fewer;
  fewer.add("alpha", 3, 2);
  REQUIRE_THROWS_AS(fewer.load(dir / "p.bin"), DataError);
}

TEST_CASE("init_uniform conventions and snapshots") {
  ParamStore store;
  Parameter& w = store.add("w", 4, 4);
  Parameter& b = store.add("w_b", 1, 4);
  Parameter& g = store.add("ln_g", 1, 4);
  store.init_uniform(5);
  REQUIRE(b.value.isZero());
  REQUIRE(g.value.isOnes());
  REQUIRE(w.value.norm() > 0.0);

  ParamStore again;
  again.add("w", 4, 4);
  again.add("w_b", 1, 4);
  again.add("ln_g", 1, 4);
  again.init_uniform(5);
  REQUIRE(again.get("w").value == w.value);

  auto snap = snapshot_params(store.all());
  w.value.setZero();
  restore_params(store.all(), snap);
  REQUIRE(w.value.norm() > 0.0);
  REQUIRE_THROWS_AS(restore_params(store.all(), std::vector<Matrix>{}), ContractError);
}

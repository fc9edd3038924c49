#include <doctest.h>

#include <cmath>

#include "modeswitch/nn/grad_check.hpp"
#include "modeswitch/nn/layers.hpp"

using namespace modeswitch::nn;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces any matrix to a scalar with a fixed random projection so every
// output coordinate matters.
Var project(Tape& t, const Var& x, std::uint64_t seed = 99) {
  return sum(mul(x, t.constant(random_matrix(x.rows(), x.cols(), seed))));
}

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("elementwise and matrix ops pass gradient checks") {
  const Matrix b = random_matrix(4, 3, 2);
  const Matrix row = random_matrix(1, 3, 3);
  const Matrix x0 = random_matrix(5, 4, 1);
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, matmul(x, t.constant(b))); }, x0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, matmul_nt(x, t.constant(b.transpose()))); }, x0)
            .max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, matmul(x, x.tape()->input(b))); }, x0).max_rel_error <
        kTol);
  const Matrix y0 = random_matrix(5, 3, 4);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, add_row(y, t.constant(row))); }, y0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, add_row(t.constant(y0), y)); }, row).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, mul(y, add(y, t.constant(y0)))); }, y0).max_rel_error <
        kTol);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, scale(y, -2.5)); }, y0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, gelu(y)); }, y0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, sigmoid(y)); }, y0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, tanh(y)); }, y0).max_rel_error < kTol);
  // relu away from the kink
  Matrix r0 = y0;
  for (Index i = 0; i < r0.size(); ++i) {
    if (std::abs(r0.data()[i]) < 0.05) r0.data()[i] = 0.3;
  }
  CHECK(grad_check([&](Tape& t, const Var& y) { return project(t, relu(y)); }, r0).max_rel_error < kTol);
}

TEST_CASE("layer norm gradient, all three inputs") {
  const Matrix x0 = random_matrix(4, 6, 5);
  const Matrix g0 = random_matrix(1, 6, 6);
  const Matrix b0 = random_matrix(1, 6, 7);
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, layer_norm(x, t.constant(g0), t.constant(b0))); }, x0)
            .max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& g) { return project(t, layer_norm(t.constant(x0), g, t.constant(b0))); }, g0)
            .max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& b) { return project(t, layer_norm(t.constant(x0), t.constant(g0), b)); }, b0)
            .max_rel_error < kTol);
}

TEST_CASE("gather, concat, slice and overwrite") {
  const Matrix x0 = random_matrix(5, 4, 8);
  const Matrix s0 = random_matrix(2, 4, 9);
  const std::vector<Index> rows = {3, 0, 3};
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, gather_rows(x, rows)); }, x0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& x) {
          const std::vector<Var> parts = {x, t.constant(s0), x};
          return project(t, concat_rows(parts));
        }, x0).max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, slice_cols(x, 1, 2)); }, x0).max_rel_error < kTol);
  const std::vector<Index> over = {1, 4};
  CHECK(grad_check([&](Tape& t, const Var& x) { return project(t, overwrite_rows(x, over, t.constant(s0))); }, x0)
            .max_rel_error < kTol);
  CHECK(grad_check([&](Tape& t, const Var& s) { return project(t, overwrite_rows(t.constant(x0), over, s)); }, s0)
            .max_rel_error < kTol);
  const std::vector<std::int32_t> ids = {2, 2, 0, 4};
  CHECK(grad_check([&](Tape& t, const Var& table) { return project(t, embedding(table, ids)); }, x0).max_rel_error < kTol);
}

TEST_CASE("attention gradients") {
  const std::vector<Segment> segs = {{0, 3}, {3, 4}};
  const Matrix q0 = random_matrix(7, 4, 10), k0 = random_matrix(7, 4, 11), v0 = random_matrix(7, 4, 12);
  for (bool causal : {true, false}) {
    CHECK(grad_check([&](Tape& t, const Var& q) {
            return project(t, attention(q, t.constant(k0), t.constant(v0), segs, 2, causal));
          }, q0).max_rel_error < kTol);
    CHECK(grad_check([&](Tape& t, const Var& k) {
            return project(t, attention(t.constant(q0), k, t.constant(v0), segs, 2, causal));
          }, k0).max_rel_error < kTol);
    CHECK(grad_check([&](Tape& t, const Var& v) {
            return project(t, attention(t.constant(q0), t.constant(k0), v, segs, 2, causal));
          }, v0).max_rel_error < kTol);
  }
}

TEST_CASE("attention isolates segments and respects causality") {
  const std::vector<Segment> segs = {{0, 3}, {3, 3}};
  Matrix x = random_matrix(6, 4, 13);
  auto run = [&](const Matrix& in) {
    Tape t;
    const Var v = t.constant(in);
    return Matrix(attention(v, v, v, segs, 2, true).value());
  };
  const Matrix base = run(x);
  Matrix later = x;
  later.row(2).setConstant(5.0);  // last position of segment 0
  later.row(5).setConstant(-3.0);
  const Matrix changed = run(later);
  CHECK((changed.topRows(2) - base.topRows(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((changed.middleRows(3, 2) - base.middleRows(3, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cross entropy") {
  SUBCASE("uniform logits give ln V") {
    Tape t;
    const std::vector<std::int32_t> tg = {0, 3, 6};
    CHECK(cross_entropy(t.constant(Matrix::Zero(3, 7)), tg).scalar() == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  }
  SUBCASE("near infinite correct logit gives zero") {
    Tape t;
    Matrix l = Matrix::Zero(1, 5);
    l(0, 2) = 1e3;
    const std::vector<std::int32_t> tg = {2};
    CHECK(cross_entropy(t.constant(l), tg).scalar() < 1e-12);
  }
  SUBCASE("masking half the rows equals the mean over the kept half") {
    const Matrix l = random_matrix(4, 5, 14);
    const std::vector<std::int32_t> tg = {1, 4, 0, 2};
    Tape t;
    const Var masked = cross_entropy(t.constant(l), tg, {true, false, true, false});
    double by_hand = 0.0;
    for (Index r : {0, 2}) {
      const double lse = std::log(l.row(r).array().exp().sum());
      by_hand += lse - l(r, tg[static_cast<std::size_t>(r)]);
    }
    CHECK(masked.scalar() == doctest::Approx(by_hand / 2.0).epsilon(1e-12));
    const std::vector<std::int32_t> ignored = {1, kIgnoreTarget, 0, kIgnoreTarget};
    Tape t2;
    CHECK(cross_entropy(t2.constant(l), ignored).scalar() == doctest::Approx(by_hand / 2.0).epsilon(1e-12));
  }
  SUBCASE("all rows masked is an error") {
    Tape t;
    const std::vector<std::int32_t> tg = {kIgnoreTarget};
    CHECK_THROWS_AS(cross_entropy(t.constant(Matrix::Zero(1, 3)), tg), std::invalid_argument);
  }
  SUBCASE("gradient") {
    const std::vector<std::int32_t> tg = {1, kIgnoreTarget, 0, 2};
    CHECK(grad_check([&](Tape&, const Var& l) { return cross_entropy(l, tg); }, random_matrix(4, 5, 15)).max_rel_error <
          kTol);
  }
}

TEST_CASE("dropout is identity in eval mode and scales kept units in train mode") {
  const Matrix x = random_matrix(20, 20, 16);
  Tape t;
  const Var v = t.constant(x);
  CHECK(dropout(v, 0.5, {}).value() == x);
  Rng rng(1);
  const Matrix d = dropout(v, 0.5, {true, &rng}).value();
  int zeros = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (d.data()[i] == 0.0) {
      ++zeros;
    } else {
      CHECK(d.data()[i] == doctest::Approx(2.0 * x.data()[i]));
    }
  }
  CHECK(zeros > 120);
  CHECK(zeros < 280);
}

TEST_CASE("grad check sanity") {
  SUBCASE("quadratic form is exact") {
    const Matrix a = random_matrix(4, 4, 17);
    const Matrix q = a * a.transpose();
    const auto r = grad_check([&](Tape& t, const Var& x) { return sum(mul(x, matmul(x, t.constant(q)))); },
                              random_matrix(1, 4, 18));
    CHECK(r.max_rel_error < 1e-8);
  }
  SUBCASE("corrupted gradient is detected") {
    // an op whose pullback is off by 10%
    auto bad_square = [](Tape& t, const Var& x) {
      const Matrix& xv = x.value();
      return t.push(xv.cwiseProduct(xv), t.requires_grad(x), [x](Tape& tt, const Matrix&, const Matrix& g) {
        tt.grad_acc(x) += 2.2 * g.cwiseProduct(tt.value(x));
      });
    };
    const auto r = grad_check([&](Tape& t, const Var& x) { return project(t, bad_square(t, x)); }, random_matrix(3, 3, 19));
    CHECK(r.max_rel_error > 1e-2);
  }
}

TEST_CASE("layers pass parameter gradient checks") {
  ParamStore ps;
  Rng rng(20);
  const Lstm lstm = Lstm::create(ps, "lstm", 3, 4, rng);
  const Mlp2 mlp = Mlp2::create(ps, "mlp", 4, 5, 3, rng);
  const TransformerBlock pre = TransformerBlock::create(ps, "pre", 4, 2, 8, NormPlacement::pre, 0.0, rng);
  const TransformerBlock post = TransformerBlock::create(ps, "post", 4, 2, 8, NormPlacement::post, 0.0, rng);
  // larger weights than the init default so nonlinearities are exercised
  for (Param* p : ps.params()) p->value = random_matrix(p->value.rows(), p->value.cols(), p->value.size(), 0.5);
  const Matrix s1 = random_matrix(2, 3, 21), s2 = random_matrix(2, 3, 22), x0 = random_matrix(5, 4, 23);
  const std::vector<Segment> segs = {{0, 2}, {2, 3}};
  auto loss = [&](Tape& t) {
    const std::vector<Var> steps = {t.constant(s1), t.constant(s2)};
    const auto hs = lstm(t, steps);
    const std::vector<Var> both = {hs[0], hs[1]};
    Var y = mlp(t, concat_rows(both));
    Var z = post(t, pre(t, t.constant(x0), segs, true, {}), segs, false, {});
    return add(project(t, y, 1), project(t, z, 2));
  };
  CHECK(grad_check(ps, loss).max_rel_error < 1e-5);
}

TEST_CASE("lstm is left to right") {
  ParamStore ps;
  Rng rng(24);
  const Lstm lstm = Lstm::create(ps, "l", 3, 4, rng);
  auto run = [&](const Matrix& a, const Matrix& b) {
    Tape t;
    const std::vector<Var> steps = {t.constant(a), t.constant(b)};
    const auto hs = lstm(t, steps);
    return std::pair<Matrix, Matrix>{hs[0].value(), hs[1].value()};
  };
  const Matrix a = random_matrix(1, 3, 25), b = random_matrix(1, 3, 26);
  const auto base = run(a, b);
  const auto changed_second = run(a, random_matrix(1, 3, 27));
  CHECK(changed_second.first == base.first);
  CHECK(changed_second.second != base.second);
  const auto changed_first = run(random_matrix(1, 3, 28), b);
  CHECK(changed_first.first != base.first);
  CHECK(changed_first.second != base.second);
}

TEST_CASE("frozen parameters collect no gradient") {
  ParamStore ps;
  Rng rng(29);
  Param& w = ps.add_normal("w", 3, 3, 1.0, rng);
  w.trainable = false;
  Tape t;
  const Var loss = sum(mul(t.param(w), t.param(w)));
  t.backward(loss);
  CHECK(w.grad.isZero());
}

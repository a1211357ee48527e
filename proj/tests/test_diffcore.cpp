#include <doctest.h>

#include <cmath>

#include "sbrl/errors.hpp"
#include "sbrl/rng.hpp"
#include "sbrl/tape.hpp"
#include "test_support.hpp"

using namespace sbrl;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(Tensor({2}, {1.0, std::numeric_limits<double>::infinity()}), NumericError);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
}

TEST_CASE("forward: x*x at 3 is 9, gradient 6") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0), true);
  Var y = tape.mul(x, x);
  CHECK(tape.value(y)[0] == doctest::Approx(9.0));
  tape.backward(y);
  CHECK(tape.grad(x)[0] == doctest::Approx(6.0));
}

TEST_CASE("forward: sigmoid(0) = 0.5, derivative 0.25") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(0.0), true);
  Var y = tape.sigmoid(x);
  CHECK(tape.value(y)[0] == doctest::Approx(0.5));
  tape.backward(y);
  CHECK(tape.grad(x)[0] == doctest::Approx(0.25));
}

TEST_CASE("matmul+bias matches the naive triple-loop oracle") {
  Rng rng(7);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  const Tensor c = random_tensor({2}, rng);
  Tape tape;
  Var out = tape.add_bias(tape.matmul(tape.constant(a), tape.constant(b)), tape.constant(c));
  const Tensor expect = test::naive_matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(tape.value(out).at(i, j) == doctest::Approx(expect.at(i, j) + c[j]).epsilon(1e-12));
}

TEST_CASE("shape mismatch names the op") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = tape.constant(Tensor::matrix(1, 2, {1, 2}));
  CHECK_THROWS_WITH_AS(tape.add(a, b), doctest::Contains("add"), ShapeError);
  CHECK_THROWS_WITH_AS(tape.matmul(b, b), doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("backward requires scalar output") {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix(1, 2, {1, 2}), true);
  Var b = tape.tanh(a);
  CHECK_THROWS_AS(tape.backward(b), ContractError);
}

TEST_CASE("non-finite intermediate raises a numeric error") {
  Tape tape;
  Var a = tape.constant(Tensor::scalar(1000.0));
  CHECK_THROWS_AS(tape.exp(a), NumericError);
}

TEST_CASE("random MLP loss gradient matches finite differences") {
  // 2 -> 8 -> 4 -> 1 network, loss = mean(square(out)).
  Rng rng(11);
  MlpSpec spec;
  spec.widths = {2, 8, 4, 1};
  const ParamSet params = init_params(spec, 5);
  const Tensor input = random_tensor({3, 2}, rng);

  auto loss = [&](const ParamSet& p) {
    Tape tape;
    MlpVars vars = bind_params(tape, p, false);
    Var out = mlp_apply(tape, vars, spec, tape.constant(input));
    return tape.value(tape.mean(tape.square(out)))[0];
  };
  Tape tape;
  MlpVars vars = bind_params(tape, params, true);
  Var out = mlp_apply(tape, vars, spec, tape.constant(input));
  Var l = tape.mean(tape.square(out));
  tape.backward(l);
  const ParamSet analytic = collect_grads(tape, vars, params);
  const auto result = test::check_param_gradient(loss, params, analytic);
  CHECK_MESSAGE(result.ok, result.detail);
}

TEST_CASE("gradient-check property over random op compositions") {
  // Random dag built from the supported ops, reduced to a scalar; reverse
  // mode against central differences on every leaf entry.
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int rows = 1 + static_cast<int>(rng.next_u64() % 3);
    const int cols = 1 + static_cast<int>(rng.next_u64() % 3);
    const Tensor x0 = random_tensor({rows, cols}, rng);
    const Tensor x1 = random_tensor({rows, cols}, rng);

    auto build = [&](const std::vector<double>& flat, Tape& tape, Var& lx0, Var& lx1) {
      Tensor t0 = x0, t1 = x1;
      for (int i = 0; i < t0.size(); ++i) t0[i] = flat[static_cast<std::size_t>(i)];
      for (int i = 0; i < t1.size(); ++i) t1[i] = flat[static_cast<std::size_t>(t0.size() + i)];
      lx0 = tape.leaf(t0, true);
      lx1 = tape.leaf(t1, true);
      Var a = lx0, b = lx1;
      Rng ops(1000 + static_cast<std::uint64_t>(trial));
      for (int depth = 0; depth < 6; ++depth) {
        switch (ops.next_u64() % 10) {
          case 0: a = tape.add(a, b); break;
          case 1: a = tape.sub(a, b); break;
          case 2: a = tape.mul(a, b); break;
          case 3: a = tape.tanh(a); break;
          case 4: a = tape.sigmoid(a); break;
          case 5: a = tape.softplus(a); break;
          case 6: a = tape.scale(a, 0.7); break;
          case 7: a = tape.square(a); break;
          case 8: a = tape.add_scalar(a, 0.3); break;
          case 9: a = tape.exp(tape.scale(a, 0.25)); break;
        }
        std::swap(a, b);
      }
      return tape.mean(tape.add(a, b));
    };

    std::vector<double> flat(x0.data().begin(), x0.data().end());
    flat.insert(flat.end(), x1.data().begin(), x1.data().end());

    Tape tape;
    Var lx0, lx1;
    Var out = build(flat, tape, lx0, lx1);
    tape.backward(out);
    std::vector<double> analytic;
    {
      const Tensor g0 = tape.grad(lx0), g1 = tape.grad(lx1);
      analytic.assign(g0.data().begin(), g0.data().end());
      analytic.insert(analytic.end(), g1.data().begin(), g1.data().end());
    }
    auto f = [&](const std::vector<double>& v) {
      Tape t;
      Var a, b;
      return t.value(build(v, t, a, b))[0];
    };
    const auto result = test::check_gradient(f, flat, analytic);
    CHECK_MESSAGE(result.ok, "trial ", trial, ": ", result.detail);
  }
}

TEST_CASE("log clamps its argument and zeroes the clamped adjoint") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(0.0), true);
  Var y = tape.log(x);
  CHECK(tape.value(y)[0] == doctest::Approx(std::log(1e-12)));
  tape.backward(y);
  CHECK(tape.grad(x)[0] == 0.0);

  Tape tape2;
  Var x2 = tape2.leaf(Tensor::scalar(2.0), true);
  Var y2 = tape2.log(x2);
  tape2.backward(y2);
  CHECK(tape2.grad(x2)[0] == doctest::Approx(0.5));
}

TEST_CASE("linearity of backward") {
  // backward of a*f + b*g equals a*grad(f) + b*grad(g).
  Rng rng(3);
  const Tensor x = random_tensor({2, 2}, rng);
  const double ca = 1.7, cb = -0.6;

  auto grad_of = [&](bool with_f, bool with_g, double wa, double wb) {
    Tape tape;
    Var leaf = tape.leaf(x, true);
    Var f = tape.sum(tape.square(leaf));
    Var g = tape.sum(tape.tanh(leaf));
    Var out;
    if (with_f && with_g)
      out = tape.add(tape.scale(f, wa), tape.scale(g, wb));
    else
      out = with_f ? f : g;
    tape.backward(out);
    return tape.grad(leaf);
  };

  const Tensor combined = grad_of(true, true, ca, cb);
  const Tensor gf = grad_of(true, false, 0, 0);
  const Tensor gg = grad_of(false, true, 0, 0);
  for (int i = 0; i < combined.size(); ++i)
    CHECK(combined[i] == doctest::Approx(ca * gf[i] + cb * gg[i]).epsilon(1e-12));
}

TEST_CASE("determinism: identical graph and bindings give bit-identical results") {
  auto run = [] {
    Rng rng(99);
    Tape tape;
    Var a = tape.leaf(random_tensor({3, 3}, rng), true);
    Var b = tape.leaf(random_tensor({3, 3}, rng), true);
    Var out = tape.mean(tape.mul(tape.tanh(tape.matmul(a, b)), a));
    tape.backward(out);
    return std::tuple{tape.value(out)[0], tape.grad(a), tape.grad(b)};
  };
  const auto [v1, ga1, gb1] = run();
  const auto [v2, ga2, gb2] = run();
  CHECK(v1 == v2);
  for (int i = 0; i < ga1.size(); ++i) CHECK(ga1[i] == ga2[i]);
  for (int i = 0; i < gb1.size(); ++i) CHECK(gb1[i] == gb2[i]);
}

TEST_CASE("concat_cols splits gradients to both inputs") {
  Rng rng(5);
  const Tensor a = random_tensor({2, 2}, rng);
  const Tensor b = random_tensor({2, 3}, rng);
  Tape tape;
  Var la = tape.leaf(a, true);
  Var lb = tape.leaf(b, true);
  Var out = tape.sum(tape.square(tape.concat_cols(la, lb)));
  tape.backward(out);
  const Tensor ga = tape.grad(la), gb = tape.grad(lb);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(ga.at(i, j) == doctest::Approx(2.0 * a.at(i, j)));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(gb.at(i, j) == doctest::Approx(2.0 * b.at(i, j)));
}

TEST_CASE("sum and mean reductions") {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}), true);
  CHECK(tape.value(tape.sum(a))[0] == doctest::Approx(10.0));
  CHECK(tape.value(tape.mean(a))[0] == doctest::Approx(2.5));
}

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "codemix/errors.hpp"
#include "codemix/neural/gradcheck.hpp"
#include "codemix/neural/layers.hpp"
#include "codemix/neural/ops.hpp"
#include "codemix/neural/optim.hpp"

using namespace codemix;
using namespace codemix::nn;

namespace {

Tensor random_tensor(const Shape& shape, Xoshiro256& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Scalar loss sum(y * w) for a fixed random w, so every output entry gets a
// distinct upstream gradient.
struct Probe {
  Tensor weights;
  Var operator()(const Var& y) {
    if (weights.shape() != y.shape()) {
      Xoshiro256 rng(y.value().size());
      weights = random_tensor(y.shape(), rng);
    }
    return sum(mul_mask(y, weights));
  }
};

double check(const std::function<Var()>& f, std::vector<Var> params) {
  GradCheckOptions opts;
  opts.eps = 1e-3;
  opts.five_point = true;
  opts.zero_atol = 1e-10;
  const auto r = grad_check(f, params, opts);
  CHECK(r.entries_checked > 0);
  return r.max_rel_error;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), Error);
  CHECK(t.bit_equal(t));
  Tensor z({2, 3}, std::vector<double>{1, 2, 3, 4, 5, -0.0});
  Tensor p({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 0.0});
  CHECK_FALSE(z.bit_equal(p));
}

TEST_CASE("op gradients agree with finite differences") {
  Xoshiro256 rng(17);
  auto leaf = [&](Shape s, double lo = -1.0, double hi = 1.0) { return Var::leaf(random_tensor(s, rng, lo, hi)); };
  Probe probe;

  SUBCASE("element-wise") {
    Var a = leaf({3, 4}), b = leaf({3, 4});
    const Tensor mask = random_tensor({3, 4}, rng);
    CHECK(check([&] { return probe(add(a, b)); }, {a, b}) < 1e-7);
    CHECK(check([&] { return probe(mul(a, b)); }, {a, b}) < 1e-7);
    CHECK(check([&] { return probe(scale(a, -2.5)); }, {a}) < 1e-7);
    CHECK(check([&] { return probe(mul_mask(a, mask)); }, {a}) < 1e-7);
    CHECK(check([&] { return probe(sigmoid(a)); }, {a}) < 1e-7);
    CHECK(check([&] { return probe(tanh(a)); }, {a}) < 1e-7);
    Var away_from_kink = leaf({3, 4}, 0.1, 1.0);
    for (std::size_t i = 0; i < 6; ++i) away_from_kink.mutable_value()[i] *= -1.0;
    CHECK(check([&] { return probe(relu(away_from_kink)); }, {away_from_kink}) < 1e-7);
  }
  SUBCASE("matrix products and reshaping") {
    Var a = leaf({3, 4}), b = leaf({4, 2}), w = leaf({5, 4}), bias = leaf({5});
    CHECK(check([&] { return probe(matmul(a, b)); }, {a, b}) < 1e-7);
    CHECK(check([&] { return probe(linear(a, w, bias)); }, {a, w, bias}) < 1e-7);
    CHECK(check([&] { return probe(linear(a, w)); }, {a, w}) < 1e-7);
    CHECK(check([&] { return probe(slice_cols(a, 1, 2)); }, {a}) < 1e-7);
    Var c = leaf({3, 2});
    CHECK(check([&] { return probe(concat_cols(std::vector<Var>{a, c})); }, {a, c}) < 1e-7);
    Var d = leaf({2, 4});
    CHECK(check([&] { return probe(concat_rows(std::vector<Var>{a, d})); }, {a, d}) < 1e-7);
  }
  SUBCASE("embedding with repeated ids and row scales") {
    Var table = leaf({6, 3});
    const std::vector<int> ids{1, 4, 1, 5};
    const Tensor scales({6}, std::vector<double>{1, 0, 2, 2, 0.5, 1});
    CHECK(check([&] { return probe(embedding(table, ids, &scales)); }, {table}) < 1e-7);
  }
  SUBCASE("softmax cross-entropy") {
    Var logits = leaf({4, 5}, -3.0, 3.0);
    const std::vector<int> targets{0, 4, 2, 2};
    CHECK(check([&] { return softmax_cross_entropy(logits, targets); }, {logits}) < 1e-7);
  }
  SUBCASE("two lstm steps") {
    Var x = leaf({3, 4}), h = leaf({3, 5}), c = leaf({3, 5});
    Var wi = leaf({20, 4}), wh = leaf({20, 5}), b = leaf({20});
    auto f = [&] {
      auto [h1, c1] = lstm_cell(x, h, c, wi, wh, b);
      auto [h2, c2] = lstm_cell(x, h1, c1, wi, wh, b);
      return add(probe(h2), sum(mul(c2, c2)));
    };
    CHECK(check(f, {x, h, c, wi, wh, b}) < 1e-6);
  }
  SUBCASE("masked pooling") {
    std::vector<Var> steps{leaf({3, 2}), leaf({3, 2}), leaf({3, 2})};
    const std::vector<std::size_t> lengths{3, 1, 2};
    CHECK(check([&] { return probe(masked_max_pool(steps, lengths)); }, steps) < 1e-7);
    CHECK(check([&] { return probe(masked_mean_pool(steps, lengths)); }, steps) < 1e-7);
    CHECK(check([&] { return probe(gather_last(steps, lengths)); }, steps) < 1e-7);
  }
  SUBCASE("batch norm in train mode") {
    BatchNorm1d bn(3);
    Xoshiro256 r2(4);
    bn.gamma.mutable_value() = random_tensor({3}, r2, 0.5, 1.5);
    bn.beta.mutable_value() = random_tensor({3}, r2);
    Var x = leaf({5, 3});
    CHECK(check([&] { return probe(batch_norm(x, bn, Mode::Train)); }, {x, bn.gamma, bn.beta}) < 1e-6);
  }
}

TEST_CASE("gradient check flags a wrong backward") {
  Var a = Var::leaf(Tensor({3}, std::vector<double>{0.5, -1.0, 2.0}));
  auto bad_square = [&] {
    Tensor out = a.value();
    for (double& v : out.values()) v *= v;
    return sum(make_result(out, {a}, [a](Node& n) mutable {
      // Deliberately off by a factor of 3 (true derivative is 2x).
      for (std::size_t i = 0; i < n.grad.size(); ++i) a.mutable_grad()[i] += 3 * a.value()[i] * n.grad[i];
    }));
  };
  std::vector<Var> params{a};
  CHECK(grad_check(bad_square, params).max_rel_error > 0.3);

  GradCheckOptions refine;
  refine.eps = 1e-2;
  refine.five_point = true;
  refine.smooth_tol = 1e-8;
  const auto r = grad_check(bad_square, params, refine);
  CHECK(r.max_rel_error > 0.3);
  CHECK(r.nonsmooth == 0);
}

TEST_CASE("gradient check refines steps that straddle a kink") {
  Var x = Var::leaf(Tensor({3}, std::vector<double>{4e-3, -3e-3, 0.5}));
  auto f = [&] { return sum(relu(x)); };
  std::vector<Var> params{x};
  GradCheckOptions opts;
  opts.eps = 1e-2;
  CHECK(grad_check(f, params, opts).max_rel_error > 0.1);

  opts.smooth_tol = 1e-8;
  const auto r = grad_check(f, params, opts);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.nonsmooth == 0);
  CHECK(r.entries_checked == 3);

  Var at_kink = Var::leaf(Tensor({1}, 0.0));
  auto g = [&] { return sum(relu(at_kink)); };
  std::vector<Var> kink{at_kink};
  // A symmetric stencil on the kink itself converges to 0.5, so it is
  // reported rather than skipped.
  const auto k = grad_check(g, kink, opts);
  CHECK(k.nonsmooth == 0);
  CHECK(k.numeric == doctest::Approx(0.5));
  CHECK(k.max_rel_error > 0.4);
}

TEST_CASE("softmax cross-entropy values") {
  const std::vector<int> t0{0};
  CHECK(softmax_cross_entropy(Var::constant(Tensor({1, 4})), t0).value()[0] == doctest::Approx(std::log(4.0)));
  const Tensor big({1, 4}, std::vector<double>{1000, 0, 0, 0});
  CHECK(softmax_cross_entropy(Var::constant(big), t0).value()[0] == doctest::Approx(0.0));
  const std::vector<int> t1{1};
  const double far = softmax_cross_entropy(Var::constant(big), t1).value()[0];
  CHECK(std::isfinite(far));
  CHECK(far == doctest::Approx(1000.0));

  Var logits = Var::leaf(Tensor({2, 3}, std::vector<double>{1, 2, 3, 1, 1, 1}));
  const std::vector<int> targets{2, 0};
  const Var loss = softmax_cross_entropy(logits, targets);
  const double z0 = std::exp(1) + std::exp(2) + std::exp(3);
  CHECK(loss.value()[0] == doctest::Approx((-3 + std::log(z0) + std::log(3.0)) / 2));
  backward(loss);
  CHECK(logits.grad()[0] == doctest::Approx(std::exp(1) / z0 / 2));
  CHECK(logits.grad()[2] == doctest::Approx((std::exp(3) / z0 - 1) / 2));
  CHECK(logits.grad()[3] == doctest::Approx((1.0 / 3 - 1) / 2));
  CHECK_THROWS_AS(softmax_cross_entropy(logits, std::vector<int>{3, 0}), Error);

  const Tensor p = softmax(Tensor({1, 3}, std::vector<double>{1, 2, 3}));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK(p[2] == doctest::Approx(std::exp(3) / z0));
}

TEST_CASE("lstm cell hand cases") {
  const Var x = Var::constant(Tensor({1, 2}, std::vector<double>{0.3, -0.7}));
  const Var h = Var::constant(Tensor({1, 3}, std::vector<double>{0.1, 0.2, -0.4}));
  const Var c = Var::constant(Tensor({1, 3}, std::vector<double>{1.0, -2.0, 0.5}));

  SUBCASE("zero weights") {
    auto [h1, c1] = lstm_cell(x, h, c, Var::constant(Tensor({12, 2})), Var::constant(Tensor({12, 3})),
                              Var::constant(Tensor({12})));
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(c1.value()[j] == doctest::Approx(0.5 * c.value()[j]));
      CHECK(h1.value()[j] == doctest::Approx(0.5 * std::tanh(0.5 * c.value()[j])));
    }
  }
  SUBCASE("saturated forget gate keeps the cell") {
    Tensor bias({12});
    for (std::size_t j = 3; j < 6; ++j) bias[j] = 20.0;
    auto [h1, c1] = lstm_cell(x, h, c, Var::constant(Tensor({12, 2})), Var::constant(Tensor({12, 3})),
                              Var::constant(bias));
    for (std::size_t j = 0; j < 3; ++j) CHECK(c1.value()[j] == doctest::Approx(c.value()[j]).epsilon(1e-8));
  }
  SUBCASE("scalar unit") {
    const Var x1 = Var::constant(Tensor({1, 1}, 0.5));
    const Var h0 = Var::constant(Tensor({1, 1}, -0.2));
    const Var c0 = Var::constant(Tensor({1, 1}, 0.8));
    const std::vector<double> wi{0.1, 0.2, 0.3, 0.4}, wh{-0.5, 0.6, -0.7, 0.8}, b{0.01, 0.02, 0.03, 0.04};
    auto [h1, c1] = lstm_cell(x1, h0, c0, Var::constant(Tensor({4, 1}, wi)), Var::constant(Tensor({4, 1}, wh)),
                              Var::constant(Tensor({4}, b)));
    auto pre = [&](int k) { return wi[k] * 0.5 + wh[k] * -0.2 + b[k]; };
    const double c_ref = sigmoid_ref(pre(1)) * 0.8 + sigmoid_ref(pre(0)) * std::tanh(pre(2));
    CHECK(c1.value()[0] == doctest::Approx(c_ref).epsilon(1e-12));
    CHECK(h1.value()[0] == doctest::Approx(sigmoid_ref(pre(3)) * std::tanh(c_ref)).epsilon(1e-12));
  }
}

TEST_CASE("dropout contracts") {
  Xoshiro256 rng(99);
  SUBCASE("mask density and scale") {
    const Tensor m = keep_mask({1000, 1000}, 0.3, rng);
    std::size_t zeros = 0;
    for (double v : m.values()) {
      if (v == 0.0) ++zeros;
      else CHECK_MESSAGE(v == 1.0 / 0.7, "kept entries carry the inverted scale");
    }
    CHECK(static_cast<double>(zeros) / 1e6 == doctest::Approx(0.3).epsilon(0.02 / 0.3));
  }
  SUBCASE("rate checks") {
    CHECK_THROWS_AS(check_rate(1.0), Error);
    CHECK_THROWS_AS(check_rate(-0.1), Error);
    CHECK_NOTHROW(check_rate(0.0));
  }
  SUBCASE("locked dropout shares one mask over time") {
    std::vector<Var> steps;
    for (int t = 0; t < 5; ++t) steps.push_back(Var::constant(Tensor({4, 8}, 1.0)));
    const auto out = locked_dropout(steps, 0.5, rng, Mode::Train);
    for (int t = 1; t < 5; ++t) CHECK(out[t].value() == out[0].value());
    const Tensor seq({3, 4, 8}, 1.0);
    const Tensor packed = locked_dropout(seq, 0.5, rng, Mode::Train);
    for (std::size_t i = 0; i < 32; ++i) {
      CHECK(packed[i] == packed[32 + i]);
      CHECK(packed[i] == packed[64 + i]);
    }
  }
  SUBCASE("eval mode and rate zero are identities without draws") {
    const Xoshiro256 before = rng;
    std::vector<Var> steps{Var::constant(Tensor({2, 3}, 2.0))};
    CHECK(locked_dropout(steps, 0.5, rng, Mode::Eval)[0].value() == steps[0].value());
    const Var w = Var::leaf(Tensor({4, 4}, 1.5));
    CHECK(weight_drop(w, 0.5, rng, Mode::Eval).node() == w.node());
    CHECK(weight_drop(w, 0.0, rng, Mode::Train).node() == w.node());
    CHECK(embedding_dropout_scales(10, 0.5, rng, Mode::Eval).empty());
    CHECK(embedding_dropout_scales(10, 0.0, rng, Mode::Train).empty());
    Xoshiro256 after = rng;
    Xoshiro256 copy = before;
    CHECK(after.next() == copy.next());
  }
  SUBCASE("embedding dropout drops whole rows") {
    const Tensor table({50, 6}, 1.0);
    const Tensor out = embedding_dropout(table, 0.4, rng, Mode::Train);
    for (std::size_t r = 0; r < 50; ++r) {
      for (std::size_t c = 1; c < 6; ++c) CHECK(out.at(r, c) == out.at(r, 0));
    }
  }
}

TEST_CASE("batch norm statistics") {
  BatchNorm1d bn(2);
  const Tensor x({4, 2}, std::vector<double>{1, 5, 2, 5, 3, 5, 6, 5});
  const Var y = batch_norm(Var::constant(x), bn, Mode::Train);
  const double mean = 3.0, biased = (4 + 1 + 0 + 9) / 4.0, unbiased = 14.0 / 3.0;
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(y.value().at(r, 0) == doctest::Approx((x.at(r, 0) - mean) / std::sqrt(biased + 1e-5)));
    CHECK(y.value().at(r, 1) == doctest::Approx(0.0));
  }
  CHECK(bn.running_mean[0] == doctest::Approx(0.1 * mean));
  CHECK(bn.running_var[0] == doctest::Approx(0.9 + 0.1 * unbiased));
  CHECK(bn.running_mean[1] == doctest::Approx(0.5));
  CHECK(bn.running_var[1] == doctest::Approx(0.9));

  const Var e = batch_norm(Var::constant(x), bn, Mode::Eval);
  CHECK(e.value().at(0, 0) == doctest::Approx((1 - bn.running_mean[0]) / std::sqrt(bn.running_var[0] + 1e-5)));

  BatchNorm1d flat(2);
  flat.gamma.mutable_value().fill(0.0);
  flat.beta.mutable_value() = Tensor({2}, std::vector<double>{0.25, -3});
  const Var z = batch_norm(Var::constant(x), flat, Mode::Train);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(z.value().at(r, 0) == 0.25);
    CHECK(z.value().at(r, 1) == -3);
  }
  CHECK_THROWS_AS(batch_norm(Var::constant(Tensor({1, 2})), bn, Mode::Train), Error);
}

TEST_CASE("adam") {
  SUBCASE("first step moves by lr against the gradient sign") {
    Tensor p({3}, std::vector<double>{1, 1, 1});
    const Tensor g({3}, std::vector<double>{0.5, -2, 0});
    AdamState s;
    adam_step(p, g, s, 0.1);
    CHECK(p[0] == doctest::Approx(0.9));
    CHECK(p[1] == doctest::Approx(1.1));
    CHECK(p[2] == 1.0);
  }
  SUBCASE("three-step scalar trace") {
    Tensor p({1}, 2.0);
    AdamState s;
    double ref = 2.0, m = 0, v = 0;
    for (int t = 1; t <= 3; ++t) {
      const double grad = 2 * ref;  // d/dp p^2
      adam_step(p, Tensor({1}, grad), s, 0.05);
      m = 0.9 * m + 0.1 * grad;
      v = 0.999 * v + 0.001 * grad * grad;
      ref -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
    }
    CHECK(s.step == 3);
  }
  SUBCASE("frozen parameters and their state stay untouched") {
    Var a = Var::leaf(Tensor({2}, 1.0));
    Var b = Var::leaf(Tensor({2}, 1.0));
    Adam opt({a, b});
    backward(sum(add(a, b)));
    b.set_requires_grad(false);
    opt.step(0.1);
    CHECK(a.value()[0] == doctest::Approx(0.9));
    CHECK(b.value()[0] == 1.0);
  }
  SUBCASE("gradient clipping") {
    Var a = Var::leaf(Tensor({2}, std::vector<double>{3, 4}));
    backward(scale(sum(mul(a, a)), 0.5));
    CHECK(clip_grad_norm({a}, 1.0) == doctest::Approx(5.0));
    CHECK(a.grad()[0] == doctest::Approx(0.6));
    CHECK(a.grad()[1] == doctest::Approx(0.8));
  }
}

TEST_CASE("no-grad guard stops recording") {
  Var a = Var::leaf(Tensor({2}, 1.0));
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    const Var y = mul(a, a);
    CHECK(y.node()->parents.empty());
  }
  CHECK(grad_enabled());
}

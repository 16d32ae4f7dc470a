#include <array>
#include <cmath>

#include "doctest.h"
#include "mmbsn/adam.hpp"
#include "mmbsn/mask.hpp"
#include "mmbsn/ops.hpp"
#include "support.hpp"

using namespace mmbsn;
using testsupport::random_tensor;

namespace {

// Straight nested-loop convolution, no tap bookkeeping.
Tensor4 naive_conv(const Tensor4& x, const ConvParams& p) {
  const int k = p.kernel_size(), r = (k - 1) / 2, d = p.dilation;
  const auto H = static_cast<int>(x.height()), W = static_cast<int>(x.width());
  Tensor4 out(x.batch(), p.out_channels(), x.height(), x.width());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t o = 0; o < p.out_channels(); ++o)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          double s = p.bias[o];
          for (std::size_t i = 0; i < p.in_channels(); ++i)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int sy = y + d * (ky - r), sx = xx + d * (kx - r);
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                const double w = p.tap_masked(ky, kx)
                                     ? 0.0
                                     : p.weight.at(o, i, static_cast<std::size_t>(ky),
                                                   static_cast<std::size_t>(kx));
                s += w * x.at(b, i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
              }
          out.at(b, o, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = s;
        }
  return out;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

ModelGraph single_conv(std::size_t in, std::size_t out, int k, int d,
                       std::optional<KernelMask> mask = std::nullopt) {
  ModelGraph g(in);
  g.add_conv(g.input(), out, k, d, "c", std::move(mask));
  return g;
}

}  // namespace

TEST_CASE("tensor rejects zero dimensions and reports shapes") {
  CHECK_THROWS_AS(Tensor4(0, 1, 1, 1), ShapeError);
  Tensor4 t(2, 3, 4, 5, 1.5);
  CHECK(t.size() == 120);
  CHECK(t.at(1, 2, 3, 4) == 1.5);
  CHECK(t.shape().str() == "(2, 3, 4, 5)");
  CHECK_THROWS_AS(Tensor4(Shape4{1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
}

TEST_CASE("conv2d counts constant input") {
  ConvParams p(1, 1, 3);
  p.weight.fill(1.0);
  const Tensor4 y = conv2d(Tensor4(1, 1, 3, 3, 1.0), p);
  CHECK(y.at(0, 0, 1, 1) == 9.0);
  CHECK(y.at(0, 0, 0, 0) == 4.0);
  CHECK(y.at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d with zero weights returns the bias") {
  ConvParams p(2, 3, 5, 2);
  std::fill(p.bias.begin(), p.bias.end(), 0.5);
  const Tensor4 y = conv2d(random_tensor({2, 3, 6, 7}, 1), p);
  for (double v : y.values()) CHECK(v == 0.5);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  for (int k : {1, 3, 5}) {
    for (int d : {1, 2, 3}) {
      ConvParams p(3, 2, k, d);
      p.init_kaiming(static_cast<std::uint64_t>(k * 10 + d));
      for (auto& b : p.bias) b = 0.1 * k - 0.05 * d;
      const Tensor4 x = random_tensor({2, 2, 5, 6}, static_cast<std::uint64_t>(k + d));
      CAPTURE(k);
      CAPTURE(d);
      CHECK(max_abs_diff(conv2d(x, p), naive_conv(x, p)) < 1e-12);
    }
  }
  SUBCASE("masked kernel") {
    ConvParams p(3, 2, 5, 2, render_mask(MaskTag::Star, 5));
    p.init_kaiming(7);
    const Tensor4 x = random_tensor({1, 2, 9, 9}, 8);
    CHECK(max_abs_diff(conv2d(x, p), naive_conv(x, p)) < 1e-12);
  }
  SUBCASE("dilation wider than the image") {
    ConvParams p(1, 1, 3, 4);
    p.init_kaiming(9);
    const Tensor4 x = random_tensor({1, 1, 3, 3}, 10);
    CHECK(max_abs_diff(conv2d(x, p), naive_conv(x, p)) < 1e-12);
  }
}

// Shapes as large as the toy training runs. Small shapes alone once hid a
// GEMM kernel that went wrong above a size threshold.
TEST_CASE("conv2d and its backward at training-sized shapes") {
  ConvParams p(16, 16, 3, 2, render_mask(MaskTag::O, 3));
  p.init_kaiming(3);
  for (auto& b : p.bias) b = 0.1;
  const Tensor4 x = random_tensor({8, 16, 32, 32}, 4);
  const Tensor4 y = conv2d(x, p);
  CHECK(max_abs_diff(y, naive_conv(x, p)) < 1e-12);

  const Tensor4 gy = random_tensor(y.shape(), 5);
  const ConvGrads g = conv2d_backward(gy, x, p);
  // The layer is affine in x, so <gy, y - bias> == <grad_input, x>.
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) lhs += gy[j] * (y[j] - 0.1);
  for (std::size_t j = 0; j < x.size(); ++j) rhs += g.grad_input[j] * x[j];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  // A few weight gradients against the direct sum.
  for (auto [o, i, ky, kx] : {std::array<int, 4>{0, 0, 0, 0}, {5, 9, 2, 1}, {15, 3, 1, 2}}) {
    double s = 0.0;
    for (int b = 0; b < 8; ++b)
      for (int yy = 0; yy < 32; ++yy)
        for (int xx = 0; xx < 32; ++xx) {
          const int sy = yy + 2 * (ky - 1), sx = xx + 2 * (kx - 1);
          if (sy < 0 || sy >= 32 || sx < 0 || sx >= 32) continue;
          s += gy.at(b, o, yy, xx) * x.at(b, i, sy, sx);
        }
    CHECK(g.weight.at(o, i, ky, kx) == doctest::Approx(s).epsilon(1e-10));
  }
}

TEST_CASE("conv2d rejects channel mismatch") {
  ConvParams p(2, 3, 3);
  CHECK_THROWS_AS(conv2d(Tensor4(1, 2, 4, 4), p), ShapeError);
  CHECK_THROWS_AS(conv2d_backward(Tensor4(1, 3, 4, 4), Tensor4(1, 3, 4, 4), p), ShapeError);
}

TEST_CASE("conv2d_backward trivial cases") {
  SUBCASE("zero upstream gradient") {
    ConvParams p(2, 2, 3, 2);
    p.init_kaiming(1);
    const auto g = conv2d_backward(Tensor4(1, 2, 5, 5), random_tensor({1, 2, 5, 5}, 2), p);
    for (double v : g.grad_input.values()) CHECK(v == 0.0);
    for (double v : g.weight.values()) CHECK(v == 0.0);
    for (double v : g.bias) CHECK(v == 0.0);
  }
  SUBCASE("one pixel, 1x1 kernel") {
    ConvParams p(1, 1, 1);
    p.weight[0] = 0.25;
    const auto g = conv2d_backward(Tensor4(1, 1, 1, 1, 1.0), Tensor4(1, 1, 1, 1, 3.5), p);
    CHECK(g.weight[0] == 3.5);
    CHECK(g.bias[0] == 1.0);
    CHECK(g.grad_input[0] == 0.25);
  }
  SUBCASE("masked taps receive no weight gradient") {
    ConvParams p(2, 2, 5, 1, render_mask(MaskTag::Plus, 5));
    p.init_kaiming(3);
    const auto g = conv2d_backward(random_tensor({1, 2, 7, 7}, 4), random_tensor({1, 2, 7, 7}, 5), p);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t i = 0; i < 2; ++i)
        for (int ky = 0; ky < 5; ++ky)
          for (int kx = 0; kx < 5; ++kx)
            if (p.tap_masked(ky, kx)) {
              CHECK(g.weight.at(o, i, static_cast<std::size_t>(ky),
                                static_cast<std::size_t>(kx)) == 0.0);
            }
  }
}

TEST_CASE("conv gradients match central differences") {
  struct Case {
    int k, d;
    std::optional<MaskShape> mask;
  };
  const Case cases[] = {{1, 1, std::nullopt}, {3, 1, std::nullopt}, {3, 2, MaskShape(MaskTag::O)},
                        {5, 3, MaskShape(MaskTag::Cross)}, {5, 2, MaskShape(MaskTag::Square)}};
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    ModelGraph g = single_conv(2, 3, c.k, c.d,
                               c.mask ? std::optional<KernelMask>(render_mask(*c.mask, c.k))
                                      : std::nullopt);
    g.init(seed);
    const auto r = testsupport::grad_check(g, random_tensor({2, 2, 7, 7}, seed + 1), 120, seed + 2);
    CAPTURE(c.k);
    CAPTURE(c.d);
    CHECK(r.checked >= 100);
    CHECK(r.max_rel < 1e-4);
    seed += 10;
  }
}

TEST_CASE("relu and its gradient") {
  Tensor4 x(Shape4{1, 1, 1, 4}, {-1.0, 0.0, 2.0, -0.5});
  const Tensor4 y = relu(x);
  CHECK(y == Tensor4(Shape4{1, 1, 1, 4}, {0.0, 0.0, 2.0, 0.0}));
  const Tensor4 g = relu_backward(Tensor4(x.shape(), 3.0), y);
  CHECK(g == Tensor4(Shape4{1, 1, 1, 4}, {0.0, 0.0, 3.0, 0.0}));
  CHECK_THROWS_AS(relu_backward(Tensor4(1, 1, 1, 3), y), ShapeError);
}

TEST_CASE("concat then split is the identity") {
  const Tensor4 a = random_tensor({2, 3, 4, 5}, 1);
  const Tensor4 b = random_tensor({2, 1, 4, 5}, 2);
  const Tensor4 c = concat_channels(std::vector<Tensor4>{a, b});
  CHECK(c.channels() == 4);
  const std::size_t sizes[] = {3, 1};
  const auto parts = split_channels(c, sizes);
  CHECK(parts[0] == a);
  CHECK(parts[1] == b);
  CHECK_THROWS_AS(concat_channels(std::vector<Tensor4>{a, Tensor4(2, 1, 4, 4)}), ShapeError);
  const std::size_t bad[] = {2, 1};
  CHECK_THROWS_AS(split_channels(c, bad), ShapeError);
}

TEST_CASE("add is elementwise") {
  const Tensor4 a = random_tensor({1, 2, 3, 3}, 1), b = random_tensor({1, 2, 3, 3}, 2);
  const Tensor4 s = add(a, b);
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(s[j] == a[j] + b[j]);
  CHECK_THROWS_AS(add(a, Tensor4(1, 2, 3, 4)), ShapeError);
}

TEST_CASE("l1 loss values and gradient") {
  const Tensor4 x = random_tensor({1, 2, 3, 3}, 1);
  const auto same = l1_loss_and_grad(x, x);
  CHECK(same.loss == 0.0);
  for (double v : same.grad.values()) CHECK(v == 0.0);

  const auto one = l1_loss_and_grad(Tensor4(1, 1, 1, 1, 2.0), Tensor4(1, 1, 1, 1, 0.0));
  CHECK(one.loss == 2.0);
  CHECK(one.grad[0] == 1.0);

  const Tensor4 pred = random_tensor({1, 2, 4, 4}, 2), target = random_tensor({1, 2, 4, 4}, 3);
  const auto lg = l1_loss_and_grad(pred, target);
  const double h = 1e-6;
  for (std::size_t j = 0; j < pred.size(); j += 3) {
    Tensor4 p = pred, m = pred;
    p[j] += h;
    m[j] -= h;
    const double fd =
        (l1_loss_and_grad(p, target).loss - l1_loss_and_grad(m, target).loss) / (2 * h);
    CHECK(std::abs(fd - lg.grad[j]) < 1e-6);
  }
  CHECK_THROWS_AS(l1_loss_and_grad(pred, Tensor4(1, 2, 4, 3)), ShapeError);
}

TEST_CASE("adam step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<ConvParams> ps{ConvParams(2, 2, 3)};
    ps[0].init_kaiming(1);
    const Tensor4 before = ps[0].weight;
    AdamState st(ps, 1e-4);
    std::vector<ParamGrads> gs{{Tensor4(ps[0].weight.shape()), std::vector<double>(2, 0.0)}};
    adam_step(ps, gs, st);
    CHECK(ps[0].weight == before);
    CHECK(st.step == 1);
  }
  SUBCASE("single scalar, unit gradient, first step") {
    std::vector<ConvParams> ps{ConvParams(1, 1, 1)};
    ps[0].weight[0] = 0.3;
    AdamState st(ps, 1e-4);
    std::vector<ParamGrads> gs{{Tensor4(1, 1, 1, 1, 1.0), std::vector<double>{0.0}}};
    adam_step(ps, gs, st);
    // m = 0.1, v = 0.001; bias-corrected m_hat = 1, v_hat = 1.
    const double m_hat = (0.1 * 1.0) / (1.0 - 0.9);
    const double v_hat = (0.001 * 1.0) / (1.0 - 0.999);
    const double expected = 0.3 - 1e-4 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(std::abs(ps[0].weight[0] - expected) < 1e-15);
    CHECK(0.3 - ps[0].weight[0] < 1e-4);
    CHECK(0.3 - ps[0].weight[0] > 1e-4 * (1.0 - 1e-7));
  }
  SUBCASE("masked taps stay zero under nonzero gradients") {
    std::vector<ConvParams> ps{ConvParams(2, 2, 3, 1, render_mask(MaskTag::Cross, 3))};
    ps[0].init_kaiming(2);
    AdamState st(ps, 1e-1);
    std::vector<ParamGrads> gs{{Tensor4(ps[0].weight.shape(), 1.0), std::vector<double>(2, 1.0)}};
    for (int s = 0; s < 5; ++s) adam_step(ps, gs, st);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t i = 0; i < 2; ++i)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            if (ps[0].tap_masked(ky, kx)) {
              CHECK(ps[0].weight.at(o, i, static_cast<std::size_t>(ky),
                                    static_cast<std::size_t>(kx)) == 0.0);
            }
  }
}

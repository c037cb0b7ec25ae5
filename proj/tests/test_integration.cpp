#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "segfuse/integration.hpp"
#include "segfuse/interaction.hpp"
#include "segfuse/nn.hpp"

using namespace segfuse;

namespace {

void zero_mlp(Mlp3& mlp) {
  for (Linear* lin : {&mlp.l1, &mlp.l2, &mlp.l3}) {
    auto& w = lin->weight.mutable_values();
    std::fill(w.begin(), w.end(), 0.0);
    auto& b = lin->bias.mutable_values();
    std::fill(b.begin(), b.end(), 0.0);
  }
}

// Plain-loop re-implementation of the three-affine trunk used by every head.
std::vector<double> mlp3_oracle(const Mlp3& mlp, const std::vector<double>& x) {
  auto affine = [](const Linear& lin, const std::vector<double>& in) {
    const std::size_t rows = lin.weight.shape()[0];
    const std::size_t cols = lin.weight.shape()[1];
    std::vector<double> out(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < rows; ++i)
        acc += in[i] * lin.weight.values()[i * cols + j];
      out[j] = acc + lin.bias.values()[j];
    }
    return out;
  };
  std::vector<double> h = affine(mlp.l1, x);
  for (auto& v : h) v = std::max(v, 0.0);
  h = affine(mlp.l2, h);
  for (auto& v : h) v = std::max(v, 0.0);
  return affine(mlp.l3, h);
}

}  // namespace

TEST_CASE("distribution head squashes mu and keeps sigma positive") {
  Rng rng(200);
  const Mlp3 head(6, 6, 3, 2, rng);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal() * 2.0;
    const DistributionPrediction pred =
        predict_distribution(Tensor::from_data({1, 6}, x), head);
    const PerformanceDistribution d = pred.value();
    REQUIRE(d.mu > 0.0);
    REQUIRE(d.mu < 1.0);
    REQUIRE(d.sigma > 0.0);
  }
}

TEST_CASE("distribution head matches the affine-chain oracle") {
  Rng rng(201);
  const Mlp3 head(5, 4, 4, 2, rng);
  std::vector<double> x(5);
  for (auto& v : x) v = rng.normal();
  const DistributionPrediction pred =
      predict_distribution(Tensor::from_data({1, 5}, x), head);
  const std::vector<double> raw = mlp3_oracle(head, x);
  const double mu = 1.0 / (1.0 + std::exp(-raw[0]));
  const double sigma = std::max(raw[1], 0.0) + std::log1p(std::exp(-std::abs(raw[1])));
  CHECK(pred.mu.item() == Catch::Approx(mu).epsilon(0).margin(1e-12));
  CHECK(pred.sigma.item() == Catch::Approx(sigma).epsilon(0).margin(1e-12));
}

TEST_CASE("zeroed heads emit the neutral confidence") {
  Rng rng(202);
  Mlp3 dist_head(4, 4, 2, 2, rng), point_head(4, 4, 2, 1, rng);
  zero_mlp(dist_head);
  zero_mlp(point_head);
  const Tensor x = Tensor::from_data({1, 4}, {1.0, -2.0, 0.5, 3.0});
  const DistributionPrediction d = predict_distribution(x, dist_head);
  CHECK(d.mu.item() == 0.5);
  CHECK(d.sigma.item() == std::log(2.0));  // softplus(0)
  CHECK(point_confidence(x, point_head).item() == 0.5);
}

TEST_CASE("masked global average pool matches a per-channel loop") {
  Rng rng(203);
  const std::size_t c = 4, h = 3, w = 5;
  std::vector<double> feat(c * h * w), mp(h * w);
  for (auto& v : feat) v = rng.normal();
  for (auto& v : mp) v = rng.uniform();
  const PixelEmbeddings pixels(c, h, w, Tensor::from_data({c, h * w}, feat));
  const Tensor map = Tensor::from_data({1, h * w}, mp);
  const Tensor pooled = pooled_masked_embedding(pixels, map);
  REQUIRE(pooled.shape() == Shape{1, c});
  for (std::size_t k = 0; k < c; ++k) {
    double acc = 0.0;
    for (std::size_t p = 0; p < h * w; ++p) acc += feat[k * h * w + p] * mp[p];
    REQUIRE(pooled.values()[k] ==
            Catch::Approx(acc / double(h * w)).epsilon(0).margin(1e-12));
  }
  CHECK_THROWS_AS(
      pooled_masked_embedding(pixels, Tensor::from_data({1, 3}, {1.0, 0.0, 0.0})),
      DimensionError);
}

TEST_CASE("confidence sampling reproduces its distribution's moments") {
  Rng rng(204);
  const PerformanceDistribution dist{0.62, 0.21};
  const std::size_t n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sample_confidence(dist, SampleMode::Train, rng);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  // 3 standard errors: SE(mean) = sigma/sqrt(N), SE(sd) ~ sigma/sqrt(2N).
  CHECK(std::abs(mean - dist.mu) < 3.0 * dist.sigma / std::sqrt(double(n)));
  CHECK(std::abs(sd - dist.sigma) < 3.0 * dist.sigma / std::sqrt(2.0 * n));
}

TEST_CASE("zero sigma degenerates to the mean exactly") {
  Rng rng(205);
  const PerformanceDistribution dist{0.37, 0.0};
  for (int i = 0; i < 100; ++i)
    REQUIRE(sample_confidence(dist, SampleMode::Train, rng) == 0.37);
}

TEST_CASE("inference mode returns the mean without consuming randomness") {
  Rng a(206), b(206);
  const PerformanceDistribution dist{0.8, 0.5};
  CHECK(sample_confidence(dist, SampleMode::Infer, a) == 0.8);
  // a was never advanced: its next draw matches a fresh stream's first.
  CHECK(a.normal() == b.normal());

  DistributionPrediction pred;
  pred.mu = Tensor::from_data({1}, {0.8});
  pred.sigma = Tensor::from_data({1}, {0.5});
  Rng c(207);
  CHECK(sample_confidence_t(pred, SampleMode::Infer, c).item() == 0.8);
}

TEST_CASE("reparameterized draw routes gradients to mu and sigma") {
  Tensor mu = Tensor::from_data({1}, {0.5}, true);
  Tensor sigma = Tensor::from_data({1}, {0.2}, true);
  DistributionPrediction pred;
  pred.mu = mu;
  pred.sigma = sigma;
  Rng rng(208);
  const Tensor draw = sample_confidence_t(pred, SampleMode::Train, rng);
  draw.backward();
  const double eps = (draw.item() - 0.5) / 0.2;
  CHECK(mu.grad()[0] == 1.0);
  CHECK(sigma.grad()[0] == Catch::Approx(eps).epsilon(0).margin(1e-12));
}

TEST_CASE("differentiable reselection equals the hard reselection forward") {
  Rng rng(209);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.below(5);
    InstanceTripletSet t;
    for (std::size_t j = 0; j < n; ++j) {
      BinaryMask m(4, 6);
      for (auto& b : m.bits) b = rng.uniform() < 0.4;
      t.masks.push_back(std::move(m));
    }
    t.embeddings = Tensor::from_data({n, 2}, std::vector<double>(n * 2, 0.0));
    std::vector<double> refined(n);
    for (auto& s : refined) s = rng.uniform();
    t.scores = refined;

    const Tensor scores = Tensor::from_data({n}, refined);
    const Tensor lambda = straight_through_select(scores);
    const Tensor soft = differentiable_topdown(t.mask_matrix(), lambda, scores);
    const TopdownResult hard = update_topdown(t, refined);
    REQUIRE(soft.shape() == Shape{1, 24});
    for (std::size_t p = 0; p < 24; ++p)
      REQUIRE(soft.values()[p] ==
              Catch::Approx(hard.map.values[p]).epsilon(0).margin(1e-12));
  }
}

TEST_CASE("blend halves the confidence-weighted sum") {
  Rng rng(210);
  const std::size_t hw = 48;  // 6x8 grid
  std::vector<double> td(hw), bu(hw);
  for (auto& v : td) v = rng.uniform();
  for (auto& v : bu) v = rng.uniform();
  const double ctd = 0.71, cbu = 0.34;
  const Tensor fused = blend(Tensor::from_data({1, hw}, td),
                             Tensor::from_data({1, hw}, bu),
                             Tensor::from_data({1}, {ctd}),
                             Tensor::from_data({1}, {cbu}));
  for (std::size_t p = 0; p < hw; ++p)
    REQUIRE(fused.values()[p] ==
            Catch::Approx(0.5 * (td[p] * ctd + bu[p] * cbu))
                .epsilon(0)
                .margin(1e-12));
}

TEST_CASE("blend with oracle confidences (1,0) reduces to the half top-down map") {
  Rng rng(211);
  const std::size_t hw = 16;
  std::vector<double> td(hw), bu(hw);
  for (auto& v : td) v = rng.uniform();
  for (auto& v : bu) v = rng.uniform();
  const Tensor fused = blend(Tensor::from_data({1, hw}, td),
                             Tensor::from_data({1, hw}, bu),
                             Tensor::from_data({1}, {1.0}),
                             Tensor::from_data({1}, {0.0}));
  for (std::size_t p = 0; p < hw; ++p)
    REQUIRE(fused.values()[p] == 0.5 * td[p]);
}

TEST_CASE("blend validates its inputs") {
  const Tensor a = Tensor::from_data({1, 4}, {0.1, 0.2, 0.3, 0.4});
  const Tensor b = Tensor::from_data({1, 5}, std::vector<double>(5, 0.1));
  const Tensor s = Tensor::from_data({1}, {0.5});
  CHECK_THROWS_AS(blend(a, b, s, s), DimensionError);
  CHECK_THROWS_AS(blend(a, a, Tensor::from_data({2}, {0.5, 0.5}), s),
                  DimensionError);
}

TEST_CASE("point heads stay inside (0,1) and match the affine oracle") {
  Rng rng(212);
  const Mlp3 head(6, 5, 3, 1, rng);
  std::vector<double> x(6);
  for (auto& v : x) v = rng.normal();
  const Tensor conf = point_confidence(Tensor::from_data({1, 6}, x), head);
  const double raw = mlp3_oracle(head, x)[0];
  CHECK(conf.item() == Catch::Approx(1.0 / (1.0 + std::exp(-raw)))
                           .epsilon(0)
                           .margin(1e-12));
  CHECK(conf.item() > 0.0);
  CHECK(conf.item() < 1.0);
}

#include <catch2/catch_amalgamated.hpp>

#include "segfuse/mask.hpp"
#include "segfuse/rng.hpp"

using namespace segfuse;

TEST_CASE("binarize keeps only values strictly above the threshold") {
  ProbabilityMap map(1, 4);
  map.values = {0.35, 0.350000001, 0.0, 1.0};
  const BinaryMask m = binarize(map, 0.35);
  CHECK_FALSE(m.at(0, 0));  // equality is not enough
  CHECK(m.at(0, 1));
  CHECK_FALSE(m.at(0, 2));
  CHECK(m.at(0, 3));
}

TEST_CASE("binarize at extreme thresholds") {
  ProbabilityMap map(2, 2, 0.5);
  CHECK(binarize(map, 0.9999).count() == 0);
  CHECK(binarize(map, 1e-9).count() == 4);
}

TEST_CASE("rle encodes zero-run first") {
  BinaryMask m(1, 5);
  m.bits = {1, 1, 0, 0, 1};
  // Leading zero-run is empty, so the encoding starts with 0.
  CHECK(rle_encode(m) == std::vector<std::size_t>{0, 2, 2, 1});

  BinaryMask z(1, 3);
  z.bits = {0, 0, 0};
  CHECK(rle_encode(z) == std::vector<std::size_t>{3});

  BinaryMask o(1, 3);
  o.bits = {1, 1, 1};
  CHECK(rle_encode(o) == std::vector<std::size_t>{0, 3});
}

TEST_CASE("rle round-trips arbitrary masks") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 1 + rng.below(12);
    const std::size_t w = 1 + rng.below(12);
    BinaryMask m(h, w);
    for (auto& b : m.bits) b = rng.uniform() < 0.4 ? 1 : 0;
    const BinaryMask back = rle_decode(rle_encode(m), h, w);
    REQUIRE(back == m);
  }
}

TEST_CASE("rle decode rejects length mismatches") {
  CHECK_THROWS_AS(rle_decode({0, 3}, 1, 4), CorruptFileError);
  CHECK_THROWS_AS(rle_decode({5}, 1, 4), CorruptFileError);
  CHECK_THROWS_AS(rle_decode({}, 1, 1), CorruptFileError);
}

TEST_CASE("mask and map tensor bridges preserve layout") {
  BinaryMask m(2, 3);
  m.bits = {1, 0, 1, 0, 1, 0};
  const Tensor t = mask_to_tensor(m);
  REQUIRE(t.shape() == Shape{1, 6});
  CHECK(t.values() == std::vector<double>{1, 0, 1, 0, 1, 0});

  ProbabilityMap map(2, 3);
  map.values = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const Tensor mt = map_to_tensor(map);
  const ProbabilityMap back = tensor_to_map(mt, 2, 3);
  CHECK(back.values == map.values);
  CHECK(back.height == 2);
  CHECK(back.width == 3);

  CHECK_THROWS_AS(tensor_to_map(mt, 3, 3), DimensionError);
}

TEST_CASE("probability range check flags out-of-range values") {
  ProbabilityMap map(1, 2);
  map.values = {0.0, 1.0};
  CHECK_NOTHROW(map.check_probability_range());
  map.values = {0.0, 1.0000001};
  CHECK_THROWS_AS(map.check_probability_range(), InvalidInputError);
  map.values = {-0.1, 0.5};
  CHECK_THROWS_AS(map.check_probability_range(), InvalidInputError);
}

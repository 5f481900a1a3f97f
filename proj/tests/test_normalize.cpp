#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace armor;
using testutil::random_instance;
using testutil::random_matrix;

TEST_CASE("normalize hand examples") {
  SUBCASE("diagonal matrix") {
    const NormalizedWeights n = normalize(DenseMatrix(2, 2, {3, 0, 0, 4}));
    CHECK(n.r1[0] == doctest::Approx(3.0));
    CHECK(n.r1[1] == doctest::Approx(4.0));
    CHECK(n.r2[0] == doctest::Approx(1.0));
    CHECK(n.r2[1] == doctest::Approx(1.0));
    CHECK(n.w_bar.at(0, 0) == doctest::Approx(1.0));
    CHECK(n.w_bar.at(0, 1) == 0.0);
    CHECK(n.w_bar.at(1, 0) == 0.0);
    CHECK(n.w_bar.at(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("all-ones matrix") {
    const NormalizedWeights n = normalize(DenseMatrix(2, 2, {1, 1, 1, 1}));
    const double s = std::sqrt(2.0);
    CHECK(n.r1[0] == doctest::Approx(s));
    CHECK(n.r1[1] == doctest::Approx(s));
    CHECK(n.r2[0] == doctest::Approx(1.0));
    CHECK(n.r2[1] == doctest::Approx(1.0));
    for (double v : n.w_bar.data()) CHECK(v == doctest::Approx(1.0 / s));
  }
  SUBCASE("zero column is degenerate") {
    try {
      normalize(DenseMatrix(2, 2, {1, 0, 1, 0}));
      FAIL("expected DegenerateWeight");
    } catch (const DegenerateWeight& e) {
      CHECK(e.index == 1);
    }
  }
}

TEST_CASE("reconstruction identity W = diag(r2) w_bar diag(r1)") {
  std::mt19937_64 rng(3);
  const DenseMatrix w = random_matrix(rng, 8, 12);
  const NormalizedWeights n = normalize(w);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      CHECK(w.at(i, j) ==
            doctest::Approx(n.r2[i] * n.w_bar.at(i, j) * n.r1[j])
                .epsilon(1e-13));
}

TEST_CASE("denormalize") {
  std::mt19937_64 rng(5);

  SUBCASE("all-ones scalings leave the state unchanged") {
    const auto inst = random_instance(rng, 8, 8, 4);
    NormalizedWeights n;
    n.r1.assign(8, 1.0);
    n.r2.assign(8, 1.0);
    const FactorizationState out = denormalize(inst.state, n);
    for (std::size_t bi = 0; bi < 2; ++bi) {
      CHECK(out.a.block(bi).data() == inst.state.a.block(bi).data());
      CHECK(out.b.block(bi).data() == inst.state.b.block(bi).data());
    }
    CHECK(out.core.values().data() == inst.state.core.values().data());
  }

  SUBCASE("random positive scalings satisfy the reconstruct relation") {
    const auto inst = random_instance(rng, 8, 8, 4);
    NormalizedWeights n;
    std::uniform_real_distribution<double> dist(0.2, 3.0);
    for (int i = 0; i < 8; ++i) n.r1.push_back(dist(rng));
    for (int i = 0; i < 8; ++i) n.r2.push_back(dist(rng));
    const DenseMatrix before = reconstruct(inst.state);
    const DenseMatrix after = reconstruct(denormalize(inst.state, n));
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        CHECK(after.at(i, j) ==
              doctest::Approx(n.r2[i] * before.at(i, j) * n.r1[j])
                  .epsilon(1e-12));
  }

  SUBCASE("normalize then denormalize recovers a 2:4-feasible W") {
    // Build W that is exactly 2:4 sparse, so w_bar shares its support and
    // identity wrappers with W' = w_bar reproduce it after denormalization.
    std::mt19937_64 rng2(9);
    DenseMatrix w(8, 8);
    std::vector<std::uint8_t> mask(64, 0);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t g = 0; g < 2; ++g) {
        const std::size_t c = 4 * g + (i % 3);
        const std::size_t c2 = 4 * g + ((i % 3) + 1);
        w.at(i, c) = dist(rng2) + 2.0;
        w.at(i, c2) = dist(rng2) - 2.0;
        mask[i * 8 + c] = 1;
        mask[i * 8 + c2] = 1;
      }
    const NormalizedWeights n = normalize(w);
    FactorizationState st(BlockDiagonalMatrix::identity(8, 4),
                          BlockDiagonalMatrix::identity(8, 4),
                          SparseCore24(n.w_bar, mask), 4);
    const DenseMatrix rec = reconstruct(denormalize(st, n));
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        CHECK(rec.at(i, j) == doctest::Approx(w.at(i, j)).epsilon(1e-12));
  }
}

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sisnet/gradcheck_suite.hpp"
#include "sisnet/nn.hpp"

using namespace sisnet;

TEST_CASE("1x1 conv with identity channel map is the identity") {
  Rng rng(2);
  Conv2d conv("c", 1, 3, 3, rng);
  conv.weight = Tensor({1, 1, 3, 3});
  for (int c = 0; c < 3; ++c) conv.weight(0, 0, c, c) = 1.0;
  conv.bias = Tensor({3});
  Tensor x = rng.uniform_tensor({4, 5, 3}, -1, 1);
  Tensor y = conv.forward(x);
  for (long long i = 0; i < x.size(); ++i) CHECK(y[i] == Catch::Approx(x[i]).margin(1e-15));
}

TEST_CASE("3x3 all-ones kernel on all-ones input counts the neighborhood") {
  Rng rng(2);
  Conv2d conv("c", 3, 1, 1, rng);
  conv.weight = Tensor::full({3, 3, 1, 1}, 1.0);
  conv.bias = Tensor({1});
  Tensor y = conv.forward(Tensor::full({3, 3, 1}, 1.0));
  CHECK(y(1, 1, 0) == 9.0);
  CHECK(y(0, 1, 0) == 6.0);
  CHECK(y(1, 0, 0) == 6.0);
  CHECK(y(0, 0, 0) == 4.0);
  CHECK(y(2, 2, 0) == 4.0);
}

TEST_CASE("dirac kernel is the identity for any input") {
  Rng rng(4);
  for (int k : {3, 7}) {
    Conv2d conv("c", k, 2, 2, rng);
    conv.weight = Tensor({k, k, 2, 2});
    for (int c = 0; c < 2; ++c) conv.weight(k / 2, k / 2, c, c) = 1.0;
    conv.bias = Tensor({2});
    Tensor x = rng.uniform_tensor({8, 9, 2}, -2, 2);
    Tensor y = conv.forward(x);
    for (long long i = 0; i < x.size(); ++i)
      CHECK(y[i] == Catch::Approx(x[i]).margin(1e-14));
  }
}

TEST_CASE("conv matches the direct-summation oracle") {
  Rng rng(6);
  for (int k : {1, 3, 7}) {
    Conv2d conv("c", k, 3, 4, rng);
    Tensor x = rng.uniform_tensor({6, 7, 3}, -1, 1);
    Tensor y = conv.forward(x);
    Tensor ref = oracles::conv2d_naive(x, conv.weight, conv.bias);
    for (long long i = 0; i < y.size(); ++i)
      CHECK(y[i] == Catch::Approx(ref[i]).margin(1e-12));
  }
}

TEST_CASE("channel arithmetic through a 3x3 reduction") {
  Rng rng(8);
  Conv2d conv("c", 3, 258, 256, rng);
  MacCounter counter;
  Tensor y;
  {
    MacScope scope(counter);
    y = conv.forward(Tensor({4, 6, 258}));
  }
  CHECK(y.shape() == std::vector<int>{4, 6, 256});
  CHECK(counter.macs == 4LL * 6 * 9 * 258 * 256);
  CHECK(conv.param_count() == 9LL * 258 * 256 + 256);
}

TEST_CASE("group norm normalizes per group before scale and shift") {
  Rng rng(9);
  GroupNorm gn("g", 8, 2);
  // Large-variance inputs keep the epsilon bias below the assertion level.
  Tensor x = rng.normal_tensor({6, 6, 8}, 0.0, 100.0);
  Tensor y = gn.forward(x, nullptr);
  const int cg = 4;
  for (int g = 0; g < 2; ++g) {
    double mean = 0.0;
    int n = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = g * cg; c < (g + 1) * cg; ++c) {
          mean += y(i, j, c);
          ++n;
        }
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int c = g * cg; c < (g + 1) * cg; ++c) var += (y(i, j, c) - mean) * (y(i, j, c) - mean);
    var /= n;
    CHECK(std::fabs(mean) < 1e-10);
    CHECK(std::fabs(var - 1.0) < 1e-8);
  }
}

TEST_CASE("group norm rejects indivisible group counts") {
  CHECK_THROWS_AS(GroupNorm("g", 6, 4), value_error);
}

TEST_CASE("coordinate channels") {
  SECTION("degenerate one-pixel grid maps to -1") {
    Tensor y = coord_concat(Tensor({1, 1, 2}));
    CHECK(y(0, 0, 2) == -1.0);
    CHECK(y(0, 0, 3) == -1.0);
  }
  SECTION("three rows span -1, 0, 1 on the y channel") {
    Tensor y = coord_concat(Tensor({3, 2, 1}));
    CHECK(y(0, 0, 2) == -1.0);
    CHECK(y(1, 0, 2) == 0.0);
    CHECK(y(2, 0, 2) == 1.0);
    CHECK(y(0, 0, 1) == -1.0);  // x channel at column 0
    CHECK(y(0, 1, 1) == 1.0);   // x channel at column 1
  }
  SECTION("appends exactly two channels") {
    CHECK(coord_concat(Tensor({4, 6, 256})).shape() == std::vector<int>{4, 6, 258});
  }
}

TEST_CASE("bilinear upsampling") {
  SECTION("constant input stays constant") {
    Tensor y = bilinear_upsample_x2(Tensor::full({3, 5, 2}, 2.5));
    for (long long i = 0; i < y.size(); ++i) CHECK(y[i] == 2.5);
  }
  SECTION("2x2 example matches the half-pixel oracle") {
    Tensor x({2, 2, 1}, {0, 1, 2, 3});
    Tensor y = bilinear_upsample_x2(x);
    Tensor ref = oracles::upsample_x2_naive(x);
    REQUIRE(y.shape() == ref.shape());
    for (long long i = 0; i < y.size(); ++i)
      CHECK(y[i] == Catch::Approx(ref[i]).margin(1e-14));
    // Frozen values for the first row.
    CHECK(y(0, 0, 0) == Catch::Approx(0.0));
    CHECK(y(0, 1, 0) == Catch::Approx(0.25));
    CHECK(y(0, 2, 0) == Catch::Approx(0.75));
    CHECK(y(0, 3, 0) == Catch::Approx(1.0));
  }
  SECTION("mean is preserved") {
    Rng rng(12);
    Tensor x = rng.uniform_tensor({4, 6, 3}, -1, 1);
    CHECK(std::fabs(mean(bilinear_upsample_x2(x)) - mean(x)) < 1e-10);
  }
}

TEST_CASE("linear layer") {
  Rng rng(13);
  Linear lin("l", 2, 2, rng);
  SECTION("identity weights pass through") {
    lin.weight = Tensor({2, 2}, {1, 0, 0, 1});
    lin.bias = Tensor({2});
    Tensor x = rng.uniform_tensor({3, 2}, -1, 1);
    Tensor y = lin.forward(x);
    for (long long i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }
  SECTION("hand-computed affine") {
    lin.weight = Tensor({2, 2}, {1, 1, 1, -1});  // columns (1,1) and (1,-1)
    lin.bias = Tensor({2});
    Tensor y = lin.forward(Tensor({1, 2}, {1, 2}));
    CHECK(y(0, 0) == 3.0);
    CHECK(y(0, 1) == -1.0);
  }
  SECTION("slot-mixing shape") {
    Linear mix("m", 8, 4, rng);  // 2n -> n along the slot axis
    Tensor embed = rng.uniform_tensor({5, 8}, -1, 1);  // c x 2n
    CHECK(mix.forward(embed).shape() == std::vector<int>{5, 4});
  }
}

TEST_CASE("channel pooling matches explicit loops") {
  Rng rng(14);
  Tensor x = rng.uniform_tensor({3, 4, 6}, -1, 1);
  Tensor avg = channel_avg_pool(x);
  std::vector<int> argmax;
  Tensor mx = channel_max_pool(x, &argmax);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0, m = -1e30;
      for (int c = 0; c < 6; ++c) {
        s += x(i, j, c);
        m = std::max(m, x(i, j, c));
      }
      CHECK(avg(i, j, 0) == Catch::Approx(s / 6).margin(1e-14));
      CHECK(mx(i, j, 0) == m);
    }
}

TEST_CASE("spatial attention stays strictly inside (0,1) and spans any channel count") {
  Rng rng(15);
  for (int c : {1, 3, 16}) {
    SpatialAttention sa("sa", rng);
    Tensor x = rng.uniform_tensor({5, 7, c}, -3, 3);
    Tensor att = sa.forward(x, nullptr);
    REQUIRE(att.shape() == std::vector<int>{5, 7});
    for (long long i = 0; i < att.size(); ++i) {
      CHECK(att[i] > 0.0);
      CHECK(att[i] < 1.0);
    }
  }
}

TEST_CASE("zeroed spatial attention gives a uniform 0.5 map") {
  Rng rng(16);
  SpatialAttention sa("sa", rng);
  sa.conv.weight = Tensor({7, 7, 2, 1});
  sa.conv.bias = Tensor({1});
  Tensor att = sa.forward(Tensor({4, 4, 3}), nullptr);
  for (long long i = 0; i < att.size(); ++i) CHECK(att[i] == 0.5);
}

TEST_CASE("avg pool 2x2 averages each block") {
  Tensor x({2, 2, 1}, {1, 2, 3, 4});
  Tensor y = avg_pool2x2(x);
  CHECK(y(0, 0, 0) == 2.5);
  CHECK_THROWS_AS(avg_pool2x2(Tensor({3, 4, 1})), shape_error);
}

TEST_CASE("standalone operator gradients pass at 1e-4") {
  GradCheckOptions opt;  // eps 1e-5, tol 1e-4
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    for (const auto& [name, report] : gradcheck::run_suite(seed, opt)) {
      INFO(name << " seed " << seed << " max_rel_err " << report.max_rel_err);
      CHECK(report.pass);
    }
  }
}

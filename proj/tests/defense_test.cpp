#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "scalepoison/attack.hpp"
#include "scalepoison/defense.hpp"
#include "test_support.hpp"

namespace sp = scalepoison;
using sp::testing::random_image;

namespace {

double direct_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

std::vector<double> hist_of(const sp::Image& img) {
  std::vector<double> h(256, 0.0);
  const auto g = sp::to_grayscale(img);
  for (auto v : g.data) h[v] += 1;
  return h;
}

sp::Image smooth_texture(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 1 + 3 * u(rng), fy = 1 + 3 * u(rng), ph = 6 * u(rng), base = 40 + 150 * u(rng);
  sp::Image img(n, n, 3);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = base + 50 * std::sin(fx * r * 6.283 / n + ph) * std::cos(fy * c * 6.283 / n) + 10 * ch;
        img.at(r, c, ch) = sp::quantize(v);
      }
  return img;
}

}  // namespace

TEST(DownUp, ConstantImageSurvives) {
  const sp::Image img(64, 64, 3, std::uint8_t{90});
  EXPECT_EQ(sp::down_up(img, 16, 16, sp::bilinear_kernel), img);
}

TEST(DownUp, BenignSmoothImageScoresHigh) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 5; ++k) {
    const auto img = smooth_texture(rng, 128);
    EXPECT_GE(sp::histogram_score(img, sp::down_up(img, 32, 32, sp::bilinear_kernel)), 0.9);
  }
}

TEST(DownUp, AttackImageScoreDrops) {
  std::mt19937_64 rng(3);
  const auto s = smooth_texture(rng, 128);
  const sp::Image t(32, 32, 3, std::uint8_t{255});
  const auto a = sp::scaling_attack(s, t, {}).attack_image;
  const double benign = sp::histogram_score(s, sp::down_up(s, 32, 32, sp::bilinear_kernel));
  const double attacked = sp::histogram_score(a, sp::down_up(a, 32, 32, sp::bilinear_kernel));
  EXPECT_LT(attacked, benign - 0.2);
}

TEST(DownUp, RejectsTooSmall) {
  EXPECT_THROW(sp::down_up(sp::Image(8, 8, 1), 16, 16, sp::bilinear_kernel), sp::Error);
}

TEST(HistogramScore, SelfIsOne) {
  std::mt19937_64 rng(1);
  const auto img = random_image(rng, 20, 20, 3);
  EXPECT_DOUBLE_EQ(sp::histogram_score(img, img), 1.0);
}

TEST(HistogramScore, DisjointSupportIsZero) {
  EXPECT_EQ(sp::histogram_score(sp::Image(4, 4, 1, std::uint8_t{0}), sp::Image(4, 4, 1, std::uint8_t{255})), 0.0);
}

TEST(HistogramScore, MatchesDirectCosine) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const auto a = random_image(rng, 12, 9, 3);
    const auto b = random_image(rng, 12, 9, 3);
    EXPECT_NEAR(sp::histogram_score(a, b), direct_cosine(hist_of(a), hist_of(b)), 1e-12);
  }
}

TEST(ScatterVector, SinglePixel) {
  sp::GrayImage g(1, 1, 7);
  const auto v = sp::scatter_vector(g);
  for (int i = 0; i < 256; ++i) EXPECT_EQ(v.values[i], 0.0);
}

TEST(ScatterVector, ThreeByThreeHandGeometry) {
  const auto v = sp::scatter_vector(sp::GrayImage(3, 3, 0));
  EXPECT_NEAR(v.values[0], (4 * std::sqrt(2.0) + 4.0) / 9.0, 1e-12);
}

TEST(ScatterVector, RotationInvariant) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 5; ++k) {
    const auto img = random_image(rng, 11, 8, 1);
    const auto a = sp::scatter_vector(sp::to_grayscale(img));
    const auto b = sp::scatter_vector(sp::to_grayscale(sp::rotate180(img)));
    for (int i = 0; i < 256; ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
  }
}

TEST(ScatterVector, BoundedByHalfDiagonal) {
  std::mt19937_64 rng(6);
  const auto img = random_image(rng, 10, 30, 1);
  const auto v = sp::scatter_vector(sp::to_grayscale(img));
  for (double x : v.values) EXPECT_LE(x, 0.5 * std::hypot(10.0, 30.0));
}

TEST(ScatterScore, SelfAndDisjoint) {
  std::mt19937_64 rng(7);
  const auto img = random_image(rng, 9, 9, 3);
  EXPECT_DOUBLE_EQ(sp::scatter_score(img, img), 1.0);
  EXPECT_EQ(sp::scatter_score(sp::Image(5, 5, 1, std::uint8_t{10}), sp::Image(5, 5, 1, std::uint8_t{20})), 0.0);
}

TEST(ScatterScore, MatchesDirectCosine) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    const auto a = random_image(rng, 7, 6, 1);
    const auto b = random_image(rng, 7, 6, 1);
    auto brute = [](const sp::Image& img) {
      std::vector<double> sum(256, 0), cnt(256, 0);
      for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
          const auto v = img.at(r, c);
          sum[v] += std::hypot(r + 0.5 - img.height / 2.0, c + 0.5 - img.width / 2.0);
          cnt[v] += 1;
        }
      for (int i = 0; i < 256; ++i) sum[i] = cnt[i] ? sum[i] / cnt[i] : 0.0;
      return sum;
    };
    EXPECT_NEAR(sp::scatter_score(a, b), direct_cosine(brute(a), brute(b)), 1e-12);
  }
}

TEST(Detect, SelfBaselineAndVerdicts) {
  const sp::Image flat(64, 64, 3, std::uint8_t{30});
  const auto rep = sp::detect(flat, 16, 16, sp::bilinear_kernel);
  EXPECT_EQ(rep.hist_score, 1.0);
  EXPECT_EQ(rep.scatter_score, 1.0);
  EXPECT_FALSE(rep.hist_flag);
  EXPECT_FALSE(rep.scatter_flag);
  const auto strict = sp::detect(flat, 16, 16, sp::bilinear_kernel, {1.5, 1.5});
  EXPECT_TRUE(strict.hist_flag);
  EXPECT_TRUE(strict.scatter_flag);
}

TEST(Roc, PerfectSeparation) {
  const std::vector<double> att = {0.1, 0.2, 0.3}, ben = {0.8, 0.9};
  const auto c = sp::roc(att, ben);
  EXPECT_DOUBLE_EQ(c.auc, 1.0);
  EXPECT_DOUBLE_EQ(c.tpr_at(0.0), 1.0);
}

TEST(Roc, IdenticalDistributions) {
  const std::vector<double> xs = {0.1, 0.5, 0.9};
  EXPECT_DOUBLE_EQ(sp::roc(xs, xs).auc, 0.5);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> a(2000), b(2000);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  EXPECT_NEAR(sp::roc(a, b).auc, 0.5, 0.03);
}

TEST(Roc, AucEqualsMannWhitney) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> d(0, 20);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(37), b(23);
    for (auto& x : a) x = d(rng) / 20.0;
    for (auto& x : b) x = (d(rng) + 4) / 20.0;
    double wins = 0;
    for (double x : a)
      for (double y : b) wins += x < y ? 1.0 : (x == y ? 0.5 : 0.0);
    EXPECT_NEAR(sp::roc(a, b).auc, wins / (a.size() * b.size()), 1e-12);
  }
}

TEST(Roc, MonotoneCurveAndConservativeLookup) {
  const std::vector<double> att = {0.1, 0.4, 0.6, 0.7}, ben = {0.3, 0.5, 0.8, 0.9};
  const auto c = sp::roc(att, ben);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
    EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
  }
  EXPECT_DOUBLE_EQ(c.points.back().fpr, 1.0);
  EXPECT_DOUBLE_EQ(c.points.back().tpr, 1.0);
  EXPECT_DOUBLE_EQ(c.tpr_at(0.0), 0.25);
  EXPECT_DOUBLE_EQ(c.tpr_at(0.2), 0.25);  // no interpolation above the step
  EXPECT_DOUBLE_EQ(c.tpr_at(0.25), 0.5);
  EXPECT_DOUBLE_EQ(c.tpr_at(0.5), 1.0);
}

TEST(Roc, EmptyInputThrows) {
  const std::vector<double> xs = {0.5}, none;
  EXPECT_THROW(sp::roc(none, xs), sp::Error);
  EXPECT_THROW(sp::roc(xs, none), sp::Error);
}

TEST(Roc, CsvColumns) {
  const std::vector<double> att = {0.1}, ben = {0.9};
  std::ostringstream os;
  sp::write_roc_csv(sp::roc(att, ben), os);
  EXPECT_EQ(os.str().substr(0, 18), "threshold,fpr,tpr\n");
  EXPECT_NE(os.str().find(",1,1\n"), std::string::npos);
}

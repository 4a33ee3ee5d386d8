#include "common/fixtures.hpp"
#include "hetmm/evaluation.hpp"
#include "hetmm/matching.hpp"
#include "oracle/reference_oracle.hpp"

#include <gtest/gtest.h>

namespace {

using namespace hetmm;
namespace oracle = hetmm::oracle;

double max_abs_diff(const AnomalyMap& a, const oracle::Grid& b) {
  return (a.cast<double>() - b).cwiseAbs().maxCoeff();
}

TEST(PatchSpec, RejectsEvenOrNonPositiveSizes) {
  EXPECT_THROW(PatchSpec(2, 3), ConfigError);
  EXPECT_THROW(PatchSpec(3, 0), ConfigError);
  EXPECT_THROW(PatchSpec(-1, 1), ConfigError);
  EXPECT_NO_THROW(PatchSpec(9, 5));
}

TEST(CosineDistance, ZeroVectorsAreAtDistanceOne) {
  Eigen::Vector3f zero = Eigen::Vector3f::Zero();
  Eigen::Vector3f u(1, 2, 3);
  EXPECT_EQ(cosine_distance(zero, u), 1.0f);
  EXPECT_EQ(cosine_distance(u, zero), 1.0f);
  EXPECT_EQ(cosine_distance(zero, zero), 1.0f);
  EXPECT_NEAR(cosine_distance(u, Eigen::Vector3f(-u)), 2.0f, 1e-6f);
  EXPECT_NEAR(cosine_distance(u, Eigen::Vector3f(2 * u)), 0.0f, 1e-6f);
}

TEST(PatchIndices, ClipAtBorders) {
  EXPECT_EQ(patch_indices(0, 0, PatchSpec::square(3), 4, 4).size(), 4u);
  EXPECT_EQ(patch_indices(1, 1, PatchSpec::square(3), 4, 4).size(), 9u);
  EXPECT_EQ(patch_indices(3, 0, PatchSpec(5, 1), 4, 4).size(), 3u);
  const auto w = clipped_window(0, 3, PatchSpec(3, 5), 4, 6);
  EXPECT_EQ(w.x0, 0);
  EXPECT_EQ(w.x1, 1);
  EXPECT_EQ(w.y0, 1);
  EXPECT_EQ(w.y1, 3);
}

class OracleAgreement : public ::testing::TestWithParam<int> {};

TEST_P(OracleAgreement, AllDirectionsMatchNaiveLoops) {
  std::mt19937_64 rng(1000 + GetParam());
  const Index h = 3 + GetParam() % 4, w = 2 + GetParam() % 5, c = 1 + GetParam() % 6;
  FeatureMap q = hetmm::testing::random_map(rng, h, w, c);
  auto sheets = hetmm::testing::random_sheets(rng, 4, h, w, c);
  hetmm::testing::sprinkle_zeros(rng, q, 0.1);
  for (auto& s : sheets) hetmm::testing::sprinkle_zeros(rng, s, 0.1);
  const PatchSpec p(1 + 2 * (GetParam() % 3), 1 + 2 * ((GetParam() + 1) % 3));
  const std::span<const FeatureMap> bank(sheets);
  EXPECT_LE(max_abs_diff(forward_hetm(q, bank, p), oracle::naive_forward(q, sheets, p)), 1e-6);
  EXPECT_LE(max_abs_diff(backward_hetm(q, bank, p), oracle::naive_backward(q, sheets, p)), 1e-6);
  EXPECT_LE(max_abs_diff(hetmm_score(q, bank, p, 0.3), oracle::naive_hetmm(q, sheets, p, 0.3)),
            1e-6);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OracleAgreement, ::testing::Range(0, 12));

TEST(Matching, SelfMatchIsExactlyZero) {
  std::mt19937_64 rng(9);
  auto sheets = hetmm::testing::random_sheets(rng, 3, 6, 5, 4);
  const std::span<const FeatureMap> bank(sheets);
  for (const auto& s : sheets) {
    EXPECT_EQ(forward_hetm(s, bank, PatchSpec::square(3)).maxCoeff(), 0.0f);
    EXPECT_EQ(backward_hetm(s, bank, PatchSpec::square(1)).maxCoeff(), 0.0f);
  }
}

TEST(Matching, DoublePrecisionAgreesWithFloat) {
  std::mt19937_64 rng(11);
  const FeatureMap q = hetmm::testing::random_map(rng, 5, 5, 6);
  const auto sheets = hetmm::testing::random_sheets(rng, 3, 5, 5, 6);
  std::vector<FeatureMapT<double>> dsheets;
  for (const auto& s : sheets) dsheets.push_back(s.cast<double>());
  const auto f = forward_hetm(q, std::span<const FeatureMap>(sheets), PatchSpec::square(3));
  const auto d = forward_hetm(q.cast<double>(), std::span<const FeatureMapT<double>>(dsheets),
                              PatchSpec::square(3));
  EXPECT_LE((f.cast<double>() - d).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Matching, ShapeMismatchAndBadAlphaThrow) {
  std::mt19937_64 rng(2);
  const FeatureMap q = hetmm::testing::random_map(rng, 4, 4, 3);
  const auto wrong = hetmm::testing::random_sheets(rng, 2, 4, 5, 3);
  EXPECT_THROW(forward_hetm(q, std::span<const FeatureMap>(wrong), PatchSpec()),
               ShapeMismatchError);
  const auto ok = hetmm::testing::random_sheets(rng, 2, 4, 4, 3);
  EXPECT_THROW(hetmm_score(q, std::span<const FeatureMap>(ok), PatchSpec(), 1.5), ConfigError);
}

TEST(BilinearResize, HalfPixelCentres) {
  AnomalyMap in(2, 2);
  in << 0, 1, 2, 3;
  AnomalyMap expect(4, 4);
  expect << 0.0f, 0.25f, 0.75f, 1.0f,
            0.5f, 0.75f, 1.25f, 1.5f,
            1.5f, 1.75f, 2.25f, 2.5f,
            2.0f, 2.25f, 2.75f, 3.0f;
  EXPECT_LE((bilinear_resize(in, 4, 4) - expect).cwiseAbs().maxCoeff(), 1e-6f);
  EXPECT_EQ(bilinear_resize(in, 2, 2), in);
  AnomalyMap down = bilinear_resize(expect, 2, 2);
  EXPECT_NEAR(down(0, 0), 0.375f, 1e-6f);
}

TEST(AggregateLayers, SumsRescaledMaps) {
  AnomalyMap a = AnomalyMap::Constant(2, 2, 1.0f);
  AnomalyMap b = AnomalyMap::Constant(4, 4, 0.5f);
  const std::vector<AnomalyMap> maps{a, b};
  const AnomalyMap s = aggregate_layers<float>(maps, 8, 8);
  EXPECT_EQ(s.rows(), 8);
  EXPECT_LE((s.array() - 1.5f).abs().maxCoeff(), 1e-6f);
}

}  // namespace

namespace {

using namespace hetmm;

FeatureMap from_rows(Index h, Index w, std::initializer_list<std::initializer_list<float>> rows) {
  RowMatrix<float> m(h * w, static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (float v : row) m(r, c++) = v;
    ++r;
  }
  return FeatureMap(1, h, w, m);
}

TEST(Matching, HandWorkedWindows) {
  // 1x2 image: query (1,0) at x=0; template holds (0,1) and (1,1).
  const FeatureMap q = from_rows(1, 2, {{1, 0}, {0, 1}});
  const std::vector<FeatureMap> t{from_rows(1, 2, {{0, 1}, {1, 1}})};
  const AnomalyMap f = forward_hetm(q, std::span<const FeatureMap>(t), PatchSpec(3, 1));
  EXPECT_NEAR(f(0, 0), 1.0 - 1.0 / std::sqrt(2.0), 1e-6);

  // Template (1,0) at x=0; query patch holds (0,1) and (1,1).
  const FeatureMap q2 = from_rows(1, 2, {{0, 1}, {1, 1}});
  const std::vector<FeatureMap> t2{from_rows(1, 2, {{1, 0}, {0, 1}})};
  const AnomalyMap b = backward_hetm(q2, std::span<const FeatureMap>(t2), PatchSpec(3, 1));
  EXPECT_NEAR(b(0, 0), 1.0 - 1.0 / std::sqrt(2.0), 1e-6);
}

TEST(Matching, AlphaEndpointsAndMix) {
  std::mt19937_64 rng(31);
  const FeatureMap q = hetmm::testing::random_map(rng, 5, 6, 3);
  const auto sheets = hetmm::testing::random_sheets(rng, 3, 5, 6, 3);
  const std::span<const FeatureMap> bank(sheets);
  const PatchSpec p = PatchSpec::square(3);
  EXPECT_EQ(hetmm_score(q, bank, p, 1.0), forward_hetm(q, bank, p));
  EXPECT_EQ(hetmm_score(q, bank, p, 0.0), backward_hetm(q, bank, p));
  const AnomalyMap f = AnomalyMap::Constant(1, 1, 0.5f), b = AnomalyMap::Constant(1, 1, 0.25f);
  EXPECT_FLOAT_EQ(mix_directions(f, b, 0.8)(0, 0), 0.45f);
}

TEST(Matching, RangeAndScaleInvariance) {
  std::mt19937_64 rng(32);
  FeatureMap q = hetmm::testing::random_map(rng, 6, 6, 4);
  auto sheets = hetmm::testing::random_sheets(rng, 4, 6, 6, 4);
  const PatchSpec p = PatchSpec::square(3);
  const AnomalyMap before = hetmm_score(q, std::span<const FeatureMap>(sheets), p, 0.5);
  EXPECT_GE(before.minCoeff(), 0.0f);
  EXPECT_LE(before.maxCoeff(), 2.0f);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (Index r = 0; r < q.pixels(); ++r) q.data().row(r) *= scale(rng);
  for (auto& s : sheets)
    for (Index r = 0; r < s.pixels(); ++r) s.data().row(r) *= scale(rng);
  const AnomalyMap after = hetmm_score(q, std::span<const FeatureMap>(sheets), p, 0.5);
  EXPECT_LE((after - before).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(Matching, ZeroVectorNeverSelfMatches) {
  std::mt19937_64 rng(33);
  FeatureMap s = hetmm::testing::random_map(rng, 3, 3, 4);
  s.data().row(4).setZero();
  const std::vector<FeatureMap> bank{s};
  const AnomalyMap f = forward_hetm(s, std::span<const FeatureMap>(bank), PatchSpec());
  EXPECT_EQ(f(1, 1), 1.0f);
  EXPECT_EQ(f(0, 0), 0.0f);
}

TEST(PatchIndices, InteriorAndDegenerate) {
  const auto full = patch_indices(5, 5, PatchSpec::square(3), 32, 32);
  ASSERT_EQ(full.size(), 9u);
  EXPECT_EQ(full.front(), (PixelCoord{4, 4}));
  EXPECT_EQ(full.back(), (PixelCoord{6, 6}));
  EXPECT_EQ(patch_indices(7, 2, PatchSpec(), 32, 32), (std::vector<PixelCoord>{{7, 2}}));
}

TEST(BilinearResize, StaysWithinInputRange) {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<float> u(-3.0f, 5.0f);
  AnomalyMap in(5, 7);
  for (Index i = 0; i < in.size(); ++i) in.data()[i] = u(rng);
  for (auto [h, w] : {std::pair<Index, Index>{13, 4}, {2, 2}, {31, 29}}) {
    const AnomalyMap out = bilinear_resize(in, h, w);
    EXPECT_GE(out.minCoeff(), in.minCoeff() - 1e-6f);
    EXPECT_LE(out.maxCoeff(), in.maxCoeff() + 1e-6f);
  }
  const std::vector<AnomalyMap> maps{AnomalyMap::Constant(3, 3, 0.2f), AnomalyMap::Constant(6, 6, 0.3f)};
  EXPECT_LE((aggregate_layers<float>(maps, 6, 6).array() - 0.5f).abs().maxCoeff(), 1e-6f);
}

// A nominal query shifted by one pixel with a few foreign vectors planted in
// it. Pixel matching flags the shift everywhere, mean-pooled patches blur
// the planted vectors, mutual matching isolates them.
TEST(Ablation, PointBelowPatchBelowMutualMatching) {
  std::mt19937_64 rng(35);
  const Index h = 16, w = 16, c = 16;
  const auto sheets = hetmm::testing::random_sheets(rng, 3, h, w, c);
  FeatureMap q(1, h, w, c);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) q.pixel(x, y) = sheets[1].pixel(std::min<Index>(x + 1, w - 1), y);
  Mask truth = Mask::Zero(h, w);
  for (auto [x, y] : {std::pair<Index, Index>{3, 3}, {10, 4}, {6, 12}, {12, 11}}) {
    q.pixel(x, y) = hetmm::testing::random_map(rng, 1, 1, c).pixel(0, 0);
    truth(y, x) = 1;
  }
  const PatchSpec p = PatchSpec::square(3);
  auto quality = [&](const oracle::Grid& g) {
    return pixel_auroc(std::vector<PixelRecord>{{g.cast<float>(), truth}});
  };
  const double point = quality(oracle::naive_pixel_match(q, sheets));
  const double patch = quality(oracle::naive_patch_match(q, sheets, p));
  const AnomalyMap mutual =
      hetmm_score(q, std::span<const FeatureMap>(sheets), p, 0.8);
  const double hetm = pixel_auroc(std::vector<PixelRecord>{{mutual, truth}});
  EXPECT_LT(point, patch);
  EXPECT_LT(patch, hetm);

  // At a shifted nominal pixel the window search finds the displaced vector.
  const AnomalyMap fwd = forward_hetm(q, std::span<const FeatureMap>(sheets), p);
  EXPECT_LT(fwd(8, 8), oracle::naive_pixel_match(q, sheets)(8, 8));
}

}  // namespace

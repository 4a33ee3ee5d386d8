#include "hetmm/postprocess.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>

namespace {

using namespace hetmm;

TEST(Gaussian, KernelIsNormalisedWithRoundedRadius) {
  const auto k = gaussian_kernel(6.8, 4.0);
  EXPECT_EQ(k.size(), 2u * 27 + 1);
  double sum = 0.0;
  for (double v : k) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_EQ(k.front(), k.back());
  EXPECT_EQ(gaussian_kernel(1.0, 4.0).size(), 9u);
}

TEST(Gaussian, ReflectIndexMirrorsAboutTheEdge) {
  EXPECT_EQ(reflect_index(-1, 4), 0);
  EXPECT_EQ(reflect_index(-2, 4), 1);
  EXPECT_EQ(reflect_index(4, 4), 3);
  EXPECT_EQ(reflect_index(5, 4), 2);
  EXPECT_EQ(reflect_index(9, 4), 1);
  EXPECT_EQ(reflect_index(-30, 1), 0);
}

TEST(Gaussian, MatchesFrozenScipyOutput) {
  std::ifstream in(std::string(HETMM_TEST_DATA_DIR) + "/blur_fixtures.json");
  const auto cases = nlohmann::json::parse(in);
  for (const auto& c : cases) {
    const auto rows = c.at("input").get<std::vector<std::vector<double>>>();
    const auto want = c.at("output").get<std::vector<std::vector<double>>>();
    RowMatrix<double> m(rows.size(), rows.front().size());
    for (Index y = 0; y < m.rows(); ++y)
      for (Index x = 0; x < m.cols(); ++x) m(y, x) = rows[y][x];
    const auto got = gaussian_blur(m, {c.at("sigma").get<double>(), c.at("truncation").get<double>()});
    for (Index y = 0; y < m.rows(); ++y)
      for (Index x = 0; x < m.cols(); ++x) EXPECT_NEAR(got(y, x), want[y][x], 1e-12);
  }
}

TEST(Gaussian, ConstantMapIsPreserved) {
  AnomalyMap m = AnomalyMap::Constant(7, 5, 0.25f);
  EXPECT_LE((gaussian_blur(m, PostConfig{}).array() - 0.25f).abs().maxCoeff(), 1e-6f);
  EXPECT_NEAR(image_score(m, PostConfig{}), 0.25f, 1e-6f);
}

TEST(Gaussian, RejectsBadParameters) {
  AnomalyMap m = AnomalyMap::Zero(2, 2);
  EXPECT_THROW(gaussian_blur(m, {0.0, 4.0}), ConfigError);
  EXPECT_THROW(gaussian_blur(m, {1.0, -1.0}), ConfigError);
}

TEST(Normalize, MinMaxAndConstant) {
  AnomalyMap m(1, 3);
  m << 2, 4, 3;
  const AnomalyMap n = normalize01(m);
  EXPECT_EQ(n(0, 0), 0.0f);
  EXPECT_EQ(n(0, 1), 1.0f);
  EXPECT_FLOAT_EQ(n(0, 2), 0.5f);
  EXPECT_EQ(normalize01(AnomalyMap::Constant(2, 2, 3.0f)), AnomalyMap::Zero(2, 2));
}

}  // namespace

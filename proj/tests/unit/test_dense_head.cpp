#include <gtest/gtest.h>

#include "cxr/dense_head.hpp"
#include "cxr/error.hpp"
#include "cxr/rng.hpp"
#include "tempdir.hpp"

using namespace cxr;
using testing_support::TempDir;

namespace {

// Label is finding 5 above 0.5, with a margin of 0.1 around the boundary.
void separable_set(Rng& rng, std::size_t n, std::vector<FindingVector>& x, std::vector<int>& y) {
  while (x.size() < n) {
    FindingVector v;
    for (double& e : v) e = rng.uniform();
    if (std::abs(v[5] - 0.5) < 0.1) continue;
    x.push_back(v);
    y.push_back(v[5] > 0.5 ? 1 : 0);
  }
}

TEST(DenseHead, DefaultWidthIsFiveHundredTwelve) {
  const DenseHead head;
  EXPECT_EQ(head.hidden(), 512u);
  const auto& params = head.network().parameters();
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0].name, "hidden.weight");
  EXPECT_EQ(params[0].tensor.shape(), (Shape{14, 512}));
  EXPECT_EQ(params[2].tensor.shape(), (Shape{512, 1}));
}

TEST(DenseHead, ZeroOutputLayerPredictsOneHalf) {
  const DenseHead head(512, nn::InitOptions{4, true});
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    FindingVector v;
    for (double& e : v) e = rng.uniform();
    EXPECT_EQ(head.predict(v), 0.5);
  }
}

TEST(DenseHead, SeparableSetReachesFullTrainingAccuracy) {
  Rng rng(2);
  std::vector<FindingVector> x;
  std::vector<int> y;
  separable_set(rng, 200, x, y);
  DenseHeadConfig cfg;
  ASSERT_EQ(cfg.train.epochs, 200u);
  DenseFitResult fit;
  const auto head = fit_dense_head(x, y, cfg, &fit);
  ASSERT_EQ(fit.epoch_loss.size(), 200u);
  EXPECT_LT(fit.epoch_loss.back(), fit.epoch_loss.front());
  const auto p = head.predict_batch(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += (p[i] > 0.5) == (y[i] == 1);
  EXPECT_EQ(correct, x.size());
}

TEST(DenseHead, TrainingIsDeterministic) {
  Rng rng(3);
  std::vector<FindingVector> x;
  std::vector<int> y;
  separable_set(rng, 40, x, y);
  DenseHeadConfig cfg;
  cfg.hidden = 16;
  cfg.train.epochs = 5;
  const auto a = fit_dense_head(x, y, cfg), b = fit_dense_head(x, y, cfg);
  EXPECT_EQ(a.predict_batch(x), b.predict_batch(x));
}

TEST(DenseHead, SaveLoadRecoversWidthAndPredictions) {
  TempDir dir;
  const DenseHead head(24, nn::InitOptions{6, false});
  head.save(dir / "head.params");
  const auto back = DenseHead::load(dir / "head.params");
  EXPECT_EQ(back.hidden(), 24u);
  FindingVector v;
  v.fill(0.3);
  EXPECT_EQ(back.predict(v), head.predict(v));
}

TEST(DenseHead, BatchAndSinglePredictionsAgree) {
  const DenseHead head(32, nn::InitOptions{7, false});
  Rng rng(4);
  std::vector<FindingVector> x;
  std::vector<int> y;
  separable_set(rng, 30, x, y);
  const auto batch = head.predict_batch(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(batch[i], head.predict(x[i]), 1e-12);
}

TEST(DenseHead, RejectsBadInput) {
  DenseHeadConfig cfg;
  cfg.hidden = 8;
  EXPECT_THROW(fit_dense_head({}, {}, cfg), DataError);
  std::vector<FindingVector> x(3);
  EXPECT_THROW(fit_dense_head(x, {0, 1}, cfg), DataError);
  EXPECT_THROW(fit_dense_head(x, {0, 1, 2}, cfg), DataError);
  EXPECT_THROW(DenseHead(0), UsageError);
}

TEST(DenseHead, DivergenceIsANumericError) {
  Rng rng(5);
  std::vector<FindingVector> x;
  std::vector<int> y;
  separable_set(rng, 40, x, y);
  DenseHeadConfig cfg;
  cfg.hidden = 8;
  cfg.train.learning_rate = 1e300;
  cfg.train.epochs = 5;
  EXPECT_THROW(fit_dense_head(x, y, cfg), NumericError);
}

}  // namespace

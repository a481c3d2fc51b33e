#include <gtest/gtest.h>

#include <algorithm>

#include "cxr/error.hpp"
#include "cxr/gradcam.hpp"
#include "cxr/rng.hpp"
#include "oracles.hpp"

using namespace cxr;

namespace {

// One conv block feeding the dense layer directly, so d(logit f)/d(relu1)
// is column f of the dense weight.
const char* kShallowSpec =
    "input 1 12 12\nconv 3 3 pad=1\nrelu\nflatten\ndense 14\nsigmoid\n";

Image random_image(Rng& rng, std::size_t h, std::size_t w) {
  Image img(h, w);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

void expect_heatmap_invariants(const Image& map, const Image& input) {
  ASSERT_EQ(map.height, input.height);
  ASSERT_EQ(map.width, input.width);
  const double peak = *std::max_element(map.pixels.begin(), map.pixels.end());
  for (double v : map.pixels) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_TRUE(peak == 0.0 || peak == 1.0) << peak;
}

TEST(CombineCam, SingleMapCollapsesToItsNormalizedRelu) {
  Rng rng(51);
  const auto a = oracle::random_values(rng, 36);
  const std::vector<double> g(36, 1.0);
  const auto map = combine_cam(a, g, 1, 6, 6, 6, 6, Resample::Bilinear);
  const double peak = *std::max_element(a.begin(), a.end());
  ASSERT_GT(peak, 0.0);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(map.pixels[i], std::max(a[i], 0.0) / peak, 1e-15);
}

TEST(CombineCam, UpsamplesBeforeNormalizing) {
  Rng rng(52);
  const auto a = oracle::random_values(rng, 16, 0.0, 1.0);
  const std::vector<double> g(16, 2.0);
  const auto map = combine_cam(a, g, 1, 4, 4, 12, 12, Resample::Nearest);
  Image raw(4, 4);
  raw.pixels = a;
  const auto up = resize(raw, 12, 12, Resample::Nearest);
  const double peak = *std::max_element(up.pixels.begin(), up.pixels.end());
  for (std::size_t i = 0; i < up.pixels.size(); ++i) EXPECT_NEAR(map.pixels[i], up.pixels[i] / peak, 1e-15);
}

TEST(CombineCam, WeightsMapsByMeanGradient) {
  // Map 0 has alpha 1, map 1 has alpha -1 (its gradients average to -1).
  const std::vector<double> a = {1, 0, 0, 0, /**/ 0, 0, 0, 3};
  const std::vector<double> g = {1, 1, 1, 1, /**/ -2, 0, -2, 0};
  const auto map = combine_cam(a, g, 2, 2, 2, 2, 2, Resample::Bilinear);
  EXPECT_EQ(map.pixels, (std::vector<double>{1, 0, 0, 0}));
}

TEST(CombineCam, NegativeEvidenceGivesAZeroMap) {
  const std::vector<double> a(8, 1.0), g(8, -1.0);
  const auto map = combine_cam(a, g, 2, 2, 2, 5, 5, Resample::Bilinear);
  for (double v : map.pixels) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(combine_cam(a, std::vector<double>(7), 2, 2, 2, 5, 5, Resample::Bilinear), ShapeError);
}

TEST(GradCam, FindingMapMatchesTheDenseWeightOracle) {
  Rng rng(53);
  const FindingsModel model(nn::ModelSpec::parse(kShallowSpec), nn::InitOptions{4, false});
  const auto image = random_image(rng, 12, 12);
  const auto features = model.capture_activation("relu1");
  model.predict(image);
  const auto act = oracle::as_vector(features.activation().data());
  const Tensor* weight = nullptr;
  for (const auto& p : model.network().parameters())
    if (p.name == "dense1.weight") weight = &p.tensor;
  ASSERT_NE(weight, nullptr);
  for (std::size_t f : {0u, 5u, 13u}) {
    std::vector<double> grad(act.size());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = weight->data()[i * 14 + f];
    std::vector<double> raw(144, 0.0);
    for (std::size_t k = 0; k < 3; ++k) {
      double alpha = 0.0;
      for (std::size_t i = 0; i < 144; ++i) alpha += grad[k * 144 + i];
      alpha /= 144.0;
      for (std::size_t i = 0; i < 144; ++i) raw[i] += alpha * act[k * 144 + i];
    }
    double peak = 0.0;
    for (double& v : raw) peak = std::max(peak, v = std::max(v, 0.0));
    const auto map = grad_cam_finding(model, image, f);
    for (std::size_t i = 0; i < 144; ++i)
      EXPECT_NEAR(map.pixels[i], peak > 0 ? raw[i] / peak : 0.0, 1e-12) << f << ' ' << i;
  }
}

TEST(GradCam, ZeroGradientTargetGivesAZeroMap) {
  Rng rng(54);
  const FindingsModel model(nn::ModelSpec::parse(kShallowSpec), nn::InitOptions{4, true});
  const auto map = grad_cam_finding(model, random_image(rng, 12, 12), 2);
  for (double v : map.pixels) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, InvariantsHoldOnRandomModelsAndImages) {
  Rng rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    const FindingsModel model(nn::ModelSpec::parse(default_findings_spec_text(16, 16)),
                              nn::InitOptions{rng.next(), false});
    const auto image = random_image(rng, 16, 16);
    expect_heatmap_invariants(grad_cam_finding(model, image, rng.below(14)), image);
    GradCamOptions nearest;
    nearest.upsample = Resample::Nearest;
    expect_heatmap_invariants(grad_cam_finding(model, image, rng.below(14), nearest), image);
    const DenseHead head(16, nn::InitOptions{rng.next(), false});
    expect_heatmap_invariants(grad_cam_diagnosis(model, head, image), image);
  }
}

TEST(GradCam, WorksOnFrozenModelsWithoutTouchingParameters) {
  Rng rng(56);
  const auto model = freeze(FindingsModel(nn::ModelSpec::parse(default_findings_spec_text(16, 16))));
  const auto image = random_image(rng, 16, 16);
  const auto before = model.predict(image);
  expect_heatmap_invariants(grad_cam_finding(model, image, 3), image);
  for (const auto& p : model.network().parameters()) EXPECT_FALSE(p.tensor.has_grad()) << p.name;
  EXPECT_EQ(model.predict(image), before);
}

TEST(GradCam, RejectsUnknownLayersAndFindings) {
  const FindingsModel model(nn::ModelSpec::parse(kShallowSpec));
  GradCamOptions opt;
  opt.layer = "conv9";
  EXPECT_THROW(grad_cam_finding(model, Image(12, 12), 0, opt), UsageError);
  EXPECT_THROW(grad_cam_finding(model, Image(12, 12), 14), UsageError);
  opt.layer = "dense1";
  EXPECT_THROW(grad_cam_finding(model, Image(12, 12), 0, opt), ShapeError);
  const FindingsModel flat(nn::ModelSpec::parse("input 1 8 8\nflatten\ndense 14\nsigmoid\n"));
  EXPECT_THROW(grad_cam_finding(flat, Image(8, 8), 0), UsageError);
}

TEST(Heatmap, MassFractionByHand) {
  Image map(4, 4, 0.0);
  map.at(0, 0) = 1.0;
  map.at(3, 3) = 1.0;
  map.at(0, 3) = 2.0;
  EXPECT_EQ(heatmap_mass_fraction(map, 0, 2, 0, 2), 0.25);
  EXPECT_EQ(heatmap_mass_fraction(map, 0, 2, 2, 4), 0.5);
  EXPECT_EQ(heatmap_mass_fraction(Image(4, 4), 0, 2, 0, 2), 0.0);
}

TEST(Heatmap, OverlayBlendsAtTheRequestedAlpha) {
  const Image base(3, 5, 0.4);
  const Image heat(3, 5, 0.0);
  const auto none = overlay(base, heat, 0.0);
  EXPECT_EQ(none.rgb.size(), 45u);
  for (auto v : none.rgb) EXPECT_EQ(v, to_byte(0.4));
  const auto full = overlay(base, heat, 1.0);
  // Zero heat is dark blue in the jet ramp.
  EXPECT_EQ(full.rgb[0], 0);
  EXPECT_EQ(full.rgb[1], 0);
  EXPECT_EQ(full.rgb[2], to_byte(0.5));
  EXPECT_THROW(overlay(base, Image(3, 4), 0.5), ShapeError);
}

}  // namespace

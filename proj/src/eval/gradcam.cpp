#include "cxr/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"

namespace cxr {
namespace {

std::string resolve_layer(const FindingsModel& model, const GradCamOptions& options) {
  const std::string tag = options.layer.empty() ? model.network().last_conv_tag() : options.layer;
  if (tag.empty()) throw UsageError("model has no convolution layer to explain");
  return tag;
}

// Runs the explained forward pass. `score` maps the findings output (and the
// image model's logits) to a scalar target.
template <typename Score>
Image run_cam(const FindingsModel& model, const Image& image, const GradCamOptions& options,
              Score&& score) {
  const std::string tag = resolve_layer(model, options);
  const nn::CaptureHandle features = model.capture_activation(tag);
  const nn::CaptureHandle logits = model.capture_activation(model.logit_tag());
  // The input carries the graph; parameters enter as constants.
  const Tensor base = model.to_batch(std::span<const Image>(&image, 1));
  const Tensor input = Tensor::from_data(base.shape(), {base.data().begin(), base.data().end()}, true);
  const Tensor probs = model.forward(input, false);
  const Tensor target = score(probs, logits.activation());
  target.backward();

  const Tensor& a = features.activation();
  if (a.rank() != 4) throw ShapeError("layer '" + tag + "' is not a spatial feature map");
  std::vector<double> grad(a.numel(), 0.0);
  if (a.has_grad()) {
    const auto g = a.grad();
    std::copy(g.begin(), g.end(), grad.begin());
  }
  return combine_cam(a.data(), grad, a.dim(1), a.dim(2), a.dim(3), image.height, image.width,
                     options.upsample);
}

Tensor pick(const Tensor& row_values, std::size_t index) {
  std::vector<double> mask(row_values.numel(), 0.0);
  mask.at(index) = 1.0;
  return ops::sum(ops::mul(row_values, Tensor::from_data(row_values.shape(), std::move(mask))));
}

}  // namespace

Image combine_cam(std::span<const double> activation, std::span<const double> gradient,
                  std::size_t maps, std::size_t h, std::size_t w, std::size_t out_h,
                  std::size_t out_w, Resample upsample) {
  const std::size_t area = h * w;
  if (activation.size() != maps * area || gradient.size() != maps * area)
    throw ShapeError("Grad-CAM: activation and gradient must both hold K*h*w values");
  Image raw(h, w, 0.0);
  for (std::size_t k = 0; k < maps; ++k) {
    double alpha = 0.0;
    for (std::size_t i = 0; i < area; ++i) alpha += gradient[k * area + i];
    alpha /= static_cast<double>(area);
    if (alpha == 0.0) continue;
    for (std::size_t i = 0; i < area; ++i) raw.pixels[i] += alpha * activation[k * area + i];
  }
  for (double& v : raw.pixels) v = std::max(v, 0.0);
  Image out = resize(raw, out_h, out_w, upsample);
  const double peak = *std::max_element(out.pixels.begin(), out.pixels.end());
  for (double& v : out.pixels) v = peak > 0.0 ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
  return out;
}

Image grad_cam_finding(const FindingsModel& model, const Image& image, std::size_t finding,
                       const GradCamOptions& options) {
  if (finding >= kFindingCount) throw UsageError("finding index out of range");
  return run_cam(model, image, options,
                 [&](const Tensor&, const Tensor& logits) { return pick(logits, finding); });
}

Image grad_cam_diagnosis(const FindingsModel& model, const DenseHead& head, const Image& image,
                         const GradCamOptions& options) {
  const nn::CaptureHandle head_logit = head.capture_activation(DenseHead::kLogitTag);
  return run_cam(model, image, options, [&](const Tensor& probs, const Tensor&) {
    head.forward(probs, false);
    return ops::sum(head_logit.activation());
  });
}

double heatmap_mass_fraction(const Image& heatmap, std::size_t y0, std::size_t y1, std::size_t x0,
                             std::size_t x1) {
  double total = 0.0, inside = 0.0;
  for (std::size_t y = 0; y < heatmap.height; ++y)
    for (std::size_t x = 0; x < heatmap.width; ++x) {
      const double v = heatmap.at(y, x);
      total += v;
      if (y >= y0 && y < y1 && x >= x0 && x < x1) inside += v;
    }
  return total > 0.0 ? inside / total : 0.0;
}

RgbImage overlay(const Image& base, const Image& heatmap, double alpha) {
  if (base.height != heatmap.height || base.width != heatmap.width)
    throw ShapeError("overlay: heatmap and image extents differ");
  RgbImage out{base.height, base.width, std::vector<std::uint8_t>(base.pixels.size() * 3)};
  for (std::size_t i = 0; i < base.pixels.size(); ++i) {
    const double t = heatmap.pixels[i];
    const double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
    const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
    const double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
    const double gray = base.pixels[i];
    const double rgb[3] = {r, g, b};
    for (int c = 0; c < 3; ++c)
      out.rgb[i * 3 + c] = to_byte((1.0 - alpha) * gray + alpha * rgb[c]);
  }
  return out;
}

}  // namespace cxr

#pragma once
// Grad-CAM heatmaps for a finding output or for the composed diagnosis.

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "cxr/dense_head.hpp"
#include "cxr/findings.hpp"
#include "cxr/image.hpp"

namespace cxr {

struct GradCamOptions {
  // Empty selects the model's last convolution block.
  std::string layer;
  Resample upsample = Resample::Bilinear;
};

// Feature maps [K,h,w] and their gradients (same layout) -> heatmap with the
// given extents: alpha_k = mean of gradient map k, raw = relu(sum_k alpha_k
// A_k), resampled, then divided by its max. An all-zero map stays zero.
Image combine_cam(std::span<const double> activation, std::span<const double> gradient,
                  std::size_t maps, std::size_t h, std::size_t w, std::size_t out_h,
                  std::size_t out_w, Resample upsample);

// Target score is the pre-sigmoid output of `finding`.
Image grad_cam_finding(const FindingsModel& model, const Image& image, std::size_t finding,
                       const GradCamOptions& options = {});

// Target score is the dense head's pre-sigmoid output, back-propagated
// through the finding probabilities into the image model.
Image grad_cam_diagnosis(const FindingsModel& model, const DenseHead& head, const Image& image,
                         const GradCamOptions& options = {});

// Fraction of the heatmap's total mass inside [y0,y1) x [x0,x1).
double heatmap_mass_fraction(const Image& heatmap, std::size_t y0, std::size_t y1, std::size_t x0,
                             std::size_t x1);

// Jet-like colouring of the heatmap blended over the grayscale input.
RgbImage overlay(const Image& base, const Image& heatmap, double alpha = 0.5);

}  // namespace cxr

#include <fstream>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/findings.hpp"
#include "cxr/param_io.hpp"

namespace cxr {
namespace {

constexpr std::string_view kModelHeader = "cxr-findings-model 1";

std::filesystem::path params_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".params";
  return p;
}

}  // namespace

std::string default_findings_spec_text(std::size_t height, std::size_t width) {
  return "input 1 " + std::to_string(height) + " " + std::to_string(width) +
         "\n"
         "conv 8 3 pad=1\n"
         "relu\n"
         "maxpool 2\n"
         "conv 16 3 pad=1\n"
         "relu\n"
         "maxpool 2\n"
         "flatten\n"
         "dense 14\n"
         "sigmoid\n";
}

FindingsModel::FindingsModel(nn::ModelSpec spec, const nn::InitOptions& init)
    : net_(std::move(spec), init) {
  const auto& s = net_.spec();
  if (s.input.size() != 3 || s.input[0] != 1)
    throw ShapeError("findings model input must be 1,H,W, got " + to_string(s.input));
  if (s.input[1] < kMinImageExtent || s.input[2] < kMinImageExtent)
    throw ShapeError("findings model input must be at least 8x8");
  const auto& layers = s.layers;
  if (layers.size() < 2 || layers.back().kind != nn::LayerKind::Sigmoid ||
      layers[layers.size() - 2].kind != nn::LayerKind::Dense ||
      layers[layers.size() - 2].units != kFindingCount)
    throw ShapeError("findings model must end with 'dense 14' followed by 'sigmoid'");
  logit_tag_ = layers[layers.size() - 2].tag;
}

std::size_t FindingsModel::input_height() const { return net_.spec().input[1]; }
std::size_t FindingsModel::input_width() const { return net_.spec().input[2]; }

Tensor FindingsModel::forward(const Tensor& images, bool track_grad) const {
  if (track_grad && frozen_) throw UsageError("model is frozen; parameters cannot be trained");
  return net_.forward(images, track_grad);
}

Tensor FindingsModel::to_batch(std::span<const Image> images) const {
  const std::size_t h = input_height(), w = input_width();
  std::vector<double> data;
  data.reserve(images.size() * h * w);
  for (const Image& img : images) {
    if (img.height != h || img.width != w)
      throw ShapeError("image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                       " but the model expects " + std::to_string(h) + "x" + std::to_string(w));
    data.insert(data.end(), img.pixels.begin(), img.pixels.end());
  }
  return Tensor::from_data({images.size(), 1, h, w}, std::move(data));
}

FindingVector FindingsModel::predict(const Image& image) const {
  return predict_batch(std::span<const Image>(&image, 1)).front();
}

std::vector<FindingVector> FindingsModel::predict_batch(std::span<const Image> images,
                                                        std::size_t chunk) const {
  if (chunk == 0) throw UsageError("prediction chunk must be positive");
  std::vector<FindingVector> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const auto part = images.subspan(start, std::min(chunk, images.size() - start));
    const Tensor probs = net_.forward(to_batch(part), false);
    const auto d = probs.data();
    for (std::size_t i = 0; i < part.size(); ++i) {
      FindingVector v;
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(i * kFindingCount), kFindingCount,
                  v.begin());
      out.push_back(v);
    }
  }
  return out;
}

nn::Sequential& FindingsModel::mutable_network() {
  if (frozen_) throw UsageError("model is frozen; parameters cannot be modified");
  return net_;
}

nn::CaptureHandle FindingsModel::capture_activation(std::string_view tag) const {
  return net_.capture_activation(tag);
}

void FindingsModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kModelHeader << '\n' << "frozen " << (frozen_ ? 1 : 0) << '\n' << net_.spec().to_text();
  if (!out) throw DataError("failed writing " + path.string());
  save_parameters(params_path(path), net_.parameters());
}

FindingsModel FindingsModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file " + path.string());
  std::string header, frozen_line;
  std::getline(in, header);
  if (header != kModelHeader)
    throw DataError(path.string() + ": not a findings model (expected '" +
                    std::string(kModelHeader) + "')");
  std::getline(in, frozen_line);
  if (frozen_line != "frozen 0" && frozen_line != "frozen 1")
    throw DataError(path.string() + " line 2: expected 'frozen 0' or 'frozen 1'");
  std::ostringstream rest;
  rest << in.rdbuf();
  FindingsModel model(nn::ModelSpec::parse(rest.str()));
  model.net_.load(load_parameters(params_path(path)));
  model.frozen_ = frozen_line == "frozen 1";
  return model;
}

FindingsModel freeze(FindingsModel model) {
  model.freeze();
  return model;
}

}  // namespace cxr

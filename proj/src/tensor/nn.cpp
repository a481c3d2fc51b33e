#include "cxr/nn.hpp"

#include <cmath>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/rng.hpp"

namespace cxr::nn {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_count(const std::string& token, std::size_t line, bool allow_zero = false) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || v < 0 || (!allow_zero && v == 0))
    throw DataError("model spec line " + std::to_string(line) + ": expected a " +
                    (allow_zero ? "non-negative" : "positive") + " integer, got '" + token + "'");
  return static_cast<std::size_t>(v);
}

std::optional<LayerKind> kind_from(std::string_view word) {
  if (word == "conv") return LayerKind::Conv;
  if (word == "maxpool") return LayerKind::MaxPool;
  if (word == "relu") return LayerKind::Relu;
  if (word == "sigmoid") return LayerKind::Sigmoid;
  if (word == "gap") return LayerKind::GlobalAvgPool;
  if (word == "flatten") return LayerKind::Flatten;
  if (word == "dense") return LayerKind::Dense;
  return std::nullopt;
}

std::string_view tag_stem(LayerKind kind) {
  switch (kind) {
    case LayerKind::MaxPool:
      return "pool";
    case LayerKind::GlobalAvgPool:
      return "gap";
    default:
      return kind_name(kind);
  }
}

}  // namespace

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv:
      return "conv";
    case LayerKind::MaxPool:
      return "maxpool";
    case LayerKind::Relu:
      return "relu";
    case LayerKind::Sigmoid:
      return "sigmoid";
    case LayerKind::GlobalAvgPool:
      return "gap";
    case LayerKind::Flatten:
      return "flatten";
    case LayerKind::Dense:
      return "dense";
  }
  return "?";
}

ModelSpec ModelSpec::parse(std::string_view text) {
  ModelSpec spec;
  std::map<LayerKind, std::size_t> ordinal;
  std::istringstream lines{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    std::istringstream words(line);
    std::string head;
    words >> head;
    std::vector<std::string> positional;
    std::map<std::string, std::string> named;
    for (std::string w; words >> w;) {
      if (const auto eq = w.find('='); eq != std::string::npos)
        named[w.substr(0, eq)] = w.substr(eq + 1);
      else
        positional.push_back(w);
    }
    const auto fail = [&](const std::string& why) {
      return DataError("model spec line " + std::to_string(line_no) + ": " + why);
    };

    if (head == "input") {
      if (!spec.input.empty()) throw fail("duplicate input line");
      if (positional.empty()) throw fail("input needs at least one extent");
      for (const auto& p : positional) spec.input.push_back(parse_count(p, line_no));
      continue;
    }
    const auto kind = kind_from(head);
    if (!kind) throw fail("unknown layer '" + head + "'");
    if (spec.input.empty()) throw fail("layers must follow an input line");

    LayerSpec layer;
    layer.kind = *kind;
    const auto want_positional = [&](std::size_t lo, std::size_t hi) {
      if (positional.size() < lo || positional.size() > hi)
        throw fail(std::string(kind_name(*kind)) + " takes " + std::to_string(lo) +
                   (lo == hi ? "" : "-" + std::to_string(hi)) + " positional arguments");
    };
    switch (*kind) {
      case LayerKind::Conv:
        want_positional(2, 2);
        layer.units = parse_count(positional[0], line_no);
        layer.kernel = parse_count(positional[1], line_no);
        break;
      case LayerKind::MaxPool:
        want_positional(1, 1);
        layer.kernel = parse_count(positional[0], line_no);
        layer.stride = layer.kernel;
        break;
      case LayerKind::Dense:
        want_positional(1, 1);
        layer.units = parse_count(positional[0], line_no);
        break;
      default:
        want_positional(0, 0);
    }
    for (const auto& [key, value] : named) {
      if (key == "name") {
        if (value.empty()) throw fail("empty layer name");
        layer.tag = value;
      } else if (key == "stride" &&
                 (*kind == LayerKind::Conv || *kind == LayerKind::MaxPool)) {
        layer.stride = parse_count(value, line_no);
      } else if (key == "pad" && *kind == LayerKind::Conv) {
        layer.pad = parse_count(value, line_no, true);
      } else {
        throw fail("unexpected option '" + key + "' for " + std::string(kind_name(*kind)));
      }
    }
    const std::size_t ord = ++ordinal[*kind];
    if (layer.tag.empty()) layer.tag = std::string(tag_stem(*kind)) + std::to_string(ord);
    for (const auto& prev : spec.layers)
      if (prev.tag == layer.tag) throw fail("duplicate layer name '" + layer.tag + "'");
    spec.layers.push_back(std::move(layer));
  }
  if (spec.input.empty()) throw DataError("model spec: missing input line");
  if (spec.layers.empty()) throw DataError("model spec: no layers");
  return spec;
}

std::string ModelSpec::to_text() const {
  std::ostringstream out;
  out << "input";
  for (std::size_t e : input) out << ' ' << e;
  out << '\n';
  for (const auto& l : layers) {
    out << kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Conv:
        out << ' ' << l.units << ' ' << l.kernel << " stride=" << l.stride << " pad=" << l.pad;
        break;
      case LayerKind::MaxPool:
        out << ' ' << l.kernel << " stride=" << l.stride;
        break;
      case LayerKind::Dense:
        out << ' ' << l.units;
        break;
      default:
        break;
    }
    out << " name=" << l.tag << '\n';
  }
  return out.str();
}

const Tensor& CaptureHandle::activation() const {
  if (!captured()) throw UsageError("no activation captured yet; run a forward pass first");
  return slot_->activation;
}

std::span<const double> CaptureHandle::gradient() const { return activation().grad(); }

Sequential::Sequential(ModelSpec spec, const InitOptions& init) : spec_(std::move(spec)) {
  Rng rng(init.seed);
  Shape cur = spec_.input;
  std::size_t last_dense = spec_.layers.size();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i)
    if (spec_.layers[i].kind == LayerKind::Dense) last_dense = i;

  const auto add_param = [&](const std::string& name, Shape shape, double bound, bool zero) {
    std::vector<double> values(element_count(shape), 0.0);
    if (!zero)
      for (double& v : values) v = rng.uniform(-bound, bound);
    param_index_[name] = params_.size();
    params_.push_back({name, Tensor::from_data(std::move(shape), std::move(values), true)});
  };

  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const bool feeds_relu =
        i + 1 < spec_.layers.size() && spec_.layers[i + 1].kind == LayerKind::Relu;
    const auto where = [&] { return "layer '" + l.tag + "' "; };
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.size() != 3) throw ShapeError(where() + "needs a C,H,W input, got " + to_string(cur));
        const std::size_t fan_in = cur[0] * l.kernel * l.kernel;
        const double bound = feeds_relu ? std::sqrt(6.0 / fan_in) : 1.0 / std::sqrt(fan_in);
        add_param(l.tag + ".weight", {l.units, cur[0], l.kernel, l.kernel}, bound, false);
        add_param(l.tag + ".bias", {l.units}, 0.0, true);
        cur = {l.units, ops::conv_output_extent(cur[1], l.kernel, l.stride, l.pad),
               ops::conv_output_extent(cur[2], l.kernel, l.stride, l.pad)};
        break;
      }
      case LayerKind::MaxPool:
        if (cur.size() != 3) throw ShapeError(where() + "needs a C,H,W input, got " + to_string(cur));
        cur = {cur[0], ops::pool_output_extent(cur[1], l.kernel, l.stride),
               ops::pool_output_extent(cur[2], l.kernel, l.stride)};
        break;
      case LayerKind::GlobalAvgPool:
        if (cur.size() != 3) throw ShapeError(where() + "needs a C,H,W input, got " + to_string(cur));
        cur = {cur[0]};
        break;
      case LayerKind::Flatten:
        cur = {element_count(cur)};
        break;
      case LayerKind::Dense: {
        if (cur.size() != 1)
          throw ShapeError(where() + "needs a flat input (add gap or flatten), got " +
                           to_string(cur));
        const bool zero = init.zero_final_dense && i == last_dense;
        const double bound = feeds_relu ? std::sqrt(6.0 / cur[0]) : 1.0 / std::sqrt(cur[0]);
        add_param(l.tag + ".weight", {cur[0], l.units}, bound, zero);
        add_param(l.tag + ".bias", {l.units}, 0.0, true);
        cur = {l.units};
        break;
      }
      case LayerKind::Relu:
      case LayerKind::Sigmoid:
        break;
    }
    shapes_.push_back(cur);
  }
}

void Sequential::load(const std::vector<NamedTensor>& params) {
  if (params.size() != params_.size())
    throw DataError("parameter count mismatch: model has " + std::to_string(params_.size()) +
                    ", file has " + std::to_string(params.size()));
  for (const auto& p : params) {
    const auto it = param_index_.find(p.name);
    if (it == param_index_.end()) throw DataError("unexpected parameter '" + p.name + "'");
    Tensor& dst = params_[it->second].tensor;
    if (dst.shape() != p.tensor.shape())
      throw DataError("parameter '" + p.name + "' has shape " + to_string(p.tensor.shape()) +
                      ", model expects " + to_string(dst.shape()));
    auto out = dst.mutable_data();
    std::copy(p.tensor.data().begin(), p.tensor.data().end(), out.begin());
  }
}

Tensor Sequential::forward(const Tensor& batch, bool track_grad) const {
  Shape expected{batch.dim(0)};
  expected.insert(expected.end(), spec_.input.begin(), spec_.input.end());
  if (batch.shape() != expected)
    throw ShapeError("model input must be [N," + to_string(spec_.input).substr(1) + ", got " +
                     to_string(batch.shape()));
  const auto param = [&](const std::string& name) {
    const Tensor& t = params_[param_index_.at(name)].tensor;
    return track_grad ? t : t.detach();
  };
  const std::size_t n = batch.dim(0);
  Tensor x = batch;
  for (const LayerSpec& l : spec_.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
        x = ops::conv2d(x, param(l.tag + ".weight"), param(l.tag + ".bias"), l.stride, l.pad);
        break;
      case LayerKind::MaxPool:
        x = ops::max_pool2d(x, l.kernel, l.stride);
        break;
      case LayerKind::Relu:
        x = ops::relu(x);
        break;
      case LayerKind::Sigmoid:
        x = ops::sigmoid(x);
        break;
      case LayerKind::GlobalAvgPool:
        x = ops::global_avg_pool(x);
        break;
      case LayerKind::Flatten:
        x = ops::reshape(x, {n, x.numel() / n});
        break;
      case LayerKind::Dense:
        x = ops::dense(x, param(l.tag + ".weight"), param(l.tag + ".bias"));
        break;
    }
    if (auto it = captures_.find(l.tag); it != captures_.end())
      for (const auto& weak : it->second)
        if (auto slot = weak.lock()) slot->activation = x;
  }
  return x;
}

CaptureHandle Sequential::capture_activation(std::string_view tag) {
  if (!has_tag(tag)) throw UsageError("no layer tagged '" + std::string(tag) + "'");
  auto slot = std::make_shared<CaptureSlot>();
  auto& list = captures_[std::string(tag)];
  std::erase_if(list, [](const auto& w) { return w.expired(); });
  list.push_back(slot);
  return CaptureHandle(std::move(slot));
}

bool Sequential::has_tag(std::string_view tag) const {
  for (const auto& l : spec_.layers)
    if (l.tag == tag) return true;
  return false;
}

std::vector<std::string> Sequential::tags() const {
  std::vector<std::string> out;
  for (const auto& l : spec_.layers) out.push_back(l.tag);
  return out;
}

std::string Sequential::last_conv_tag() const {
  std::string tag;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].kind != LayerKind::Conv) continue;
    tag = spec_.layers[i].tag;
    if (i + 1 < spec_.layers.size() && spec_.layers[i + 1].kind == LayerKind::Relu)
      tag = spec_.layers[i + 1].tag;
  }
  return tag;
}

Sgd::Sgd(double learning_rate, double weight_decay, double momentum)
    : lr_(learning_rate), wd_(weight_decay), momentum_(momentum) {
  if (!(learning_rate >= 0.0)) throw UsageError("learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0,1)");
}

void Sgd::step(std::vector<NamedTensor>& params) {
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    if (lr_ != 0.0) {
      const auto g = p.tensor.grad();
      auto theta = p.tensor.mutable_data();
      if (momentum_ > 0.0) {
        auto& buf = velocity_[p.name];
        buf.resize(theta.size(), 0.0);
        for (std::size_t i = 0; i < theta.size(); ++i) {
          buf[i] = momentum_ * buf[i] + (g[i] + wd_ * theta[i]);
          theta[i] -= lr_ * buf[i];
        }
      } else {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr_ * (g[i] + wd_ * theta[i]);
      }
    }
    p.tensor.zero_grad();
  }
}

}  // namespace cxr::nn

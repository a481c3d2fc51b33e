#include <cmath>
#include <limits>

#include "cxr/error.hpp"
#include "cxr/kernels.hpp"
#include "cxr/tensor.hpp"

namespace cxr::ops {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + ": undefined tensor");
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
}

// Unfold one sample [C,H,W] into columns [C*kh*kw, Ho*Wo].
void im2col(const double* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo,
            double* cols) {
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = cols + ((c * kh + ki) * kw + kj) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * stride + ki) -
                                   static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * stride + kj) -
                                     static_cast<std::ptrdiff_t>(pad);
            const bool inside = y >= 0 && x >= 0 && y < static_cast<std::ptrdiff_t>(h) &&
                                x < static_cast<std::ptrdiff_t>(w);
            row[oy * wo + ox] = inside ? in[(c * h + y) * w + x] : 0.0;
          }
        }
      }
}

void col2im_add(const double* cols, std::size_t channels, std::size_t h, std::size_t w,
                std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                std::size_t ho, std::size_t wo, double* out) {
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ki = 0; ki < kh; ++ki)
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = cols + ((c * kh + ki) * kw + kj) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * stride + ki) -
                                   static_cast<std::ptrdiff_t>(pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * stride + kj) -
                                     static_cast<std::ptrdiff_t>(pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
            out[(c * h + y) * w + x] += row[oy * wo + ox];
          }
        }
      }
}

bool broadcastable(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() || a.numel() == 1 || b.numel() == 1;
}

const Tensor& larger(const Tensor& a, const Tensor& b) { return a.numel() >= b.numel() ? a : b; }

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (kernel == 0 || kernel > in + 2 * padding)
    throw ShapeError("conv2d: kernel extent " + std::to_string(kernel) + " exceeds padded input " +
                     std::to_string(in + 2 * padding));
  return (in + 2 * padding - kernel) / stride + 1;
}

std::size_t pool_output_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (stride == 0 || kernel == 0) throw ShapeError("max_pool2d: kernel and stride must be positive");
  if (kernel > in)
    throw ShapeError("max_pool2d: window " + std::to_string(kernel) + " exceeds input extent " +
                     std::to_string(in));
  return (in - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c)
    throw ShapeError("conv2d: input " + to_string(input.shape()) + " has " + std::to_string(c) +
                     " channels but kernel " + to_string(kernel.shape()) + " expects " +
                     std::to_string(kernel.dim(1)));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != f))
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match " +
                     std::to_string(f) + " filters");
  const std::size_t ho = conv_output_extent(h, kh, stride, padding);
  const std::size_t wo = conv_output_extent(w, kw, stride, padding);
  const std::size_t ckk = c * kh * kw, spatial = ho * wo;

  const auto& k = kernels::active();
  std::vector<double> cols(n * ckk * spatial);
  std::vector<double> out(n * f * spatial, 0.0);
  const auto x = input.data();
  const auto wt = kernel.data();
  for (std::size_t s = 0; s < n; ++s) {
    double* scols = cols.data() + s * ckk * spatial;
    im2col(x.data() + s * c * h * w, c, h, w, kh, kw, stride, padding, ho, wo, scols);
    double* sout = out.data() + s * f * spatial;
    if (bias.defined())
      for (std::size_t fi = 0; fi < f; ++fi)
        std::fill(sout + fi * spatial, sout + (fi + 1) * spatial, bias.data()[fi]);
    k.gemm_nn(f, spatial, ckk, wt.data(), scols, sout);
  }

  auto backward = [=, cols = std::move(cols)](std::span<const double> g, GradSink& sink) {
    const auto& kt = kernels::active();
    const auto wdata = kernel.data();
    for (std::size_t s = 0; s < n; ++s) {
      const double* gs = g.data() + s * f * spatial;
      const double* scols = cols.data() + s * ckk * spatial;
      if (sink.wants(1)) kt.gemm_nt(f, ckk, spatial, gs, scols, sink.grad(1).data());
      if (sink.wants(2)) {
        auto gb = sink.grad(2);
        for (std::size_t fi = 0; fi < f; ++fi) gb[fi] += kt.sum(gs + fi * spatial, spatial);
      }
      if (sink.wants(0)) {
        std::vector<double> dcols(ckk * spatial, 0.0);
        kt.gemm_tn(ckk, spatial, f, wdata.data(), gs, dcols.data());
        col2im_add(dcols.data(), c, h, w, kh, kw, stride, padding, ho, wo,
                   sink.grad(0).data() + s * c * h * w);
      }
    }
  };
  return Tensor::make_result({n, f, ho, wo}, std::move(out), {input, kernel, bias},
                             std::move(backward));
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  const std::size_t n = input.dim(0), d = input.dim(1), kdim = weight.dim(1);
  if (weight.dim(0) != d)
    throw ShapeError("dense: input " + to_string(input.shape()) + " incompatible with weight " +
                     to_string(weight.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != kdim))
    throw ShapeError("dense: bias " + to_string(bias.shape()) + " does not match " +
                     std::to_string(kdim) + " outputs");
  std::vector<double> out(n * kdim, 0.0);
  if (bias.defined())
    for (std::size_t i = 0; i < n; ++i)
      std::copy(bias.data().begin(), bias.data().end(), out.begin() + i * kdim);
  kernels::active().gemm_nn(n, kdim, d, input.data().data(), weight.data().data(), out.data());

  auto backward = [=](std::span<const double> g, GradSink& sink) {
    const auto& kt = kernels::active();
    if (sink.wants(0)) kt.gemm_nt(n, d, kdim, g.data(), weight.data().data(), sink.grad(0).data());
    if (sink.wants(1)) kt.gemm_tn(d, kdim, n, input.data().data(), g.data(), sink.grad(1).data());
    if (sink.wants(2)) {
      auto gb = sink.grad(2);
      for (std::size_t i = 0; i < n; ++i) kt.axpy(1.0, g.data() + i * kdim, gb.data(), kdim);
    }
  };
  return Tensor::make_result({n, kdim}, std::move(out), {input, weight, bias}, std::move(backward));
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  kernels::active().relu(x.data().data(), out.data(), out.size());
  auto backward = [x](std::span<const double> g, GradSink& sink) {
    kernels::active().relu_backward(x.data().data(), g.data(), sink.grad(0).data(), g.size());
  };
  return Tensor::make_result(x.shape(), std::move(out), {x}, std::move(backward));
}

Tensor sigmoid(const Tensor& x) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = in[i];
    double s;
    if (v >= 0.0) {
      s = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      s = e / (1.0 + e);
    }
    out[i] = std::clamp(s, lo, hi);
  }
  auto backward = [y = out](std::span<const double> g, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  };
  return Tensor::make_result(x.shape(), std::move(out), {x}, std::move(backward));
}

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  require_rank(x, 4, "max_pool2d input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = pool_output_extent(h, kernel, stride);
  const std::size_t wo = pool_output_extent(w, kernel, stride);
  std::vector<double> out(n * c * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  const auto in = x.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = in.data() + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (oy * stride) * w + ox * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = (oy * stride + ky) * w + ox * stride + kx;
            if (src[idx] > src[best]) best = idx;
          }
        const std::size_t o = (plane * ho + oy) * wo + ox;
        out[o] = src[best];
        argmax[o] = plane * h * w + best;
      }
  }
  auto backward = [argmax = std::move(argmax)](std::span<const double> g, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
  };
  return Tensor::make_result({n, c, ho, wo}, std::move(out), {x}, std::move(backward));
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool input");
  const std::size_t planes = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
  std::vector<double> out(planes);
  const auto& k = kernels::active();
  for (std::size_t p = 0; p < planes; ++p)
    out[p] = k.sum(x.data().data() + p * area, area) / static_cast<double>(area);
  auto backward = [planes, area](std::span<const double> g, GradSink& sink) {
    auto gx = sink.grad(0);
    const double inv = 1.0 / static_cast<double>(area);
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += g[p] * inv;
  };
  return Tensor::make_result({x.dim(0), x.dim(1)}, std::move(out), {x}, std::move(backward));
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!broadcastable(a, b))
    throw ShapeError("add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " differ");
  const Tensor& big = larger(a, b);
  const std::size_t n = big.numel();
  std::vector<double> out(n);
  if (a.numel() == b.numel()) {
    kernels::active().add(a.data().data(), b.data().data(), out.data(), n);
  } else {
    const auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < n; ++i)
      out[i] = ad[a.numel() == 1 ? 0 : i] + bd[b.numel() == 1 ? 0 : i];
  }
  const std::size_t na = a.numel(), nb = b.numel();
  auto backward = [na, nb](std::span<const double> g, GradSink& sink) {
    for (std::size_t side = 0; side < 2; ++side) {
      if (!sink.wants(side)) continue;
      auto gx = sink.grad(side);
      if ((side == 0 ? na : nb) == g.size()) {
        kernels::active().axpy(1.0, g.data(), gx.data(), g.size());
      } else {
        gx[0] += kernels::active().sum(g.data(), g.size());
      }
    }
  };
  return Tensor::make_result(big.shape(), std::move(out), {a, b}, std::move(backward));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!broadcastable(a, b))
    throw ShapeError("mul: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                     " differ");
  const Tensor& big = larger(a, b);
  const std::size_t n = big.numel();
  std::vector<double> out(n);
  if (a.numel() == b.numel()) {
    kernels::active().mul(a.data().data(), b.data().data(), out.data(), n);
  } else {
    const auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < n; ++i)
      out[i] = ad[a.numel() == 1 ? 0 : i] * bd[b.numel() == 1 ? 0 : i];
  }
  auto backward = [a, b, n](std::span<const double> g, GradSink& sink) {
    for (std::size_t side = 0; side < 2; ++side) {
      if (!sink.wants(side)) continue;
      const Tensor& self = side == 0 ? a : b;
      const auto other = (side == 0 ? b : a).data();
      auto gx = sink.grad(side);
      for (std::size_t i = 0; i < n; ++i) {
        const double contrib = g[i] * other[other.size() == 1 ? 0 : i];
        gx[self.numel() == 1 ? 0 : i] += contrib;
      }
    }
  };
  return Tensor::make_result(big.shape(), std::move(out), {a, b}, std::move(backward));
}

Tensor sum(const Tensor& x) {
  const double s = kernels::active().sum(x.data().data(), x.numel());
  auto backward = [](std::span<const double> g, GradSink& sink) {
    auto gx = sink.grad(0);
    for (double& v : gx) v += g[0];
  };
  return Tensor::make_result({}, {s}, {x}, std::move(backward));
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  const double m = kernels::active().sum(x.data().data(), x.numel()) * inv;
  auto backward = [inv](std::span<const double> g, GradSink& sink) {
    auto gx = sink.grad(0);
    for (double& v : gx) v += g[0] * inv;
  };
  return Tensor::make_result({}, {m}, {x}, std::move(backward));
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(in[i] > 0.0))
      throw NumericError("log: non-positive input " + std::to_string(in[i]) + " at index " +
                         std::to_string(i));
    out[i] = std::log(in[i]);
  }
  auto backward = [x](std::span<const double> g, GradSink& sink) {
    auto gx = sink.grad(0);
    const auto in = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / in[i];
  };
  return Tensor::make_result(x.shape(), std::move(out), {x}, std::move(backward));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (element_count(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  auto backward = [](std::span<const double> g, GradSink& sink) {
    kernels::active().axpy(1.0, g.data(), sink.grad(0).data(), g.size());
  };
  return Tensor::make_result(std::move(shape), std::move(out), {x}, std::move(backward));
}

}  // namespace cxr::ops

#pragma once
// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cxr/rng.hpp"
#include "cxr/tensor.hpp"

namespace oracle {

inline std::vector<double> random_values(cxr::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Values bounded away from zero, so relu kinks sit outside the FD stencil.
inline std::vector<double> away_from_zero(cxr::Rng& rng, std::size_t n, double gap = 0.05) {
  std::vector<double> v(n);
  for (double& x : v) {
    const double m = rng.uniform(gap, 1.0);
    x = rng.bernoulli(0.5) ? m : -m;
  }
  return v;
}

// Central differences of f at x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double step = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), the usual gradient-check ratio. Two zero
// vectors compare equal.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale == 0.0) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

// Direct nested-loop cross-correlation, [N,C,H,W] x [F,C,kh,kw].
inline std::vector<double> conv2d(const std::vector<double>& in, std::size_t n, std::size_t c,
                                  std::size_t h, std::size_t w, const std::vector<double>& k,
                                  std::size_t f, std::size_t kh, std::size_t kw,
                                  const std::vector<double>& bias, std::size_t stride,
                                  std::size_t pad, std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * f * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                  continue;
                acc += in[((b * c + ch) * h + iy) * w + ix] * k[((o * c + ch) * kh + i) * kw + j];
              }
          out[((b * f + o) * oh + y) * ow + x] = acc;
        }
  return out;
}

// Triple-loop [n,d] x [d,k] + bias.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::vector<double>& bias, std::size_t n, std::size_t d,
                                  std::size_t k) {
  std::vector<double> out(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double acc = bias.empty() ? 0.0 : bias[j];
      for (std::size_t t = 0; t < d; ++t) acc += a[i * d + t] * b[t * k + j];
      out[i * k + j] = acc;
    }
  return out;
}

inline std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// sum(y * weights): a scalar probe whose upstream gradient is `weights`.
inline cxr::Tensor probe(const cxr::Tensor& y, const std::vector<double>& weights) {
  return cxr::ops::sum(cxr::ops::mul(y, cxr::Tensor::from_data(y.shape(), weights)));
}

// Mann-Whitney by explicit pair counting; ties count one half.
inline double pair_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

// Scores and labels with both classes present; about half the instances
// draw scores from a handful of levels so ties are frequent.
template <typename Rng>
void random_scored_labels(Rng& rng, std::size_t max_n, std::vector<double>& scores,
                          std::vector<int>& labels) {
  const std::size_t n = 2 + rng.below(max_n - 1);
  const bool ties = rng.bernoulli(0.5);
  const std::size_t levels = 1 + rng.below(5);
  scores.resize(n);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
    scores[i] = ties ? static_cast<double>(rng.below(levels)) / 4.0 : rng.uniform() + 0.3 * labels[i];
  }
  labels[0] = 1;
  labels[1] = 0;
}

}  // namespace oracle

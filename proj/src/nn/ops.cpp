#include "eyedrive/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"

namespace eyedrive::nn {

namespace {

constexpr std::size_t kKernel = 3;

struct ConvDims {
  std::size_t height, width, channels, filters;
  std::size_t pixels() const { return height * width; }
  std::size_t patch() const { return kKernel * kKernel * channels; }
};

template <typename T>
ConvDims check_conv(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                    const BasicTensor<T>* bias) {
  if (input.rank() != 3) {
    throw ShapeError("conv2d input must be HxWxC, got " + shape_to_string(input.shape()));
  }
  const Shape& w = weights.shape();
  if (w.size() != 4 || w[0] != kKernel || w[1] != kKernel || w[2] != input.extent(2)) {
    throw ShapeError("conv2d weights " + shape_to_string(w) + " incompatible with input " +
                     shape_to_string(input.shape()));
  }
  if (bias != nullptr && bias->size() != w[3]) {
    throw ShapeError("conv2d bias has " + std::to_string(bias->size()) + " values, expected " +
                     std::to_string(w[3]));
  }
  return {input.extent(0), input.extent(1), input.extent(2), w[3]};
}

// Row m of the patch matrix holds the zero-padded 3x3xC window centred on
// pixel m = y * width + x, laid out (ky, kx, c) to match the weight layout.
// Fills rows [p0, p1) into `rows`, which holds (p1 - p0) * patch() doubles.
template <typename T>
void im2col_rows(const BasicTensor<T>& input, const ConvDims& d, std::size_t p0, std::size_t p1,
                 double* rows) {
  const std::size_t k = d.patch();
  std::fill(rows, rows + (p1 - p0) * k, 0.0);
  const T* src = input.data();
  for (std::size_t m = p0; m < p1; ++m) {
    const std::size_t y = m / d.width;
    const std::size_t x = m % d.width;
    double* row = rows + (m - p0) * k;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(d.height)) continue;
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(d.width)) continue;
        const T* px = src + (static_cast<std::size_t>(sy) * d.width + static_cast<std::size_t>(sx)) *
                                d.channels;
        double* dst = row + (ky * kKernel + kx) * d.channels;
        for (std::size_t c = 0; c < d.channels; ++c) dst[c] = static_cast<double>(px[c]);
      }
    }
  }
}

// Adds patch-gradient rows [p0, p1) back onto the pixels they were read from.
void col2im_rows(const ConvDims& d, std::size_t p0, std::size_t p1, const double* rows,
                 double* dx) {
  const std::size_t k = d.patch();
  for (std::size_t m = p0; m < p1; ++m) {
    const std::size_t y = m / d.width;
    const std::size_t x = m % d.width;
    const double* row = rows + (m - p0) * k;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(d.height)) continue;
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(d.width)) continue;
        double* dst =
            dx + (static_cast<std::size_t>(sy) * d.width + static_cast<std::size_t>(sx)) * d.channels;
        const double* src = row + (ky * kKernel + kx) * d.channels;
        for (std::size_t c = 0; c < d.channels; ++c) dst[c] += src[c];
      }
    }
  }
}

// Pixels per patch chunk: about 1 MiB of patch rows, so a chunk stays in L2.
std::size_t chunk_pixels(const ConvDims& d) {
  const std::size_t rows = (std::size_t{1} << 17) / d.patch();
  return std::max<std::size_t>(8, rows - rows % 8);
}

template <typename T>
std::vector<double> to_double(const BasicTensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

template <typename T>
BasicTensor<T> from_double(Shape shape, const std::vector<double>& values) {
  std::vector<T> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<T>(values[i]);
  return BasicTensor<T>(std::move(shape), std::move(out));
}

template <typename T>
BasicTensor<T> conv2d_im2col(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias, const ConvDims& d) {
  const std::size_t k = d.patch();
  const std::vector<double> w = to_double(weights);
  std::vector<double> out(d.pixels() * d.filters);
  for (std::size_t m = 0; m < d.pixels(); ++m) {
    for (std::size_t f = 0; f < d.filters; ++f) out[m * d.filters + f] = static_cast<double>(bias[f]);
  }
  const std::size_t chunk = chunk_pixels(d);
  std::vector<double> patches(std::min(chunk, d.pixels()) * k);
  for (std::size_t p0 = 0; p0 < d.pixels(); p0 += chunk) {
    const std::size_t p1 = std::min(d.pixels(), p0 + chunk);
    im2col_rows(input, d, p0, p1, patches.data());
    detail::gemm_accumulate(p1 - p0, d.filters, k, patches.data(), k, 1, w.data(), d.filters,
                            out.data() + p0 * d.filters, d.filters);
  }
  return from_double<T>({d.height, d.width, d.filters}, out);
}

template <typename T>
BasicTensor<T> conv2d_direct(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias, const ConvDims& d) {
  BasicTensor<T> out({d.height, d.width, d.filters});
  for (std::size_t y = 0; y < d.height; ++y) {
    for (std::size_t x = 0; x < d.width; ++x) {
      for (std::size_t f = 0; f < d.filters; ++f) {
        double acc = static_cast<double>(bias[f]);
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
          for (std::size_t kx = 0; kx < kKernel; ++kx) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(d.height) ||
                sx >= static_cast<std::ptrdiff_t>(d.width)) {
              continue;
            }
            for (std::size_t c = 0; c < d.channels; ++c) {
              const double v = static_cast<double>(
                  input.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c));
              const double w = static_cast<double>(
                  weights[((ky * kKernel + kx) * d.channels + c) * d.filters + f]);
              acc += v * w;
            }
          }
        }
        out.at(y, x, f) = static_cast<T>(acc);
      }
    }
  }
  return out;
}

void check_finite_rate(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in (0, 1), got " + std::to_string(rate));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, ConvAlgorithm algorithm) {
  const ConvDims d = check_conv(input, weights, &bias);
  return algorithm == ConvAlgorithm::kIm2col ? conv2d_im2col(input, weights, bias, d)
                                             : conv2d_direct(input, weights, bias, d);
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                     const BasicTensor<T>& grad_output, std::span<double> grad_weights,
                     std::span<double> grad_bias, BasicTensor<T>* grad_input) {
  const ConvDims d = check_conv(input, weights, static_cast<const BasicTensor<T>*>(nullptr));
  if (grad_output.shape() != Shape{d.height, d.width, d.filters}) {
    throw ShapeError("conv2d grad_output " + shape_to_string(grad_output.shape()) +
                     " does not match forward output");
  }
  if (grad_weights.size() != weights.size() || grad_bias.size() != d.filters) {
    throw ShapeError("conv2d gradient buffers have the wrong size");
  }
  const std::size_t k = d.patch();
  const std::vector<double> dy = to_double(grad_output);

  std::vector<double> db(grad_bias.begin(), grad_bias.end());
  for (std::size_t m = 0; m < d.pixels(); ++m) {
    const double* row = dy.data() + m * d.filters;
    for (std::size_t f = 0; f < d.filters; ++f) db[f] += row[f];
  }
  std::copy(db.begin(), db.end(), grad_bias.begin());

  std::vector<double> w_t;
  std::vector<double> dx;
  if (grad_input != nullptr) {
    w_t.resize(d.filters * k);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t f = 0; f < d.filters; ++f) {
        w_t[f * k + r] = static_cast<double>(weights[r * d.filters + f]);
      }
    }
    dx.assign(d.pixels() * d.channels, 0.0);
  }

  const std::size_t chunk = chunk_pixels(d);
  std::vector<double> patches(std::min(chunk, d.pixels()) * k);
  for (std::size_t p0 = 0; p0 < d.pixels(); p0 += chunk) {
    const std::size_t p1 = std::min(d.pixels(), p0 + chunk);
    const double* dy_chunk = dy.data() + p0 * d.filters;
    im2col_rows(input, d, p0, p1, patches.data());
    // dW(r, f) += sum over pixels of patch(m, r) * dY(m, f)
    detail::gemm_accumulate(k, d.filters, p1 - p0, patches.data(), 1, k, dy_chunk, d.filters,
                            grad_weights.data(), d.filters);
    if (grad_input == nullptr) continue;
    // The patch buffer is free again: reuse it for dPatch = dY * W^T.
    std::fill(patches.begin(), patches.begin() + (p1 - p0) * k, 0.0);
    detail::gemm_accumulate(p1 - p0, k, d.filters, dy_chunk, d.filters, 1, w_t.data(), k,
                            patches.data(), k);
    col2im_rows(d, p0, p1, patches.data(), dx.data());
  }
  if (grad_input != nullptr) *grad_input = from_double<T>(input.shape(), dx);
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out = x;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) throw ShapeError("relu_backward shape mismatch");
  BasicTensor<T> out = grad_output;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(input[i] > T{0})) out[i] = T{0};
  }
  return out;
}

template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("maxpool2x2 input must be HxWxC");
  const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2 needs even spatial extents, got " + shape_to_string(x.shape()));
  }
  PoolResult<T> r{BasicTensor<T>({h / 2, w / 2, c}), std::vector<std::uint32_t>(h * w * c / 4)};
  for (std::size_t oy = 0; oy < h / 2; ++oy) {
    for (std::size_t ox = 0; ox < w / 2; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * oy) * w + 2 * ox) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (oy * (w / 2) + ox) * c + ch;
        r.output[o] = x[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                   const BasicTensor<T>& grad_output) {
  if (argmax.size() != grad_output.size()) throw ShapeError("maxpool2x2_backward size mismatch");
  BasicTensor<T> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_output[i];
  return dx;
}

template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng) {
  check_finite_rate(rate);
  if (!training) return {x, {}};
  // Each 64-bit draw yields two keep decisions: a 32-bit half u keeps the
  // element when u / 2^32 >= rate.
  const auto threshold = static_cast<std::uint64_t>(std::ceil(rate * 0x1.0p32));
  std::vector<std::uint8_t> mask(x.size());
  for (std::size_t i = 0; i < mask.size(); i += 2) {
    const std::uint64_t bits = rng.next_u64();
    mask[i] = static_cast<std::uint8_t>((bits & 0xffffffffULL) >= threshold);
    if (i + 1 < mask.size()) mask[i + 1] = static_cast<std::uint8_t>((bits >> 32) >= threshold);
  }
  BasicTensor<T> out = dropout_apply(x, rate, mask);
  return {std::move(out), std::move(mask)};
}

template <typename T>
BasicTensor<T> dropout_apply(const BasicTensor<T>& x, double rate,
                             std::span<const std::uint8_t> mask) {
  check_finite_rate(rate);
  if (mask.size() != x.size()) throw ShapeError("dropout mask size mismatch");
  const double scale = 1.0 / (1.0 - rate);
  BasicTensor<T> out(x.shape());
  const T* src = x.data();
  T* dst = out.data();
  // Multiplying by a 0/1 mask keeps the loop branch-free; the + 0.0 turns -0 into 0.
  for (std::size_t i = 0; i < x.size(); ++i) {
    dst[i] = static_cast<T>(static_cast<double>(src[i]) * (mask[i] * scale) + 0.0);
  }
  return out;
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_output, double rate,
                                std::span<const std::uint8_t> mask) {
  return dropout_apply(grad_output, rate, mask);
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias) {
  if (weights.rank() != 2 || weights.extent(0) != x.size() || bias.size() != weights.extent(1)) {
    throw ShapeError("dense: input of " + std::to_string(x.size()) + " values, weights " +
                     shape_to_string(weights.shape()) + ", bias " + shape_to_string(bias.shape()));
  }
  const std::size_t n = weights.extent(0), m = weights.extent(1);
  std::vector<double> acc(m);
  for (std::size_t j = 0; j < m; ++j) acc[j] = static_cast<double>(bias[j]);
  const T* w = weights.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = static_cast<double>(x[i]);
    const T* row = w + i * m;
    for (std::size_t j = 0; j < m; ++j) acc[j] += xi * static_cast<double>(row[j]);
  }
  return from_double<T>({m}, acc);
}

template <typename T>
void dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& weights,
                    const BasicTensor<T>& grad_output, std::span<double> grad_weights,
                    std::span<double> grad_bias, BasicTensor<T>* grad_input) {
  if (weights.rank() != 2 || weights.extent(0) != x.size() ||
      grad_output.size() != weights.extent(1)) {
    throw ShapeError("dense_backward shape mismatch");
  }
  const std::size_t n = weights.extent(0), m = weights.extent(1);
  if (grad_weights.size() != n * m || grad_bias.size() != m) {
    throw ShapeError("dense gradient buffers have the wrong size");
  }
  std::vector<double> dy = to_double(grad_output);
  for (std::size_t j = 0; j < m; ++j) grad_bias[j] += dy[j];
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = static_cast<double>(x[i]);
    // Rectified and dropped-out inputs are mostly zero; their rows would only add zeros.
    if (xi == 0.0) continue;
    double* g = grad_weights.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) g[j] += xi * dy[j];
  }
  if (grad_input == nullptr) return;
  std::vector<double> dx(n);
  const T* w = weights.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = w + i * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += static_cast<double>(row[j]) * dy[j];
    dx[i] = acc;
  }
  *grad_input = from_double<T>(x.shape(), dx);
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const T v : x.values()) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> e(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp(static_cast<double>(x[i]) - mx);
    sum += e[i];
  }
  for (double& v : e) v /= sum;
  return from_double<T>(x.shape(), e);
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_output) {
  if (probs.size() != grad_output.size()) throw ShapeError("softmax_backward size mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    dot += static_cast<double>(probs[i]) * static_cast<double>(grad_output[i]);
  }
  BasicTensor<T> out(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(probs[i]) *
                            (static_cast<double>(grad_output[i]) - dot));
  }
  return out;
}

template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::size_t target) {
  if (target >= probs.size()) throw InputError("cross_entropy target index out of range");
  return -std::log(std::max(static_cast<double>(probs[target]), kProbabilityFloor));
}

template <typename T>
double cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& one_hot) {
  if (one_hot.size() != probs.size()) throw InputError("cross_entropy target size mismatch");
  std::size_t hot = one_hot.size();
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] == T{1} && hot == one_hot.size()) {
      hot = i;
    } else if (one_hot[i] != T{0}) {
      throw InputError("cross_entropy target is not one-hot");
    }
  }
  if (hot == one_hot.size()) throw InputError("cross_entropy target is not one-hot");
  return cross_entropy(probs, hot);
}

#define EYEDRIVE_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                         const BasicTensor<T>&, ConvAlgorithm);                 \
  template void conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                const BasicTensor<T>&, std::span<double>, std::span<double>,    \
                                BasicTensor<T>*);                                               \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                          \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template PoolResult<T> maxpool2x2(const BasicTensor<T>&);                                     \
  template BasicTensor<T> maxpool2x2_backward(const Shape&, std::span<const std::uint32_t>,     \
                                              const BasicTensor<T>&);                           \
  template DropoutResult<T> dropout(const BasicTensor<T>&, double, bool, Rng&);                 \
  template BasicTensor<T> dropout_apply(const BasicTensor<T>&, double,                          \
                                        std::span<const std::uint8_t>);                         \
  template BasicTensor<T> dropout_backward(const BasicTensor<T>&, double,                       \
                                           std::span<const std::uint8_t>);                      \
  template BasicTensor<T> dense_forward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                        const BasicTensor<T>&);                                 \
  template void dense_backward(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                               const BasicTensor<T>&, std::span<double>, std::span<double>,     \
                               BasicTensor<T>*);                                                \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                       \
  template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);       \
  template double cross_entropy(const BasicTensor<T>&, std::size_t);                            \
  template double cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&);

EYEDRIVE_INSTANTIATE_OPS(float)
EYEDRIVE_INSTANTIATE_OPS(double)

#undef EYEDRIVE_INSTANTIATE_OPS

}  // namespace eyedrive::nn

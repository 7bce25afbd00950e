// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor containers, the floating-point reference convolution and tensor
// comparison. Layout everywhere is channel-major, row-major: (c, y, x).
// Weights are stored (m, K, K, n): input channel, kernel row, kernel column,
// output channel.

#ifndef DETQ_TENSOR_HPP
#define DETQ_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detq/errors.hpp"

namespace detq {

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.height) +
         "," + std::to_string(s.width) + ")";
}

template <class T>
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape3 shape, T fill = T{})
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor3(Shape3 shape, std::vector<T> data)
      : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
  }

  const Shape3& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }
  T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& vec() const { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

using FloatTensor = Tensor3<double>;
using IntTensor = Tensor3<std::int32_t>;

/// Causal masks in raster order. `exclusive` hides the center tap (first
/// context layer), `inclusive` keeps it (later context layers, whose inputs
/// at the center already only see strictly earlier positions).
enum class MaskType { none, exclusive, inclusive };

inline bool tap_active(MaskType mask, int kernel, int ky, int kx) {
  if (mask == MaskType::none) return true;
  const int c = kernel / 2;
  if (ky != c) return ky < c;
  return mask == MaskType::exclusive ? kx < c : kx <= c;
}

struct ConvLayerF {
  int in_channels = 0;   // m
  int kernel = 1;        // K
  int out_channels = 0;  // n
  MaskType mask = MaskType::none;
  std::vector<double> weights;  // (m, K, K, n)
  std::vector<double> bias;     // n

  std::size_t weight_index(int i, int ky, int kx, int j) const {
    return ((static_cast<std::size_t>(i) * kernel + ky) * kernel + kx) *
               out_channels + j;
  }
  double w(int i, int ky, int kx, int j) const {
    return weights[weight_index(i, ky, kx, j)];
  }

  /// Throws ShapeError/Error on a malformed layer.
  void validate() const {
    if (in_channels <= 0 || out_channels <= 0)
      throw ShapeError("layer channel counts must be positive");
    if (kernel <= 0 || kernel % 2 == 0)
      throw ShapeError("kernel size must be odd, got " + std::to_string(kernel));
    if (weights.size() != static_cast<std::size_t>(in_channels) * kernel *
                              kernel * out_channels)
      throw ShapeError("weight count does not match (m,K,K,n)");
    if (bias.size() != static_cast<std::size_t>(out_channels))
      throw ShapeError("bias length must equal output channels");
    for (double v : weights)
      if (!std::isfinite(v)) throw Error("non-finite weight");
    for (double v : bias)
      if (!std::isfinite(v)) throw Error("non-finite bias");
  }

  /// Zero every tap the mask hides.
  void apply_mask() {
    if (mask == MaskType::none) return;
    for (int i = 0; i < in_channels; ++i)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx)
          if (!tap_active(mask, kernel, ky, kx))
            for (int j = 0; j < out_channels; ++j)
              weights[weight_index(i, ky, kx, j)] = 0.0;
  }
};

enum class AccumulationOrder { sequential, reversed, pairwise_tree };

inline const char* to_string(AccumulationOrder o) {
  switch (o) {
    case AccumulationOrder::sequential: return "seq";
    case AccumulationOrder::reversed: return "rev";
    case AccumulationOrder::pairwise_tree: return "tree";
  }
  return "?";
}

namespace detail {

template <class T, class Add>
T tree_sum(std::span<const T> terms, Add& add) {
  if (terms.size() == 1) return terms[0];
  const std::size_t half = terms.size() / 2;
  return add(tree_sum(terms.first(half), add), tree_sum(terms.subspan(half), add));
}

}  // namespace detail

/// Sums `terms` in the given order using `add` for every binary addition.
template <class T, class Add>
T accumulate(std::span<const T> terms, AccumulationOrder order, Add add) {
  T acc{};
  if (terms.empty()) return acc;
  switch (order) {
    case AccumulationOrder::sequential:
      for (const T& t : terms) acc = add(acc, t);
      break;
    case AccumulationOrder::reversed:
      for (auto it = terms.rbegin(); it != terms.rend(); ++it) acc = add(acc, *it);
      break;
    case AccumulationOrder::pairwise_tree:
      acc = detail::tree_sum(terms, add);
      break;
  }
  return acc;
}

inline void check_conv_input(const Shape3& in, int in_channels, int kernel) {
  if (in.channels != in_channels)
    throw ShapeError("input has " + std::to_string(in.channels) +
                     " channels, layer expects " + std::to_string(in_channels));
  if (in.height < kernel || in.width < kernel)
    throw ShapeError("spatial dims " + to_string(in) +
                     " smaller than kernel " + std::to_string(kernel));
}

/// Same-padded stride-1 cross-correlation plus bias, with products formed and
/// summed in `Acc` precision in the given order. Masked taps are skipped.
template <class Acc>
FloatTensor conv2d_float_ordered(const FloatTensor& input, const ConvLayerF& layer,
                                 AccumulationOrder order) {
  layer.validate();
  check_conv_input(input.shape(), layer.in_channels, layer.kernel);
  const int K = layer.kernel, c = K / 2, H = input.height(), W = input.width();
  FloatTensor out({layer.out_channels, H, W});
  std::vector<Acc> terms;
  terms.reserve(static_cast<std::size_t>(layer.in_channels) * K * K);
  for (int j = 0; j < layer.out_channels; ++j)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        terms.clear();
        for (int i = 0; i < layer.in_channels; ++i)
          for (int ky = 0; ky < K; ++ky) {
            const int sy = y + ky - c;
            if (sy < 0 || sy >= H) continue;
            for (int kx = 0; kx < K; ++kx) {
              const int sx = x + kx - c;
              if (sx < 0 || sx >= W || !tap_active(layer.mask, K, ky, kx)) continue;
              terms.push_back(static_cast<Acc>(layer.w(i, ky, kx, j)) *
                              static_cast<Acc>(input.at(i, sy, sx)));
            }
          }
        const Acc sum = accumulate<Acc>(terms, order, [](Acc a, Acc b) { return a + b; });
        out.at(j, y, x) = static_cast<double>(sum + static_cast<Acc>(layer.bias[j]));
      }
  return out;
}

/// Reference convolution in double precision, sequential order.
inline FloatTensor conv2d_float(const FloatTensor& input, const ConvLayerF& layer) {
  return conv2d_float_ordered<double>(input, layer, AccumulationOrder::sequential);
}

struct DiffReport {
  double max_abs = 0.0;
  double max_rel = 0.0;
  std::size_t argmax_index = 0;  // flat index of max_abs
  bool within_tolerance = true;   // max_abs <= tol
};

/// Relative difference is |a-b| / max(|a|,|b|), 0 where both are zero.
inline DiffReport compare_tensors(const FloatTensor& a, const FloatTensor& b,
                                  double tol = 0.0) {
  if (!(a.shape() == b.shape()))
    throw ShapeError("compare_tensors: shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  DiffReport r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data()[i] - b.data()[i]);
    const double m = std::max(std::abs(a.data()[i]), std::abs(b.data()[i]));
    if (d > r.max_abs) {
      r.max_abs = d;
      r.argmax_index = i;
    }
    if (m > 0.0 && d / m > r.max_rel) r.max_rel = d / m;
  }
  r.within_tolerance = r.max_abs <= tol;
  return r;
}

}  // namespace detq

#endif  // DETQ_TENSOR_HPP

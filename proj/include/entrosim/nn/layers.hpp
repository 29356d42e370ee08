#pragma once

// Layer kernels with hand-written gradients. Activations are NCHW; conv
// kernels are fixed at 3x3, stride 1, zero padding 1. Matrix products go
// through Eigen (single-threaded, so results are reproducible).

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "entrosim/nn/tensor.hpp"

namespace entrosim::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixView = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixView = Eigen::Map<const RowMatrix<T>>;

namespace detail {

[[noreturn]] inline void shape_fail(std::string_view layer, const std::string& what) {
  throw ShapeError(std::string(layer) + ": " + what);
}

inline void expect_rank(std::string_view layer, std::string_view name, const Shape& shape, std::size_t rank) {
  if (shape.size() != rank) {
    shape_fail(layer, std::string(name) + " must have rank " + std::to_string(rank) + ", got " + shape_string(shape));
  }
}

// col[(c*9 + ky*3 + kx) * H*W + y*W + x] = in[c, y+ky-1, x+kx-1] (zero outside)
template <typename T>
void im2col3x3(const T* in, std::size_t channels, std::size_t h, std::size_t w, T* col) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = in + c * h * w;
    for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
      for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
        T* row = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * h * w;
        const std::ptrdiff_t dy = ky - 1;
        const std::ptrdiff_t dx = kx - 1;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          T* out = row + y * W;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H) {
            std::fill(out, out + W, T{0});
            continue;
          }
          const T* src = plane + sy * W;
          for (std::ptrdiff_t x = 0; x < x0; ++x) out[x] = T{0};
          for (std::ptrdiff_t x = x0; x < x1; ++x) out[x] = src[x + dx];
          for (std::ptrdiff_t x = x1; x < W; ++x) out[x] = T{0};
        }
      }
    }
  }
}

// Adjoint of im2col3x3: scatters (adds) col entries back onto the image.
template <typename T>
void col2im3x3_add(const T* col, std::size_t channels, std::size_t h, std::size_t w, T* out_image) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = out_image + c * h * w;
    for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
      for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
        const T* row = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * h * w;
        const std::ptrdiff_t dy = ky - 1;
        const std::ptrdiff_t dx = kx - 1;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const T* src = row + y * W;
          T* dst = plane + sy * W;
          for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x + dx] += src[x];
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: input [N,C,H,W], weights [O,C,3,3], bias [O] -> [N,O,H,W]

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weights, std::string_view layer) {
  detail::expect_rank(layer, "input", input.shape(), 4);
  detail::expect_rank(layer, "weights", weights.shape(), 4);
  if (weights.dim(1) != input.dim(1) || weights.dim(2) != 3 || weights.dim(3) != 3) {
    detail::shape_fail(layer, "weights " + shape_string(weights.shape()) + " do not fit input " +
                                  shape_string(input.shape()) + " with a 3x3 kernel");
  }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                 std::string_view layer = "conv2d") {
  check_conv_shapes(input, weights, layer);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t o = weights.dim(0);
  if (bias.size() != o) detail::shape_fail(layer, "bias length " + std::to_string(bias.size()) + " != " + std::to_string(o));
  const std::size_t hw = h * w;

  Tensor<T> output({n, o, h, w});
  std::vector<T> col(c * 9 * hw);
  ConstMatrixView<T> wmat(weights.data(), static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c * 9));
  ConstMatrixView<T> colmat(col.data(), static_cast<Eigen::Index>(c * 9), static_cast<Eigen::Index>(hw));
  for (std::size_t s = 0; s < n; ++s) {
    detail::im2col3x3(input.data() + s * c * hw, c, h, w, col.data());
    MatrixView<T> out(output.data() + s * o * hw, static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(hw));
    out.noalias() = wmat * colmat;
    for (std::size_t k = 0; k < o; ++k) out.row(static_cast<Eigen::Index>(k)).array() += bias[k];
  }
  return output;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;    // empty when not requested
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_grad(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                           bool need_input_grad = true, std::string_view layer = "conv2d") {
  check_conv_shapes(input, weights, layer);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t o = weights.dim(0);
  if (grad_output.shape() != Shape{n, o, h, w}) {
    detail::shape_fail(layer, "grad_output " + shape_string(grad_output.shape()) + " does not match output shape");
  }
  const std::size_t hw = h * w;
  const auto ci = static_cast<Eigen::Index>(c * 9);
  const auto oi = static_cast<Eigen::Index>(o);
  const auto hwi = static_cast<Eigen::Index>(hw);

  Conv2dGrads<T> grads{Tensor<T>{}, Tensor<T>(weights.shape()), Tensor<T>({o})};
  if (need_input_grad) grads.input = Tensor<T>(input.shape());

  std::vector<T> col(c * 9 * hw);
  std::vector<T> gcol(need_input_grad ? c * 9 * hw : 0);
  ConstMatrixView<T> wmat(weights.data(), oi, ci);
  MatrixView<T> gw(grads.weights.data(), oi, ci);
  ConstMatrixView<T> colmat(col.data(), ci, hwi);
  for (std::size_t s = 0; s < n; ++s) {
    ConstMatrixView<T> gout(grad_output.data() + s * o * hw, oi, hwi);
    detail::im2col3x3(input.data() + s * c * hw, c, h, w, col.data());
    gw.noalias() += gout * colmat.transpose();
    // plain loop: Eigen's vectorized reductions peel by address, which makes
    // the summation order depend on where the buffer was allocated
    const T* g = grad_output.data() + s * o * hw;
    for (std::size_t k = 0; k < o; ++k) {
      T acc = T{0};
      for (std::size_t i = 0; i < hw; ++i) acc += g[k * hw + i];
      grads.bias[k] += acc;
    }
    if (need_input_grad) {
      MatrixView<T> gc(gcol.data(), ci, hwi);
      gc.noalias() = wmat.transpose() * gout;
      detail::col2im3x3_add(gcol.data(), c, h, w, grads.input.data() + s * c * hw);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// 2x2 max-pool, stride 2. Odd trailing rows/columns are dropped; ties go to
// the first element in scan order (top-left, top-right, bottom-left, bottom-right).

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool2(const Tensor<T>& input, std::string_view layer = "maxpool2") {
  detail::expect_rank(layer, "input", input.shape(), 4);
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < 2 || w < 2) detail::shape_fail(layer, "spatial dims must be >= 2, got " + shape_string(input.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult<T> result{Tensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  std::size_t k = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++k) {
        const std::size_t i0 = base + 2 * y * w + 2 * x;
        const std::size_t cand[4] = {i0, i0 + 1, i0 + w, i0 + w + 1};
        std::size_t best = cand[0];
        for (int q = 1; q < 4; ++q) {
          if (input[cand[q]] > input[best]) best = cand[q];
        }
        result.output[k] = input[best];
        result.argmax[k] = best;
      }
    }
  }
  return result;
}

template <typename T>
Tensor<T> maxpool2_grad(const Tensor<T>& grad_output, const std::vector<std::size_t>& argmax, const Shape& input_shape,
                        std::string_view layer = "maxpool2") {
  if (grad_output.size() != argmax.size()) detail::shape_fail(layer, "grad_output does not match pooling indices");
  Tensor<T> grad_input(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) grad_input[argmax[k]] += grad_output[k];
  return grad_input;
}

// ---------------------------------------------------------------------------
// dense: input [N,in], weights [out,in], bias [out] -> [N,out]

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                std::string_view layer = "dense") {
  detail::expect_rank(layer, "input", input.shape(), 2);
  detail::expect_rank(layer, "weights", weights.shape(), 2);
  const std::size_t n = input.dim(0), in = input.dim(1), out = weights.dim(0);
  if (weights.dim(1) != in) {
    detail::shape_fail(layer, "weights " + shape_string(weights.shape()) + " do not fit input " + shape_string(input.shape()));
  }
  if (bias.size() != out) detail::shape_fail(layer, "bias length " + std::to_string(bias.size()) + " != " + std::to_string(out));
  Tensor<T> output({n, out});
  ConstMatrixView<T> x(input.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstMatrixView<T> wm(weights.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  MatrixView<T> y(output.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  y.noalias() = x * wm.transpose();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < out; ++j) output[r * out + j] += bias[j];
  }
  return output;
}

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_grad(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_output,
                         bool need_input_grad = true, std::string_view layer = "dense") {
  detail::expect_rank(layer, "input", input.shape(), 2);
  const std::size_t n = input.dim(0), in = input.dim(1), out = weights.dim(0);
  if (weights.shape() != Shape{out, in} || grad_output.shape() != Shape{n, out}) {
    detail::shape_fail(layer, "gradient shapes do not match forward shapes");
  }
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ii = static_cast<Eigen::Index>(in);
  const auto oi = static_cast<Eigen::Index>(out);
  DenseGrads<T> grads{Tensor<T>{}, Tensor<T>(weights.shape()), Tensor<T>({out})};
  ConstMatrixView<T> x(input.data(), ni, ii);
  ConstMatrixView<T> wm(weights.data(), oi, ii);
  ConstMatrixView<T> gy(grad_output.data(), ni, oi);
  MatrixView<T>(grads.weights.data(), oi, ii).noalias() = gy.transpose() * x;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < out; ++j) grads.bias[j] += grad_output[r * out + j];
  }
  if (need_input_grad) {
    grads.input = Tensor<T>(input.shape());
    MatrixView<T>(grads.input.data(), ni, ii).noalias() = gy * wm;
  }
  return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.storage()) v = v > T{0} ? v : T{0};
  return out;
}

/// d relu / dx is 1 for x > 0 and 0 otherwise (including x == 0).
template <typename T>
Tensor<T> relu_grad(const Tensor<T>& input, const Tensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) throw ShapeError("relu: grad_output shape mismatch");
  Tensor<T> grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > T{0})) grad[i] = T{0};
  }
  return grad;
}

/// [N, ...] -> [N, prod(...)]
template <typename T>
Tensor<T> flatten(const Tensor<T>& input) {
  if (input.rank() < 1) throw ShapeError("flatten: rank-0 input");
  const std::size_t n = input.dim(0);
  return input.reshaped({n, n == 0 ? 0 : input.size() / n});
}

}  // namespace entrosim::nn

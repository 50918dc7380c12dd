#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ttmr/autodiff/graph.hpp"
#include "ttmr/tensor.hpp"

namespace ttmr::ad {

/// Layout of the patch grid used by unfold/fold.
///
/// Valid when patch <= height, patch <= width, 1 <= stride <= patch and both (height - patch) and
/// (width - patch) are multiples of stride. Every pixel is then covered by at least one patch.
struct PatchGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t patch = 0;
  std::size_t stride = 0;

  std::size_t grid_rows() const { return (height - patch) / stride + 1; }
  std::size_t grid_cols() const { return (width - patch) / stride + 1; }
  std::size_t count() const { return grid_rows() * grid_cols(); }
  std::size_t row_length() const { return channels * patch * patch; }

  /// Throws ShapeError for geometries that would need implicit padding.
  void validate() const;
};

// Pure forward kernels. Graph operations below delegate to these.
namespace kernels {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding);

template <typename T>
Tensor<T> unfold(const Tensor<T>& input, std::size_t patch, std::size_t stride);

template <typename T>
Tensor<T> fold(const Tensor<T>& patches, const PatchGeometry& geometry);

/// Number of patches covering each pixel (H x W, row-major).
std::vector<std::uint32_t> fold_coverage(const PatchGeometry& geometry);

/// Per-row argmax; ties resolve to the lowest column index.
template <typename T>
std::vector<std::int32_t> row_argmax(const Tensor<T>& matrix);

}  // namespace kernels

/// Cross-correlation with zero padding. input C_in x H x W, weight C_out x C_in x k x k, bias C_out.
template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, int stride, int padding);

/// max(v, 0); the subgradient at 0 is 0.
template <typename T>
Var relu(Graph<T>& g, Var x);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var mul(Graph<T>& g, Var a, Var b);

template <typename T>
Var scale(Graph<T>& g, Var a, T factor);

/// x (C x H x W) multiplied by gate (1 x H x W) broadcast over channels.
template <typename T>
Var mul_channel_broadcast(Graph<T>& g, Var x, Var gate);

/// Channel-axis concatenation of two C_a x H x W and C_b x H x W maps.
template <typename T>
Var concat_channels(Graph<T>& g, Var a, Var b);

template <typename T>
Var slice_channels(Graph<T>& g, Var x, std::size_t begin, std::size_t count);

/// C x H x W -> N x (C*patch*patch); rows follow row-major patch-grid order.
template <typename T>
Var unfold(Graph<T>& g, Var x, std::size_t patch, std::size_t stride);

/// Inverse of unfold: overlapping contributions are averaged.
template <typename T>
Var fold(Graph<T>& g, Var patches, const PatchGeometry& geometry);

/// Row i of the result is row indices[i] of table. Indices carry no gradient.
template <typename T>
Var gather_rows(Graph<T>& g, Var table, const std::vector<std::int32_t>& indices);

/// Vector of length N -> N x columns matrix with constant rows.
template <typename T>
Var broadcast_columns(Graph<T>& g, Var values, std::size_t columns);

/// Per-row maximum of an N x M matrix; the gradient routes to the lowest-index argmax.
template <typename T>
Var row_max(Graph<T>& g, Var matrix);

/// Cosine similarity between the rows of a (N_a x D) and b (N_b x D): N_a x N_b.
/// Row norms are clamped below at `norm_floor`. Accumulates in double precision.
template <typename T>
Var cosine_similarity(Graph<T>& g, Var a, Var b, double norm_floor = 1e-8);

template <typename T>
Var sum(Graph<T>& g, Var x);

/// Sum of absolute values.
template <typename T>
Var abs_sum(Graph<T>& g, Var x);

/// Mean absolute elementwise difference; scalar result.
template <typename T>
Var l1_loss(Graph<T>& g, Var pred, Var target);

}  // namespace ttmr::ad

#include "ttmr/autodiff/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <string>

namespace ttmr::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
  std::size_t in_channels, height, width, kernel, out_h, out_w;
  int stride, padding;
  std::size_t col_rows() const { return in_channels * kernel * kernel; }
  std::size_t col_cols() const { return out_h * out_w; }
  bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                           int padding) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be C x H x W, got " + shape_str(input.shape()));
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be C_out x C_in x k x k, got " + shape_str(weight.shape()));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, input " +
                     shape_str(input.shape()) + " has " + std::to_string(input.dim(0)));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(weight.dim(0)) + " output channels");
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  const auto k = weight.dim(2);
  const auto ph = input.dim(1) + 2 * static_cast<std::size_t>(padding);
  const auto pw = input.dim(2) + 2 * static_cast<std::size_t>(padding);
  if (ph < k || pw < k) throw ShapeError("conv2d: padded input smaller than kernel");
  const auto s = static_cast<std::size_t>(stride);
  return ConvGeometry{input.dim(0), input.dim(1), input.dim(2), k, (ph - k) / s + 1, (pw - k) / s + 1, stride,
                      padding};
}

template <typename T>
void im2col(const T* in, const ConvGeometry& cg, T* col) {
  const auto k = cg.kernel;
  const auto s = static_cast<std::ptrdiff_t>(cg.stride);
  const auto p = static_cast<std::ptrdiff_t>(cg.padding);
  const auto H = static_cast<std::ptrdiff_t>(cg.height);
  const auto W = static_cast<std::ptrdiff_t>(cg.width);
  const auto Wo = static_cast<std::ptrdiff_t>(cg.out_w);
  for (std::size_t c = 0; c < cg.in_channels; ++c) {
    const T* plane = in + c * cg.height * cg.width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* dst = col + ((c * k + ki) * k + kj) * cg.col_cols();
        for (std::ptrdiff_t oy = 0; oy < static_cast<std::ptrdiff_t>(cg.out_h); ++oy) {
          const std::ptrdiff_t iy = oy * s + static_cast<std::ptrdiff_t>(ki) - p;
          T* row = dst + oy * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(row, row + Wo, T{0});
            continue;
          }
          const T* src = plane + iy * W;
          for (std::ptrdiff_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix = ox * s + static_cast<std::ptrdiff_t>(kj) - p;
            row[ox] = (ix >= 0 && ix < W) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& cg, T* out) {
  const auto k = cg.kernel;
  const auto s = static_cast<std::ptrdiff_t>(cg.stride);
  const auto p = static_cast<std::ptrdiff_t>(cg.padding);
  const auto H = static_cast<std::ptrdiff_t>(cg.height);
  const auto W = static_cast<std::ptrdiff_t>(cg.width);
  const auto Wo = static_cast<std::ptrdiff_t>(cg.out_w);
  for (std::size_t c = 0; c < cg.in_channels; ++c) {
    T* plane = out + c * cg.height * cg.width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* src = col + ((c * k + ki) * k + kj) * cg.col_cols();
        for (std::ptrdiff_t oy = 0; oy < static_cast<std::ptrdiff_t>(cg.out_h); ++oy) {
          const std::ptrdiff_t iy = oy * s + static_cast<std::ptrdiff_t>(ki) - p;
          if (iy < 0 || iy >= H) continue;
          const T* row = src + oy * Wo;
          T* dst = plane + iy * W;
          for (std::ptrdiff_t ox = 0; ox < Wo; ++ox) {
            const std::ptrdiff_t ix = ox * s + static_cast<std::ptrdiff_t>(kj) - p;
            if (ix >= 0 && ix < W) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

}  // namespace

void PatchGeometry::validate() const {
  if (channels == 0 || height == 0 || width == 0) throw ShapeError("patch geometry: empty feature map");
  if (patch == 0 || stride == 0) throw ShapeError("patch geometry: patch and stride must be positive");
  if (stride > patch) throw ShapeError("patch geometry: stride larger than patch leaves uncovered pixels");
  if (height < patch || width < patch) {
    throw ShapeError("patch geometry: " + std::to_string(height) + "x" + std::to_string(width) +
                     " map is smaller than patch " + std::to_string(patch));
  }
  if ((height - patch) % stride != 0 || (width - patch) % stride != 0) {
    throw ShapeError("patch geometry: (" + std::to_string(height) + "x" + std::to_string(width) + " - " +
                     std::to_string(patch) + ") not divisible by stride " + std::to_string(stride));
  }
}

namespace kernels {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding) {
  const ConvGeometry cg = conv_geometry(input, weight, bias, stride, padding);
  const auto c_out = weight.dim(0);
  Tensor<T> out({c_out, cg.out_h, cg.out_w});
  ConstMapMat<T> w(weight.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(cg.col_rows()));
  MapMat<T> o(out.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(cg.col_cols()));
  if (cg.pointwise()) {
    o.noalias() = w * ConstMapMat<T>(input.data(), static_cast<Eigen::Index>(cg.col_rows()),
                                     static_cast<Eigen::Index>(cg.col_cols()));
  } else {
    std::vector<T> col(cg.col_rows() * cg.col_cols());
    im2col(input.data(), cg, col.data());
    o.noalias() = w * ConstMapMat<T>(col.data(), static_cast<Eigen::Index>(cg.col_rows()),
                                     static_cast<Eigen::Index>(cg.col_cols()));
  }
  for (std::size_t c = 0; c < c_out; ++c) o.row(static_cast<Eigen::Index>(c)).array() += bias[c];
  return out;
}

template <typename T>
Tensor<T> unfold(const Tensor<T>& input, std::size_t patch, std::size_t stride) {
  require_rank(input.shape(), 3, "unfold");
  const PatchGeometry geo{input.dim(0), input.dim(1), input.dim(2), patch, stride};
  geo.validate();
  Tensor<T> out({geo.count(), geo.row_length()});
  T* dst = out.data();
  for (std::size_t gy = 0; gy < geo.grid_rows(); ++gy) {
    for (std::size_t gx = 0; gx < geo.grid_cols(); ++gx) {
      for (std::size_t c = 0; c < geo.channels; ++c) {
        for (std::size_t py = 0; py < patch; ++py) {
          const T* src = input.data() + (c * geo.height + gy * stride + py) * geo.width + gx * stride;
          dst = std::copy(src, src + patch, dst);
        }
      }
    }
  }
  return out;
}

std::vector<std::uint32_t> fold_coverage(const PatchGeometry& geo) {
  geo.validate();
  std::vector<std::uint32_t> cover(geo.height * geo.width, 0);
  for (std::size_t gy = 0; gy < geo.grid_rows(); ++gy)
    for (std::size_t gx = 0; gx < geo.grid_cols(); ++gx)
      for (std::size_t py = 0; py < geo.patch; ++py)
        for (std::size_t px = 0; px < geo.patch; ++px)
          ++cover[(gy * geo.stride + py) * geo.width + gx * geo.stride + px];
  return cover;
}

template <typename T>
Tensor<T> fold(const Tensor<T>& patches, const PatchGeometry& geo) {
  geo.validate();
  require_rank(patches.shape(), 2, "fold");
  if (patches.dim(0) != geo.count() || patches.dim(1) != geo.row_length()) {
    throw ShapeError("fold: patches " + shape_str(patches.shape()) + " inconsistent with geometry (expected " +
                     std::to_string(geo.count()) + "x" + std::to_string(geo.row_length()) + ")");
  }
  Tensor<T> out({geo.channels, geo.height, geo.width});
  const T* src = patches.data();
  for (std::size_t gy = 0; gy < geo.grid_rows(); ++gy) {
    for (std::size_t gx = 0; gx < geo.grid_cols(); ++gx) {
      for (std::size_t c = 0; c < geo.channels; ++c) {
        for (std::size_t py = 0; py < geo.patch; ++py) {
          T* dst = out.data() + (c * geo.height + gy * geo.stride + py) * geo.width + gx * geo.stride;
          for (std::size_t px = 0; px < geo.patch; ++px) dst[px] += *src++;
        }
      }
    }
  }
  const auto cover = fold_coverage(geo);
  const std::size_t plane = geo.height * geo.width;
  for (std::size_t c = 0; c < geo.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] /= static_cast<T>(cover[i]);
  return out;
}

template <typename T>
std::vector<std::int32_t> row_argmax(const Tensor<T>& m) {
  require_rank(m.shape(), 2, "row_argmax");
  std::vector<std::int32_t> idx(m.dim(0), 0);
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    const T* row = m.data() + i * m.dim(1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.dim(1); ++j)
      if (row[j] > row[best]) best = j;
    idx[i] = static_cast<std::int32_t>(best);
  }
  return idx;
}

}  // namespace kernels

template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, int stride, int padding) {
  const Tensor<T>& in = g.value(input);
  const Tensor<T>& w = g.value(weight);
  const ConvGeometry cg = conv_geometry(in, w, g.value(bias), stride, padding);
  const auto c_out = w.dim(0);
  const auto rows = static_cast<Eigen::Index>(cg.col_rows());
  const auto cols = static_cast<Eigen::Index>(cg.col_cols());

  // The column buffer is kept for the weight gradient; pointwise convs reuse the input itself.
  auto col = std::make_shared<std::vector<T>>();
  if (!cg.pointwise()) {
    col->resize(cg.col_rows() * cg.col_cols());
    im2col(in.data(), cg, col->data());
  }
  const T* col_ptr = cg.pointwise() ? in.data() : col->data();

  Tensor<T> out({c_out, cg.out_h, cg.out_w});
  MapMat<T> o(out.data(), static_cast<Eigen::Index>(c_out), cols);
  o.noalias() = ConstMapMat<T>(w.data(), static_cast<Eigen::Index>(c_out), rows) * ConstMapMat<T>(col_ptr, rows, cols);
  const Tensor<T>& b = g.value(bias);
  for (std::size_t c = 0; c < c_out; ++c) o.row(static_cast<Eigen::Index>(c)).array() += b[c];

  const bool need_w = g.requires_grad(weight);
  if (!need_w) col.reset();
  return g.record(std::move(out), {input, weight, bias},
                  [=](Graph<T>& gr, const Tensor<T>& dy) {
                    ConstMapMat<T> dym(dy.data(), static_cast<Eigen::Index>(c_out), cols);
                    if (gr.requires_grad(weight)) {
                      const T* cp = cg.pointwise() ? gr.value(input).data() : col->data();
                      MapMat<T> dw(gr.grad_buffer(weight).data(), static_cast<Eigen::Index>(c_out), rows);
                      dw.noalias() += dym * ConstMapMat<T>(cp, rows, cols).transpose();
                    }
                    if (gr.requires_grad(bias)) {
                      Tensor<T>& db = gr.grad_buffer(bias);
                      // Plain ordered sum: Eigen's vectorised reduction depends on pointer alignment.
                      for (std::size_t c = 0; c < c_out; ++c) {
                        const T* row = dy.data() + c * static_cast<std::size_t>(cols);
                        double acc = 0.0;
                        for (Eigen::Index k = 0; k < cols; ++k) acc += static_cast<double>(row[k]);
                        db[c] += static_cast<T>(acc);
                      }
                    }
                    if (gr.requires_grad(input)) {
                      ConstMapMat<T> wm(gr.value(weight).data(), static_cast<Eigen::Index>(c_out), rows);
                      Tensor<T>& dx = gr.grad_buffer(input);
                      if (cg.pointwise()) {
                        MapMat<T>(dx.data(), rows, cols).noalias() += wm.transpose() * dym;
                      } else {
                        RowMat<T> dcol = wm.transpose() * dym;
                        col2im(dcol.data(), cg, dx.data());
                      }
                    }
                  });
}

template <typename T>
Var relu(Graph<T>& g, Var x) {
  const Tensor<T>& in = g.value(x);
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T{0} ? in[i] : T{0};
  return g.record(std::move(out), {x}, [x](Graph<T>& gr, const Tensor<T>& dy) {
    const Tensor<T>& in = gr.value(x);
    Tensor<T>& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < in.size(); ++i)
      if (in[i] > T{0}) dx[i] += dy[i];
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& va = g.value(a);
  const Tensor<T>& vb = g.value(b);
  require_same_shape(va, vb, "add");
  Tensor<T> out(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] + vb[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    gr.accumulate(a, dy);
    gr.accumulate(b, dy);
  });
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& va = g.value(a);
  const Tensor<T>& vb = g.value(b);
  require_same_shape(va, vb, "mul");
  Tensor<T> out(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] * vb[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    const Tensor<T>& va = gr.value(a);
    const Tensor<T>& vb = gr.value(b);
    if (gr.requires_grad(a)) {
      Tensor<T>& da = gr.grad_buffer(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * vb[i];
    }
    if (gr.requires_grad(b)) {
      Tensor<T>& db = gr.grad_buffer(b);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * va[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  const Tensor<T>& va = g.value(a);
  Tensor<T> out(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] * factor;
  return g.record(std::move(out), {a}, [a, factor](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& da = gr.grad_buffer(a);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * factor;
  });
}

template <typename T>
Var mul_channel_broadcast(Graph<T>& g, Var x, Var gate) {
  const Tensor<T>& vx = g.value(x);
  const Tensor<T>& vg = g.value(gate);
  require_rank(vx.shape(), 3, "mul_channel_broadcast");
  if (vg.shape() != Shape{1, vx.dim(1), vx.dim(2)}) {
    throw ShapeError("mul_channel_broadcast: gate " + shape_str(vg.shape()) + " does not match map " +
                     shape_str(vx.shape()));
  }
  const std::size_t plane = vx.dim(1) * vx.dim(2);
  Tensor<T> out(vx.shape());
  for (std::size_t c = 0; c < vx.dim(0); ++c)
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = vx[c * plane + i] * vg[i];
  return g.record(std::move(out), {x, gate}, [x, gate, plane](Graph<T>& gr, const Tensor<T>& dy) {
    const Tensor<T>& vx = gr.value(x);
    const Tensor<T>& vg = gr.value(gate);
    const std::size_t channels = vx.dim(0);
    if (gr.requires_grad(x)) {
      Tensor<T>& dx = gr.grad_buffer(x);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) dx[c * plane + i] += dy[c * plane + i] * vg[i];
    }
    if (gr.requires_grad(gate)) {
      Tensor<T>& dg = gr.grad_buffer(gate);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) dg[i] += dy[c * plane + i] * vx[c * plane + i];
    }
  });
}

template <typename T>
Var concat_channels(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& va = g.value(a);
  const Tensor<T>& vb = g.value(b);
  require_rank(va.shape(), 3, "concat_channels");
  require_rank(vb.shape(), 3, "concat_channels");
  if (va.dim(1) != vb.dim(1) || va.dim(2) != vb.dim(2)) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
  }
  Tensor<T> out({va.dim(0) + vb.dim(0), va.dim(1), va.dim(2)});
  std::copy(vb.data(), vb.data() + vb.size(), std::copy(va.data(), va.data() + va.size(), out.data()));
  const std::size_t split = va.size();
  return g.record(std::move(out), {a, b}, [a, b, split](Graph<T>& gr, const Tensor<T>& dy) {
    if (gr.requires_grad(a)) {
      Tensor<T>& da = gr.grad_buffer(a);
      for (std::size_t i = 0; i < split; ++i) da[i] += dy[i];
    }
    if (gr.requires_grad(b)) {
      Tensor<T>& db = gr.grad_buffer(b);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[split + i];
    }
  });
}

template <typename T>
Var slice_channels(Graph<T>& g, Var x, std::size_t begin, std::size_t count) {
  const Tensor<T>& vx = g.value(x);
  require_rank(vx.shape(), 3, "slice_channels");
  if (count == 0 || begin + count > vx.dim(0)) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + std::to_string(vx.dim(0)) + " channels");
  }
  const std::size_t plane = vx.dim(1) * vx.dim(2);
  const std::size_t offset = begin * plane;
  Tensor<T> out({count, vx.dim(1), vx.dim(2)});
  std::copy(vx.data() + offset, vx.data() + offset + out.size(), out.data());
  return g.record(std::move(out), {x}, [x, offset](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[offset + i] += dy[i];
  });
}

template <typename T>
Var unfold(Graph<T>& g, Var x, std::size_t patch, std::size_t stride) {
  const Tensor<T>& vx = g.value(x);
  Tensor<T> out = kernels::unfold(vx, patch, stride);
  const PatchGeometry geo{vx.dim(0), vx.dim(1), vx.dim(2), patch, stride};
  return g.record(std::move(out), {x}, [x, geo](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dx = gr.grad_buffer(x);
    const T* src = dy.data();
    for (std::size_t gy = 0; gy < geo.grid_rows(); ++gy)
      for (std::size_t gx = 0; gx < geo.grid_cols(); ++gx)
        for (std::size_t c = 0; c < geo.channels; ++c)
          for (std::size_t py = 0; py < geo.patch; ++py) {
            T* dst = dx.data() + (c * geo.height + gy * geo.stride + py) * geo.width + gx * geo.stride;
            for (std::size_t px = 0; px < geo.patch; ++px) dst[px] += *src++;
          }
  });
}

template <typename T>
Var fold(Graph<T>& g, Var patches, const PatchGeometry& geo) {
  Tensor<T> out = kernels::fold(g.value(patches), geo);
  auto cover = std::make_shared<const std::vector<std::uint32_t>>(kernels::fold_coverage(geo));
  return g.record(std::move(out), {patches}, [patches, geo, cover](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dp = gr.grad_buffer(patches);
    T* dst = dp.data();
    for (std::size_t gy = 0; gy < geo.grid_rows(); ++gy)
      for (std::size_t gx = 0; gx < geo.grid_cols(); ++gx)
        for (std::size_t c = 0; c < geo.channels; ++c)
          for (std::size_t py = 0; py < geo.patch; ++py) {
            const std::size_t y = gy * geo.stride + py;
            for (std::size_t px = 0; px < geo.patch; ++px) {
              const std::size_t xx = gx * geo.stride + px;
              *dst++ += dy[(c * geo.height + y) * geo.width + xx] / static_cast<T>((*cover)[y * geo.width + xx]);
            }
          }
  });
}

template <typename T>
Var gather_rows(Graph<T>& g, Var table, const std::vector<std::int32_t>& indices) {
  const Tensor<T>& tv = g.value(table);
  require_rank(tv.shape(), 2, "gather_rows");
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n_rows = tv.dim(0);
  const std::size_t m = tv.dim(1);
  for (auto i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= n_rows) {
      throw std::out_of_range("gather_rows: index " + std::to_string(i) + " outside [0, " + std::to_string(n_rows) +
                              ")");
    }
  }
  Tensor<T> out({indices.size(), m});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const T* src = tv.data() + static_cast<std::size_t>(indices[r]) * m;
    std::copy(src, src + m, out.data() + r * m);
  }
  return g.record(std::move(out), {table}, [table, indices, m](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dt = gr.grad_buffer(table);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      T* dst = dt.data() + static_cast<std::size_t>(indices[r]) * m;
      const T* src = dy.data() + r * m;
      for (std::size_t k = 0; k < m; ++k) dst[k] += src[k];
    }
  });
}

template <typename T>
Var broadcast_columns(Graph<T>& g, Var values, std::size_t columns) {
  const Tensor<T>& v = g.value(values);
  require_rank(v.shape(), 1, "broadcast_columns");
  Tensor<T> out({v.dim(0), columns});
  for (std::size_t i = 0; i < v.dim(0); ++i) std::fill_n(out.data() + i * columns, columns, v[i]);
  return g.record(std::move(out), {values}, [values, columns](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dv = gr.grad_buffer(values);
    for (std::size_t i = 0; i < dv.size(); ++i) {
      T s{0};
      for (std::size_t k = 0; k < columns; ++k) s += dy[i * columns + k];
      dv[i] += s;
    }
  });
}

template <typename T>
Var row_max(Graph<T>& g, Var matrix) {
  const Tensor<T>& m = g.value(matrix);
  auto arg = kernels::row_argmax(m);
  Tensor<T> out({m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i) out[i] = m.at(i, static_cast<std::size_t>(arg[i]));
  const std::size_t cols = m.dim(1);
  return g.record(std::move(out), {matrix}, [matrix, arg = std::move(arg), cols](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dm = gr.grad_buffer(matrix);
    for (std::size_t i = 0; i < arg.size(); ++i) dm[i * cols + static_cast<std::size_t>(arg[i])] += dy[i];
  });
}

template <typename T>
Var cosine_similarity(Graph<T>& g, Var a, Var b, double norm_floor) {
  using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Tensor<T>& va = g.value(a);
  const Tensor<T>& vb = g.value(b);
  require_rank(va.shape(), 2, "cosine_similarity");
  require_rank(vb.shape(), 2, "cosine_similarity");
  if (va.dim(1) != vb.dim(1)) {
    throw ShapeError("cosine_similarity: row length mismatch " + shape_str(va.shape()) + " vs " +
                     shape_str(vb.shape()));
  }
  struct Normalized {
    MatD rows;
    std::vector<double> norms;    // clamped
    std::vector<bool> clamped;
  };
  auto normalize = [norm_floor](const Tensor<T>& t) {
    Normalized n;
    const auto r = static_cast<Eigen::Index>(t.dim(0));
    const auto c = static_cast<Eigen::Index>(t.dim(1));
    n.rows = ConstMapMat<T>(t.data(), r, c).template cast<double>();
    n.norms.resize(t.dim(0));
    n.clamped.resize(t.dim(0));
    for (Eigen::Index i = 0; i < r; ++i) {
      const double norm = n.rows.row(i).norm();
      n.clamped[static_cast<std::size_t>(i)] = !(norm > norm_floor);
      n.norms[static_cast<std::size_t>(i)] = std::max(norm, norm_floor);
      n.rows.row(i) /= n.norms[static_cast<std::size_t>(i)];
    }
    return n;
  };
  auto na = std::make_shared<Normalized>(normalize(va));
  auto nb = std::make_shared<Normalized>(normalize(vb));
  MatD r = na->rows * nb->rows.transpose();
  Tensor<T> out({va.dim(0), vb.dim(0)});
  for (Eigen::Index i = 0; i < r.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<T>(r.data()[i]);

  return g.record(std::move(out), {a, b}, [a, b, na, nb](Graph<T>& gr, const Tensor<T>& dy) {
    const auto rows_a = static_cast<Eigen::Index>(na->rows.rows());
    const auto rows_b = static_cast<Eigen::Index>(nb->rows.rows());
    MatD dr = ConstMapMat<T>(dy.data(), rows_a, rows_b).template cast<double>();
    auto push = [&gr](Var v, const Normalized& n, const MatD& dn) {
      Tensor<T>& dv = gr.grad_buffer(v);
      const auto cols = n.rows.cols();
      for (Eigen::Index i = 0; i < n.rows.rows(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double proj = n.clamped[ui] ? 0.0 : n.rows.row(i).dot(dn.row(i));
        for (Eigen::Index k = 0; k < cols; ++k) {
          const double d = (dn(i, k) - proj * n.rows(i, k)) / n.norms[ui];
          dv[ui * static_cast<std::size_t>(cols) + static_cast<std::size_t>(k)] += static_cast<T>(d);
        }
      }
    };
    if (gr.requires_grad(a)) push(a, *na, MatD(dr * nb->rows));
    if (gr.requires_grad(b)) push(b, *nb, MatD(dr.transpose() * na->rows));
  });
}

template <typename T>
Var sum(Graph<T>& g, Var x) {
  const Tensor<T>& v = g.value(x);
  T s{0};
  for (auto e : v.values()) s += e;
  return g.record(Tensor<T>({1}, std::vector<T>{s}), {x}, [x](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[0];
  });
}

template <typename T>
Var abs_sum(Graph<T>& g, Var x) {
  const Tensor<T>& v = g.value(x);
  T s{0};
  for (auto e : v.values()) s += std::abs(e);
  return g.record(Tensor<T>({1}, std::vector<T>{s}), {x}, [x](Graph<T>& gr, const Tensor<T>& dy) {
    const Tensor<T>& v = gr.value(x);
    Tensor<T>& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += v[i] > T{0} ? dy[0] : (v[i] < T{0} ? -dy[0] : T{0});
  });
}

template <typename T>
Var l1_loss(Graph<T>& g, Var pred, Var target) {
  const Tensor<T>& p = g.value(pred);
  const Tensor<T>& t = g.value(target);
  require_same_shape(p, t, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
  const T n = static_cast<T>(p.size());
  const T loss = static_cast<T>(acc / static_cast<double>(p.size()));
  return g.record(Tensor<T>({1}, std::vector<T>{loss}), {pred, target},
                  [pred, target, n](Graph<T>& gr, const Tensor<T>& dy) {
                    const Tensor<T>& p = gr.value(pred);
                    const Tensor<T>& t = gr.value(target);
                    const T step = dy[0] / n;
                    auto sign = [](T d) { return d > T{0} ? T{1} : (d < T{0} ? T{-1} : T{0}); };
                    if (gr.requires_grad(pred)) {
                      Tensor<T>& dp = gr.grad_buffer(pred);
                      for (std::size_t i = 0; i < p.size(); ++i) dp[i] += step * sign(p[i] - t[i]);
                    }
                    if (gr.requires_grad(target)) {
                      Tensor<T>& dt = gr.grad_buffer(target);
                      for (std::size_t i = 0; i < p.size(); ++i) dt[i] -= step * sign(p[i] - t[i]);
                    }
                  });
}

#define TTMR_INSTANTIATE_OPS(T)                                                                       \
  template Tensor<T> kernels::conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> kernels::unfold(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> kernels::fold(const Tensor<T>&, const PatchGeometry&);                           \
  template std::vector<std::int32_t> kernels::row_argmax(const Tensor<T>&);                           \
  template Var conv2d(Graph<T>&, Var, Var, Var, int, int);                                            \
  template Var relu(Graph<T>&, Var);                                                                  \
  template Var add(Graph<T>&, Var, Var);                                                              \
  template Var mul(Graph<T>&, Var, Var);                                                              \
  template Var scale(Graph<T>&, Var, T);                                                              \
  template Var mul_channel_broadcast(Graph<T>&, Var, Var);                                            \
  template Var concat_channels(Graph<T>&, Var, Var);                                                  \
  template Var slice_channels(Graph<T>&, Var, std::size_t, std::size_t);                              \
  template Var unfold(Graph<T>&, Var, std::size_t, std::size_t);                                      \
  template Var fold(Graph<T>&, Var, const PatchGeometry&);                                            \
  template Var gather_rows(Graph<T>&, Var, const std::vector<std::int32_t>&);                         \
  template Var broadcast_columns(Graph<T>&, Var, std::size_t);                                        \
  template Var row_max(Graph<T>&, Var);                                                               \
  template Var cosine_similarity(Graph<T>&, Var, Var, double);                                        \
  template Var sum(Graph<T>&, Var);                                                                   \
  template Var abs_sum(Graph<T>&, Var);                                                               \
  template Var l1_loss(Graph<T>&, Var, Var);

TTMR_INSTANTIATE_OPS(float)
TTMR_INSTANTIATE_OPS(double)

#undef TTMR_INSTANTIATE_OPS

}  // namespace ttmr::ad

#include <Eigen/Core>
#include <algorithm>

#include "spikeforge/numerics/ops.hpp"
#include "spikeforge/numerics/parallel.hpp"

namespace spikeforge::inline SPIKEFORGE_ABI {
namespace {

using RowMatrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Images per partial gradient. Fixed so the reduction order never depends
// on how many workers run.
constexpr std::size_t kChunk = 8;

struct Geometry {
  std::size_t batch, c_in, h, w, c_out, k, ho, wo, stride, pad;
  bool batched;

  std::size_t patch() const { return c_in * k * k; }
  std::size_t positions() const { return ho * wo; }
  std::size_t in_image() const { return c_in * h * w; }
  std::size_t out_image() const { return c_out * ho * wo; }
};

Geometry make_geometry(const Tensor& x, const Tensor& w, ConvOptions opts) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError("conv2d: input must be (C,H,W) or (N,C,H,W), got " + shape_string(x.shape()));
  }
  require_rank(w, 4, "conv2d weight");
  if (opts.stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  Geometry g{};
  g.batched = x.rank() == 4;
  const std::size_t off = g.batched ? 1 : 0;
  g.batch = g.batched ? x.dim(0) : 1;
  g.c_in = x.dim(off);
  g.h = x.dim(off + 1);
  g.w = x.dim(off + 2);
  g.c_out = w.dim(0);
  g.k = w.dim(2);
  if (w.dim(1) != g.c_in) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1)) + " input channels, input has " +
                     std::to_string(g.c_in));
  }
  if (w.dim(3) != g.k) throw ShapeError("conv2d: kernel must be square");
  g.stride = opts.stride;
  g.pad = opts.pad;
  g.ho = conv_output_size(g.h, g.k, g.stride, g.pad);
  g.wo = conv_output_size(g.w, g.k, g.stride, g.pad);
  return g;
}

void im2col(const real* img, const Geometry& g, real* cols) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        real* row = cols + ((c * g.k + ky) * g.k + kx) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          real* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.wo, real(0));
            continue;
          }
          const real* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? real(0) : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const real* cols, const Geometry& g, real* img) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const real* row = cols + ((c * g.k + ky) * g.k + kx) * p;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          real* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const real* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor conv_impl(const Tensor& x, const Tensor& w, const Tensor* bias, ConvOptions opts) {
  const Geometry g = make_geometry(x, w, opts);
  if (bias) require_shape(*bias, Shape{g.c_out}, "conv2d bias");
  Tensor out(g.batched ? Shape{g.batch, g.c_out, g.ho, g.wo} : Shape{g.c_out, g.ho, g.wo});
  const ConstMatrixMap wm(w.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
  parallel_for(g.batch, [&](std::size_t n) {
    std::vector<real> cols(g.patch() * g.positions());
    im2col(x.data() + n * g.in_image(), g, cols.data());
    const ConstMatrixMap cm(cols.data(), static_cast<Eigen::Index>(g.patch()),
                            static_cast<Eigen::Index>(g.positions()));
    MatrixMap om(out.data() + n * g.out_image(), static_cast<Eigen::Index>(g.c_out),
                 static_cast<Eigen::Index>(g.positions()));
    om.noalias() = wm * cm;
    if (bias) {
      for (std::size_t c = 0; c < g.c_out; ++c) om.row(static_cast<Eigen::Index>(c)).array() += (*bias)[c];
    }
  });
  return out;
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ShapeError("conv: stride must be >= 1");
  if (kernel == 0 || kernel > in + 2 * pad) {
    throw ShapeError("conv: kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, ConvOptions opts) { return conv_impl(x, w, nullptr, opts); }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvOptions opts) {
  return conv_impl(x, w, &bias, opts);
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, ConvOptions opts,
                          bool need_grad_x) {
  const Geometry g = make_geometry(x, w, opts);
  require_shape(grad_out, g.batched ? Shape{g.batch, g.c_out, g.ho, g.wo} : Shape{g.c_out, g.ho, g.wo},
                "conv2d_backward grad_out");

  ConvGrads grads;
  grads.grad_w = Tensor(w.shape());
  grads.grad_bias = Tensor(Shape{g.c_out});
  if (need_grad_x) grads.grad_x = Tensor(x.shape());

  const ConstMatrixMap wm(w.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
  const std::size_t chunks = (g.batch + kChunk - 1) / kChunk;
  std::vector<RowMatrix> partial_w(chunks);
  std::vector<std::vector<double>> partial_b(chunks);

  parallel_for(chunks, [&](std::size_t chunk) {
    RowMatrix gw = RowMatrix::Zero(static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
    std::vector<double> gb(g.c_out, 0.0);
    std::vector<real> cols(g.patch() * g.positions());
    std::vector<real> grad_cols(need_grad_x ? cols.size() : 0);
    const std::size_t end = std::min(g.batch, (chunk + 1) * kChunk);
    for (std::size_t n = chunk * kChunk; n < end; ++n) {
      im2col(x.data() + n * g.in_image(), g, cols.data());
      const ConstMatrixMap cm(cols.data(), static_cast<Eigen::Index>(g.patch()),
                              static_cast<Eigen::Index>(g.positions()));
      const ConstMatrixMap gm(grad_out.data() + n * g.out_image(), static_cast<Eigen::Index>(g.c_out),
                              static_cast<Eigen::Index>(g.positions()));
      gw.noalias() += gm * cm.transpose();
      // plain loop: Eigen's vectorized redux peels by address alignment, so
      // its rounding would depend on where the buffer happens to live
      const real* go = grad_out.data() + n * g.out_image();
      for (std::size_t c = 0; c < g.c_out; ++c)
        for (std::size_t p = 0; p < g.positions(); ++p) gb[c] += go[c * g.positions() + p];
      if (need_grad_x) {
        MatrixMap gc(grad_cols.data(), static_cast<Eigen::Index>(g.patch()),
                     static_cast<Eigen::Index>(g.positions()));
        gc.noalias() = wm.transpose() * gm;
        col2im(grad_cols.data(), g, grads.grad_x.data() + n * g.in_image());
      }
    }
    partial_w[chunk] = std::move(gw);
    partial_b[chunk] = std::move(gb);
  });

  MatrixMap gw_out(grads.grad_w.data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
  std::vector<double> gb_total(g.c_out, 0.0);
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    gw_out += partial_w[chunk];
    for (std::size_t c = 0; c < g.c_out; ++c) gb_total[c] += partial_b[chunk][c];
  }
  for (std::size_t c = 0; c < g.c_out; ++c) grads.grad_bias[c] = static_cast<real>(gb_total[c]);
  return grads;
}

}  // namespace spikeforge::inline SPIKEFORGE_ABI

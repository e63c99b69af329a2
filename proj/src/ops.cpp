#include "futureseg/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "futureseg/error.hpp"

namespace futureseg {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

struct ConvGeometry {
  std::size_t cin, h, w;
  std::size_t kh, kw;
  std::size_t oh, ow;
  ConvOptions opt;

  std::size_t rows() const { return cin * kh * kw; }
  std::size_t cols() const { return oh * ow; }
  bool pointwise() const {
    return kh == 1 && kw == 1 && opt.stride == 1 && opt.padding == 0;
  }
};

// Unrolls one image [cin,h,w] into a [cin*kh*kw, oh*ow] patch matrix.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* cols) {
  const auto s = static_cast<std::ptrdiff_t>(g.opt.stride);
  const auto p = static_cast<std::ptrdiff_t>(g.opt.padding);
  const auto d = static_cast<std::ptrdiff_t>(g.opt.dilation);
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* plane = img + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((c * g.kh + ki) * g.kw + kj) * g.cols();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ki) * d;
          T* out = row + oy * g.ow;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + g.ow, T(0));
            continue;
          }
          const T* in = plane + iy * w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(kj) * d;
            out[ox] = (ix >= 0 && ix < w) ? in[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch gradients back onto the image.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* img) {
  const auto s = static_cast<std::ptrdiff_t>(g.opt.stride);
  const auto p = static_cast<std::ptrdiff_t>(g.opt.padding);
  const auto d = static_cast<std::ptrdiff_t>(g.opt.dilation);
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t c = 0; c < g.cin; ++c) {
    T* plane = img + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((c * g.kh + ki) * g.kw + kj) * g.cols();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(ki) * d;
          if (iy < 0 || iy >= h) continue;
          const T* in = row + oy * g.ow;
          T* out = plane + iy * w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(kj) * d;
            if (ix >= 0 && ix < w) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void sigmoid_inplace(std::span<T> v) {
  for (T& x : v) {
    if (x >= T(0)) {
      x = T(1) / (T(1) + std::exp(-x));
    } else {
      const T e = std::exp(x);
      x = e / (T(1) + e);
    }
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, ConvOptions opt) {
  if (kernel == 0 || opt.stride == 0 || opt.dilation == 0) {
    throw ShapeError("conv2d: kernel, stride and dilation must be >= 1");
  }
  const auto span = static_cast<std::ptrdiff_t>(in + 2 * opt.padding) -
                    static_cast<std::ptrdiff_t>(opt.dilation * (kernel - 1)) - 1;
  if (span < 0) throw ShapeError("conv2d: non-positive output extent");
  return static_cast<std::size_t>(span) / opt.stride + 1;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvOptions opt) {
  const Dims xd = x.dims();
  const Dims wd = w.dims();
  if (wd.c != xd.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xd.c) + " channels, kernel expects " +
                     std::to_string(wd.c));
  }
  const bool has_bias = b.defined();
  if (has_bias && b.dims() != Dims{wd.n, 1, 1, 1}) {
    throw ShapeError("conv2d: bias dims " + b.dims().str() + " do not match " + std::to_string(wd.n) +
                     " output channels");
  }
  ConvGeometry g{xd.c, xd.h, xd.w, wd.h, wd.w, 0, 0, opt};
  g.oh = conv_output_extent(xd.h, wd.h, opt);
  g.ow = conv_output_extent(xd.w, wd.w, opt);
  if (g.oh == 0 || g.ow == 0) throw ShapeError("conv2d: non-positive output extent");

  const std::size_t cout = wd.n;
  const std::size_t rows = g.rows();
  const std::size_t ncols = g.cols();
  Tensor<T> y(Dims{xd.n, cout, g.oh, g.ow});

  const bool pointwise = g.pointwise();
  auto cols = std::make_shared<AlignedVector<T>>(pointwise ? 0 : xd.n * rows * ncols);
  Eigen::Map<const RowMat<T>> wm(w.value().ptr(), cout, rows);
  for (std::size_t n = 0; n < xd.n; ++n) {
    const T* src;
    if (pointwise) {
      src = x.value().ptr() + n * xd.c * xd.h * xd.w;
    } else {
      T* dst = cols->data() + n * rows * ncols;
      im2col(x.value().ptr() + n * xd.c * xd.h * xd.w, g, dst);
      src = dst;
    }
    Eigen::Map<const RowMat<T>> cm(src, rows, ncols);
    Eigen::Map<RowMat<T>> ym(y.ptr() + n * cout * ncols, cout, ncols);
    ym.noalias() = wm * cm;
    if (has_bias) {
      const T* bp = b.value().ptr();
      for (std::size_t co = 0; co < cout; ++co) ym.row(co).array() += bp[co];
    }
  }

  std::vector<NodePtr<T>> parents{x.node(), w.node()};
  if (has_bias) parents.push_back(b.node());
  return Var<T>::from_op(
      "conv2d", std::move(y), std::move(parents),
      [g, cols, has_bias, pointwise, cout, rows, ncols](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Node<T>& wn = *self.parents[1];
        const std::size_t batch = self.value.dims().n;
        const std::size_t img = g.cin * g.h * g.w;
        Eigen::Map<const RowMat<T>> wm(wn.value.ptr(), cout, rows);
        AlignedVector<T> dcols(pointwise ? 0 : rows * ncols);
        for (std::size_t n = 0; n < batch; ++n) {
          Eigen::Map<const RowMat<T>> gy(self.grad.ptr() + n * cout * ncols, cout, ncols);
          const T* src = pointwise ? xn.value.ptr() + n * img : cols->data() + n * rows * ncols;
          Eigen::Map<const RowMat<T>> cm(src, rows, ncols);
          if (wn.requires_grad) {
            Eigen::Map<RowMat<T>> gw(wn.grad_buffer(), cout, rows);
            gw.noalias() += gy * cm.transpose();
          }
          if (xn.requires_grad) {
            if (pointwise) {
              Eigen::Map<RowMat<T>> gx(xn.grad_buffer() + n * img, rows, ncols);
              gx.noalias() += wm.transpose() * gy;
            } else {
              Eigen::Map<RowMat<T>> dc(dcols.data(), rows, ncols);
              dc.noalias() = wm.transpose() * gy;
              col2im_add(dcols.data(), g, xn.grad_buffer() + n * img);
            }
          }
          if (has_bias && self.parents[2]->requires_grad) {
            T* gb = self.parents[2]->grad_buffer();
            for (std::size_t co = 0; co < cout; ++co) gb[co] += gy.row(co).sum();
          }
        }
      });
}

template <typename T>
Var<T> elementwise(Elementwise kind, const Var<T>& a, const Var<T>& b) {
  const Dims ad = a.dims();
  const Dims bd = b.dims();
  const bool same = ad == bd;
  const bool a_bcast = ad.n == 1 && Dims{bd.n, ad.c, ad.h, ad.w} == bd;
  const bool b_bcast = bd.n == 1 && Dims{ad.n, bd.c, bd.h, bd.w} == ad;
  if (!same && !a_bcast && !b_bcast) {
    throw ShapeError("elementwise: dims mismatch " + ad.str() + " vs " + bd.str());
  }
  const Dims od = b_bcast ? ad : bd;
  Tensor<T> y(od);
  const std::size_t total = y.size();
  const std::size_t asz = a.value().size();
  const std::size_t bsz = b.value().size();
  const T* ap = a.value().ptr();
  const T* bp = b.value().ptr();
  T* yp = y.ptr();
  if (kind == Elementwise::add) {
    for (std::size_t i = 0; i < total; ++i) yp[i] = ap[i % asz] + bp[i % bsz];
  } else {
    for (std::size_t i = 0; i < total; ++i) yp[i] = ap[i % asz] * bp[i % bsz];
  }
  return Var<T>::from_op(
      kind == Elementwise::add ? "add" : "hadamard", std::move(y), {a.node(), b.node()},
      [kind, asz, bsz](Node<T>& self) {
        Node<T>& an = *self.parents[0];
        Node<T>& bn = *self.parents[1];
        const T* g = self.grad.ptr();
        const std::size_t total = self.grad.size();
        if (an.requires_grad) {
          T* ga = an.grad_buffer();
          if (kind == Elementwise::add) {
            for (std::size_t i = 0; i < total; ++i) ga[i % asz] += g[i];
          } else {
            const T* bv = bn.value.ptr();
            for (std::size_t i = 0; i < total; ++i) ga[i % asz] += g[i] * bv[i % bsz];
          }
        }
        if (bn.requires_grad) {
          T* gb = bn.grad_buffer();
          if (kind == Elementwise::add) {
            for (std::size_t i = 0; i < total; ++i) gb[i % bsz] += g[i];
          } else {
            const T* av = an.value.ptr();
            for (std::size_t i = 0; i < total; ++i) gb[i % bsz] += g[i] * av[i % asz];
          }
        }
      });
}

template <typename T>
Var<T> activation(Activation kind, const Var<T>& x) {
  Tensor<T> y = x.value();
  const char* name = "relu";
  switch (kind) {
    case Activation::sigmoid:
      sigmoid_inplace(y.data());
      name = "sigmoid";
      break;
    case Activation::tanh:
      for (T& v : y.data()) v = std::tanh(v);
      name = "tanh";
      break;
    case Activation::relu:
      for (T& v : y.data()) v = v > T(0) ? v : T(0);
      break;
  }
  return Var<T>::from_op(name, std::move(y), {x.node()}, [kind](Node<T>& self) {
    T* gx = self.parents[0]->grad_buffer();
    const T* g = self.grad.ptr();
    const T* y = self.value.ptr();
    const std::size_t total = self.grad.size();
    switch (kind) {
      case Activation::sigmoid:
        for (std::size_t i = 0; i < total; ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < total; ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
        break;
      case Activation::relu:
        for (std::size_t i = 0; i < total; ++i) {
          if (y[i] > T(0)) gx[i] += g[i];
        }
        break;
    }
  });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, std::size_t factor) {
  if (factor == 0) throw ShapeError("upsample_nearest: factor must be >= 1");
  const Dims xd = x.dims();
  const Dims od{xd.n, xd.c, xd.h * factor, xd.w * factor};
  Tensor<T> y(od);
  const T* xp = x.value().ptr();
  T* yp = y.ptr();
  const std::size_t planes = xd.n * xd.c;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < od.h; ++oy) {
      const T* in = xp + (p * xd.h + oy / factor) * xd.w;
      T* out = yp + (p * od.h + oy) * od.w;
      for (std::size_t ox = 0; ox < od.w; ++ox) out[ox] = in[ox / factor];
    }
  }
  return Var<T>::from_op("upsample_nearest", std::move(y), {x.node()}, [factor](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    const Dims xd = xn.value.dims();
    const Dims od = self.value.dims();
    T* gx = xn.grad_buffer();
    const T* g = self.grad.ptr();
    for (std::size_t p = 0; p < xd.n * xd.c; ++p) {
      for (std::size_t oy = 0; oy < od.h; ++oy) {
        T* out = gx + (p * xd.h + oy / factor) * xd.w;
        const T* in = g + (p * od.h + oy) * od.w;
        for (std::size_t ox = 0; ox < od.w; ++ox) out[ox / factor] += in[ox];
      }
    }
  });
}

namespace {

// Splits dims around `axis`: outer = product of extents before it,
// inner = product after it.
std::pair<std::size_t, std::size_t> outer_inner(const Dims& d, int axis) {
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (int a = 0; a < axis; ++a) outer *= d[a];
  for (int a = axis + 1; a < 4; ++a) inner *= d[a];
  return {outer, inner};
}

Dims with_axis(Dims d, int axis, std::size_t extent) {
  switch (axis) {
    case 0: d.n = extent; break;
    case 1: d.c = extent; break;
    case 2: d.h = extent; break;
    default: d.w = extent; break;
  }
  return d;
}

}  // namespace

template <typename T>
Var<T> concat(int axis, std::span<const Var<T>> parts) {
  if (axis < 0 || axis > 3) throw ShapeError("concat: axis out of range");
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Dims first = parts[0].dims();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (with_axis(p.dims(), axis, 0) != with_axis(first, axis, 0)) {
      throw ShapeError("concat: dims mismatch " + first.str() + " vs " + p.dims().str());
    }
    total += p.dims()[axis];
  }
  const Dims od = with_axis(first, axis, total);
  Tensor<T> y(od);
  const auto [outer, inner] = outer_inner(od, axis);
  const std::size_t out_block = total * inner;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  std::vector<NodePtr<T>> nodes;
  for (const auto& p : parts) {
    const std::size_t block = p.dims()[axis] * inner;
    const T* src = p.value().ptr();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * block, src + (o + 1) * block, y.ptr() + o * out_block + offset);
    }
    offsets.push_back(offset);
    offset += block;
    nodes.push_back(p.node());
  }
  return Var<T>::from_op(
      "concat", std::move(y), std::move(nodes),
      [offsets, outer, out_block](Node<T>& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          Node<T>& pn = *self.parents[i];
          if (!pn.requires_grad) continue;
          const std::size_t block = pn.value.size() / outer;
          T* gp = pn.grad_buffer();
          const T* g = self.grad.ptr();
          for (std::size_t o = 0; o < outer; ++o) {
            const T* src = g + o * out_block + offsets[i];
            T* dst = gp + o * block;
            for (std::size_t k = 0; k < block; ++k) dst[k] += src[k];
          }
        }
      });
}

template <typename T>
Var<T> slice(const Var<T>& x, int axis, std::size_t begin, std::size_t end) {
  if (axis < 0 || axis > 3) throw ShapeError("slice: axis out of range");
  const Dims xd = x.dims();
  if (begin > end || end > xd[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside extent " + std::to_string(xd[axis]));
  }
  const Dims od = with_axis(xd, axis, end - begin);
  Tensor<T> y(od);
  const auto [outer, inner] = outer_inner(xd, axis);
  const std::size_t in_block = xd[axis] * inner;
  const std::size_t out_block = (end - begin) * inner;
  const std::size_t offset = begin * inner;
  const T* src = x.value().ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy(src + o * in_block + offset, src + o * in_block + offset + out_block,
              y.ptr() + o * out_block);
  }
  return Var<T>::from_op(
      "slice", std::move(y), {x.node()},
      [outer, in_block, out_block, offset](Node<T>& self) {
        T* gx = self.parents[0]->grad_buffer();
        const T* g = self.grad.ptr();
        for (std::size_t o = 0; o < outer; ++o) {
          T* dst = gx + o * in_block + offset;
          const T* s = g + o * out_block;
          for (std::size_t k = 0; k < out_block; ++k) dst[k] += s[k];
        }
      });
}

template <typename T>
Var<T> softmax_cross_entropy_mean(const Var<T>& logits, std::span<const std::uint8_t> targets) {
  const Dims d = logits.dims();
  const std::size_t pixels = d.n * d.h * d.w;
  if (targets.size() != pixels) {
    throw ShapeError("cross entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(pixels) + " pixels");
  }
  if (pixels == 0 || d.c == 0) throw ShapeError("cross entropy: empty logits");
  const std::size_t plane = d.h * d.w;
  auto probs = std::make_shared<Tensor<T>>(d);
  const T* lp = logits.value().ptr();
  T* pp = probs->ptr();
  double total = 0.0;
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t q = 0; q < plane; ++q) {
      const std::uint8_t t = targets[n * plane + q];
      if (t >= d.c) {
        throw ClassRangeError("cross entropy: target class " + std::to_string(t) + " >= K=" +
                              std::to_string(d.c));
      }
      const std::size_t base = n * d.c * plane + q;
      T mx = lp[base];
      for (std::size_t k = 1; k < d.c; ++k) mx = std::max(mx, lp[base + k * plane]);
      T z = 0;
      for (std::size_t k = 0; k < d.c; ++k) {
        const T e = std::exp(lp[base + k * plane] - mx);
        pp[base + k * plane] = e;
        z += e;
      }
      for (std::size_t k = 0; k < d.c; ++k) pp[base + k * plane] /= z;
      total += static_cast<double>(std::log(z) - (lp[base + t * plane] - mx));
    }
  }
  Tensor<T> loss(Dims{1, 1, 1, 1});
  loss.ptr()[0] = static_cast<T>(total / static_cast<double>(pixels));
  std::vector<std::uint8_t> tgt(targets.begin(), targets.end());
  return Var<T>::from_op(
      "softmax_cross_entropy_mean", std::move(loss), {logits.node()},
      [probs, tgt = std::move(tgt), plane](Node<T>& self) {
        Node<T>& ln = *self.parents[0];
        const Dims d = ln.value.dims();
        const T scale = self.grad.ptr()[0] / static_cast<T>(d.n * plane);
        T* gl = ln.grad_buffer();
        const T* pp = probs->ptr();
        for (std::size_t n = 0; n < d.n; ++n) {
          for (std::size_t q = 0; q < plane; ++q) {
            const std::size_t base = n * d.c * plane + q;
            const std::uint8_t t = tgt[n * plane + q];
            for (std::size_t k = 0; k < d.c; ++k) {
              const T onehot = k == t ? T(1) : T(0);
              gl[base + k * plane] += scale * (pp[base + k * plane] - onehot);
            }
          }
        }
      });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  Tensor<T> y(Dims{1, 1, 1, 1});
  double acc = 0.0;
  for (T v : x.value().data()) acc += static_cast<double>(v);
  y.ptr()[0] = static_cast<T>(acc);
  return Var<T>::from_op("sum", std::move(y), {x.node()}, [](Node<T>& self) {
    const T g = self.grad.ptr()[0];
    Node<T>& xn = *self.parents[0];
    T* gx = xn.grad_buffer();
    for (std::size_t i = 0; i < xn.value.size(); ++i) gx[i] += g;
  });
}

#define FUTURESEG_INSTANTIATE_OPS(T)                                                           \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvOptions);           \
  template Var<T> elementwise(Elementwise, const Var<T>&, const Var<T>&);                     \
  template Var<T> activation(Activation, const Var<T>&);                                      \
  template Var<T> upsample_nearest(const Var<T>&, std::size_t);                               \
  template Var<T> concat(int, std::span<const Var<T>>);                                       \
  template Var<T> slice(const Var<T>&, int, std::size_t, std::size_t);                        \
  template Var<T> softmax_cross_entropy_mean(const Var<T>&, std::span<const std::uint8_t>);   \
  template Var<T> sum(const Var<T>&);

FUTURESEG_INSTANTIATE_OPS(float)
FUTURESEG_INSTANTIATE_OPS(double)

}  // namespace futureseg

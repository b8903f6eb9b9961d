#include "gapcast/nd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace gapcast::nd {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

Tensor make_output(const Graph& g, Shape shape, std::initializer_list<const Tensor*> inputs) {
  return Tensor::zeros(std::move(shape), g.tracks(inputs));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Column matrix for same-padded convolution: row (c, ky, kx), column (y, x).
void im2col(const double* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, double* col) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto hh = static_cast<std::ptrdiff_t>(h);
  const auto ww = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = x + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col + ((c * k + ky) * k + kx) * h * w;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const auto x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const auto x_hi = std::min<std::ptrdiff_t>(ww, ww - dx);
        for (std::ptrdiff_t y = 0; y < hh; ++y) {
          double* out = row + y * ww;
          const auto sy = y + dy;
          if (sy < 0 || sy >= hh || x_lo >= x_hi) {
            std::fill(out, out + ww, 0.0);
            continue;
          }
          std::fill(out, out + x_lo, 0.0);
          std::memcpy(out + x_lo, plane + sy * ww + x_lo + dx, static_cast<std::size_t>(x_hi - x_lo) * sizeof(double));
          std::fill(out + x_hi, out + ww, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, double* x) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto hh = static_cast<std::ptrdiff_t>(h);
  const auto ww = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = x + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col + ((c * k + ky) * k + kx) * h * w;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const auto x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const auto x_hi = std::min<std::ptrdiff_t>(ww, ww - dx);
        for (std::ptrdiff_t y = 0; y < hh; ++y) {
          const auto sy = y + dy;
          if (sy < 0 || sy >= hh) continue;
          const double* in = row + y * ww;
          double* out = plane + sy * ww + dx;
          for (auto xi = x_lo; xi < x_hi; ++xi) out[xi] += in[xi];
        }
      }
    }
  }
}

}  // namespace

Tensor elementwise(Graph& g, Unary kind, const Tensor& a) {
  auto out = make_output(g, a.shape(), {&a});
  auto src = a.data();
  auto dst = out.data();
  switch (kind) {
    case Unary::sigmoid:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid_value(src[i]);
      break;
    case Unary::tanh:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::tanh(src[i]);
      break;
    case Unary::negate:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = -src[i];
      break;
    case Unary::one_minus:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = 1.0 - src[i];
      break;
  }
  if (out.requires_grad()) {
    g.record([kind, a = a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto dy = out.grad_view();
      auto y = std::as_const(out).data();
      auto dx = a.grad();
      switch (kind) {
        case Unary::sigmoid:
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
          break;
        case Unary::tanh:
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
          break;
        case Unary::negate:
        case Unary::one_minus:
          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] -= dy[i];
          break;
      }
    });
  }
  return out;
}

Tensor elementwise(Graph& g, Binary kind, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise");
  auto out = make_output(g, a.shape(), {&a, &b});
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  switch (kind) {
    case Binary::add:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
      break;
    case Binary::subtract:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
      break;
    case Binary::multiply:
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
      break;
  }
  if (out.requires_grad()) {
    g.record([kind, a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto dz = out.grad_view();
      if (a.requires_grad()) {
        auto da = a.grad();
        if (kind == Binary::multiply) {
          auto yv = std::as_const(b).data();
          for (std::size_t i = 0; i < dz.size(); ++i) da[i] += dz[i] * yv[i];
        } else {
          for (std::size_t i = 0; i < dz.size(); ++i) da[i] += dz[i];
        }
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        if (kind == Binary::multiply) {
          auto xv = std::as_const(a).data();
          for (std::size_t i = 0; i < dz.size(); ++i) db[i] += dz[i] * xv[i];
        } else if (kind == Binary::subtract) {
          for (std::size_t i = 0; i < dz.size(); ++i) db[i] -= dz[i];
        } else {
          for (std::size_t i = 0; i < dz.size(); ++i) db[i] += dz[i];
        }
      }
    });
  }
  return out;
}

Tensor scale_shift(Graph& g, const Tensor& a, double alpha, double beta) {
  auto out = make_output(g, a.shape(), {&a});
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = alpha * x[i] + beta;
  if (out.requires_grad()) {
    g.record([a = a, out, alpha]() mutable {
      if (!out.has_grad()) return;
      auto dy = out.grad_view();
      auto dx = a.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += alpha * dy[i];
    });
  }
  return out;
}

Tensor add_n(Graph& g, const std::vector<Tensor>& terms) {
  if (terms.empty()) throw std::invalid_argument("add_n: no terms");
  for (const auto& t : terms) require_same_shape(terms.front(), t, "add_n");
  bool tracked = false;
  for (const auto& t : terms) tracked = tracked || g.tracks({&t});
  auto out = Tensor::zeros(terms.front().shape(), tracked);
  auto z = out.data();
  for (const auto& t : terms) {
    auto x = t.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += x[i];
  }
  if (tracked) {
    g.record([terms = terms, out]() mutable {
      if (!out.has_grad()) return;
      auto dz = out.grad_view();
      for (auto& t : terms) {
        if (!t.requires_grad()) continue;
        auto dx = t.grad();
        for (std::size_t i = 0; i < dz.size(); ++i) dx[i] += dz[i];
      }
    });
  }
  return out;
}

Tensor affine(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2) throw std::invalid_argument("affine: weight must be a matrix, got " + shape_string(w.shape()));
  if (x.rank() != 1 && x.rank() != 2) {
    throw std::invalid_argument("affine: input must be [in] or [in, P], got " + shape_string(x.shape()));
  }
  const std::size_t out_dim = w.dim(0);
  const std::size_t in_dim = w.dim(1);
  if (x.dim(0) != in_dim) {
    throw std::invalid_argument("affine: weight " + shape_string(w.shape()) + " incompatible with input " +
                                shape_string(x.shape()));
  }
  if (b.defined() && b.shape() != Shape{out_dim}) {
    throw std::invalid_argument("affine: bias " + shape_string(b.shape()) + " does not match output dim " +
                                std::to_string(out_dim));
  }
  const std::size_t cols = x.rank() == 2 ? x.dim(1) : 1;
  Shape out_shape = x.rank() == 2 ? Shape{out_dim, cols} : Shape{out_dim};
  auto out = make_output(g, std::move(out_shape), {&x, &w, &b});

  ConstMatMap wm(w.data().data(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
  ConstMatMap xm(x.data().data(), static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(cols));
  MatMap ym(out.data().data(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(cols));
  ym.noalias() = wm * xm;
  if (b.defined()) {
    auto bv = b.data();
    for (std::size_t r = 0; r < out_dim; ++r) ym.row(static_cast<Eigen::Index>(r)).array() += bv[r];
  }

  if (out.requires_grad()) {
    g.record([x = x, w = w, b = b, out, out_dim, in_dim, cols]() mutable {
      if (!out.has_grad()) return;
      const auto o = static_cast<Eigen::Index>(out_dim);
      const auto i = static_cast<Eigen::Index>(in_dim);
      const auto c = static_cast<Eigen::Index>(cols);
      ConstMatMap dy(out.grad_view().data(), o, c);
      if (w.requires_grad()) {
        MatMap dw(w.grad().data(), o, i);
        dw.noalias() += dy * ConstMatMap(std::as_const(x).data().data(), i, c).transpose();
      }
      if (x.requires_grad()) {
        MatMap dx(x.grad().data(), i, c);
        dx.noalias() += ConstMatMap(std::as_const(w).data().data(), o, i).transpose() * dy;
      }
      if (b.defined() && b.requires_grad()) {
        auto db = b.grad();
        for (Eigen::Index r = 0; r < o; ++r) db[static_cast<std::size_t>(r)] += dy.row(r).sum();
      }
    });
  }
  return out;
}

Tensor conv2d(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b) {
  if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be [C, H, W], got " + shape_string(x.shape()));
  if (k.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [Cout, Cin, K, K], got " + shape_string(k.shape()));
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = k.dim(0), ks = k.dim(2);
  if (k.dim(3) != ks) throw std::invalid_argument("conv2d: kernel must be square, got " + shape_string(k.shape()));
  if (ks % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd, got " + std::to_string(ks));
  if (k.dim(1) != cin) {
    throw std::invalid_argument("conv2d: kernel " + shape_string(k.shape()) + " incompatible with input " +
                                shape_string(x.shape()));
  }
  if (b.defined() && b.shape() != Shape{cout}) {
    throw std::invalid_argument("conv2d: bias " + shape_string(b.shape()) + " does not match " + std::to_string(cout) +
                                " output channels");
  }
  auto out = make_output(g, {cout, h, w}, {&x, &k, &b});
  const auto pixels = static_cast<Eigen::Index>(h * w);
  const auto patch = static_cast<Eigen::Index>(cin * ks * ks);
  const auto co = static_cast<Eigen::Index>(cout);

  MatMap ym(out.data().data(), co, pixels);
  ConstMatMap km(k.data().data(), co, patch);
  if (ks == 1) {
    ym.noalias() = km * ConstMatMap(x.data().data(), patch, pixels);
  } else {
    RowMatrix col(patch, pixels);
    im2col(x.data().data(), cin, h, w, ks, col.data());
    ym.noalias() = km * col;
  }
  if (b.defined()) {
    auto bv = b.data();
    for (Eigen::Index r = 0; r < co; ++r) ym.row(r).array() += bv[static_cast<std::size_t>(r)];
  }

  if (out.requires_grad()) {
    g.record([x = x, k = k, b = b, out, cin, h, w = w, ks, pixels, patch, co]() mutable {
      if (!out.has_grad()) return;
      ConstMatMap dy(out.grad_view().data(), co, pixels);
      if (k.requires_grad()) {
        MatMap dk(k.grad().data(), co, patch);
        if (ks == 1) {
          dk.noalias() += dy * ConstMatMap(std::as_const(x).data().data(), patch, pixels).transpose();
        } else {
          RowMatrix col(patch, pixels);
          im2col(std::as_const(x).data().data(), cin, h, w, ks, col.data());
          dk.noalias() += dy * col.transpose();
        }
      }
      if (x.requires_grad()) {
        ConstMatMap km2(std::as_const(k).data().data(), co, patch);
        if (ks == 1) {
          MatMap dx(x.grad().data(), patch, pixels);
          dx.noalias() += km2.transpose() * dy;
        } else {
          RowMatrix dcol(patch, pixels);
          dcol.noalias() = km2.transpose() * dy;
          col2im_add(dcol.data(), cin, h, w, ks, x.grad().data());
        }
      }
      if (b.defined() && b.requires_grad()) {
        auto db = b.grad();
        for (Eigen::Index r = 0; r < co; ++r) db[static_cast<std::size_t>(r)] += dy.row(r).sum();
      }
    });
  }
  return out;
}

Tensor pool2(Graph& g, const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("pool2: input must be [C, H, W], got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) throw std::invalid_argument("pool2: spatial extents must be even, got " + shape_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  auto out = make_output(g, {c, oh, ow}, {&x});
  std::vector<std::size_t> argmax(c * oh * ow);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t base = ch * h * w + 2 * y * w + 2 * xx;
        std::size_t best = base;
        for (std::size_t idx : {base + 1, base + w, base + w + 1}) {
          if (src[idx] > src[best]) best = idx;
        }
        const std::size_t o = (ch * oh + y) * ow + xx;
        dst[o] = src[best];
        argmax[o] = best;
      }
    }
  }
  if (out.requires_grad()) {
    g.record([x = x, out, argmax = std::move(argmax)]() mutable {
      if (!out.has_grad()) return;
      auto dy = out.grad_view();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
    });
  }
  return out;
}

Tensor upsample2(Graph& g, const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("upsample2: input must be [C, H, W], got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  auto out = make_output(g, {c, oh, ow}, {&x});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) dst[(ch * oh + y) * ow + xx] = src[(ch * h + y / 2) * w + xx / 2];
  if (out.requires_grad()) {
    g.record([x = x, out, c, h, w = w, oh, ow]() mutable {
      if (!out.has_grad()) return;
      auto dy = out.grad_view();
      auto dx = x.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) dx[(ch * h + y / 2) * w + xx / 2] += dy[(ch * oh + y) * ow + xx];
    });
  }
  return out;
}

Tensor concat(Graph& g, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  Shape tail(parts.front().shape().begin() + 1, parts.front().shape().end());
  std::size_t lead = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    if (p.rank() != tail.size() + 1 || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
      throw std::invalid_argument("concat: trailing extents differ: " + shape_string(parts.front().shape()) + " vs " +
                                  shape_string(p.shape()));
    }
    lead += p.dim(0);
    tracked = tracked || g.tracks({&p});
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  auto out = Tensor::zeros(std::move(shape), tracked);
  auto dst = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto src = p.data();
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += src.size();
  }
  if (tracked) {
    g.record([parts = parts, out]() mutable {
      if (!out.has_grad()) return;
      auto dy = out.grad_view();
      std::size_t off = 0;
      for (auto& p : parts) {
        const std::size_t n = p.size();
        if (p.requires_grad()) {
          auto dx = p.grad();
          for (std::size_t i = 0; i < n; ++i) dx[i] += dy[off + i];
        }
        off += n;
      }
    });
  }
  return out;
}

Tensor slice(Graph& g, const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.dim(0)) {
    throw std::invalid_argument("slice: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                                ") out of range for " + shape_string(x.shape()));
  }
  Shape shape = x.shape();
  const std::size_t stride = x.size() / shape[0];
  shape[0] = count;
  auto out = make_output(g, std::move(shape), {&x});
  auto src = x.data().subspan(begin * stride, count * stride);
  std::copy(src.begin(), src.end(), out.data().begin());
  if (out.requires_grad()) {
    g.record([x = x, out, offset = begin * stride]() mutable {
      if (!out.has_grad()) return;
      auto dy = out.grad_view();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[offset + i] += dy[i];
    });
  }
  return out;
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw std::invalid_argument("reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  }
  auto out = make_output(g, std::move(shape), {&x});
  auto src = x.data();
  std::copy(src.begin(), src.end(), out.data().begin());
  if (out.requires_grad()) {
    g.record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto dy = out.grad_view();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

Tensor mse_loss(Graph& g, const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  auto out = make_output(g, {1}, {&pred, &target});
  auto p = pred.data();
  auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  const auto n = static_cast<double>(p.size());
  out.data()[0] = acc / n;
  if (out.requires_grad()) {
    g.record([pred = pred, target = target, out, n]() mutable {
      if (!out.has_grad()) return;
      const double scale = 2.0 * out.grad_view()[0] / n;
      auto pv = std::as_const(pred).data();
      auto tv = std::as_const(target).data();
      if (pred.requires_grad()) {
        auto dp = pred.grad();
        for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += scale * (pv[i] - tv[i]);
      }
      if (target.requires_grad()) {
        auto dt = target.grad();
        for (std::size_t i = 0; i < dt.size(); ++i) dt[i] -= scale * (pv[i] - tv[i]);
      }
    });
  }
  return out;
}

void project_nonpositive(Tensor& w) {
  for (auto& v : w.data()) v = std::min(v, 0.0);
}

}  // namespace gapcast::nd

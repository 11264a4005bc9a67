#include "lab/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lab/errors.hpp"

namespace lab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_ndim(const char* op, const Var& x, std::size_t ndim) {
  if (x.shape().size() != ndim) {
    throw ShapeError(std::string(op) + ": expected a " + std::to_string(ndim) + "-D tensor, got shape " +
                     shape_str(x.shape()));
  }
}

// Per-output-dimension strides into each operand (0 where broadcast).
struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_stride;
  std::vector<std::size_t> b_stride;
  bool same = false;
};

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t n = std::max(a.size(), b.size());
  plan.out.assign(n, 1);
  plan.a_stride.assign(n, 0);
  plan.b_stride.assign(n, 0);
  const auto as = contiguous_strides(a);
  const auto bs = contiguous_strides(b);
  for (std::size_t i = 0; i < n; ++i) {
    const std::ptrdiff_t ia = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(n - a.size());
    const std::ptrdiff_t ib = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(n - b.size());
    const std::size_t da = ia >= 0 ? a[ia] : 1;
    const std::size_t db = ib >= 0 ? b[ib] : 1;
    if (da != db && da != 1 && db != 1) shape_mismatch(op, a, b);
    plan.out[i] = std::max(da, db);
    if (ia >= 0 && da != 1) plan.a_stride[i] = as[ia];
    if (ib >= 0 && db != 1) plan.b_stride[i] = bs[ib];
  }
  return plan;
}

// Calls fn(out_index, a_index, b_index) over every output element.
template <typename Fn>
void for_each_broadcast(const Broadcast& plan, Fn&& fn) {
  const std::size_t total = shape_numel(plan.out);
  if (plan.same) {
    for (std::size_t i = 0; i < total; ++i) fn(i, i, i);
    return;
  }
  const std::size_t nd = plan.out.size();
  std::vector<std::size_t> idx(nd, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < total; ++o) {
    fn(o, ia, ib);
    for (std::size_t d = nd; d-- > 0;) {
      ++idx[d];
      ia += plan.a_stride[d];
      ib += plan.b_stride[d];
      if (idx[d] < plan.out[d]) break;
      ia -= plan.a_stride[d] * idx[d];
      ib -= plan.b_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <typename Forward, typename GradA, typename GradB>
Var broadcast_binary(const char* op, const Var& a, const Var& b, Forward f, GradA ga, GradB gb) {
  auto plan = plan_broadcast(op, a.shape(), b.shape());
  Tensor out(plan.out);
  {
    const double* pa = a.value().raw();
    const double* pb = b.value().raw();
    double* po = out.raw();
    for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = f(pa[i], pb[j]); });
  }
  return make_result(std::move(out), op, {a, b}, [plan, ga, gb](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const double* g = self.grad.raw();
    const double* pa = na.value.raw();
    const double* pb = nb.value.raw();
    double* da = na.requires_grad ? na.grad_buffer().raw() : nullptr;
    double* db = nb.requires_grad ? nb.grad_buffer().raw() : nullptr;
    for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
      if (da) da[i] += ga(g[o], pa[i], pb[j]);
      if (db) db[j] += gb(g[o], pa[i], pb[j]);
    });
  });
}

template <typename Forward, typename Deriv>
Var unary(const char* op, const Var& x, Forward f, Deriv d) {
  Tensor out(x.shape());
  const double* px = x.value().raw();
  double* po = out.raw();
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(px[i]);
  return make_result(std::move(out), op, {x}, [d](Node& self) {
    Node& nx = *self.parents[0];
    const double* g = self.grad.raw();
    const double* px = nx.value.raw();
    const double* py = self.value.raw();
    double* dx = nx.grad_buffer().raw();
    const std::size_t n = self.value.numel();
    for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * d(px[i], py[i]);
  });
}

// Splits a shape around `axis` into (outer, dim, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, dim = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.dim = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return broadcast_binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Var sub(const Var& a, const Var& b) {
  return broadcast_binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Var mul(const Var& a, const Var& b) {
  return broadcast_binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Var maximum(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_mismatch("maximum", a.shape(), b.shape());
  return broadcast_binary(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double g, double x, double y) { return x >= y ? g : 0.0; },
      [](double g, double x, double y) { return x >= y ? 0.0 : g; });
}

Var scale(const Var& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var matmul(const Var& a, const Var& b) {
  require_ndim("matmul", a, 2);
  require_ndim("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_mismatch("matmul", a.shape(), b.shape());
  Tensor out(Shape{m, n});
  MatMap(out.raw(), m, n).noalias() = ConstMatMap(a.value().raw(), m, k) * ConstMatMap(b.value().raw(), k, n);
  return make_result(std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    ConstMatMap g(self.grad.raw(), m, n);
    if (na.requires_grad) MatMap(na.grad_buffer().raw(), m, k).noalias() += g * ConstMatMap(nb.value.raw(), k, n).transpose();
    if (nb.requires_grad) MatMap(nb.grad_buffer().raw(), k, n).noalias() += ConstMatMap(na.value.raw(), m, k).transpose() * g;
  });
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, Conv2dOptions options) {
  require_ndim("conv2d", input, 3);
  require_ndim("conv2d", weight, 4);
  const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const std::size_t o = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
  const std::size_t stride = options.stride, pad = options.padding;
  if (weight.shape()[1] != c) shape_mismatch("conv2d", input.shape(), weight.shape());
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (h + 2 * pad < kh || w + 2 * pad < kw) shape_mismatch("conv2d", input.shape(), weight.shape());
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{o}) shape_mismatch("conv2d (bias)", weight.shape(), bias.shape());

  const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::size_t wo = (w + 2 * pad - kw) / stride + 1;
  const std::size_t rows = c * kh * kw, cols = ho * wo;

  // im2col: one row per (channel, ky, kx), one column per output position.
  auto patches = std::make_shared<std::vector<double>>(rows * cols, 0.0);
  const double* px = input.value().raw();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        double* row = patches->data() + ((ch * kh + ky) * kw + kx) * cols;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* src = px + (ch * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) row[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }

  Tensor out(Shape{o, ho, wo});
  MatMap out_mat(out.raw(), o, cols);
  out_mat.noalias() = ConstMatMap(weight.value().raw(), o, rows) * ConstMatMap(patches->data(), rows, cols);
  if (has_bias) {
    const double* pb = bias.value().raw();
    for (std::size_t oc = 0; oc < o; ++oc) out_mat.row(oc).array() += pb[oc];
  }

  std::vector<Var> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result(std::move(out), "conv2d", parents,
                     [=](Node& self) {
                       Node& nin = *self.parents[0];
                       Node& nw = *self.parents[1];
                       ConstMatMap g(self.grad.raw(), o, cols);
                       if (nw.requires_grad) {
                         MatMap(nw.grad_buffer().raw(), o, rows).noalias() +=
                             g * ConstMatMap(patches->data(), rows, cols).transpose();
                       }
                       if (has_bias && self.parents[2]->requires_grad) {
                         double* db = self.parents[2]->grad_buffer().raw();
                         for (std::size_t oc = 0; oc < o; ++oc) db[oc] += g.row(oc).sum();
                       }
                       if (!nin.requires_grad) return;
                       RowMat dcols = ConstMatMap(nw.value.raw(), o, rows).transpose() * g;
                       double* dx = nin.grad_buffer().raw();
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         for (std::size_t ky = 0; ky < kh; ++ky) {
                           for (std::size_t kx = 0; kx < kw; ++kx) {
                             const double* row = dcols.data() + ((ch * kh + ky) * kw + kx) * cols;
                             for (std::size_t oy = 0; oy < ho; ++oy) {
                               const std::ptrdiff_t iy =
                                   static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                               if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                               double* dst = dx + (ch * h + static_cast<std::size_t>(iy)) * w;
                               for (std::size_t ox = 0; ox < wo; ++ox) {
                                 const std::ptrdiff_t ix =
                                     static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                                 if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += row[oy * wo + ox];
                               }
                             }
                           }
                         }
                       }
                     });
}

Var max_pool2d(const Var& input, std::size_t kernel, std::size_t stride) {
  require_ndim("max_pool2d", input, 3);
  if (stride == 0) stride = kernel;
  const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  if (kernel == 0 || kernel > h || kernel > w) {
    throw ShapeError("max_pool2d: kernel " + std::to_string(kernel) + " does not fit input " + shape_str(input.shape()));
  }
  const std::size_t ho = (h - kernel) / stride + 1, wo = (w - kernel) / stride + 1;
  Tensor out(Shape{c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  const double* px = input.value().raw();
  double* po = out.raw();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (ch * h + oy * stride) * w + ox * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = (ch * h + oy * stride + ky) * w + ox * stride + kx;
            if (px[idx] > px[best]) best = idx;
          }
        }
        const std::size_t o = (ch * ho + oy) * wo + ox;
        po[o] = px[best];
        (*argmax)[o] = best;
      }
    }
  }
  return make_result(std::move(out), "max_pool2d", {input}, [argmax](Node& self) {
    double* dx = self.parents[0]->grad_buffer().raw();
    const double* g = self.grad.raw();
    for (std::size_t o = 0; o < argmax->size(); ++o) dx[(*argmax)[o]] += g[o];
  });
}

Var global_avg_pool(const Var& input) {
  require_ndim("global_avg_pool", input, 3);
  const std::size_t c = input.shape()[0], hw = input.shape()[1] * input.shape()[2];
  Tensor out(Shape{c});
  const double* px = input.value().raw();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += px[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return make_result(std::move(out), "global_avg_pool", {input}, [c, hw](Node& self) {
    double* dx = self.parents[0]->grad_buffer().raw();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double g = self.grad[ch] / static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) dx[ch * hw + i] += g;
    }
  });
}

Var relu(const Var& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(const Var& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var softmax(const Var& x) {
  if (x.shape().empty()) throw ShapeError("softmax: needs at least 1 dimension");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.value().numel() / d;
  Tensor out(x.shape());
  const double* px = x.value().raw();
  double* py = out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = px + r * d;
    double* yr = py + r * d;
    const double m = *std::max_element(xr, xr + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (yr[j] = std::exp(xr[j] - m));
    for (std::size_t j = 0; j < d; ++j) yr[j] /= z;
  }
  return make_result(std::move(out), "softmax", {x}, [rows, d](Node& self) {
    double* dx = self.parents[0]->grad_buffer().raw();
    const double* y = self.value.raw();
    const double* g = self.grad.raw();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j) dx[r * d + j] += y[r * d + j] * (g[r * d + j] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (x.shape().empty()) throw ShapeError("layer_norm: needs at least 1 dimension");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d}) shape_mismatch("layer_norm (gamma)", x.shape(), gamma.shape());
  if (beta.shape() != Shape{d}) shape_mismatch("layer_norm (beta)", x.shape(), beta.shape());
  const std::size_t rows = x.value().numel() / d;
  auto xhat = std::make_shared<std::vector<double>>(x.value().numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(x.shape());
  const double* px = x.value().raw();
  const double* pg = gamma.value().raw();
  const double* pb = beta.value().raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = px + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mu) * is;
      (*xhat)[r * d + j] = xh;
      out[r * d + j] = xh * pg[j] + pb[j];
    }
  }
  return make_result(std::move(out), "layer_norm", {x, gamma, beta}, [=](Node& self) {
    Node& nx = *self.parents[0];
    Node& ng = *self.parents[1];
    Node& nb = *self.parents[2];
    const double* g = self.grad.raw();
    const double* pg = ng.value.raw();
    double* dgamma = ng.requires_grad ? ng.grad_buffer().raw() : nullptr;
    double* dbeta = nb.requires_grad ? nb.grad_buffer().raw() : nullptr;
    double* dx = nx.requires_grad ? nx.grad_buffer().raw() : nullptr;
    std::vector<double> dxh(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xh = xhat->data() + r * d;
      const double* gr = g + r * d;
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (dgamma) dgamma[j] += gr[j] * xh[j];
        if (dbeta) dbeta[j] += gr[j];
        dxh[j] = gr[j] * pg[j];
        mean_dxh += dxh[j];
        mean_dxh_xh += dxh[j] * xh[j];
      }
      if (!dx) continue;
      mean_dxh /= static_cast<double>(d);
      mean_dxh_xh /= static_cast<double>(d);
      const double is = (*inv_std)[r];
      for (std::size_t j = 0; j < d; ++j) dx[r * d + j] += is * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
    }
  });
}

Var transpose(const Var& x) {
  require_ndim("transpose", x, 2);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor out(Shape{n, m});
  MatMap(out.raw(), n, m) = ConstMatMap(x.value().raw(), m, n).transpose();
  return make_result(std::move(out), "transpose", {x}, [m, n](Node& self) {
    MatMap(self.parents[0]->grad_buffer().raw(), m, n) += ConstMatMap(self.grad.raw(), n, m).transpose();
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), "reshape", {x}, [](Node& self) {
    double* dx = self.parents[0]->grad_buffer().raw();
    const double* g = self.grad.raw();
    for (std::size_t i = 0; i < self.value.numel(); ++i) dx[i] += g[i];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for shape " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) shape_mismatch("concat", first, s);
    out_shape[axis] += s[axis];
  }
  const AxisSplit whole = split_axis(out_shape, axis);
  Tensor out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.shape()[axis] * whole.inner;
    const double* src = p.value().raw();
    for (std::size_t o = 0; o < whole.outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk, out.raw() + o * whole.dim * whole.inner + offset * whole.inner);
    }
    offset += p.shape()[axis];
  }
  return make_result(std::move(out), "concat", parts, [whole, offsets, axis](Node& self) {
    const double* g = self.grad.raw();
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& np = *self.parents[k];
      if (!np.requires_grad) continue;
      const std::size_t chunk = np.value.shape()[axis] * whole.inner;
      double* dp = np.grad_buffer().raw();
      for (std::size_t o = 0; o < whole.outer; ++o) {
        const double* src = g + o * whole.dim * whole.inner + offsets[k] * whole.inner;
        for (std::size_t i = 0; i < chunk; ++i) dp[o * chunk + i] += src[i];
      }
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.shape().size()) throw ShapeError("slice: axis out of range for shape " + shape_str(x.shape()));
  if (begin >= end || end > x.shape()[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for shape " +
                     shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  Tensor out(out_shape);
  const double* px = x.value().raw();
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = px + o * s.dim * s.inner + begin * s.inner;
    std::copy(src, src + chunk, out.raw() + o * chunk);
  }
  return make_result(std::move(out), "slice", {x}, [s, begin, chunk](Node& self) {
    double* dx = self.parents[0]->grad_buffer().raw();
    const double* g = self.grad.raw();
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = dx + o * s.dim * s.inner + begin * s.inner;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[o * chunk + i];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result(Tensor::scalar(s), "sum", {x}, [](Node& self) {
    const double g = self.grad[0];
    for (double& d : self.parents[0]->grad_buffer().data()) d += g;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().numel());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result(Tensor::scalar(s / n), "mean", {x}, [n](Node& self) {
    const double g = self.grad[0] / n;
    for (double& d : self.parents[0]->grad_buffer().data()) d += g;
  });
}

}  // namespace lab

#include "vitens/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vitens::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap cmat(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MatMap mmat(std::span<double> v, std::size_t rows, std::size_t cols) {
  return MatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstVecMap cvec(std::span<const double> v) {
  return ConstVecMap(v.data(), static_cast<Eigen::Index>(v.size()));
}
VecMap mvec(std::span<double> v) { return VecMap(v.data(), static_cast<Eigen::Index>(v.size())); }

Tape& same_tape(std::initializer_list<Tensor> ts, const char* op) {
  Tape* tape = nullptr;
  for (const Tensor& t : ts) {
    if (!t.valid()) throw std::invalid_argument(std::string(op) + ": unattached tensor");
    if (tape && &t.tape() != tape) {
      throw std::invalid_argument(std::string(op) + ": inputs recorded on different tapes");
    }
    tape = &t.tape();
  }
  return *tape;
}

[[noreturn]] void shape_error(const char* op, const std::string& what) {
  throw std::invalid_argument(std::string(op) + ": " + what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    shape_error(op, "shape mismatch " + shape_to_string(a.shape()) + " vs " +
                        shape_to_string(b.shape()));
  }
}

// Interprets a rank-1 or rank-2 tensor as a matrix.
std::pair<std::size_t, std::size_t> as_matrix(const Shape& s, const char* op) {
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  shape_error(op, "expected rank 1 or 2, got " + shape_to_string(s));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape({a, b}, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    shape_error("matmul", "cannot multiply " + shape_to_string(sa) + " by " + shape_to_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Buffer out(m * n);
  mmat(out, m, n).noalias() = cmat(a.value(), m, k) * cmat(b.value(), k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record({m, n}, std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    auto dy = cmat(t.grad_of(self), m, n);
    if (t.needs_grad(ia)) mmat(t.grad_of(ia), m, k).noalias() += dy * cmat(t.value_of(ib), k, n).transpose();
    if (t.needs_grad(ib)) mmat(t.grad_of(ib), k, n).noalias() += cmat(t.value_of(ia), m, k).transpose() * dy;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tape& tape = same_tape({x, w, b}, "linear");
  auto [rows, in] = as_matrix(x.shape(), "linear");
  const Shape& sw = w.shape();
  if (sw.size() != 2 || sw[0] != in) {
    shape_error("linear", "input " + shape_to_string(x.shape()) + " incompatible with weight " +
                              shape_to_string(sw));
  }
  const std::size_t out_dim = sw[1];
  if (b.shape() != Shape{out_dim}) {
    shape_error("linear", "bias " + shape_to_string(b.shape()) + " should be [" +
                              std::to_string(out_dim) + "]");
  }
  Buffer out(rows * out_dim);
  auto y = mmat(out, rows, out_dim);
  y.noalias() = cmat(x.value(), rows, in) * cmat(w.value(), in, out_dim);
  y.rowwise() += cvec(b.value()).transpose();
  Shape shape = x.shape().size() == 1 ? Shape{out_dim} : Shape{rows, out_dim};
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return tape.record(std::move(shape), std::move(out), {x, w, b}, [=](Tape& t, std::size_t self) {
    auto dy = cmat(t.grad_of(self), rows, out_dim);
    if (t.needs_grad(ix)) {
      mmat(t.grad_of(ix), rows, in).noalias() += dy * cmat(t.value_of(iw), in, out_dim).transpose();
    }
    if (t.needs_grad(iw)) {
      mmat(t.grad_of(iw), in, out_dim).noalias() += cmat(t.value_of(ix), rows, in).transpose() * dy;
    }
    if (t.needs_grad(ib)) mvec(t.grad_of(ib)) += dy.colwise().sum().transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape({a, b}, "add");
  require_same_shape(a, b, "add");
  auto va = a.value(), vb = b.value();
  Buffer out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(a.shape(), std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    auto dy = cvec(t.grad_of(self));
    if (t.needs_grad(ia)) mvec(t.grad_of(ia)) += dy;
    if (t.needs_grad(ib)) mvec(t.grad_of(ib)) += dy;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape({a, b}, "sub");
  require_same_shape(a, b, "sub");
  auto va = a.value(), vb = b.value();
  Buffer out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(a.shape(), std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    auto dy = cvec(t.grad_of(self));
    if (t.needs_grad(ia)) mvec(t.grad_of(ia)) += dy;
    if (t.needs_grad(ib)) mvec(t.grad_of(ib)) -= dy;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape({a, b}, "mul");
  require_same_shape(a, b, "mul");
  auto va = a.value(), vb = b.value();
  Buffer out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(a.shape(), std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    auto dy = cvec(t.grad_of(self));
    if (t.needs_grad(ia)) mvec(t.grad_of(ia)) += dy.cwiseProduct(cvec(t.value_of(ib)));
    if (t.needs_grad(ib)) mvec(t.grad_of(ib)) += dy.cwiseProduct(cvec(t.value_of(ia)));
  });
}

Tensor scale(const Tensor& x, double factor) {
  Tape& tape = same_tape({x}, "scale");
  auto vx = x.value();
  Buffer out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] * factor;
  const std::size_t ix = x.id();
  return tape.record(x.shape(), std::move(out), {x}, [=](Tape& t, std::size_t self) {
    mvec(t.grad_of(ix)) += factor * cvec(t.grad_of(self));
  });
}

Tensor sum(const Tensor& x) {
  Tape& tape = same_tape({x}, "sum");
  double total = 0.0;
  for (double v : x.value()) total += v;
  const std::size_t ix = x.id();
  return tape.record({}, {total}, {x}, [=](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    for (double& d : t.grad_of(ix)) d += g;
  });
}

Tensor gelu(const Tensor& x) {
  Tape& tape = same_tape({x}, "gelu");
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double a = 0.044715;
  auto vx = cvec(x.value()).array();
  // tanh(u) = 1 - 2 / (exp(2u) + 1), using the vectorized exp.
  auto th = std::make_shared<Eigen::ArrayXd>(
      1.0 - 2.0 / ((2.0 * c * (vx + a * vx.cube())).exp() + 1.0));
  Buffer out(vx.size());
  mvec(out).array() = 0.5 * vx * (1.0 + *th);
  const std::size_t ix = x.id();
  return tape.record(x.shape(), std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto dy = cvec(t.grad_of(self)).array();
    auto v = cvec(t.value_of(ix)).array();
    mvec(t.grad_of(ix)).array() +=
        dy * (0.5 * (1.0 + *th) + 0.5 * v * (1.0 - th->square()) * c * (1.0 + 3.0 * a * v.square()));
  });
}

Tensor relu(const Tensor& x) {
  Tape& tape = same_tape({x}, "relu");
  auto vx = x.value();
  Buffer out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] > 0.0 ? vx[i] : 0.0;
  const std::size_t ix = x.id();
  return tape.record(x.shape(), std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto vx = t.value_of(ix);
    auto dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (vx[i] > 0.0) dx[i] += dy[i];
    }
  });
}

namespace {

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
  const auto c = static_cast<Eigen::Index>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    Eigen::Map<const Eigen::ArrayXd> x(in + r * cols, c);
    Eigen::Map<Eigen::ArrayXd> y(out + r * cols, c);
    y = (x - x.maxCoeff()).exp();
    y /= y.sum();
  }
}

}  // namespace

Tensor softmax(const Tensor& x) {
  Tape& tape = same_tape({x}, "softmax");
  const Shape& s = x.shape();
  if (s.empty()) shape_error("softmax", "needs at least one axis");
  const std::size_t cols = s.back();
  const std::size_t rows = x.numel() / cols;
  Buffer out(x.numel());
  softmax_rows(x.value().data(), out.data(), rows, cols);
  const std::size_t ix = x.id();
  return tape.record(s, std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto y = cmat(t.value_of(self), rows, cols);
    auto dy = cmat(t.grad_of(self), rows, cols);
    Eigen::VectorXd dots = y.cwiseProduct(dy).rowwise().sum();
    auto dx = mmat(t.grad_of(ix), rows, cols);
    dx += y.cwiseProduct(dy - dots.replicate(1, static_cast<Eigen::Index>(cols)));
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  Tape& tape = same_tape({logits}, "softmax_cross_entropy");
  const std::size_t c = logits.numel();
  if (label >= c) {
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(c) + ")");
  }
  auto z = logits.value();
  const double mx = *std::max_element(z.begin(), z.end());
  double sum_exp = 0.0;
  for (double v : z) sum_exp += std::exp(v - mx);
  const double loss = std::log(sum_exp) - (z[label] - mx);
  const std::size_t iz = logits.id();
  return tape.record({}, {loss}, {logits}, [=](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    auto z = t.value_of(iz);
    auto dz = t.grad_of(iz);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(z[j] - mx) / sum_exp;
      dz[j] += g * (p - (j == label ? 1.0 : 0.0));
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  Tape& tape = same_tape({x, gamma, beta}, "layer_norm");
  auto [rows, d] = as_matrix(x.shape(), "layer_norm");
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    shape_error("layer_norm", "scale/shift must be [" + std::to_string(d) + "]");
  }
  auto xv = x.value();
  auto g = gamma.value();
  auto bt = beta.value();
  Buffer out(rows * d);
  auto xhat = std::make_shared<Buffer>(rows * d);
  auto inv_std = std::make_shared<Buffer>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mean) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = g[j] * h + bt[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return tape.record(x.shape(), std::move(out), {x, gamma, beta}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto g = t.value_of(ig);
    if (t.needs_grad(ix)) {
      auto dx = t.grad_of(ix);
      Buffer dh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dh[j] = dy[r * d + j] * g[j];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * (*xhat)[r * d + j];
        }
        mean_dh /= static_cast<double>(d);
        mean_dh_h /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          dx[r * d + j] += (*inv_std)[r] * (dh[j] - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
        }
      }
    }
    if (t.needs_grad(ig)) {
      auto dg = t.grad_of(ig);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) dg[j] += dy[r * d + j] * (*xhat)[r * d + j];
    }
    if (t.needs_grad(ib)) {
      auto db = t.grad_of(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) db[j] += dy[r * d + j];
    }
  });
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t groups,
                  double eps) {
  Tape& tape = same_tape({x, gamma, beta}, "group_norm");
  const Shape& s = x.shape();
  if (s.size() != 3) shape_error("group_norm", "expected [C,H,W], got " + shape_to_string(s));
  const std::size_t channels = s[0];
  const std::size_t spatial = s[1] * s[2];
  if (groups == 0 || channels % groups != 0) {
    shape_error("group_norm", std::to_string(channels) + " channels not divisible into " +
                                  std::to_string(groups) + " groups");
  }
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    shape_error("group_norm", "scale/shift must be [" + std::to_string(channels) + "]");
  }
  const std::size_t per_group = channels / groups * spatial;
  auto xv = x.value();
  auto g = gamma.value();
  auto bt = beta.value();
  Buffer out(xv.size());
  auto xhat = std::make_shared<Buffer>(xv.size());
  auto inv_std = std::make_shared<Buffer>(groups);
  for (std::size_t grp = 0; grp < groups; ++grp) {
    const std::size_t base = grp * per_group;
    double mean = 0.0;
    for (std::size_t i = 0; i < per_group; ++i) mean += xv[base + i];
    mean /= static_cast<double>(per_group);
    double var = 0.0;
    for (std::size_t i = 0; i < per_group; ++i) var += (xv[base + i] - mean) * (xv[base + i] - mean);
    var /= static_cast<double>(per_group);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[grp] = is;
    for (std::size_t i = 0; i < per_group; ++i) {
      const std::size_t idx = base + i;
      const std::size_t ch = idx / spatial;
      const double h = (xv[idx] - mean) * is;
      (*xhat)[idx] = h;
      out[idx] = g[ch] * h + bt[ch];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return tape.record(s, std::move(out), {x, gamma, beta}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto g = t.value_of(ig);
    if (t.needs_grad(ix)) {
      auto dx = t.grad_of(ix);
      Buffer dh(per_group);
      for (std::size_t grp = 0; grp < groups; ++grp) {
        const std::size_t base = grp * per_group;
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t i = 0; i < per_group; ++i) {
          const std::size_t idx = base + i;
          dh[i] = dy[idx] * g[idx / spatial];
          mean_dh += dh[i];
          mean_dh_h += dh[i] * (*xhat)[idx];
        }
        mean_dh /= static_cast<double>(per_group);
        mean_dh_h /= static_cast<double>(per_group);
        for (std::size_t i = 0; i < per_group; ++i) {
          const std::size_t idx = base + i;
          dx[idx] += (*inv_std)[grp] * (dh[i] - mean_dh - (*xhat)[idx] * mean_dh_h);
        }
      }
    }
    if (t.needs_grad(ig) || t.needs_grad(ib)) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double sg = 0.0, sb = 0.0;
        for (std::size_t p = 0; p < spatial; ++p) {
          const std::size_t idx = ch * spatial + p;
          sg += dy[idx] * (*xhat)[idx];
          sb += dy[idx];
        }
        if (t.needs_grad(ig)) t.grad_of(ig)[ch] += sg;
        if (t.needs_grad(ib)) t.grad_of(ib)[ch] += sb;
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, k, stride, pad, h_out, w_out;
};

// cols:[c_in*k*k, h_out*w_out]
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t n_out = g.h_out * g.w_out;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((c * g.k + ky) * g.k + kx) * n_out;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.w_out; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.w_out + ox] =
                inside ? x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)]
                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
  const std::size_t n_out = g.h_out * g.w_out;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((c * g.k + ky) * g.k + kx) * n_out;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.w_out; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dx[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] +=
                row[oy * g.w_out + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t pad) {
  Tape& tape = same_tape({x, w, b}, "conv2d");
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 3) shape_error("conv2d", "input must be [C,H,W], got " + shape_to_string(sx));
  if (sw.size() != 4 || sw[1] != sx[0] || sw[2] != sw[3]) {
    shape_error("conv2d", "weight " + shape_to_string(sw) + " incompatible with input " +
                              shape_to_string(sx));
  }
  if (b.shape() != Shape{sw[0]}) shape_error("conv2d", "bias must be [C_out]");
  if (stride == 0) shape_error("conv2d", "stride must be >= 1");
  ConvGeometry g{sx[0], sx[1], sx[2], sw[0], sw[2], stride, pad, 0, 0};
  if (g.k > g.h + 2 * pad || g.k > g.w + 2 * pad) {
    shape_error("conv2d", "kernel larger than padded input");
  }
  if ((g.h + 2 * pad - g.k) % stride != 0 || (g.w + 2 * pad - g.k) % stride != 0) {
    shape_error("conv2d", "output size is not an integer for input " + shape_to_string(sx) +
                              ", kernel " + std::to_string(g.k) + ", stride " +
                              std::to_string(stride) + ", pad " + std::to_string(pad));
  }
  g.h_out = (g.h + 2 * pad - g.k) / stride + 1;
  g.w_out = (g.w + 2 * pad - g.k) / stride + 1;
  const std::size_t patch = g.c_in * g.k * g.k;
  const std::size_t n_out = g.h_out * g.w_out;

  auto cols = std::make_shared<Buffer>(patch * n_out);
  im2col(x.value().data(), g, cols->data());
  Buffer out(g.c_out * n_out);
  auto y = mmat(out, g.c_out, n_out);
  y.noalias() = cmat(w.value(), g.c_out, patch) * cmat(*cols, patch, n_out);
  y.colwise() += cvec(b.value());

  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return tape.record({g.c_out, g.h_out, g.w_out}, std::move(out), {x, w, b},
                     [=](Tape& t, std::size_t self) {
                       auto dy = cmat(t.grad_of(self), g.c_out, n_out);
                       if (t.needs_grad(iw)) {
                         mmat(t.grad_of(iw), g.c_out, patch).noalias() +=
                             dy * cmat(*cols, patch, n_out).transpose();
                       }
                       if (t.needs_grad(ib)) mvec(t.grad_of(ib)) += dy.rowwise().sum();
                       if (t.needs_grad(ix)) {
                         Buffer dcols(patch * n_out);
                         mmat(dcols, patch, n_out).noalias() =
                             cmat(t.value_of(iw), g.c_out, patch).transpose() * dy;
                         col2im_add(dcols.data(), g, t.grad_of(ix).data());
                       }
                     });
}

Tensor max_pool2d(const Tensor& x, std::size_t k) {
  Tape& tape = same_tape({x}, "max_pool2d");
  const Shape& s = x.shape();
  if (s.size() != 3 || k == 0 || s[1] % k != 0 || s[2] % k != 0) {
    shape_error("max_pool2d", "input " + shape_to_string(s) + " not divisible by window " +
                                  std::to_string(k));
  }
  const std::size_t c = s[0], h = s[1], w = s[2], ho = h / k, wo = w / k;
  auto xv = x.value();
  Buffer out(c * ho * wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (ch * h + oy * k) * w + ox * k;
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t idx = (ch * h + oy * k + dy) * w + ox * k + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (ch * ho + oy) * wo + ox;
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  const std::size_t ix = x.id();
  return tape.record({c, ho, wo}, std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto dx = t.grad_of(ix);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[(*argmax)[o]] += dy[o];
  });
}

Tensor global_avg_pool(const Tensor& x) {
  Tape& tape = same_tape({x}, "global_avg_pool");
  const Shape& s = x.shape();
  if (s.size() < 2) shape_error("global_avg_pool", "needs rank >= 2, got " + shape_to_string(s));
  const std::size_t c = s[0];
  const std::size_t inner = x.numel() / c;
  const double inv = 1.0 / static_cast<double>(inner);
  auto xv = x.value();
  Buffer out(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += xv[ch * inner + i];
    out[ch] = acc * inv;
  }
  const std::size_t ix = x.id();
  return tape.record({c}, std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto dx = t.grad_of(ix);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < inner; ++i) dx[ch * inner + i] += dy[ch] * inv;
  });
}

Tensor multi_head_attention(const Tensor& qkv, std::size_t num_heads) {
  Tape& tape = same_tape({qkv}, "multi_head_attention");
  const Shape& s = qkv.shape();
  if (s.size() != 2 || s[1] % 3 != 0) {
    shape_error("multi_head_attention", "expected [T, 3d], got " + shape_to_string(s));
  }
  const std::size_t tokens = s[0];
  const std::size_t d = s[1] / 3;
  if (num_heads == 0 || d % num_heads != 0) {
    shape_error("multi_head_attention", "width " + std::to_string(d) + " not divisible by " +
                                            std::to_string(num_heads) + " heads");
  }
  const auto T = static_cast<Eigen::Index>(tokens);
  const auto dh = static_cast<Eigen::Index>(d / num_heads);
  const auto D = static_cast<Eigen::Index>(d);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto in = cmat(qkv.value(), tokens, 3 * d);
  auto probs = std::make_shared<Buffer>(num_heads * tokens * tokens);
  Buffer out(tokens * d);
  auto y = mmat(out, tokens, d);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    auto p = mmat(std::span<double>(probs->data() + h * tokens * tokens, tokens * tokens), tokens,
                  tokens);
    p.noalias() = inv_sqrt * (in.block(0, off, T, dh) * in.block(0, D + off, T, dh).transpose());
    softmax_rows(p.data(), p.data(), tokens, tokens);
    y.block(0, off, T, dh).noalias() = p * in.block(0, 2 * D + off, T, dh);
  }

  const std::size_t iq = qkv.id();
  return tape.record({tokens, d}, std::move(out), {qkv}, [=](Tape& t, std::size_t self) {
    auto dy = cmat(t.grad_of(self), tokens, d);
    auto in = cmat(t.value_of(iq), tokens, 3 * d);
    auto din = mmat(t.grad_of(iq), tokens, 3 * d);
    RowMat dp(T, T);
    for (std::size_t h = 0; h < num_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      auto p = cmat(std::span<const double>(probs->data() + h * tokens * tokens, tokens * tokens),
                    tokens, tokens);
      auto dout = dy.block(0, off, T, dh);
      // dV = P^T dO
      din.block(0, 2 * D + off, T, dh).noalias() += p.transpose() * dout;
      dp.noalias() = dout * in.block(0, 2 * D + off, T, dh).transpose();
      Eigen::VectorXd dots = p.cwiseProduct(dp).rowwise().sum();
      RowMat ds = p.cwiseProduct(dp - dots.replicate(1, T)) * inv_sqrt;
      din.block(0, off, T, dh).noalias() += ds * in.block(0, D + off, T, dh);
      din.block(0, D + off, T, dh).noalias() += ds.transpose() * in.block(0, off, T, dh);
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  Tape& tape = same_tape({x}, "reshape");
  if (shape_numel(shape) != x.numel()) {
    shape_error("reshape", "cannot view " + shape_to_string(x.shape()) + " as " +
                               shape_to_string(shape));
  }
  auto v = x.value();
  const std::size_t ix = x.id();
  return tape.record(std::move(shape), Buffer(v.begin(), v.end()), {x},
                     [=](Tape& t, std::size_t self) { mvec(t.grad_of(ix)) += cvec(t.grad_of(self)); });
}

Tensor transpose(const Tensor& x) {
  Tape& tape = same_tape({x}, "transpose");
  const Shape& s = x.shape();
  if (s.size() != 2) shape_error("transpose", "expected rank 2, got " + shape_to_string(s));
  const std::size_t r = s[0], c = s[1];
  Buffer out(r * c);
  mmat(out, c, r) = cmat(x.value(), r, c).transpose();
  const std::size_t ix = x.id();
  return tape.record({c, r}, std::move(out), {x}, [=](Tape& t, std::size_t self) {
    mmat(t.grad_of(ix), r, c) += cmat(t.grad_of(self), c, r).transpose();
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  Tape& tape = same_tape({x}, "slice_rows");
  const Shape& s = x.shape();
  if (s.size() != 2 || count == 0 || start + count > s[0]) {
    shape_error("slice_rows", "rows [" + std::to_string(start) + ", " +
                                  std::to_string(start + count) + ") outside " + shape_to_string(s));
  }
  const std::size_t cols = s[1];
  auto v = x.value();
  Buffer out(v.begin() + static_cast<std::ptrdiff_t>(start * cols),
                          v.begin() + static_cast<std::ptrdiff_t>((start + count) * cols));
  const std::size_t ix = x.id();
  return tape.record({count, cols}, std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[start * cols + i] += dy[i];
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape({a, b}, "concat_rows");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) {
    shape_error("concat_rows", "cannot stack " + shape_to_string(sa) + " on " + shape_to_string(sb));
  }
  auto va = a.value(), vb = b.value();
  Buffer out;
  out.reserve(va.size() + vb.size());
  out.insert(out.end(), va.begin(), va.end());
  out.insert(out.end(), vb.begin(), vb.end());
  const std::size_t na = va.size();
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record({sa[0] + sb[0], sa[1]}, std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    if (t.needs_grad(ia)) {
      auto da = t.grad_of(ia);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += dy[i];
    }
    if (t.needs_grad(ib)) {
      auto db = t.grad_of(ib);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += dy[na + i];
    }
  });
}

Tensor gather(const Tensor& x, Shape out_shape, IndexMap index) {
  Tape& tape = same_tape({x}, "gather");
  if (!index || index->size() != shape_numel(out_shape)) {
    shape_error("gather", "index map does not cover output " + shape_to_string(out_shape));
  }
  auto xv = x.value();
  const auto n_in = static_cast<std::int64_t>(xv.size());
  Buffer out(index->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t src = (*index)[i];
    if (src >= n_in) shape_error("gather", "index " + std::to_string(src) + " out of range");
    out[i] = src < 0 ? 0.0 : xv[static_cast<std::size_t>(src)];
  }
  const std::size_t ix = x.id();
  return tape.record(std::move(out_shape), std::move(out), {x}, [=](Tape& t, std::size_t self) {
    auto dy = t.grad_of(self);
    auto dx = t.grad_of(ix);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const std::int64_t src = (*index)[i];
      if (src >= 0) dx[static_cast<std::size_t>(src)] += dy[i];
    }
  });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& indices) {
  const Shape& s = table.shape();
  if (s.size() != 2) shape_error("embedding_lookup", "table must be [V,d]");
  const std::size_t vocab = s[0], d = s[1];
  auto map = std::make_shared<std::vector<std::int64_t>>();
  map->reserve(indices.size() * d);
  for (std::size_t idx : indices) {
    if (idx >= vocab) {
      throw std::out_of_range("embedding_lookup: index " + std::to_string(idx) +
                              " outside table of " + std::to_string(vocab) + " rows");
    }
    for (std::size_t j = 0; j < d; ++j) map->push_back(static_cast<std::int64_t>(idx * d + j));
  }
  return gather(table, {indices.size(), d}, std::move(map));
}

}  // namespace vitens::ops

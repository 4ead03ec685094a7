#include "deepi2i/nn.h"

#include <cmath>
#include <cstring>

#include "deepi2i/blas.h"
#include "deepi2i/parallel.h"

namespace deepi2i::nn {

namespace {

// per-thread scratch for no-grad forwards, so shared networks stay safe to
// evaluate concurrently
template <typename T>
std::vector<T, default_init_allocator<T>>& tl_scratch() {
  thread_local std::vector<T, default_init_allocator<T>> buf;
  return buf;
}

// col is (C*k*k) x (H*W), stride 1, same padding.
template <typename T>
void im2col(const T* x, int64_t ch, int64_t h, int64_t w, int64_t k, int64_t pad, T* col) {
  const int64_t hw = h * w;
  for (int64_t c = 0; c < ch; ++c) {
    for (int64_t ki = 0; ki < k; ++ki) {
      for (int64_t kj = 0; kj < k; ++kj) {
        T* dst = col + ((c * k + ki) * k + kj) * hw;
        const int64_t di = ki - pad, dj = kj - pad;
        for (int64_t i = 0; i < h; ++i) {
          const int64_t si = i + di;
          if (si < 0 || si >= h) {
            std::memset(dst + i * w, 0, sizeof(T) * static_cast<size_t>(w));
            continue;
          }
          const T* src_row = x + c * hw + si * w;
          T* dst_row = dst + i * w;
          for (int64_t j = 0; j < w; ++j) {
            const int64_t sj = j + dj;
            dst_row[j] = (sj < 0 || sj >= w) ? T(0) : src_row[sj];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int64_t ch, int64_t h, int64_t w, int64_t k, int64_t pad, T* x) {
  const int64_t hw = h * w;
  for (int64_t c = 0; c < ch; ++c) {
    for (int64_t ki = 0; ki < k; ++ki) {
      for (int64_t kj = 0; kj < k; ++kj) {
        const T* src = col + ((c * k + ki) * k + kj) * hw;
        const int64_t di = ki - pad, dj = kj - pad;
        for (int64_t i = 0; i < h; ++i) {
          const int64_t si = i + di;
          if (si < 0 || si >= h) continue;
          T* x_row = x + c * hw + si * w;
          const T* src_row = src + i * w;
          for (int64_t j = 0; j < w; ++j) {
            const int64_t sj = j + dj;
            if (sj >= 0 && sj < w) x_row[sj] += src_row[j];
          }
        }
      }
    }
  }
}

template <typename T>
T vec_norm(const T* v, int64_t n) {
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

template <typename T>
void normalize_vec(T* v, int64_t n) {
  T nrm = vec_norm(v, n) + T(1e-12);
  for (int64_t i = 0; i < n; ++i) v[i] /= nrm;
}

// Power iteration state: v = normalize(W^T u); sigma = u^T W v.
// When update is set, u <- normalize(W v) is stored back first.
template <typename T>
T spectral_sigma(const Tensor<T>& w, Tensor<T>& u, Tensor<T>& v_out, bool update) {
  const int64_t rows = w.dim(0), cols = w.dim(1);
  Tensor<T> v({cols});
  gemm(true, false, cols, 1, rows, T(1), w.data(), cols, u.data(), 1, T(0), v.data(), 1);
  normalize_vec(v.data(), cols);
  if (update) {
    Tensor<T> u_new({rows});
    gemm(false, false, rows, 1, cols, T(1), w.data(), cols, v.data(), 1, T(0), u_new.data(), 1);
    normalize_vec(u_new.data(), rows);
    u = u_new;
    // recompute v against the refreshed u
    gemm(true, false, cols, 1, rows, T(1), w.data(), cols, u.data(), 1, T(0), v.data(), 1);
    normalize_vec(v.data(), cols);
  }
  Tensor<T> wv({rows});
  gemm(false, false, rows, 1, cols, T(1), w.data(), cols, v.data(), 1, T(0), wv.data(), 1);
  T sigma = 0;
  for (int64_t i = 0; i < rows; ++i) sigma += u[i] * wv[i];
  v_out = std::move(v);
  return sigma;
}

// Maps the gradient w.r.t. the normalized weight back to the raw weight,
// treating u and v as constants.
template <typename T>
void spectral_backward(const Tensor<T>& g_wbar, const Tensor<T>& w, const Tensor<T>& u,
                       const Tensor<T>& v, T sigma, Tensor<T>& gw) {
  T dot = 0;
  for (int64_t i = 0; i < w.numel(); ++i) dot += g_wbar[i] * w[i];
  const T c = dot / (sigma * sigma);
  const int64_t rows = w.dim(0), cols = w.dim(1);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      gw[i * cols + j] += g_wbar[i * cols + j] / sigma - c * u[i] * v[j];
}

}  // namespace

template <typename T>
void orthogonal_init(Tensor<T>& w, int64_t rows, int64_t cols, Rng& rng) {
  // Gram-Schmidt in double; orthonormal rows if rows <= cols, else columns.
  const bool by_rows = rows <= cols;
  const int64_t nvec = by_rows ? rows : cols;
  const int64_t dim = by_rows ? cols : rows;
  std::vector<std::vector<double>> basis(static_cast<size_t>(nvec),
                                         std::vector<double>(static_cast<size_t>(dim)));
  for (auto& vec : basis)
    for (auto& x : vec) x = rng.normal();
  for (int64_t i = 0; i < nvec; ++i) {
    auto& vi = basis[static_cast<size_t>(i)];
    for (int64_t j = 0; j < i; ++j) {
      const auto& vj = basis[static_cast<size_t>(j)];
      double dot = 0;
      for (int64_t d = 0; d < dim; ++d) dot += vi[static_cast<size_t>(d)] * vj[static_cast<size_t>(d)];
      for (int64_t d = 0; d < dim; ++d) vi[static_cast<size_t>(d)] -= dot * vj[static_cast<size_t>(d)];
    }
    double nrm = 0;
    for (double x : vi) nrm += x * x;
    nrm = std::sqrt(nrm) + 1e-12;
    for (auto& x : vi) x /= nrm;
  }
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c)
      w[r * cols + c] = static_cast<T>(by_rows ? basis[static_cast<size_t>(r)][static_cast<size_t>(c)]
                                               : basis[static_cast<size_t>(c)][static_cast<size_t>(r)]);
}

// ---- stateless ops ----

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  T* p = y.data();
  for (int64_t i = 0; i < y.numel(); ++i)
    if (p[i] < T(0)) p[i] = T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& gy, const Tensor<T>& x_pre) {
  if (!gy.same_shape(x_pre)) throw ShapeError("relu_backward: shape mismatch");
  Tensor<T> gx = gy;
  for (int64_t i = 0; i < gx.numel(); ++i)
    if (x_pre[i] <= T(0)) gx[i] = T(0);
  return gx;
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("avg_pool2: odd spatial size");
  Tensor<T> y = Tensor<T>::uninitialized({n, c, h / 2, w / 2});
  parallel_for(n * c, [&](int, int64_t begin, int64_t end) {
  for (int64_t i = begin; i < end; ++i) {
    const T* xp = x.data() + i * h * w;
    T* yp = y.data() + i * (h / 2) * (w / 2);
    for (int64_t r = 0; r < h / 2; ++r)
      for (int64_t q = 0; q < w / 2; ++q)
        yp[r * (w / 2) + q] = (xp[(2 * r) * w + 2 * q] + xp[(2 * r) * w + 2 * q + 1] +
                               xp[(2 * r + 1) * w + 2 * q] + xp[(2 * r + 1) * w + 2 * q + 1]) /
                              T(4);
  }
  });
  return y;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& gy, int64_t in_h, int64_t in_w) {
  const int64_t n = gy.dim(0), c = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  Tensor<T> gx = Tensor<T>::uninitialized({n, c, in_h, in_w});
  parallel_for(n * c, [&](int, int64_t begin, int64_t end) {
  for (int64_t i = begin; i < end; ++i) {
    const T* gp = gy.data() + i * oh * ow;
    T* xp = gx.data() + i * in_h * in_w;
    for (int64_t r = 0; r < oh; ++r)
      for (int64_t q = 0; q < ow; ++q) {
        const T g = gp[r * ow + q] / T(4);
        xp[(2 * r) * in_w + 2 * q] = g;
        xp[(2 * r) * in_w + 2 * q + 1] = g;
        xp[(2 * r + 1) * in_w + 2 * q] = g;
        xp[(2 * r + 1) * in_w + 2 * q + 1] = g;
      }
  }
  });
  return gx;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y = Tensor<T>::uninitialized({n, c, h * 2, w * 2});
  parallel_for(n * c, [&](int, int64_t begin, int64_t end) {
  for (int64_t i = begin; i < end; ++i) {
    const T* xp = x.data() + i * h * w;
    T* yp = y.data() + i * 4 * h * w;
    for (int64_t r = 0; r < h; ++r)
      for (int64_t q = 0; q < w; ++q) {
        const T v = xp[r * w + q];
        yp[(2 * r) * (2 * w) + 2 * q] = v;
        yp[(2 * r) * (2 * w) + 2 * q + 1] = v;
        yp[(2 * r + 1) * (2 * w) + 2 * q] = v;
        yp[(2 * r + 1) * (2 * w) + 2 * q + 1] = v;
      }
  }
  });
  return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& gy) {
  const int64_t n = gy.dim(0), c = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
  if (oh % 2 != 0 || ow % 2 != 0) throw ShapeError("upsample2_backward: odd spatial size");
  Tensor<T> gx = Tensor<T>::uninitialized({n, c, oh / 2, ow / 2});
  parallel_for(n * c, [&](int, int64_t begin, int64_t end) {
  for (int64_t i = begin; i < end; ++i) {
    const T* gp = gy.data() + i * oh * ow;
    T* xp = gx.data() + i * (oh / 2) * (ow / 2);
    for (int64_t r = 0; r < oh / 2; ++r)
      for (int64_t q = 0; q < ow / 2; ++q)
        xp[r * (ow / 2) + q] = gp[(2 * r) * ow + 2 * q] + gp[(2 * r) * ow + 2 * q + 1] +
                               gp[(2 * r + 1) * ow + 2 * q] + gp[(2 * r + 1) * ow + 2 * q + 1];
  }
  });
  return gx;
}

template <typename T>
Tensor<T> global_sum_pool(const Tensor<T>& x) {
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    const T* xp = x.data() + i * hw;
    T s = 0;
    for (int64_t j = 0; j < hw; ++j) s += xp[j];
    y[i] = s;
  }
  return y;
}

template <typename T>
Tensor<T> global_sum_pool_backward(const Tensor<T>& gy, int64_t h, int64_t w) {
  const int64_t n = gy.dim(0), c = gy.dim(1);
  Tensor<T> gx({n, c, h, w});
  for (int64_t i = 0; i < n * c; ++i) {
    T* xp = gx.data() + i * h * w;
    const T g = gy[i];
    for (int64_t j = 0; j < h * w; ++j) xp[j] = g;
  }
  return gx;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
  return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& gy, const Tensor<T>& y) {
  Tensor<T> gx = gy;
  for (int64_t i = 0; i < gx.numel(); ++i) gx[i] *= (T(1) - y[i] * y[i]);
  return gx;
}

// ---- Conv2d ----

template <typename T>
Conv2d<T>::Conv2d(int64_t in_ch, int64_t out_ch, int64_t ksize, bool spectral_norm)
    : in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize), pad_(ksize / 2), sn_(spectral_norm) {
  const int64_t k2 = in_ch_ * ksize_ * ksize_;
  w_ = Tensor<T>({out_ch_, k2});
  b_ = Tensor<T>({out_ch_});
  gw_ = Tensor<T>({out_ch_, k2});
  gb_ = Tensor<T>({out_ch_});
  if (sn_) sn_u_ = Tensor<T>({out_ch_});
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  orthogonal_init(w_, out_ch_, in_ch_ * ksize_ * ksize_, rng);
  b_.zero();
  if (sn_) {
    rng.fill_normal(sn_u_);
    normalize_vec(sn_u_.data(), out_ch_);
  }
}

template <typename T>
Tensor<T> Conv2d<T>::effective_weight(const Pass& pass) {
  if (!sn_) {
    sigma_ = T(1);
    return w_;
  }
  sigma_ = spectral_sigma(w_, sn_u_, sn_v_, pass.train && pass.update);
  Tensor<T> wbar = w_;
  wbar.scale_(T(1) / sigma_);
  return wbar;
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, const Pass& pass) {
  if (x.rank() != 4 || x.dim(1) != in_ch_)
    throw ShapeError("conv2d: bad input shape " + shape_str(x.shape()));
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int64_t k2 = in_ch_ * ksize_ * ksize_, hw = h * w;

  Tensor<T> wbar = effective_weight(pass);
  // grad forwards keep the col matrix for the backward pass (capacity is
  // reused across steps); no-grad forwards use per-thread scratch
  T* col_base = nullptr;
  if (pass.grad) {
    col_.ensure_shape({n, k2, hw});
    col_base = col_.data();
  } else {
    auto& scratch = tl_scratch<T>();
    if (scratch.size() < static_cast<size_t>(n * k2 * hw))
      scratch.resize(static_cast<size_t>(n * k2 * hw));
    col_base = scratch.data();
  }

  Tensor<T> y = Tensor<T>::uninitialized({n, out_ch_, h, w});
  parallel_for(n, [&](int, int64_t begin, int64_t end) {
    for (int64_t s = begin; s < end; ++s) {
      T* col_s = col_base + s * k2 * hw;
      im2col(x.data() + s * in_ch_ * hw, in_ch_, h, w, ksize_, pad_, col_s);
      gemm(false, false, out_ch_, hw, k2, T(1), wbar.data(), k2, col_s, hw, T(0),
           y.data() + s * out_ch_ * hw, hw);
      for (int64_t c = 0; c < out_ch_; ++c) {
        const T bias = b_[c];
        T* row = y.data() + (s * out_ch_ + c) * hw;
        for (int64_t j = 0; j < hw; ++j) row[j] += bias;
      }
    }
  });

  if (pass.grad) {
    x_shape_ = x.shape();
    has_cache_ = true;
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("conv2d: backward without cached forward");
  const int64_t n = x_shape_[0], h = x_shape_[2], w = x_shape_[3];
  const int64_t k2 = in_ch_ * ksize_ * ksize_, hw = h * w;
  gy.require_shape({n, out_ch_, h, w}, "conv2d backward");

  if (param_grads) {
    // per-chunk partials, reduced in fixed order
    std::vector<Tensor<T>> partial(static_cast<size_t>(chunk_count(n)));
    std::vector<Tensor<T>> partial_b(partial.size());
    parallel_for(n, [&](int chunk, int64_t begin, int64_t end) {
      const size_t ci = static_cast<size_t>(chunk);
      partial[ci] = Tensor<T>({out_ch_, k2});
      partial_b[ci] = Tensor<T>({out_ch_});
      for (int64_t s = begin; s < end; ++s) {
        gemm(false, true, out_ch_, k2, hw, T(1), gy.data() + s * out_ch_ * hw, hw,
             col_.data() + s * k2 * hw, hw, T(1), partial[ci].data(), k2);
        for (int64_t c = 0; c < out_ch_; ++c) {
          const T* row = gy.data() + (s * out_ch_ + c) * hw;
          T acc = 0;
          for (int64_t j = 0; j < hw; ++j) acc += row[j];
          partial_b[ci][c] += acc;
        }
      }
    });
    Tensor<T>& g_wbar = partial[0];
    for (size_t c = 1; c < partial.size(); ++c) {
      if (partial[c].empty()) continue;
      g_wbar.add_(partial[c]);
      partial_b[0].add_(partial_b[c]);
    }
    if (sn_)
      spectral_backward(g_wbar, w_, sn_u_, sn_v_, sigma_, gw_);
    else
      gw_.add_(g_wbar);
    gb_.add_(partial_b[0]);
  }

  // dX via W^T * dY, scattered back by col2im
  Tensor<T> wbar = w_;
  if (sn_) wbar.scale_(T(1) / sigma_);
  Tensor<T> gx(x_shape_);
  parallel_for(n, [&](int, int64_t begin, int64_t end) {
    auto& scratch = tl_scratch<T>();
    if (scratch.size() < static_cast<size_t>(k2 * hw))
      scratch.resize(static_cast<size_t>(k2 * hw));
    for (int64_t s = begin; s < end; ++s) {
      gemm(true, false, k2, hw, out_ch_, T(1), wbar.data(), k2, gy.data() + s * out_ch_ * hw, hw,
           T(0), scratch.data(), hw);
      col2im_add(scratch.data(), in_ch_, h, w, ksize_, pad_, gx.data() + s * in_ch_ * hw);
    }
  });
  has_cache_ = false;
  return gx;
}

template <typename T>
void Conv2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn({prefix + "weight", &w_, &gw_, false});
  fn({prefix + "bias", &b_, &gb_, false});
  if (sn_) fn({prefix + "sn_u", &sn_u_, nullptr, true});
}

// ---- Linear ----

template <typename T>
Linear<T>::Linear(int64_t in_dim, int64_t out_dim, bool bias, bool spectral_norm)
    : in_dim_(in_dim), out_dim_(out_dim), bias_(bias), sn_(spectral_norm) {
  w_ = Tensor<T>({out_dim_, in_dim_});
  gw_ = Tensor<T>({out_dim_, in_dim_});
  if (bias_) {
    b_ = Tensor<T>({out_dim_});
    gb_ = Tensor<T>({out_dim_});
  }
  if (sn_) sn_u_ = Tensor<T>({out_dim_});
}

template <typename T>
void Linear<T>::init(Rng& rng) {
  orthogonal_init(w_, out_dim_, in_dim_, rng);
  if (bias_) b_.zero();
  if (sn_) {
    rng.fill_normal(sn_u_);
    normalize_vec(sn_u_.data(), out_dim_);
  }
}

template <typename T>
void Linear<T>::init_zero() {
  w_.zero();
  if (bias_) b_.zero();
  if (sn_) sn_u_.fill(T(1));
}

template <typename T>
Tensor<T> Linear<T>::effective_weight(const Pass& pass) {
  if (!sn_) {
    sigma_ = T(1);
    return w_;
  }
  sigma_ = spectral_sigma(w_, sn_u_, sn_v_, pass.train && pass.update);
  Tensor<T> wbar = w_;
  wbar.scale_(T(1) / sigma_);
  return wbar;
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, const Pass& pass) {
  if (x.rank() != 2 || x.dim(1) != in_dim_)
    throw ShapeError("linear: bad input shape " + shape_str(x.shape()));
  const int64_t n = x.dim(0);
  Tensor<T> wbar = effective_weight(pass);
  Tensor<T> y({n, out_dim_});
  gemm(false, true, n, out_dim_, in_dim_, T(1), x.data(), in_dim_, wbar.data(), in_dim_, T(0),
       y.data(), out_dim_);
  if (bias_)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < out_dim_; ++j) y[i * out_dim_ + j] += b_[j];
  if (pass.grad) {
    x_ = x;
    has_cache_ = true;
  }
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("linear: backward without cached forward");
  const int64_t n = x_.dim(0);
  gy.require_shape({n, out_dim_}, "linear backward");

  if (param_grads) {
    Tensor<T> g_wbar({out_dim_, in_dim_});
    gemm(true, false, out_dim_, in_dim_, n, T(1), gy.data(), out_dim_, x_.data(), in_dim_, T(0),
         g_wbar.data(), in_dim_);
    if (sn_)
      spectral_backward(g_wbar, w_, sn_u_, sn_v_, sigma_, gw_);
    else
      gw_.add_(g_wbar);
    if (bias_)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < out_dim_; ++j) gb_[j] += gy[i * out_dim_ + j];
  }

  Tensor<T> wbar = w_;
  if (sn_) wbar.scale_(T(1) / sigma_);
  Tensor<T> gx({n, in_dim_});
  gemm(false, false, n, in_dim_, out_dim_, T(1), gy.data(), out_dim_, wbar.data(), in_dim_, T(0),
       gx.data(), in_dim_);
  has_cache_ = false;
  return gx;
}

template <typename T>
void Linear<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn({prefix + "weight", &w_, &gw_, false});
  if (bias_) fn({prefix + "bias", &b_, &gb_, false});
  if (sn_) fn({prefix + "sn_u", &sn_u_, nullptr, true});
}

// ---- Embedding ----

template <typename T>
Embedding<T>::Embedding(int64_t num_classes, int64_t dim) : num_classes_(num_classes), dim_(dim) {
  w_ = Tensor<T>({num_classes_, dim_});
  gw_ = Tensor<T>({num_classes_, dim_});
}

template <typename T>
void Embedding<T>::init(Rng& rng) {
  orthogonal_init(w_, num_classes_, dim_, rng);
}

template <typename T>
Tensor<T> Embedding<T>::forward(const std::vector<int64_t>& labels, bool grad) {
  Tensor<T> y({static_cast<int64_t>(labels.size()), dim_});
  for (size_t i = 0; i < labels.size(); ++i) {
    const int64_t c = labels[i];
    if (c < 0 || c >= num_classes_)
      throw ConfigError("embedding: label " + std::to_string(c) + " out of range [0, " +
                        std::to_string(num_classes_) + ")");
    std::memcpy(y.data() + static_cast<int64_t>(i) * dim_, w_.data() + c * dim_,
                sizeof(T) * static_cast<size_t>(dim_));
  }
  if (grad) {
    labels_ = labels;
    has_cache_ = true;
  }
  return y;
}

template <typename T>
void Embedding<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("embedding: backward without cached forward");
  if (param_grads) {
    for (size_t i = 0; i < labels_.size(); ++i) {
      const int64_t c = labels_[i];
      for (int64_t d = 0; d < dim_; ++d)
        gw_[c * dim_ + d] += gy[static_cast<int64_t>(i) * dim_ + d];
    }
  }
  has_cache_ = false;
}

template <typename T>
void Embedding<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn({prefix + "weight", &w_, &gw_, false});
}

template <typename T>
Tensor<T> Embedding<T>::row(int64_t c) const {
  if (c < 0 || c >= num_classes_) throw ConfigError("embedding: row out of range");
  Tensor<T> r({1, dim_});
  std::memcpy(r.data(), w_.data() + c * dim_, sizeof(T) * static_cast<size_t>(dim_));
  return r;
}

// ---- batch-norm core helpers ----

namespace {

template <typename T>
struct BnStats {
  Tensor<T> mean, inv_std;
};

template <typename T>
BnStats<T> bn_batch_stats(const Tensor<T>& x, T eps) {
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const T m = static_cast<T>(n * hw);
  BnStats<T> st{Tensor<T>({c}), Tensor<T>({c})};
  parallel_for(c, [&](int, int64_t c_begin, int64_t c_end) {
  for (int64_t ch = c_begin; ch < c_end; ++ch) {
    T sum = 0, sq = 0;
    for (int64_t s = 0; s < n; ++s) {
      const T* p = x.data() + (s * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        sum += p[j];
        sq += p[j] * p[j];
      }
    }
    const T mean = sum / m;
    T var = sq / m - mean * mean;
    if (var < T(0)) var = T(0);
    st.mean[ch] = mean;
    st.inv_std[ch] = T(1) / std::sqrt(var + eps);
  }
  });
  return st;
}

// dx for shared per-channel batch statistics, given dxhat.
template <typename T>
Tensor<T> bn_input_grad(const Tensor<T>& dxhat, const Tensor<T>& xhat, const Tensor<T>& inv_std) {
  const int64_t n = dxhat.dim(0), c = dxhat.dim(1), hw = dxhat.dim(2) * dxhat.dim(3);
  const T m = static_cast<T>(n * hw);
  Tensor<T> gx = Tensor<T>::uninitialized(dxhat.shape());
  parallel_for(c, [&](int, int64_t c_begin, int64_t c_end) {
  for (int64_t ch = c_begin; ch < c_end; ++ch) {
    T s1 = 0, s2 = 0;
    for (int64_t s = 0; s < n; ++s) {
      const T* dp = dxhat.data() + (s * c + ch) * hw;
      const T* xp = xhat.data() + (s * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        s1 += dp[j];
        s2 += dp[j] * xp[j];
      }
    }
    const T mean_d = s1 / m, mean_dx = s2 / m;
    const T istd = inv_std[ch];
    for (int64_t s = 0; s < n; ++s) {
      const T* dp = dxhat.data() + (s * c + ch) * hw;
      const T* xp = xhat.data() + (s * c + ch) * hw;
      T* gp = gx.data() + (s * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) gp[j] = istd * (dp[j] - mean_d - xp[j] * mean_dx);
    }
  }
  });
  return gx;
}

}  // namespace

// ---- BatchNorm2d ----

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int64_t ch) : ch_(ch) {
  gamma_ = Tensor<T>({ch_}, T(1));
  beta_ = Tensor<T>({ch_});
  ggamma_ = Tensor<T>({ch_});
  gbeta_ = Tensor<T>({ch_});
  run_mean_ = Tensor<T>({ch_});
  run_var_ = Tensor<T>({ch_}, T(1));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, const Pass& pass) {
  if (x.dim(1) != ch_) throw ShapeError("batchnorm: channel mismatch");
  const int64_t n = x.dim(0), hw = x.dim(2) * x.dim(3);
  Tensor<T> mean, inv_std;
  if (pass.train) {
    auto st = bn_batch_stats(x, eps_);
    mean = std::move(st.mean);
    inv_std = std::move(st.inv_std);
    if (pass.update) {
      for (int64_t c = 0; c < ch_; ++c) {
        const T var = T(1) / (inv_std[c] * inv_std[c]) - eps_;
        run_mean_[c] = (T(1) - momentum_) * run_mean_[c] + momentum_ * mean[c];
        run_var_[c] = (T(1) - momentum_) * run_var_[c] + momentum_ * var;
      }
    }
  } else {
    mean = run_mean_;
    inv_std = Tensor<T>({ch_});
    for (int64_t c = 0; c < ch_; ++c) inv_std[c] = T(1) / std::sqrt(run_var_[c] + eps_);
  }

  Tensor<T> xhat(x.shape());
  Tensor<T> y(x.shape());
  for (int64_t s = 0; s < n; ++s)
    for (int64_t c = 0; c < ch_; ++c) {
      const T* xp = x.data() + (s * ch_ + c) * hw;
      T* hp = xhat.data() + (s * ch_ + c) * hw;
      T* yp = y.data() + (s * ch_ + c) * hw;
      const T mu = mean[c], istd = inv_std[c], g = gamma_[c], b = beta_[c];
      for (int64_t j = 0; j < hw; ++j) {
        hp[j] = (xp[j] - mu) * istd;
        yp[j] = g * hp[j] + b;
      }
    }
  if (pass.grad) {
    if (!pass.train) throw ShapeError("batchnorm: grad requires batch-stat mode");
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv_std);
    has_cache_ = true;
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("batchnorm: backward without cached forward");
  const int64_t n = gy.dim(0), hw = gy.dim(2) * gy.dim(3);
  Tensor<T> dxhat(gy.shape());
  for (int64_t s = 0; s < n; ++s)
    for (int64_t c = 0; c < ch_; ++c) {
      const T* gp = gy.data() + (s * ch_ + c) * hw;
      const T* xp = xhat_.data() + (s * ch_ + c) * hw;
      T* dp = dxhat.data() + (s * ch_ + c) * hw;
      T dg = 0, db = 0;
      for (int64_t j = 0; j < hw; ++j) {
        dg += gp[j] * xp[j];
        db += gp[j];
        dp[j] = gp[j] * gamma_[c];
      }
      if (param_grads) {
        ggamma_[c] += dg;
        gbeta_[c] += db;
      }
    }
  Tensor<T> gx = bn_input_grad(dxhat, xhat_, inv_std_);
  has_cache_ = false;
  return gx;
}

template <typename T>
void BatchNorm2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn({prefix + "gamma", &gamma_, &ggamma_, false});
  fn({prefix + "beta", &beta_, &gbeta_, false});
  fn({prefix + "running_mean", &run_mean_, nullptr, true});
  fn({prefix + "running_var", &run_var_, nullptr, true});
}

// ---- ConditionalBatchNorm2d ----

template <typename T>
ConditionalBatchNorm2d<T>::ConditionalBatchNorm2d(int64_t ch, int64_t cond_dim, bool spectral_norm)
    : ch_(ch),
      cond_dim_(cond_dim),
      gain_(cond_dim, ch, false, spectral_norm),
      bias_(cond_dim, ch, false, spectral_norm) {
  run_mean_ = Tensor<T>({ch_});
  run_var_ = Tensor<T>({ch_}, T(1));
}

template <typename T>
void ConditionalBatchNorm2d<T>::init(Rng& rng) {
  gain_.init(rng);
  bias_.init(rng);
}

template <typename T>
Tensor<T> ConditionalBatchNorm2d<T>::forward(const Tensor<T>& x, const Tensor<T>& cond,
                                             const Pass& pass) {
  if (x.dim(1) != ch_) throw ShapeError("cond batchnorm: channel mismatch");
  const int64_t n = x.dim(0), hw = x.dim(2) * x.dim(3);
  if (cond.dim(0) != n || cond.dim(1) != cond_dim_)
    throw ShapeError("cond batchnorm: conditioning shape mismatch");

  Tensor<T> gamma = gain_.forward(cond, pass);  // (N, C), gain offset below
  Tensor<T> beta = bias_.forward(cond, pass);

  Tensor<T> mean, inv_std;
  if (pass.train) {
    auto st = bn_batch_stats(x, eps_);
    mean = std::move(st.mean);
    inv_std = std::move(st.inv_std);
    if (pass.update) {
      for (int64_t c = 0; c < ch_; ++c) {
        const T var = T(1) / (inv_std[c] * inv_std[c]) - eps_;
        run_mean_[c] = (T(1) - momentum_) * run_mean_[c] + momentum_ * mean[c];
        run_var_[c] = (T(1) - momentum_) * run_var_[c] + momentum_ * var;
      }
    }
  } else {
    mean = run_mean_;
    inv_std = Tensor<T>({ch_});
    for (int64_t c = 0; c < ch_; ++c) inv_std[c] = T(1) / std::sqrt(run_var_[c] + eps_);
  }

  Tensor<T> xhat(x.shape());
  Tensor<T> y(x.shape());
  for (int64_t s = 0; s < n; ++s)
    for (int64_t c = 0; c < ch_; ++c) {
      const T* xp = x.data() + (s * ch_ + c) * hw;
      T* hp = xhat.data() + (s * ch_ + c) * hw;
      T* yp = y.data() + (s * ch_ + c) * hw;
      const T mu = mean[c], istd = inv_std[c];
      const T g = T(1) + gamma[s * ch_ + c], b = beta[s * ch_ + c];
      for (int64_t j = 0; j < hw; ++j) {
        hp[j] = (xp[j] - mu) * istd;
        yp[j] = g * hp[j] + b;
      }
    }
  if (pass.grad) {
    if (!pass.train) throw ShapeError("cond batchnorm: grad requires batch-stat mode");
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv_std);
    gamma_rows_ = std::move(gamma);
    has_cache_ = true;
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> ConditionalBatchNorm2d<T>::backward(const Tensor<T>& gy,
                                                                    bool param_grads) {
  if (!has_cache_) throw ShapeError("cond batchnorm: backward without cached forward");
  const int64_t n = gy.dim(0), hw = gy.dim(2) * gy.dim(3);

  Tensor<T> dgamma({n, ch_});
  Tensor<T> dbeta({n, ch_});
  Tensor<T> dxhat(gy.shape());
  for (int64_t s = 0; s < n; ++s)
    for (int64_t c = 0; c < ch_; ++c) {
      const T* gp = gy.data() + (s * ch_ + c) * hw;
      const T* xp = xhat_.data() + (s * ch_ + c) * hw;
      T* dp = dxhat.data() + (s * ch_ + c) * hw;
      const T g = T(1) + gamma_rows_[s * ch_ + c];
      T dg = 0, db = 0;
      for (int64_t j = 0; j < hw; ++j) {
        dg += gp[j] * xp[j];
        db += gp[j];
        dp[j] = gp[j] * g;
      }
      dgamma[s * ch_ + c] = dg;
      dbeta[s * ch_ + c] = db;
    }

  Tensor<T> dcond = gain_.backward(dgamma, param_grads);
  dcond.add_(bias_.backward(dbeta, param_grads));
  Tensor<T> gx = bn_input_grad(dxhat, xhat_, inv_std_);
  has_cache_ = false;
  return {std::move(gx), std::move(dcond)};
}

template <typename T>
void ConditionalBatchNorm2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  gain_.visit(prefix + "gain.", fn);
  bias_.visit(prefix + "bias.", fn);
  fn({prefix + "running_mean", &run_mean_, nullptr, true});
  fn({prefix + "running_var", &run_var_, nullptr, true});
}

// ---- SelfAttention2d ----

template <typename T>
SelfAttention2d<T>::SelfAttention2d(int64_t ch, bool spectral_norm)
    : ch_(ch),
      qk_ch_(std::max<int64_t>(ch / 8, 1)),
      v_ch_(std::max<int64_t>(ch / 2, 1)),
      theta_(ch, std::max<int64_t>(ch / 8, 1), 1, spectral_norm),
      phi_(ch, std::max<int64_t>(ch / 8, 1), 1, spectral_norm),
      g_(ch, std::max<int64_t>(ch / 2, 1), 1, spectral_norm),
      out_(std::max<int64_t>(ch / 2, 1), ch, 1, spectral_norm) {
  gamma_ = Tensor<T>({1});
  ggamma_ = Tensor<T>({1});
}

template <typename T>
void SelfAttention2d<T>::init(Rng& rng) {
  theta_.init(rng);
  phi_.init(rng);
  g_.init(rng);
  out_.init(rng);
  gamma_.zero();
}

template <typename T>
Tensor<T> SelfAttention2d<T>::forward(const Tensor<T>& x, const Pass& pass) {
  const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3), hw = h * w;
  Tensor<T> q = theta_.forward(x, pass);
  Tensor<T> k = phi_.forward(x, pass);
  Tensor<T> v = g_.forward(x, pass);

  Tensor<T> attn({n, hw, hw});
  Tensor<T> av({n, v_ch_, h, w});
  for (int64_t s = 0; s < n; ++s) {
    // logits[i][j] = q_i . k_j, softmax over i per column j
    Tensor<T> logits({hw, hw});
    gemm(true, false, hw, hw, qk_ch_, T(1), q.data() + s * qk_ch_ * hw, hw,
         k.data() + s * qk_ch_ * hw, hw, T(0), logits.data(), hw);
    T* a = attn.data() + s * hw * hw;
    for (int64_t j = 0; j < hw; ++j) {
      T mx = logits[j];
      for (int64_t i = 1; i < hw; ++i) mx = std::max(mx, logits[i * hw + j]);
      T denom = 0;
      for (int64_t i = 0; i < hw; ++i) {
        const T e = std::exp(logits[i * hw + j] - mx);
        a[i * hw + j] = e;
        denom += e;
      }
      for (int64_t i = 0; i < hw; ++i) a[i * hw + j] /= denom;
    }
    gemm(false, false, v_ch_, hw, hw, T(1), v.data() + s * v_ch_ * hw, hw, a, hw, T(0),
         av.data() + s * v_ch_ * hw, hw);
  }
  Tensor<T> proj = out_.forward(av, pass);

  Tensor<T> y = x;
  const T gmm = gamma_[0];
  for (int64_t i = 0; i < y.numel(); ++i) y[i] += gmm * proj[i];

  if (pass.grad) {
    q_ = std::move(q);
    k_ = std::move(k);
    v_ = std::move(v);
    attn_ = std::move(attn);
    proj_ = std::move(proj);
    has_cache_ = true;
  }
  return y;
}

template <typename T>
Tensor<T> SelfAttention2d<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("attention: backward without cached forward");
  const int64_t n = gy.dim(0), h = gy.dim(2), w = gy.dim(3), hw = h * w;
  const T gmm = gamma_[0];

  if (param_grads) {
    T dg = 0;
    for (int64_t i = 0; i < gy.numel(); ++i) dg += gy[i] * proj_[i];
    ggamma_[0] += dg;
  }
  Tensor<T> dproj = gy;
  dproj.scale_(gmm);
  Tensor<T> dav = out_.backward(dproj, param_grads);

  Tensor<T> dq({n, qk_ch_, h, w});
  Tensor<T> dk({n, qk_ch_, h, w});
  Tensor<T> dv({n, v_ch_, h, w});
  for (int64_t s = 0; s < n; ++s) {
    const T* a = attn_.data() + s * hw * hw;
    // dV = dAV * attn^T
    gemm(false, true, v_ch_, hw, hw, T(1), dav.data() + s * v_ch_ * hw, hw, a, hw, T(0),
         dv.data() + s * v_ch_ * hw, hw);
    // dAttn = V^T * dAV
    Tensor<T> dattn({hw, hw});
    gemm(true, false, hw, hw, v_ch_, T(1), v_.data() + s * v_ch_ * hw, hw,
         dav.data() + s * v_ch_ * hw, hw, T(0), dattn.data(), hw);
    // softmax backward per column
    Tensor<T> dlogits({hw, hw});
    for (int64_t j = 0; j < hw; ++j) {
      T dot = 0;
      for (int64_t i = 0; i < hw; ++i) dot += a[i * hw + j] * dattn[i * hw + j];
      for (int64_t i = 0; i < hw; ++i)
        dlogits[i * hw + j] = a[i * hw + j] * (dattn[i * hw + j] - dot);
    }
    // logits = Q^T K: dQ = K dL^T, dK = Q dL
    gemm(false, true, qk_ch_, hw, hw, T(1), k_.data() + s * qk_ch_ * hw, hw, dlogits.data(), hw,
         T(0), dq.data() + s * qk_ch_ * hw, hw);
    gemm(false, false, qk_ch_, hw, hw, T(1), q_.data() + s * qk_ch_ * hw, hw, dlogits.data(), hw,
         T(0), dk.data() + s * qk_ch_ * hw, hw);
  }

  Tensor<T> gx = gy;  // identity branch
  gx.add_(theta_.backward(dq, param_grads));
  gx.add_(phi_.backward(dk, param_grads));
  gx.add_(g_.backward(dv, param_grads));
  has_cache_ = false;
  return gx;
}

template <typename T>
void SelfAttention2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  theta_.visit(prefix + "theta.", fn);
  phi_.visit(prefix + "phi.", fn);
  g_.visit(prefix + "g.", fn);
  out_.visit(prefix + "out.", fn);
  fn({prefix + "gamma", &gamma_, &ggamma_, false});
}

// ---- DBlock ----

template <typename T>
DBlock<T>::DBlock(int64_t in_ch, int64_t out_ch, bool down, bool pre_act, bool spectral_norm)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      down_(down),
      pre_act_(pre_act),
      learnable_sc_(in_ch != out_ch || down),
      conv1_(in_ch, out_ch, 3, spectral_norm),
      conv2_(out_ch, out_ch, 3, spectral_norm) {
  if (learnable_sc_) conv_sc_ = Conv2d<T>(in_ch, out_ch, 1, spectral_norm);
}

template <typename T>
void DBlock<T>::init(Rng& rng) {
  conv1_.init(rng);
  conv2_.init(rng);
  if (learnable_sc_) conv_sc_.init(rng);
}

template <typename T>
Tensor<T> DBlock<T>::forward(const Tensor<T>& x, const Pass& pass) {
  Tensor<T> h = pre_act_ ? relu(x) : x;
  Tensor<T> c1 = conv1_.forward(h, pass);
  Tensor<T> h1 = relu(c1);
  Tensor<T> m = conv2_.forward(h1, pass);
  if (down_) m = avg_pool2(m);

  Tensor<T> s;
  if (pre_act_) {
    s = learnable_sc_ ? conv_sc_.forward(x, pass) : x;
    if (down_) s = avg_pool2(s);
  } else {
    s = down_ ? avg_pool2(x) : x;
    if (learnable_sc_) s = conv_sc_.forward(s, pass);
  }
  m.add_(s);

  if (pass.grad) {
    x_ = x;
    h1_ = std::move(c1);
    in_h_ = x.dim(2);
    in_w_ = x.dim(3);
    has_cache_ = true;
  }
  return m;
}

template <typename T>
Tensor<T> DBlock<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("dblock: backward without cached forward");
  Tensor<T> dc2 = down_ ? avg_pool2_backward(gy, in_h_, in_w_) : gy;
  Tensor<T> dh1 = conv2_.backward(dc2, param_grads);
  Tensor<T> dc1 = relu_backward(dh1, h1_);
  Tensor<T> dh = conv1_.backward(dc1, param_grads);
  Tensor<T> dx_main = pre_act_ ? relu_backward(dh, x_) : std::move(dh);

  Tensor<T> dx_sc;
  if (pre_act_) {
    Tensor<T> ds = down_ ? avg_pool2_backward(gy, in_h_, in_w_) : gy;
    dx_sc = learnable_sc_ ? conv_sc_.backward(ds, param_grads) : std::move(ds);
  } else {
    Tensor<T> ds = learnable_sc_ ? conv_sc_.backward(gy, param_grads) : gy;
    dx_sc = down_ ? avg_pool2_backward(ds, in_h_, in_w_) : std::move(ds);
  }
  dx_main.add_(dx_sc);
  has_cache_ = false;
  x_ = Tensor<T>();
  h1_ = Tensor<T>();
  return dx_main;
}

template <typename T>
void DBlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  conv1_.visit(prefix + "conv1.", fn);
  conv2_.visit(prefix + "conv2.", fn);
  if (learnable_sc_) conv_sc_.visit(prefix + "conv_sc.", fn);
}

// ---- GBlock ----

template <typename T>
GBlock<T>::GBlock(int64_t in_ch, int64_t out_ch, int64_t cond_dim, bool spectral_norm)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      cbn1_(in_ch, cond_dim, false),
      cbn2_(out_ch, cond_dim, false),
      conv1_(in_ch, out_ch, 3, spectral_norm),
      conv2_(out_ch, out_ch, 3, spectral_norm),
      conv_sc_(in_ch, out_ch, 1, spectral_norm) {}

template <typename T>
void GBlock<T>::init(Rng& rng) {
  cbn1_.init(rng);
  cbn2_.init(rng);
  conv1_.init(rng);
  conv2_.init(rng);
  conv_sc_.init(rng);
}

template <typename T>
Tensor<T> GBlock<T>::forward(const Tensor<T>& x, const Tensor<T>& cond, const Pass& pass) {
  Tensor<T> n1 = cbn1_.forward(x, cond, pass);
  Tensor<T> h = relu(n1);
  h = upsample2(h);
  h = conv1_.forward(h, pass);
  Tensor<T> n2 = cbn2_.forward(h, cond, pass);
  Tensor<T> h2 = relu(n2);
  Tensor<T> m = conv2_.forward(h2, pass);

  Tensor<T> s = conv_sc_.forward(upsample2(x), pass);
  m.add_(s);

  if (pass.grad) {
    n1_ = std::move(n1);
    n2_ = std::move(n2);
    x_shape_ = x.shape();
    has_cache_ = true;
  }
  return m;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> GBlock<T>::backward(const Tensor<T>& gy, bool param_grads) {
  if (!has_cache_) throw ShapeError("gblock: backward without cached forward");
  Tensor<T> dh2 = conv2_.backward(gy, param_grads);
  Tensor<T> dn2 = relu_backward(dh2, n2_);
  auto [dc1, dcond2] = cbn2_.backward(dn2, param_grads);
  Tensor<T> du = conv1_.backward(dc1, param_grads);
  Tensor<T> dr = upsample2_backward(du);
  Tensor<T> dn1 = relu_backward(dr, n1_);
  auto [dx_main, dcond1] = cbn1_.backward(dn1, param_grads);

  Tensor<T> dus = conv_sc_.backward(gy, param_grads);
  dx_main.add_(upsample2_backward(dus));
  dcond1.add_(dcond2);

  has_cache_ = false;
  n1_ = Tensor<T>();
  n2_ = Tensor<T>();
  return {std::move(dx_main), std::move(dcond1)};
}

template <typename T>
void GBlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  cbn1_.visit(prefix + "cbn1.", fn);
  cbn2_.visit(prefix + "cbn2.", fn);
  conv1_.visit(prefix + "conv1.", fn);
  conv2_.visit(prefix + "conv2.", fn);
  conv_sc_.visit(prefix + "conv_sc.", fn);
}

// ---- explicit instantiations ----

#define DEEPI2I_INSTANTIATE(T)                                                        \
  template void orthogonal_init<T>(Tensor<T>&, int64_t, int64_t, Rng&);               \
  template Tensor<T> relu<T>(const Tensor<T>&);                                       \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> avg_pool2<T>(const Tensor<T>&);                                  \
  template Tensor<T> avg_pool2_backward<T>(const Tensor<T>&, int64_t, int64_t);       \
  template Tensor<T> upsample2<T>(const Tensor<T>&);                                  \
  template Tensor<T> upsample2_backward<T>(const Tensor<T>&);                         \
  template Tensor<T> global_sum_pool<T>(const Tensor<T>&);                            \
  template Tensor<T> global_sum_pool_backward<T>(const Tensor<T>&, int64_t, int64_t); \
  template Tensor<T> tanh_op<T>(const Tensor<T>&);                                    \
  template Tensor<T> tanh_backward<T>(const Tensor<T>&, const Tensor<T>&);            \
  template class Conv2d<T>;                                                           \
  template class Linear<T>;                                                           \
  template class Embedding<T>;                                                        \
  template class BatchNorm2d<T>;                                                      \
  template class ConditionalBatchNorm2d<T>;                                           \
  template class SelfAttention2d<T>;                                                  \
  template class DBlock<T>;                                                           \
  template class GBlock<T>;

DEEPI2I_INSTANTIATE(float)
DEEPI2I_INSTANTIATE(double)

#undef DEEPI2I_INSTANTIATE

}  // namespace deepi2i::nn

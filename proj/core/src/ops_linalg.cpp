#include <cstring>
#include <vector>

#include "gemm.hpp"
#include "motionmidi/errors.hpp"
#include "motionmidi/ops.hpp"

namespace motionmidi {

using detail::gemm;

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  gemm(false, false, m, n, k, 1.0, a.data(), k, b.data(), n, 0.0, out.data(),
       n);
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a, b, out, m, n, k]() mutable {
      const double* g = out.grad();
      if (a.requires_grad())
        gemm(false, true, m, k, n, 1.0, g, n, b.data(), n, 1.0, a.grad(), k);
      if (b.requires_grad())
        gemm(true, false, k, n, m, 1.0, a.data(), k, g, n, 1.0, b.grad(), n);
    });
  }
  return out;
}

Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: incompatible shapes " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out = Tensor::zeros({m, n});
  gemm(false, true, m, n, k, 1.0, a.data(), k, b.data(), k, 0.0, out.data(),
       n);
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([a, b, out, m, n, k]() mutable {
      const double* g = out.grad();
      if (a.requires_grad())
        gemm(false, false, m, k, n, 1.0, g, n, b.data(), k, 1.0, a.grad(), k);
      if (b.requires_grad())
        gemm(true, false, n, k, m, 1.0, g, n, a.data(), k, 1.0, b.grad(), k);
    });
  }
  return out;
}

namespace {

// out[t][i][:] += sum_j adj(i,j) * x[t][j][:]
void apply_adj(const SparseRows& adj, const double* x, double* out,
               std::size_t t_frames, std::size_t v, std::size_t c) {
  for (std::size_t t = 0; t < t_frames; ++t) {
    const double* xt = x + t * v * c;
    double* ot = out + t * v * c;
    for (std::size_t i = 0; i < v; ++i) {
      double* oi = ot + i * c;
      for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
        const double a = adj.val[p];
        const double* xj = xt + adj.col[p] * c;
        for (std::size_t q = 0; q < c; ++q) oi[q] += a * xj[q];
      }
    }
  }
}

// out[t][j][:] += sum_i adj(i,j) * g[t][i][:]  (transpose application)
void apply_adj_t(const SparseRows& adj, const double* g, double* out,
                 std::size_t t_frames, std::size_t v, std::size_t c) {
  for (std::size_t t = 0; t < t_frames; ++t) {
    const double* gt = g + t * v * c;
    double* ot = out + t * v * c;
    for (std::size_t i = 0; i < v; ++i) {
      const double* gi = gt + i * c;
      for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
        const double a = adj.val[p];
        double* oj = ot + adj.col[p] * c;
        for (std::size_t q = 0; q < c; ++q) oj[q] += a * gi[q];
      }
    }
  }
}

}  // namespace

Tensor spatial_gcn(Tape* tape, const Tensor& x, const SparseRows& adj,
                   const Tensor& w) {
  if (x.rank() != 3 || w.rank() != 2 || x.dim(2) != w.dim(0) ||
      x.dim(1) != adj.n) {
    throw DimensionError("spatial_gcn: incompatible shapes x=" +
                         shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                         " adj=" + std::to_string(adj.n));
  }
  const std::size_t t_frames = x.dim(0), v = x.dim(1), c_in = x.dim(2),
                    c_out = w.dim(1);
  // xa = A x (per frame), cached for the weight gradient
  Tensor xa = Tensor::zeros({t_frames, v, c_in});
  apply_adj(adj, x.data(), xa.data(), t_frames, v, c_in);
  Tensor out = Tensor::zeros({t_frames, v, c_out});
  gemm(false, false, t_frames * v, c_out, c_in, 1.0, xa.data(), c_in, w.data(),
       c_out, 0.0, out.data(), c_out);
  if (tape && (x.requires_grad() || w.requires_grad())) {
    out.set_requires_grad(true);
    SparseRows adj_copy = adj;
    tape->record([x, w, out, xa, adj = std::move(adj_copy), t_frames, v, c_in,
                  c_out]() mutable {
      const double* g = out.grad();
      if (w.requires_grad())
        gemm(true, false, c_in, c_out, t_frames * v, 1.0, xa.data(), c_in, g,
             c_out, 1.0, w.grad(), c_out);
      if (x.requires_grad()) {
        std::vector<double> dxa(t_frames * v * c_in, 0.0);
        gemm(false, true, t_frames * v, c_in, c_out, 1.0, g, c_out, w.data(),
             c_out, 0.0, dxa.data(), c_in);
        apply_adj_t(adj, dxa.data(), x.grad(), t_frames, v, c_in);
      }
    });
  }
  return out;
}

Tensor temporal_conv1d(Tape* tape, const Tensor& x, const Tensor& w,
                       const Tensor& bias, std::size_t stride) {
  if (x.rank() != 3 || w.rank() != 3 || bias.rank() != 1 ||
      x.dim(2) != w.dim(1) || w.dim(2) != bias.dim(0) || stride == 0) {
    throw DimensionError("temporal_conv1d: incompatible shapes x=" +
                         shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                         " bias=" + shape_str(bias.shape()));
  }
  const std::size_t t_in = x.dim(0), v = x.dim(1), c_in = x.dim(2);
  const std::size_t k = w.dim(0), c_out = w.dim(2);
  const std::size_t pad = (k - 1) / 2;
  if (t_in + 2 * pad < k) {
    throw LengthError("temporal_conv1d: input of " + std::to_string(t_in) +
                      " frames is shorter than kernel " + std::to_string(k));
  }
  const std::size_t t_out = (t_in + 2 * pad - k) / stride + 1;
  const std::size_t t_padded = t_in + 2 * pad;
  const std::size_t row = v * c_in;

  // zero-padded copy of the input along time
  std::vector<double> xp(t_padded * row, 0.0);
  std::memcpy(xp.data() + pad * row, x.data(), t_in * row * sizeof(double));

  Tensor out = Tensor::zeros({t_out, v, c_out});
  for (std::size_t r = 0; r < t_out * v; ++r)
    std::memcpy(out.data() + r * c_out, bias.data(), c_out * sizeof(double));

  std::vector<double> col;  // only used when stride > 1
  if (stride == 1) {
    // one GEMM per kernel tap against a shifted contiguous view
    for (std::size_t dt = 0; dt < k; ++dt) {
      gemm(false, false, t_out * v, c_out, c_in, 1.0, xp.data() + dt * row,
           c_in, w.data() + dt * c_in * c_out, c_out, 1.0, out.data(), c_out);
    }
  } else {
    col.assign(t_out * v * k * c_in, 0.0);
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t vv = 0; vv < v; ++vv)
        for (std::size_t dt = 0; dt < k; ++dt)
          std::memcpy(
              col.data() + ((t * v + vv) * k + dt) * c_in,
              xp.data() + (t * stride + dt) * row + vv * c_in,
              c_in * sizeof(double));
    gemm(false, false, t_out * v, c_out, k * c_in, 1.0, col.data(), k * c_in,
         w.data(), c_out, 1.0, out.data(), c_out);
  }

  if (tape && (x.requires_grad() || w.requires_grad() ||
               bias.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([x, w, bias, out, xp = std::move(xp), col = std::move(col),
                  t_in, t_out, t_padded, v, c_in, c_out, k, pad, stride,
                  row]() mutable {
      const double* g = out.grad();
      if (bias.requires_grad()) {
        double* gb = bias.grad();
        for (std::size_t r = 0; r < t_out * v; ++r)
          for (std::size_t j = 0; j < c_out; ++j) gb[j] += g[r * c_out + j];
      }
      if (stride == 1) {
        if (w.requires_grad()) {
          for (std::size_t dt = 0; dt < k; ++dt)
            gemm(true, false, c_in, c_out, t_out * v, 1.0,
                 xp.data() + dt * row, c_in, g, c_out, 1.0,
                 w.grad() + dt * c_in * c_out, c_out);
        }
        if (x.requires_grad()) {
          std::vector<double> dxp(t_padded * row, 0.0);
          for (std::size_t dt = 0; dt < k; ++dt)
            gemm(false, true, t_out * v, c_in, c_out, 1.0, g, c_out,
                 w.data() + dt * c_in * c_out, c_out, 1.0,
                 dxp.data() + dt * row, c_in);
          x.accumulate_grad(dxp.data() + pad * row, t_in * row);
        }
      } else {
        if (w.requires_grad())
          gemm(true, false, k * c_in, c_out, t_out * v, 1.0, col.data(),
               k * c_in, g, c_out, 1.0, w.grad(), c_out);
        if (x.requires_grad()) {
          std::vector<double> dcol(t_out * v * k * c_in, 0.0);
          gemm(false, true, t_out * v, k * c_in, c_out, 1.0, g, c_out,
               w.data(), c_out, 0.0, dcol.data(), k * c_in);
          std::vector<double> dxp(t_padded * row, 0.0);
          for (std::size_t t = 0; t < t_out; ++t)
            for (std::size_t vv = 0; vv < v; ++vv)
              for (std::size_t dt = 0; dt < k; ++dt) {
                const double* src = dcol.data() + ((t * v + vv) * k + dt) * c_in;
                double* dst =
                    dxp.data() + (t * stride + dt) * row + vv * c_in;
                for (std::size_t q = 0; q < c_in; ++q) dst[q] += src[q];
              }
          x.accumulate_grad(dxp.data() + pad * row, t_in * row);
        }
      }
    });
  }
  return out;
}

Tensor stride_frames(Tape* tape, const Tensor& x, std::size_t stride,
                     std::size_t t_out) {
  if (x.rank() != 3 || stride == 0 || t_out == 0 ||
      (t_out - 1) * stride >= x.dim(0)) {
    throw DimensionError("stride_frames: cannot take " + std::to_string(t_out) +
                         " frames at stride " + std::to_string(stride) +
                         " from " + shape_str(x.shape()));
  }
  const std::size_t v = x.dim(1), c = x.dim(2), row = v * c;
  Tensor out = Tensor::zeros({t_out, v, c});
  for (std::size_t t = 0; t < t_out; ++t)
    std::memcpy(out.data() + t * row, x.data() + t * stride * row,
                row * sizeof(double));
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([x, out, stride, t_out, row]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t t = 0; t < t_out; ++t) {
        double* dst = gx + t * stride * row;
        const double* src = g + t * row;
        for (std::size_t q = 0; q < row; ++q) dst[q] += src[q];
      }
    });
  }
  return out;
}

}  // namespace motionmidi

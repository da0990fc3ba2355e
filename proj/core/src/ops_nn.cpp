#include <algorithm>
#include <cmath>
#include <vector>

#include "motionmidi/errors.hpp"
#include "motionmidi/ops.hpp"

namespace motionmidi {

BatchNorm1d::BatchNorm1d(std::size_t features) {
  gamma = Tensor::full({features}, 1.0, true);
  beta = Tensor::zeros({features}, true);
  running_mean = Tensor::zeros({features});
  running_var = Tensor::full({features}, 1.0);
}

void BatchNorm1d::fold_running(const BatchNormStats& stats) {
  const std::size_t c = features();
  const double n = static_cast<double>(stats.n);
  const double correction = stats.n > 1 ? n / (n - 1.0) : 1.0;
  for (std::size_t j = 0; j < c; ++j) {
    running_mean.at(j) =
        (1.0 - momentum) * running_mean.at(j) + momentum * stats.mean[j];
    running_var.at(j) = (1.0 - momentum) * running_var.at(j) +
                        momentum * stats.var[j] * correction;
  }
}

Tensor BatchNorm1d::forward(Tape* tape, const Tensor& x, bool training,
                            BatchNormStats* deferred) {
  const std::size_t c = features();
  if (x.rank() != 2 || x.dim(1) != c) {
    throw DimensionError("batch_norm: expected [N x " + std::to_string(c) +
                         "], got " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0);
  Tensor out = Tensor::zeros(x.shape());

  if (!training) {
    std::vector<double> invstd(c);
    for (std::size_t j = 0; j < c; ++j)
      invstd[j] = 1.0 / std::sqrt(running_var.at(j) + eps);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < c; ++j)
        out.at2(r, j) = gamma.at(j) * (x.at2(r, j) - running_mean.at(j)) *
                            invstd[j] +
                        beta.at(j);
    if (tape && (x.requires_grad() || gamma.requires_grad() ||
                 beta.requires_grad())) {
      out.set_requires_grad(true);
      Tensor g_ = gamma, b_ = beta, rm = running_mean;
      tape->record([x, out, g_, b_, rm, invstd, n, c]() mutable {
        const double* g = out.grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double go = g[r * c + j];
            const double xhat = (x.at2(r, j) - rm.at(j)) * invstd[j];
            if (x.requires_grad())
              x.grad()[r * c + j] += go * g_.at(j) * invstd[j];
            if (g_.requires_grad()) g_.grad()[j] += go * xhat;
            if (b_.requires_grad()) b_.grad()[j] += go;
          }
      });
    }
    return out;
  }

  BatchNormStats stats;
  stats.n = n;
  stats.mean.assign(c, 0.0);
  stats.var.assign(c, 0.0);
  const double invn = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) stats.mean[j] += x.at2(r, j);
  for (std::size_t j = 0; j < c; ++j) stats.mean[j] *= invn;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x.at2(r, j) - stats.mean[j];
      stats.var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) stats.var[j] *= invn;

  Tensor xhat = Tensor::zeros(x.shape());  // cached for backward
  std::vector<double> invstd(c);
  for (std::size_t j = 0; j < c; ++j)
    invstd[j] = 1.0 / std::sqrt(stats.var[j] + eps);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x.at2(r, j) - stats.mean[j]) * invstd[j];
      xhat.at2(r, j) = h;
      out.at2(r, j) = gamma.at(j) * h + beta.at(j);
    }

  if (deferred != nullptr) {
    *deferred = stats;
  } else {
    fold_running(stats);
  }

  if (tape && (x.requires_grad() || gamma.requires_grad() ||
               beta.requires_grad())) {
    out.set_requires_grad(true);
    Tensor g_ = gamma, b_ = beta;
    tape->record([x, out, xhat, g_, b_, invstd, n, c, invn]() mutable {
      const double* g = out.grad();
      if (g_.requires_grad() || b_.requires_grad()) {
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double go = g[r * c + j];
            if (g_.requires_grad()) g_.grad()[j] += go * xhat.at2(r, j);
            if (b_.requires_grad()) b_.grad()[j] += go;
          }
      }
      if (x.requires_grad()) {
        std::vector<double> sum_g(c, 0.0), sum_gh(c, 0.0);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double gh = g[r * c + j] * g_.at(j);
            sum_g[j] += gh;
            sum_gh[j] += gh * xhat.at2(r, j);
          }
        double* gx = x.grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double gh = g[r * c + j] * g_.at(j);
            gx[r * c + j] += invstd[j] * (gh - invn * sum_g[j] -
                                          xhat.at2(r, j) * invn * sum_gh[j]);
          }
      }
    });
  }
  return out;
}

LayerNorm::LayerNorm(std::size_t features) {
  gamma = Tensor::full({features}, 1.0, true);
  beta = Tensor::zeros({features}, true);
}

Tensor LayerNorm::forward(Tape* tape, const Tensor& x) const {
  const std::size_t c = gamma.size();
  if (x.rank() != 2 || x.dim(1) != c) {
    throw DimensionError("layer_norm: expected [N x " + std::to_string(c) +
                         "], got " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0);
  const double invc = 1.0 / static_cast<double>(c);
  Tensor out = Tensor::zeros(x.shape());
  Tensor xhat = Tensor::zeros(x.shape());
  std::vector<double> invstd(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x.at2(r, j);
    mean *= invc;
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = x.at2(r, j) - mean;
      var += d * d;
    }
    var *= invc;
    invstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (x.at2(r, j) - mean) * invstd[r];
      xhat.at2(r, j) = h;
      out.at2(r, j) = gamma.at(j) * h + beta.at(j);
    }
  }
  if (tape && (x.requires_grad() || gamma.requires_grad() ||
               beta.requires_grad())) {
    out.set_requires_grad(true);
    Tensor g_ = gamma, b_ = beta;
    tape->record([x, out, xhat, g_, b_, invstd, n, c, invc]() mutable {
      const double* g = out.grad();
      for (std::size_t r = 0; r < n; ++r) {
        double sum_g = 0.0, sum_gh = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double go = g[r * c + j];
          if (g_.requires_grad()) g_.grad()[j] += go * xhat.at2(r, j);
          if (b_.requires_grad()) b_.grad()[j] += go;
          const double gh = go * g_.at(j);
          sum_g += gh;
          sum_gh += gh * xhat.at2(r, j);
        }
        if (x.requires_grad()) {
          double* gx = x.grad();
          for (std::size_t j = 0; j < c; ++j) {
            const double gh = g[r * c + j] * g_.at(j);
            gx[r * c + j] += invstd[r] * (gh - invc * sum_g -
                                          xhat.at2(r, j) * invc * sum_gh);
          }
        }
      }
    });
  }
  return out;
}

namespace {

std::size_t table_radius(const Tensor& table) {
  if (table.rank() != 2 || table.dim(0) % 2 == 0) {
    throw DimensionError(
        "relative logits: table must be [(2M-1) x D], got " +
        shape_str(table.shape()));
  }
  return (table.dim(0) + 1) / 2;  // M
}

}  // namespace

Tensor relative_logits_naive(Tape* tape, const Tensor& q,
                             const Tensor& table) {
  const std::size_t m = table_radius(table);
  if (q.rank() != 2 || q.dim(1) != table.dim(1)) {
    throw DimensionError("relative logits: q " + shape_str(q.shape()) +
                         " vs table " + shape_str(table.shape()));
  }
  const std::size_t t = q.dim(0), d = q.dim(1);
  const std::int64_t radius = static_cast<std::int64_t>(m) - 1;
  Tensor out = Tensor::zeros({t, t});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      std::int64_t dist = static_cast<std::int64_t>(j) -
                          static_cast<std::int64_t>(i);
      dist = std::clamp(dist, -radius, radius);
      const double* row = table.data() + (dist + radius) * d;
      const double* qi = q.data() + i * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += qi[k] * row[k];
      out.at2(i, j) = s;
    }
  if (tape && (q.requires_grad() || table.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([q, table, out, t, d, radius]() mutable {
      const double* g = out.grad();
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j) {
          std::int64_t dist = static_cast<std::int64_t>(j) -
                              static_cast<std::int64_t>(i);
          dist = std::clamp(dist, -radius, radius);
          const double go = g[i * t + j];
          if (go == 0.0) continue;
          const std::size_t row = dist + radius;
          if (q.requires_grad()) {
            double* gq = q.grad() + i * d;
            const double* tr = table.data() + row * d;
            for (std::size_t k = 0; k < d; ++k) gq[k] += go * tr[k];
          }
          if (table.requires_grad()) {
            double* gt = table.grad() + row * d;
            const double* qi = q.data() + i * d;
            for (std::size_t k = 0; k < d; ++k) gt[k] += go * qi[k];
          }
        }
    });
  }
  return out;
}

namespace {

// The pad-reshape-slice rearrangement: out(i,j) = s(i, j-i+T-1) for j <= i.
// Mechanically: prepend one zero column to S [T x T], read the T x (T+1)
// buffer as (T+1) x T and drop the first row. Entries with j > i spill into
// neighbouring rows and are meaningless; callers mask them.
Tensor skew_causal(Tape* tape, const Tensor& s) {
  const std::size_t t = s.dim(0);
  Tensor out = Tensor::zeros({t, t});
  const std::size_t width = t + 1;
  for (std::size_t kflat = 0; kflat < t * t; ++kflat) {
    const std::size_t mflat = kflat + t;  // skip the dropped first row
    const std::size_t col = mflat % width;
    if (col == 0) continue;  // the padded zero column
    out.at(kflat) = s.at((mflat / width) * t + (col - 1));
  }
  if (tape && s.requires_grad()) {
    out.set_requires_grad(true);
    tape->record([s, out, t, width]() mutable {
      const double* g = out.grad();
      double* gs = s.grad();
      for (std::size_t kflat = 0; kflat < t * t; ++kflat) {
        const std::size_t mflat = kflat + t;
        const std::size_t col = mflat % width;
        if (col == 0) continue;
        gs[(mflat / width) * t + (col - 1)] += g[kflat];
      }
    });
  }
  return out;
}

}  // namespace

Tensor relative_logits_skewed(Tape* tape, const Tensor& q,
                              const Tensor& table) {
  const std::size_t m = table_radius(table);
  if (q.rank() != 2 || q.dim(1) != table.dim(1)) {
    throw DimensionError("relative logits: q " + shape_str(q.shape()) +
                         " vs table " + shape_str(table.shape()));
  }
  const std::size_t t = q.dim(0);
  const std::int64_t radius = static_cast<std::int64_t>(m) - 1;
  // Rows of the table for distances -(T-1)..0, clipped at the table edge.
  std::vector<int> idx(t);
  for (std::size_t r = 0; r < t; ++r) {
    std::int64_t dist = static_cast<std::int64_t>(r) -
                        (static_cast<std::int64_t>(t) - 1);
    dist = std::clamp(dist, -radius, radius);
    idx[r] = static_cast<int>(dist + radius);
  }
  Tensor rows = embedding_lookup(tape, table, idx);
  Tensor s = matmul_nt(tape, q, rows);
  return skew_causal(tape, s);
}

}  // namespace motionmidi

#include <algorithm>
#include <cmath>
#include <cstring>

#include "motionmidi/errors.hpp"
#include "motionmidi/ops.hpp"

namespace motionmidi {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

bool tracked(const Tape* tape, const Tensor& t) {
  return tape != nullptr && t.requires_grad();
}

// Axis -> (outer, n, inner) decomposition for strided reductions.
struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i);
  if (tracked(tape, a) || tracked(tape, b)) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      const double* g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g, a.size());
      if (b.requires_grad()) b.accumulate_grad(g, b.size());
    });
  }
  return out;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) - b.at(i);
  if (tracked(tape, a) || tracked(tape, b)) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      const double* g = out.grad();
      if (a.requires_grad()) a.accumulate_grad(g, a.size());
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (std::size_t i = 0; i < b.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
  if (tracked(tape, a) || tracked(tape, b)) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      const double* g = out.grad();
      if (a.requires_grad()) {
        double* ga = a.grad();
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * b.at(i);
      }
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[i] * a.at(i);
      }
    });
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& a, double factor) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = a.at(i) * factor;
  if (tracked(tape, a)) {
    out.set_requires_grad(true);
    tape->record([a, out, factor]() mutable {
      const double* g = out.grad();
      double* ga = a.grad();
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.at(i) = x.at(i) > 0.0 ? x.at(i) : 0.0;
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x.at(i) > 0.0) gx[i] += g[i];
    });
  }
  return out;
}

Tensor bias_add(Tape* tape, const Tensor& x, const Tensor& bias) {
  if (x.rank() < 1 || bias.rank() != 1 ||
      x.shape().back() != bias.dim(0)) {
    throw DimensionError("bias_add: shape mismatch " + shape_str(x.shape()) +
                         " vs " + shape_str(bias.shape()));
  }
  const std::size_t c = bias.dim(0);
  const std::size_t rows = x.size() / c;
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j)
      out.at(r * c + j) = x.at(r * c + j) + bias.at(j);
  if (tracked(tape, x) || tracked(tape, bias)) {
    out.set_requires_grad(true);
    tape->record([x, bias, out, rows, c]() mutable {
      const double* g = out.grad();
      if (x.requires_grad()) x.accumulate_grad(g, x.size());
      if (bias.requires_grad()) {
        double* gb = bias.grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].dim(0);
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      throw DimensionError("concat_cols: shape mismatch " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  Tensor out = Tensor::zeros({rows, total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.dim(1);
    for (std::size_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * total + off, p.data() + r * c,
                  c * sizeof(double));
    off += c;
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || tracked(tape, p);
  if (any) {
    out.set_requires_grad(true);
    tape->record([parts, out, rows, total]() mutable {
      const double* g = out.grad();
      std::size_t off = 0;
      for (Tensor& p : parts) {
        const std::size_t c = p.dim(1);
        if (p.requires_grad()) {
          double* gp = p.grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j)
              gp[r * c + j] += g[r * total + off + j];
        }
        off += c;
      }
    });
  }
  return out;
}

Tensor slice_cols(Tape* tape, const Tensor& x, std::size_t c0,
                  std::size_t c1) {
  if (x.rank() != 2 || c1 > x.dim(1) || c0 >= c1) {
    throw DimensionError("slice_cols: invalid range [" + std::to_string(c0) +
                         "," + std::to_string(c1) + ") for shape " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1), c = c1 - c0;
  Tensor out = Tensor::zeros({rows, c});
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * c, x.data() + r * cols + c0,
                c * sizeof(double));
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, rows, cols, c0, c]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j)
          gx[r * cols + c0 + j] += g[r * c + j];
    });
  }
  return out;
}

Tensor reshape(Tape* tape, const Tensor& x, Shape shape) {
  Tensor out = Tensor::from_data(std::move(shape), x.values());
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      x.accumulate_grad(out.grad(), x.size());
    });
  }
  return out;
}

Tensor mean_axis(Tape* tape, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::zeros(out_shape);
  const double inv = 1.0 / static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k) {
      const double* src = x.data() + (o * s.n + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * inv;
    }
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, s, inv]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < s.n; ++k) {
          double* dst = gx + (o * s.n + k) * s.inner;
          const double* src = g + o * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * inv;
        }
    });
  }
  return out;
}

Tensor max_axis(Tape* tape, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::zeros(out_shape);
  // argmax per output slot; first maximum wins for determinism
  std::vector<std::size_t> arg(out.size(), 0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double best = x.at((o * s.n) * s.inner + i);
      std::size_t best_k = 0;
      for (std::size_t k = 1; k < s.n; ++k) {
        const double v = x.at((o * s.n + k) * s.inner + i);
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      out.at(o * s.inner + i) = best;
      arg[o * s.inner + i] = best_k;
    }
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, s, arg]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t k = arg[o * s.inner + i];
          gx[(o * s.n + k) * s.inner + i] += g[o * s.inner + i];
        }
    });
  }
  return out;
}

Tensor transpose2d(Tape* tape, const Tensor& x) {
  if (x.rank() != 2)
    throw DimensionError("transpose2d: expected rank 2, got " +
                         shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at2(j, i) = x.at2(i, j);
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, r, c]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    });
  }
  return out;
}

Tensor masked_fill(Tape* tape, const Tensor& x,
                   std::span<const std::uint8_t> mask, double value) {
  if (mask.size() != x.size()) {
    throw DimensionError("masked_fill: mask length " +
                         std::to_string(mask.size()) +
                         " does not match tensor " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.at(i) = mask[i] ? value : x.at(i);
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    tape->record([x, out, m = std::move(m)]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!m[i]) gx[i] += g[i];
    });
  }
  return out;
}

Tensor softmax(Tape* tape, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double m = x.at(base);
      for (std::size_t k = 1; k < s.n; ++k)
        m = std::max(m, x.at(base + k * s.inner));
      double sum = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double e = std::exp(x.at(base + k * s.inner) - m);
        out.at(base + k * s.inner) = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (std::size_t k = 0; k < s.n; ++k) out.at(base + k * s.inner) *= inv;
    }
  if (tracked(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, s]() mutable {
      const double* g = out.grad();
      double* gx = x.grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.n * s.inner + i;
          double dot = 0.0;
          for (std::size_t k = 0; k < s.n; ++k) {
            const std::size_t idx = base + k * s.inner;
            dot += g[idx] * out.at(idx);
          }
          for (std::size_t k = 0; k < s.n; ++k) {
            const std::size_t idx = base + k * s.inner;
            gx[idx] += out.at(idx) * (g[idx] - dot);
          }
        }
    });
  }
  return out;
}

Tensor embedding_lookup(Tape* tape, const Tensor& table,
                        std::span<const int> ids) {
  if (table.rank() != 2)
    throw DimensionError("embedding_lookup: table must be rank 2");
  const std::size_t l = table.dim(0), d = table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= l) {
      throw VocabularyError("embedding_lookup: id " + std::to_string(ids[i]) +
                            " outside vocabulary of size " + std::to_string(l));
    }
  }
  Tensor out = Tensor::zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::memcpy(out.data() + i * d,
                table.data() + static_cast<std::size_t>(ids[i]) * d,
                d * sizeof(double));
  if (tracked(tape, table)) {
    out.set_requires_grad(true);
    std::vector<int> idv(ids.begin(), ids.end());
    tape->record([table, out, idv = std::move(idv), d]() mutable {
      const double* g = out.grad();
      double* gt = table.grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        double* row = gt + static_cast<std::size_t>(idv[i]) * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += g[i * d + j];
      }
    });
  }
  return out;
}

CeLoss cross_entropy_sum(Tape* tape, const Tensor& logits,
                         std::span<const int> targets,
                         std::span<const std::uint8_t> mask) {
  if (logits.rank() != 2)
    throw DimensionError("cross_entropy: logits must be [N x L]");
  const std::size_t n = logits.dim(0), l = logits.dim(1);
  if (targets.size() != n || mask.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(n) +
                         " rows but " + std::to_string(targets.size()) +
                         " targets / " + std::to_string(mask.size()) +
                         " mask entries");
  }
  // probs cached for the backward rule
  Tensor probs = Tensor::zeros({n, l});
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!mask[r]) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= l) {
      throw VocabularyError("cross_entropy: target " +
                            std::to_string(targets[r]) + " at row " +
                            std::to_string(r) + " outside vocabulary of size " +
                            std::to_string(l));
    }
    const double* row = logits.data() + r * l;
    double m = row[0];
    for (std::size_t j = 1; j < l; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      const double e = std::exp(row[j] - m);
      probs.at2(r, j) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < l; ++j) probs.at2(r, j) *= inv;
    total += m + std::log(sum) - row[static_cast<std::size_t>(targets[r])];
    ++count;
  }
  Tensor out = Tensor::scalar(total);
  if (tape && logits.requires_grad()) {
    out.set_requires_grad(true);
    std::vector<int> tv(targets.begin(), targets.end());
    std::vector<std::uint8_t> mv(mask.begin(), mask.end());
    tape->record([logits, out, probs, tv = std::move(tv), mv = std::move(mv),
                  n, l]() mutable {
      const double go = out.grad()[0];
      double* gx = logits.grad();
      for (std::size_t r = 0; r < n; ++r) {
        if (!mv[r]) continue;
        const double* p = probs.data() + r * l;
        double* gr = gx + r * l;
        for (std::size_t j = 0; j < l; ++j) gr[j] += go * p[j];
        gr[static_cast<std::size_t>(tv[r])] -= go;
      }
    });
  }
  return {out, count};
}

Tensor cross_entropy_mean(Tape* tape, const Tensor& logits,
                          std::span<const int> targets,
                          std::span<const std::uint8_t> mask) {
  CeLoss ce = cross_entropy_sum(tape, logits, targets, mask);
  if (ce.count == 0)
    throw DimensionError("cross_entropy: mask selects no positions");
  return scale(tape, ce.sum, 1.0 / static_cast<double>(ce.count));
}

}  // namespace motionmidi

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "motionmidi/tensor.hpp"

namespace motionmidi {

/// Logit value used for masked attention positions. Finite so tensors never
/// carry infinities, yet exp(kMaskedLogit - max) underflows to exactly 0.
inline constexpr double kMaskedLogit = -1e30;

/// Sparse row-major matrix (CSR without the class ceremony); rows hold the
/// row-normalized adjacency in graph ops.
struct SparseRows {
  std::size_t n = 0;                 // square: n x n
  std::vector<std::size_t> row_ptr;  // n + 1 entries
  std::vector<std::size_t> col;
  std::vector<double> val;
};

// ---------------------------------------------------------------------------
// Elementwise and shaping ops. Every op computes its forward value and, when
// `tape` is non-null and an input requires gradients, records the backward
// rule on the tape. Passing tape == nullptr runs pure inference.
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double factor);
Tensor relu(Tape* tape, const Tensor& x);

/// x[..., C] + bias[C], broadcast over leading dimensions.
Tensor bias_add(Tape* tape, const Tensor& x, const Tensor& bias);

/// Concatenate 2-D tensors along columns; inverse of slice_cols.
Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts);
Tensor slice_cols(Tape* tape, const Tensor& x, std::size_t c0, std::size_t c1);

/// Copying reshape (same element count).
Tensor reshape(Tape* tape, const Tensor& x, Shape shape);

/// Mean over one axis; output drops that axis.
Tensor mean_axis(Tape* tape, const Tensor& x, std::size_t axis);

/// Max over one axis (used by the encoder's optional max aggregation).
Tensor max_axis(Tape* tape, const Tensor& x, std::size_t axis);

/// 2-D transpose (copying).
Tensor transpose2d(Tape* tape, const Tensor& x);

/// Where mask[i] is nonzero the output takes `value` (no gradient flows);
/// elsewhere it passes x through. mask.size() == x.size().
Tensor masked_fill(Tape* tape, const Tensor& x,
                   std::span<const std::uint8_t> mask, double value);

// ---------------------------------------------------------------------------
// Linear algebra.
// ---------------------------------------------------------------------------

/// [MxK] x [KxN] -> [MxN].
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

/// a x b^T for row-major b: [MxK] x [NxK] -> [MxN].
Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b);

/// Softmax along `axis`, computed with max subtraction.
Tensor softmax(Tape* tape, const Tensor& x, std::size_t axis);

/// Rows of `table` selected by ids: [N x D] output. Backward scatter-adds
/// into the table gradient.
Tensor embedding_lookup(Tape* tape, const Tensor& table,
                        std::span<const int> ids);

/// Graph-convolution spatial step: per frame t, out[t] = A * x[t] * w.
/// x: [T x V x C_in], w: [C_in x C_out], adj: V x V sparse row-normalized.
Tensor spatial_gcn(Tape* tape, const Tensor& x, const SparseRows& adj,
                   const Tensor& w);

/// 1-D convolution along the leading (time) axis, independently per node.
/// x: [T x V x C_in], w: [k x C_in x C_out], bias: [C_out]; symmetric zero
/// padding of (k-1)/2 frames; output [T_out x V x C_out] with
/// T_out = (T + 2p - k)/stride + 1.
Tensor temporal_conv1d(Tape* tape, const Tensor& x, const Tensor& w,
                       const Tensor& bias, std::size_t stride);

/// Strided copy of every `stride`-th frame (used by residual paths).
/// x: [T x V x C] -> [T_out x V x C], frame t_out <- t_out * stride.
Tensor stride_frames(Tape* tape, const Tensor& x, std::size_t stride,
                     std::size_t t_out);

// ---------------------------------------------------------------------------
// Losses.
// ---------------------------------------------------------------------------

struct CeLoss {
  Tensor sum;         // scalar: total negative log-likelihood in nats
  std::size_t count;  // number of positions that contributed
};

/// Summed cross entropy over rows where mask is nonzero. targets must lie in
/// [0, L) at masked rows; violations raise VocabularyError.
CeLoss cross_entropy_sum(Tape* tape, const Tensor& logits,
                         std::span<const int> targets,
                         std::span<const std::uint8_t> mask);

/// Mean negative log-likelihood in nats over masked rows.
Tensor cross_entropy_mean(Tape* tape, const Tensor& logits,
                          std::span<const int> targets,
                          std::span<const std::uint8_t> mask);

// ---------------------------------------------------------------------------
// Normalization layers (own their parameters).
// ---------------------------------------------------------------------------

/// Per-feature statistics of one training-mode forward; lets a caller defer
/// the running-average update (e.g. to keep an exact fold order).
struct BatchNormStats {
  std::vector<double> mean, var;  // biased variance
  std::size_t n = 0;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t features);

  /// x: [N x C]. Training mode normalizes with batch statistics; eval mode
  /// uses the running averages. When `deferred` is non-null in training mode
  /// the batch statistics are written there instead of being folded into the
  /// running buffers immediately.
  Tensor forward(Tape* tape, const Tensor& x, bool training,
                 BatchNormStats* deferred = nullptr);

  void fold_running(const BatchNormStats& stats);

  std::size_t features() const { return gamma.defined() ? gamma.size() : 0; }

  Tensor gamma, beta;                    // trainable
  Tensor running_mean, running_var;      // eval-mode state (unbiased var)
  double eps = 1e-5;
  double momentum = 0.1;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t features);

  /// Row-wise normalization of [N x C].
  Tensor forward(Tape* tape, const Tensor& x) const;

  Tensor gamma, beta;
  double eps = 1e-5;
};

// ---------------------------------------------------------------------------
// Relative-position logits (decoder self-attention support).
// ---------------------------------------------------------------------------

/// Reference path: out[i][j] = q_i . table[clip(j - i)] with distances
/// clipped to the table extent. q: [T x D], table: [(2M-1) x D] where row
/// M-1 is distance 0. Valid for any mask.
Tensor relative_logits_naive(Tape* tape, const Tensor& q, const Tensor& table);

/// Memory-efficient skewing path: one [T x D] x [D x T] product of q against
/// the clipped distance rows, then the pad-reshape-slice rearrangement.
/// Entries above the diagonal (j > i) are unspecified and must be masked, so
/// this path is only for causal attention.
Tensor relative_logits_skewed(Tape* tape, const Tensor& q,
                              const Tensor& table);

}  // namespace motionmidi

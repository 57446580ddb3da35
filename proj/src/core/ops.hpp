#pragma once

// Differentiable tensor operations. Matrices are row-major; a tensor of any
// rank is treated as [rows, last_dim] wherever an op works on rows.

#include "autograd.hpp"

#include <span>
#include <vector>

namespace rw::ag {

Var constant(Tensor t);

Var matmul(const Var& a, const Var& b);
// x[n,in] * w[in,out] + b[out]; b may be undefined.
Var linear(const Var& x, const Var& w, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Real s);
// x[..., d] op row[d], broadcast over rows.
Var add_row(const Var& x, const Var& row);
Var mul_row(const Var& x, const Var& row);
// Per-row scalar: x[n, d] * s[n].
Var mul_col(const Var& x, const Var& s);

Var silu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);

// Row-wise normalization to zero mean and unit variance, no affine terms.
Var layer_norm(const Var& x, Real eps);
Var softmax_rows(const Var& x);
Var log_softmax_rows(const Var& x);

Var reshape(const Var& x, std::vector<int> shape);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& x, int start, int len);
Var slice_rows(const Var& x, int start, int len);

Var sum(const Var& x);
Var mean(const Var& x);
// Column means of x[n, d] -> [d].
Var mean_rows(const Var& x);

// 2D convolution on an HWC map stored as [H*W, cin]. Weights are
// [k*k*cin, cout] in (ky, kx, cin) order. Zero padding.
struct ConvGeometry {
    int height = 0;
    int width = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;
    int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
    int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};
Var conv2d(const Var& x, const Var& w, const Var& b, const ConvGeometry& geo);

// Bilinear sampling of a map [H*W, C] at fixed continuous (row, col)
// positions pos[n, 2]. Samples outside the map read zeros.
Var bilinear_sample(const Var& map, int height, int width, const Tensor& pos);

// Multi-head deformable sampling. value is [H*W, heads*head_dim];
// loc is [n, heads*points*2] holding (row, col) per point; weights is
// [n, heads*points]. Output [n, heads*head_dim] is the weighted sum of
// bilinear samples per head. Differentiable in all three inputs.
Var deform_sample(const Var& value, int height, int width, int heads, const Var& loc, const Var& weights);

// Mean negative log-likelihood of integer targets under row logits.
Var cross_entropy(const Var& logits, std::span<const int> targets);
// Mean binary cross-entropy of logits x[n] against targets in {0,1}.
Var bce_with_logits(const Var& x, std::span<const Real> targets);
// log(sum_{c>0} exp(x_c)) - x_0 per row: the logit of 1 - P(class 0).
Var occupied_logit(const Var& logits);
// Lovasz-softmax over classes present in targets. probs[n, C].
Var lovasz_softmax(const Var& probs, std::span<const int> targets);

Var mse(const Var& a, const Var& b);

}  // namespace rw::ag

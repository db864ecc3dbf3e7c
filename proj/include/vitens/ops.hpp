#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "vitens/tape.hpp"

// Differentiable kernels. Every kernel records its own backward rule on the
// tape of its first input; all inputs must live on the same tape.
//
// Broadcasting is limited to bias vectors (linear, conv2d, the affine part
// of the normalizations). Everything else requires matching shapes and an
// explicit reshape.
namespace vitens::ops {

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// x:[rows,in] (or [in]) times w:[in,out] plus b:[out], row-broadcast.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);  // -> rank-0 scalar

// tanh approximation:
//   gelu(x) = 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

// Softmax over the last axis.
Tensor softmax(const Tensor& x);
// -log softmax(logits)[label]; logits holds the class scores in any shape.
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);

// Row-wise normalization of x:[rows,d] (or [d]) with scale/shift of shape [d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);
// x:[C,H,W], channels split into `groups` contiguous groups.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t groups,
                  double eps = 1e-5);

// x:[C_in,H,W], w:[C_out,C_in,k,k], b:[C_out] -> [C_out,H',W'],
// H' = (H + 2*pad - k) / stride + 1, which must divide exactly.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t pad);
// Non-overlapping k x k max pooling of x:[C,H,W]; H and W divisible by k.
Tensor max_pool2d(const Tensor& x, std::size_t k);
// Mean over every axis but the first: [C,...] -> [C].
Tensor global_avg_pool(const Tensor& x);

// qkv:[T, 3d] packed as [q | k | v]; heads split each d-wide block into
// contiguous slices. Returns the concatenated head outputs [T, d].
Tensor multi_head_attention(const Tensor& qkv, std::size_t num_heads);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // 2-D only
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_rows(const Tensor& a, const Tensor& b);

// out[i] = index[i] < 0 ? 0 : x[index[i]]. Gradient scatters back along the
// same map, so any resampling expressed as an index map is differentiable.
using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;
Tensor gather(const Tensor& x, Shape out_shape, IndexMap index);

// Rows of table:[V,d] selected by `indices` -> [len, d].
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& indices);

}  // namespace vitens::ops

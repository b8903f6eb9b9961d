#pragma once

#include <vector>

#include "gapcast/nd/graph.hpp"
#include "gapcast/nd/tensor.hpp"

namespace gapcast::nd {

enum class Unary { sigmoid, tanh, negate, one_minus };
enum class Binary { add, subtract, multiply };

// Elementwise ops. Binary ops require identical shapes (no broadcasting).
Tensor elementwise(Graph& g, Unary kind, const Tensor& a);
Tensor elementwise(Graph& g, Binary kind, const Tensor& a, const Tensor& b);

inline Tensor sigmoid(Graph& g, const Tensor& a) { return elementwise(g, Unary::sigmoid, a); }
inline Tensor tanh(Graph& g, const Tensor& a) { return elementwise(g, Unary::tanh, a); }
inline Tensor one_minus(Graph& g, const Tensor& a) { return elementwise(g, Unary::one_minus, a); }
inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return elementwise(g, Binary::add, a, b); }
inline Tensor sub(Graph& g, const Tensor& a, const Tensor& b) { return elementwise(g, Binary::subtract, a, b); }
inline Tensor mul(Graph& g, const Tensor& a, const Tensor& b) { return elementwise(g, Binary::multiply, a, b); }

/// alpha * a + beta
Tensor scale_shift(Graph& g, const Tensor& a, double alpha, double beta = 0.0);

Tensor add_n(Graph& g, const std::vector<Tensor>& terms);

/// y = W x + b for x of shape [in] or [in, P] (P independent columns).
/// b may be undefined; otherwise shape [out], added to every column.
Tensor affine(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b = {});

/// Same-padded, stride-1 2-D convolution (cross-correlation).
/// x: [Cin, H, W], k: [Cout, Cin, K, K] with K odd, b: [Cout] or undefined.
Tensor conv2d(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b = {});

/// 2x2 max pooling over [C, H, W]; H and W must be even.
Tensor pool2(Graph& g, const Tensor& x);
/// Nearest-neighbour doubling over [C, H, W].
Tensor upsample2(Graph& g, const Tensor& x);

/// Concatenation along the leading axis; trailing extents must agree.
Tensor concat(Graph& g, const std::vector<Tensor>& parts);
/// Rows [begin, begin + count) of the leading axis.
Tensor slice(Graph& g, const Tensor& x, std::size_t begin, std::size_t count);
Tensor reshape(Graph& g, const Tensor& x, Shape shape);

/// Mean of squared differences; returns shape [1].
Tensor mse_loss(Graph& g, const Tensor& pred, const Tensor& target);

/// Clamps every element to min(value, 0) in place.
void project_nonpositive(Tensor& w);

}  // namespace gapcast::nd

#pragma once

#include <cstddef>
#include <vector>

#include "motionduet/numkit/tape.hpp"

// The fixed differentiable op set. Every op records its own backward rule; the
// tests check each against central differences.
namespace motionduet::numkit {

Var matmul(Var a, Var b);                  // [m×k]·[k×n]
Var linear(Var x, Var weight, Var bias);   // x[n×in]·W[in×out] + b[out]
Var transpose(Var a);
Var reshape(Var a, Shape shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                     // elementwise
Var scale(Var a, double s);
Var addRowVector(Var a, Var row);          // a[n×d] + row[d] broadcast over rows

Var relu(Var a);                           // subgradient 0 at 0
Var tanh(Var a);
Var gelu(Var a);                           // tanh approximation
Var softplus(Var a);

Var layerNorm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmaxRows(Var x);

/// Depthwise temporal convolution with zero "same" padding. kernel is either
/// [K] (shared by every channel) or [K×D]; K must be odd.
Var conv1d(Var signal, Var kernel);

/// irfft(W ⊙ rfft(x)) per channel; W is [(T/2+1)×D] real.
Var spectralFilter(Var signal, Var magnitude);

/// Row-wise cosine similarity, [n×d],[n×d] → [n]. Zero rows give 0 with zero gradient.
Var cosineRows(Var a, Var b);

Var concatCols(Var a, Var b);
Var concatRows(Var a, Var b);
Var sliceRows(Var a, std::size_t begin, std::size_t count);
Var sliceCols(Var a, std::size_t begin, std::size_t count);
Var gatherRows(Var a, std::vector<std::size_t> indices);
/// Row ℓ is a(ℓ) where takeFirst[ℓ], else b(ℓ). The mask is a constant gate.
Var selectRows(Var a, Var b, std::vector<bool> takeFirst);

Var sum(Var a);
Var mean(Var a);
Var mse(Var a, const Tensor& target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// Nearest-index temporal resampling map from `from` rows to `to` rows,
/// center aligned: src(ℓ) = ⌊(ℓ + ½)·from / to⌋.
std::vector<std::size_t> nearestIndices(std::size_t from, std::size_t to);

}  // namespace motionduet::numkit

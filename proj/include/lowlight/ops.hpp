#pragma once

#include "lowlight/tensor.hpp"

// Differentiable tensor operations. Every op takes the tape first; pass
// nullptr for inference (nothing recorded). Shapes are validated up front
// and mismatch throws DimensionError.
//
// Broadcasting is restricted to what the denoiser needs: add_channel_bias
// over the channel axis of an [N,C,H,W] tensor and scalar scale.

namespace lowlight::ops {

using lowlight::Tape;
using lowlight::Tensor;

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double s);

// x:[N,C,H,W] + bias:[C], broadcast over N,H,W
Tensor add_channel_bias(Tape* tape, const Tensor& x, const Tensor& bias);

Tensor relu(Tape* tape, const Tensor& x);
Tensor silu(Tape* tape, const Tensor& x);

// [N,Ca,H,W] ++ [N,Cb,H,W] -> [N,Ca+Cb,H,W]
Tensor concat_channels(Tape* tape, const Tensor& a, const Tensor& b);

// -> shape {1}
Tensor sum(Tape* tape, const Tensor& x);
Tensor mean(Tape* tape, const Tensor& x);

// same data, new extents (sizes must agree)
Tensor reshape(Tape* tape, const Tensor& x, std::vector<std::size_t> shape);

// input:[N,C,H,W] * kernel:[F,C,kh,kw] + bias:[F], zero padding,
// H' = (H + 2p - kh)/s + 1 (floor)
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

// input:[N,Cin,H,W] * kernel:[Cin,Cout,kh,kw],
// H' = (H-1)*s - 2p + kh; adjoint of conv2d's input slot for matched geometry
Tensor transposed_conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, int stride,
                         int padding);

enum class PoolMode { kMax, kMean };

// non-overlapping window x window pooling; extents must divide evenly
Tensor pool2d(Tape* tape, const Tensor& input, int window, PoolMode mode);

// input:[N,D] * weight:[D,E] + bias:[E]
Tensor linear(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias);

}  // namespace lowlight::ops

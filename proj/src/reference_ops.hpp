#pragma once

#include <vector>

#include "hseg/ops.hpp"

// Serial reference implementations kept for testing. They are the oracle side
// of every operator check and the baseline of the kernel benchmark, so they
// stay deliberately naive: plain NHWC float vectors, direct summation, no
// OpenMP, no shared code with the production kernels beyond the specs.
namespace hseg::ref {

struct Tensor4 {
    Shape shape;
    std::vector<float> data; // NHWC, row-major

    float& at(int n, int h, int w, int c) {
        return data[((static_cast<size_t>(n) * shape.h + h) * shape.w + w) * shape.c + c];
    }
    float at(int n, int h, int w, int c) const {
        return data[((static_cast<size_t>(n) * shape.h + h) * shape.w + w) * shape.c + c];
    }
};

Tensor4 from_logical(const LogicalTensor& t);

Tensor4 conv2d(const Tensor4& x, const std::vector<float>& w,
               const std::vector<float>& b, const ConvSpec& spec);

Tensor4 bilinear_upsample(const Tensor4& x, int factor);

Tensor4 global_avg_pool(const Tensor4& x);

Tensor4 squeeze_excite(const Tensor4& x,
                       const std::vector<float>& w1, const std::vector<float>& b1,
                       const std::vector<float>& w2, const std::vector<float>& b2,
                       int reduction);

Tensor4 add(const Tensor4& a, const Tensor4& b);

Tensor4 activation(const Tensor4& x, ActKind kind);

// max |a - b| over the logical value map; throws on shape mismatch
double max_abs_diff(const LogicalTensor& a, const Tensor4& b);

} // namespace hseg::ref

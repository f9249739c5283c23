#pragma once

#include <vector>

#include "hseg/tensor.hpp"

namespace hseg {

enum class Padding { Same, Valid };

// 2-D convolution description. groups=1 is a standard conv; groups=cin with
// cout=cin is depthwise. Weight layout is [cout][cin/groups][kh][kw].
struct ConvSpec {
    int kh = 1, kw = 1;
    int sh = 1, sw = 1;
    Padding padding = Padding::Same;
    int groups = 1;
    int cin = 1;
    int cout = 1;
    bool has_bias = true;

    int64_t weight_count() const {
        return static_cast<int64_t>(kh) * kw * (cin / groups) * cout;
    }
    void validate() const;
    bool is_pointwise() const { return kh == 1 && kw == 1 && sh == 1 && sw == 1 && groups == 1; }
};

enum class ActKind { ReLU6, Sigmoid, Identity };

const char* act_name(ActKind k);

// Output spatial size under the spec's padding arithmetic. Same pads
// symmetrically with the extra pixel at bottom/right.
int conv_out_dim(int in, int k, int stride, Padding p);
Shape conv_out_shape(const Shape& in, const ConvSpec& spec);

// All kernels are pure, layout-transparent (they address inputs and outputs
// through the logical view) and accumulate in double so results are
// bit-identical across layouts, schedules and thread counts. Inner loops are
// OpenMP-parallel over independent output elements.

LogicalTensor conv2d(const LogicalTensor& x, const std::vector<float>& w,
                     const std::vector<float>& b, const ConvSpec& spec,
                     Layout out_layout = Layout::Interleaved);

LogicalTensor bilinear_upsample(const LogicalTensor& x, int factor,
                                Layout out_layout = Layout::Interleaved);

LogicalTensor global_avg_pool(const LogicalTensor& x,
                              Layout out_layout = Layout::Interleaved);

// out = x * sigmoid(w2 * relu6(w1 * gap(x) + b1) + b2), gate broadcast over
// h,w. w1 projects c -> c/reduction, w2 back to c.
LogicalTensor squeeze_excite(const LogicalTensor& x,
                             const std::vector<float>& w1, const std::vector<float>& b1,
                             const std::vector<float>& w2, const std::vector<float>& b2,
                             int reduction, Layout out_layout = Layout::Interleaved);

LogicalTensor add(const LogicalTensor& a, const LogicalTensor& b,
                  Layout out_layout = Layout::Interleaved);

LogicalTensor activation(const LogicalTensor& x, ActKind kind,
                         Layout out_layout = Layout::Interleaved);

float apply_act(float v, ActKind kind);

} // namespace hseg

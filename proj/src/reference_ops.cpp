#include "reference_ops.hpp"

#include <cmath>

namespace hseg::ref {

Tensor4 from_logical(const LogicalTensor& t) {
    const Shape s = t.shape();
    Tensor4 out{s, std::vector<float>(static_cast<size_t>(s.elems()))};
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int c = 0; c < s.c; ++c)
                    out.at(n, h, w, c) = t.get(n, h, w, c);
    return out;
}

static float pixel_or_zero(const Tensor4& x, int n, int h, int w, int c) {
    if (h < 0 || h >= x.shape.h || w < 0 || w >= x.shape.w)
        return 0.0f;
    return x.at(n, h, w, c);
}

Tensor4 conv2d(const Tensor4& x, const std::vector<float>& w,
               const std::vector<float>& b, const ConvSpec& spec) {
    const Shape os = conv_out_shape(x.shape, spec);
    Tensor4 out{os, std::vector<float>(static_cast<size_t>(os.elems()))};
    const int cpg_in = spec.cin / spec.groups;
    const int cpg_out = spec.cout / spec.groups;
    int pad_top = 0, pad_left = 0;
    if (spec.padding == Padding::Same) {
        pad_top = std::max((os.h - 1) * spec.sh + spec.kh - x.shape.h, 0) / 2;
        pad_left = std::max((os.w - 1) * spec.sw + spec.kw - x.shape.w, 0) / 2;
    }
    for (int n = 0; n < os.n; ++n)
        for (int oy = 0; oy < os.h; ++oy)
            for (int ox = 0; ox < os.w; ++ox)
                for (int oc = 0; oc < os.c; ++oc) {
                    const int g = oc / cpg_out;
                    double acc = 0.0;
                    for (int ky = 0; ky < spec.kh; ++ky)
                        for (int kx = 0; kx < spec.kw; ++kx)
                            for (int ic = 0; ic < cpg_in; ++ic) {
                                const float xv = pixel_or_zero(x, n, oy * spec.sh + ky - pad_top,
                                                               ox * spec.sw + kx - pad_left,
                                                               g * cpg_in + ic);
                                const float wv =
                                    w[((static_cast<size_t>(oc) * cpg_in + ic) * spec.kh + ky) * spec.kw + kx];
                                acc += static_cast<double>(xv) * wv;
                            }
                    if (spec.has_bias)
                        acc += b[oc];
                    out.at(n, oy, ox, oc) = static_cast<float>(acc);
                }
    return out;
}

Tensor4 bilinear_upsample(const Tensor4& x, int factor) {
    const Shape os{x.shape.n, x.shape.h * factor, x.shape.w * factor, x.shape.c};
    Tensor4 out{os, std::vector<float>(static_cast<size_t>(os.elems()))};
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (int n = 0; n < os.n; ++n)
        for (int oy = 0; oy < os.h; ++oy)
            for (int ox = 0; ox < os.w; ++ox) {
                const double sy = (oy + 0.5) / factor - 0.5;
                const double sx = (ox + 0.5) / factor - 0.5;
                const int y0 = static_cast<int>(std::floor(sy));
                const int x0 = static_cast<int>(std::floor(sx));
                const double fy = sy - y0, fx = sx - x0;
                for (int c = 0; c < os.c; ++c) {
                    const double v00 = x.at(n, clampi(y0, os.h / factor - 1), clampi(x0, os.w / factor - 1), c);
                    const double v01 = x.at(n, clampi(y0, os.h / factor - 1), clampi(x0 + 1, os.w / factor - 1), c);
                    const double v10 = x.at(n, clampi(y0 + 1, os.h / factor - 1), clampi(x0, os.w / factor - 1), c);
                    const double v11 = x.at(n, clampi(y0 + 1, os.h / factor - 1), clampi(x0 + 1, os.w / factor - 1), c);
                    out.at(n, oy, ox, c) = static_cast<float>(
                        v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) + v11 * fy * fx);
                }
            }
    return out;
}

Tensor4 global_avg_pool(const Tensor4& x) {
    const Shape os{x.shape.n, 1, 1, x.shape.c};
    Tensor4 out{os, std::vector<float>(static_cast<size_t>(os.elems()))};
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            double acc = 0.0;
            for (int h = 0; h < x.shape.h; ++h)
                for (int w = 0; w < x.shape.w; ++w)
                    acc += x.at(n, h, w, c);
            out.at(n, 0, 0, c) = static_cast<float>(acc / (static_cast<double>(x.shape.h) * x.shape.w));
        }
    return out;
}

Tensor4 squeeze_excite(const Tensor4& x,
                       const std::vector<float>& w1, const std::vector<float>& b1,
                       const std::vector<float>& w2, const std::vector<float>& b2,
                       int reduction) {
    // composition of the reference primitives
    const int c = x.shape.c;
    const int cr = c / reduction;
    Tensor4 pooled = global_avg_pool(x);
    Tensor4 mid{Shape{x.shape.n, 1, 1, cr}, std::vector<float>(static_cast<size_t>(x.shape.n) * cr)};
    for (int n = 0; n < x.shape.n; ++n)
        for (int j = 0; j < cr; ++j) {
            double acc = b1[j];
            for (int i = 0; i < c; ++i)
                acc += static_cast<double>(w1[static_cast<size_t>(j) * c + i]) * pooled.at(n, 0, 0, i);
            mid.at(n, 0, 0, j) = static_cast<float>(acc);
        }
    mid = activation(mid, ActKind::ReLU6);
    Tensor4 gate{Shape{x.shape.n, 1, 1, c}, std::vector<float>(static_cast<size_t>(x.shape.n) * c)};
    for (int n = 0; n < x.shape.n; ++n)
        for (int i = 0; i < c; ++i) {
            double acc = b2[i];
            for (int j = 0; j < cr; ++j)
                acc += static_cast<double>(w2[static_cast<size_t>(i) * cr + j]) * mid.at(n, 0, 0, j);
            gate.at(n, 0, 0, i) = static_cast<float>(acc);
        }
    gate = activation(gate, ActKind::Sigmoid);
    Tensor4 out{x.shape, std::vector<float>(x.data.size())};
    for (int n = 0; n < x.shape.n; ++n)
        for (int h = 0; h < x.shape.h; ++h)
            for (int w = 0; w < x.shape.w; ++w)
                for (int ch = 0; ch < c; ++ch)
                    out.at(n, h, w, ch) = x.at(n, h, w, ch) * gate.at(n, 0, 0, ch);
    return out;
}

Tensor4 add(const Tensor4& a, const Tensor4& b) {
    Tensor4 out{a.shape, std::vector<float>(a.data.size())};
    for (size_t i = 0; i < a.data.size(); ++i)
        out.data[i] = a.data[i] + b.data[i];
    return out;
}

Tensor4 activation(const Tensor4& x, ActKind kind) {
    Tensor4 out{x.shape, std::vector<float>(x.data.size())};
    for (size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = apply_act(x.data[i], kind);
    return out;
}

double max_abs_diff(const LogicalTensor& a, const Tensor4& b) {
    if (!(a.shape() == b.shape))
        throw ConfigError("shape mismatch in max_abs_diff: " + a.shape().str() + " vs " + b.shape.str());
    double m = 0.0;
    const Shape s = b.shape;
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int c = 0; c < s.c; ++c)
                    m = std::max(m, std::abs(static_cast<double>(a.get(n, h, w, c)) - b.at(n, h, w, c)));
    return m;
}

} // namespace hseg::ref

#include "hseg/ops.hpp"

#include <cmath>
#include <string>

namespace hseg {

void ConvSpec::validate() const {
    if (kh < 1 || kw < 1 || sh < 1 || sw < 1 || cin < 1 || cout < 1 || groups < 1)
        throw ConfigError("conv spec fields must be >= 1");
    if (cin % groups != 0 || cout % groups != 0)
        throw ConfigError("groups=" + std::to_string(groups) + " must divide cin=" +
                          std::to_string(cin) + " and cout=" + std::to_string(cout));
}

const char* act_name(ActKind k) {
    switch (k) {
    case ActKind::ReLU6: return "relu6";
    case ActKind::Sigmoid: return "sigmoid";
    case ActKind::Identity: return "identity";
    }
    return "?";
}

int conv_out_dim(int in, int k, int stride, Padding p) {
    if (p == Padding::Same)
        return (in + stride - 1) / stride;
    return (in - k) / stride + 1;
}

Shape conv_out_shape(const Shape& in, const ConvSpec& spec) {
    spec.validate();
    if (in.c != spec.cin)
        throw ConfigError("conv input has " + std::to_string(in.c) + " channels, spec expects " +
                          std::to_string(spec.cin));
    if (spec.padding == Padding::Valid && (in.h < spec.kh || in.w < spec.kw))
        throw ConfigError("valid conv kernel larger than input " + in.str());
    return Shape{in.n, conv_out_dim(in.h, spec.kh, spec.sh, spec.padding),
                 conv_out_dim(in.w, spec.kw, spec.sw, spec.padding), spec.cout};
}

float apply_act(float v, ActKind kind) {
    switch (kind) {
    case ActKind::ReLU6: return std::min(std::max(v, 0.0f), 6.0f);
    case ActKind::Sigmoid: return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    case ActKind::Identity: return v;
    }
    return v;
}

LogicalTensor conv2d(const LogicalTensor& x, const std::vector<float>& w,
                     const std::vector<float>& b, const ConvSpec& spec, Layout out_layout) {
    const Shape in = x.shape();
    const Shape os = conv_out_shape(in, spec);
    if (static_cast<int64_t>(w.size()) != spec.weight_count())
        throw ConfigError("conv weight count " + std::to_string(w.size()) + " != expected " +
                          std::to_string(spec.weight_count()));
    if (spec.has_bias && static_cast<int>(b.size()) != spec.cout)
        throw ConfigError("conv bias count " + std::to_string(b.size()) + " != cout");

    const int cpg_in = spec.cin / spec.groups;   // input channels per group
    const int cpg_out = spec.cout / spec.groups; // output channels per group
    int pad_top = 0, pad_left = 0;
    if (spec.padding == Padding::Same) {
        const int ph = std::max((os.h - 1) * spec.sh + spec.kh - in.h, 0);
        const int pw = std::max((os.w - 1) * spec.sw + spec.kw - in.w, 0);
        pad_top = ph / 2; // extra pixel goes to bottom/right
        pad_left = pw / 2;
    }

    LogicalTensor out(os, out_layout, alloc_buffer(layout_extent(os, out_layout)));
    const int64_t rows = static_cast<int64_t>(os.n) * os.h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int n = static_cast<int>(row / os.h);
        const int oy = static_cast<int>(row % os.h);
        for (int ox = 0; ox < os.w; ++ox) {
            for (int oc = 0; oc < spec.cout; ++oc) {
                const int g = oc / cpg_out;
                double acc = spec.has_bias ? static_cast<double>(b[oc]) : 0.0;
                const int64_t wbase = static_cast<int64_t>(oc) * cpg_in * spec.kh * spec.kw;
                for (int ic = 0; ic < cpg_in; ++ic) {
                    const int xc = g * cpg_in + ic;
                    for (int ky = 0; ky < spec.kh; ++ky) {
                        const int iy = oy * spec.sh + ky - pad_top;
                        if (iy < 0 || iy >= in.h) continue;
                        for (int kx = 0; kx < spec.kw; ++kx) {
                            const int ix = ox * spec.sw + kx - pad_left;
                            if (ix < 0 || ix >= in.w) continue;
                            const float xv = x.get(n, iy, ix, xc);
                            const float wv = w[wbase + (static_cast<int64_t>(ic) * spec.kh + ky) * spec.kw + kx];
                            acc += static_cast<double>(xv) * static_cast<double>(wv);
                        }
                    }
                }
                out.put(n, oy, ox, oc, static_cast<float>(acc));
            }
        }
    }
    return out;
}

LogicalTensor bilinear_upsample(const LogicalTensor& x, int factor, Layout out_layout) {
    if (factor < 1)
        throw ConfigError("upsample factor must be >= 1");
    const Shape in = x.shape();
    const Shape os{in.n, in.h * factor, in.w * factor, in.c};
    LogicalTensor out(os, out_layout, alloc_buffer(layout_extent(os, out_layout)));
    const double inv = 1.0 / factor;
    const int64_t rows = static_cast<int64_t>(os.n) * os.h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int n = static_cast<int>(row / os.h);
        const int oy = static_cast<int>(row % os.h);
        // half-pixel centers, edge-clamped
        const double sy = (oy + 0.5) * inv - 0.5;
        const double fy = sy - std::floor(sy);
        int y0 = static_cast<int>(std::floor(sy));
        int y1 = y0 + 1;
        y0 = std::min(std::max(y0, 0), in.h - 1);
        y1 = std::min(std::max(y1, 0), in.h - 1);
        for (int ox = 0; ox < os.w; ++ox) {
            const double sx = (ox + 0.5) * inv - 0.5;
            const double fx = sx - std::floor(sx);
            int x0 = static_cast<int>(std::floor(sx));
            int x1 = x0 + 1;
            x0 = std::min(std::max(x0, 0), in.w - 1);
            x1 = std::min(std::max(x1, 0), in.w - 1);
            for (int c = 0; c < os.c; ++c) {
                const double v00 = x.get(n, y0, x0, c), v01 = x.get(n, y0, x1, c);
                const double v10 = x.get(n, y1, x0, c), v11 = x.get(n, y1, x1, c);
                const double top = v00 * (1.0 - fx) + v01 * fx;
                const double bot = v10 * (1.0 - fx) + v11 * fx;
                out.put(n, oy, ox, c, static_cast<float>(top * (1.0 - fy) + bot * fy));
            }
        }
    }
    return out;
}

LogicalTensor global_avg_pool(const LogicalTensor& x, Layout out_layout) {
    const Shape in = x.shape();
    const Shape os{in.n, 1, 1, in.c};
    LogicalTensor out(os, out_layout, alloc_buffer(layout_extent(os, out_layout)));
    const double inv = 1.0 / (static_cast<double>(in.h) * in.w);
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < in.n * in.c; ++nc) {
        const int n = nc / in.c;
        const int c = nc % in.c;
        double acc = 0.0;
        for (int h = 0; h < in.h; ++h)
            for (int w = 0; w < in.w; ++w)
                acc += static_cast<double>(x.get(n, h, w, c));
        out.put(n, 0, 0, c, static_cast<float>(acc * inv));
    }
    return out;
}

LogicalTensor squeeze_excite(const LogicalTensor& x,
                             const std::vector<float>& w1, const std::vector<float>& b1,
                             const std::vector<float>& w2, const std::vector<float>& b2,
                             int reduction, Layout out_layout) {
    const Shape in = x.shape();
    const int c = in.c;
    if (reduction < 1 || c % reduction != 0)
        throw ConfigError("se reduction " + std::to_string(reduction) + " must divide channels " +
                          std::to_string(c));
    const int cr = c / reduction;
    if (static_cast<int64_t>(w1.size()) != static_cast<int64_t>(cr) * c ||
        static_cast<int>(b1.size()) != cr ||
        static_cast<int64_t>(w2.size()) != static_cast<int64_t>(c) * cr ||
        static_cast<int>(b2.size()) != c)
        throw ConfigError("se projection weight sizes do not match channels/reduction");

    LogicalTensor pooled = global_avg_pool(x, Layout::Interleaved);
    LogicalTensor out(in, out_layout, alloc_buffer(layout_extent(in, out_layout)));
    std::vector<float> gate(static_cast<size_t>(in.n) * c);
    for (int n = 0; n < in.n; ++n) {
        std::vector<float> mid(cr);
        for (int j = 0; j < cr; ++j) {
            double acc = b1[j];
            for (int i = 0; i < c; ++i)
                acc += static_cast<double>(w1[static_cast<int64_t>(j) * c + i]) * pooled.get(n, 0, 0, i);
            mid[j] = apply_act(static_cast<float>(acc), ActKind::ReLU6);
        }
        for (int i = 0; i < c; ++i) {
            double acc = b2[i];
            for (int j = 0; j < cr; ++j)
                acc += static_cast<double>(w2[static_cast<int64_t>(i) * cr + j]) * static_cast<double>(mid[j]);
            gate[static_cast<size_t>(n) * c + i] = apply_act(static_cast<float>(acc), ActKind::Sigmoid);
        }
    }
    const int64_t rows = static_cast<int64_t>(in.n) * in.h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int n = static_cast<int>(row / in.h);
        const int h = static_cast<int>(row % in.h);
        for (int w = 0; w < in.w; ++w)
            for (int ch = 0; ch < c; ++ch)
                out.put(n, h, w, ch, x.get(n, h, w, ch) * gate[static_cast<size_t>(n) * c + ch]);
    }
    return out;
}

LogicalTensor add(const LogicalTensor& a, const LogicalTensor& b, Layout out_layout) {
    if (!(a.shape() == b.shape()))
        throw ConfigError("add shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
    const Shape s = a.shape();
    LogicalTensor out(s, out_layout, alloc_buffer(layout_extent(s, out_layout)));
    const int64_t rows = static_cast<int64_t>(s.n) * s.h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int n = static_cast<int>(row / s.h);
        const int h = static_cast<int>(row % s.h);
        for (int w = 0; w < s.w; ++w)
            for (int c = 0; c < s.c; ++c)
                out.put(n, h, w, c, a.get(n, h, w, c) + b.get(n, h, w, c));
    }
    return out;
}

LogicalTensor activation(const LogicalTensor& x, ActKind kind, Layout out_layout) {
    const Shape s = x.shape();
    LogicalTensor out(s, out_layout, alloc_buffer(layout_extent(s, out_layout)));
    const int64_t rows = static_cast<int64_t>(s.n) * s.h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int n = static_cast<int>(row / s.h);
        const int h = static_cast<int>(row % s.h);
        for (int w = 0; w < s.w; ++w)
            for (int c = 0; c < s.c; ++c)
                out.put(n, h, w, c, apply_act(x.get(n, h, w, c), kind));
    }
    return out;
}

} // namespace hseg

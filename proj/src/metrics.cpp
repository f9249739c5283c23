#include "hseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hseg {

Mask make_mask(int h, int w, float fill) {
    if (h < 1 || w < 1)
        throw ConfigError("mask dimensions must be >= 1");
    Mask m;
    m.h = h;
    m.w = w;
    m.v.assign(static_cast<size_t>(h) * w, fill);
    return m;
}

namespace {

void check_same_shape(const Mask& a, const Mask& b) {
    if (a.h != b.h || a.w != b.w)
        throw ConfigError("mask shapes differ: " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                          " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
}

std::vector<uint8_t> binarize(const Mask& m, float threshold) {
    std::vector<uint8_t> out(m.v.size());
    for (size_t i = 0; i < m.v.size(); ++i)
        out[i] = m.v[i] >= threshold ? 1 : 0;
    return out;
}

// foreground pixel with a background (or out-of-image) 4-neighbor
std::vector<uint8_t> boundary_map(const std::vector<uint8_t>& m, int h, int w) {
    std::vector<uint8_t> b(m.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m[static_cast<size_t>(y) * w + x])
                continue;
            const bool edge = y == 0 || y == h - 1 || x == 0 || x == w - 1;
            if (edge || !m[static_cast<size_t>(y - 1) * w + x] || !m[static_cast<size_t>(y + 1) * w + x] ||
                !m[static_cast<size_t>(y) * w + x - 1] || !m[static_cast<size_t>(y) * w + x + 1])
                b[static_cast<size_t>(y) * w + x] = 1;
        }
    return b;
}

// Chebyshev dilation by `radius`
std::vector<uint8_t> dilate(const std::vector<uint8_t>& m, int h, int w, int radius) {
    if (radius <= 0)
        return m;
    std::vector<uint8_t> out(m.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m[static_cast<size_t>(y) * w + x])
                continue;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h)
                    continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx;
                    if (xx >= 0 && xx < w)
                        out[static_cast<size_t>(yy) * w + xx] = 1;
                }
            }
        }
    return out;
}

} // namespace

double iou(const Mask& pred, const Mask& gt, float threshold) {
    check_same_shape(pred, gt);
    const std::vector<uint8_t> p = binarize(pred, threshold);
    const std::vector<uint8_t> g = binarize(gt, 0.5f);
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        inter += p[i] & g[i];
        uni += p[i] | g[i];
    }
    if (uni == 0)
        return 1.0; // empty-over-empty convention
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double miou(const std::vector<MaskPair>& pairs, float threshold) {
    if (pairs.empty())
        throw ConfigError("metric over an empty set of mask pairs");
    double acc = 0.0;
    for (const MaskPair& p : pairs)
        acc += iou(p.pred, p.gt, threshold);
    return acc / static_cast<double>(pairs.size());
}

double j_mean(const std::vector<MaskPair>& pairs, float threshold) {
    return miou(pairs, threshold);
}

int default_boundary_tolerance(int h, int w) {
    const double diag = std::sqrt(static_cast<double>(h) * h + static_cast<double>(w) * w);
    return static_cast<int>(std::lround(0.008 * diag));
}

double f_measure(const Mask& pred, const Mask& gt, int tolerance_px, float threshold) {
    check_same_shape(pred, gt);
    const int h = pred.h, w = pred.w;
    const std::vector<uint8_t> pb = boundary_map(binarize(pred, threshold), h, w);
    const std::vector<uint8_t> gb = boundary_map(binarize(gt, 0.5f), h, w);
    int64_t np = 0, ng = 0;
    for (uint8_t v : pb)
        np += v;
    for (uint8_t v : gb)
        ng += v;
    if (np == 0 && ng == 0)
        return 1.0;
    if (np == 0 || ng == 0)
        return 0.0;
    const std::vector<uint8_t> gb_dilated = dilate(gb, h, w, tolerance_px);
    const std::vector<uint8_t> pb_dilated = dilate(pb, h, w, tolerance_px);
    int64_t p_hit = 0, g_hit = 0;
    for (size_t i = 0; i < pb.size(); ++i) {
        p_hit += pb[i] & gb_dilated[i];
        g_hit += gb[i] & pb_dilated[i];
    }
    const double precision = static_cast<double>(p_hit) / static_cast<double>(np);
    const double recall = static_cast<double>(g_hit) / static_cast<double>(ng);
    if (precision + recall == 0.0)
        return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double f_mean(const std::vector<MaskPair>& pairs, int tolerance_px, float threshold) {
    if (pairs.empty())
        throw ConfigError("metric over an empty set of mask pairs");
    double acc = 0.0;
    for (const MaskPair& p : pairs) {
        const int tol = tolerance_px >= 0 ? tolerance_px : default_boundary_tolerance(p.gt.h, p.gt.w);
        acc += f_measure(p.pred, p.gt, tol, threshold);
    }
    return acc / static_cast<double>(pairs.size());
}

std::string MetricsReport::str() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "mIoU %.4f  J mean %.4f  F mean %.4f  (%zu samples)", miou,
                  j_mean, f_mean, per_iou.size());
    return buf;
}

std::string MetricsReport::csv() const {
    std::ostringstream os;
    os << "sample,iou,f\n";
    for (size_t i = 0; i < per_iou.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f\n", i, per_iou[i], per_f[i]);
        os << line;
    }
    char tail[128];
    std::snprintf(tail, sizeof(tail), "mean,%.6f,%.6f\n", miou, f_mean);
    os << tail;
    return os.str();
}

MetricsReport evaluate_pairs(const std::vector<MaskPair>& pairs, int tolerance_px, float threshold) {
    if (pairs.empty())
        throw ConfigError("metric over an empty set of mask pairs");
    MetricsReport report;
    for (const MaskPair& p : pairs) {
        report.per_iou.push_back(iou(p.pred, p.gt, threshold));
        const int tol = tolerance_px >= 0 ? tolerance_px : default_boundary_tolerance(p.gt.h, p.gt.w);
        report.per_f.push_back(f_measure(p.pred, p.gt, tol, threshold));
    }
    for (double v : report.per_iou)
        report.miou += v;
    report.miou /= static_cast<double>(pairs.size());
    report.j_mean = report.miou;
    for (double v : report.per_f)
        report.f_mean += v;
    report.f_mean /= static_cast<double>(pairs.size());
    return report;
}

namespace {

struct JaccardTerms {
    double inter = 0.0; // sum(p*g)
    double union_ = 0.0; // sum(p) + sum(g) - inter + eps
};

JaccardTerms jaccard_terms(const Mask& pred, const Mask& gt) {
    check_same_shape(pred, gt);
    double sp = 0.0, sg = 0.0, inter = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        sp += pred.v[i];
        sg += gt.v[i];
        inter += static_cast<double>(pred.v[i]) * gt.v[i];
    }
    return {inter, sp + sg - inter + kJaccardEps};
}

} // namespace

double jaccard_loss(const Mask& pred, const Mask& gt) {
    const JaccardTerms t = jaccard_terms(pred, gt);
    return 1.0 - t.inter / t.union_;
}

Mask jaccard_grad(const Mask& pred, const Mask& gt) {
    const JaccardTerms t = jaccard_terms(pred, gt);
    Mask grad = make_mask(pred.h, pred.w);
    // d/dp_i [1 - I/U] with dI/dp_i = g_i and dU/dp_i = 1 - g_i
    const double u2 = t.union_ * t.union_;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double gi = gt.v[i];
        grad.v[i] = static_cast<float>(-(gi * t.union_ - t.inter * (1.0 - gi)) / u2);
    }
    return grad;
}

} // namespace hseg

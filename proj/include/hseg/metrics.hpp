#pragma once

#include <string>
#include <vector>

#include "hseg/graph.hpp"

namespace hseg {

// Single-channel mask. Ground truth is binary {0,1}; predictions are reals
// in [0,1]. Binarization is value >= threshold.
struct Mask {
    int h = 0, w = 0;
    std::vector<float> v;

    float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

Mask make_mask(int h, int w, float fill = 0.0f);

struct MaskPair {
    Mask pred;
    Mask gt;
};

// |binarized(pred) ∩ gt| / |binarized(pred) ∪ gt|; empty-over-empty is 1.
double iou(const Mask& pred, const Mask& gt, float threshold = 0.5f);

// Arithmetic mean of per-pair IoU. J mean and mIoU coincide under per-image
// evaluation, which is the convention used throughout.
double miou(const std::vector<MaskPair>& pairs, float threshold = 0.5f);
double j_mean(const std::vector<MaskPair>& pairs, float threshold = 0.5f);

// DAVIS-style default: round(0.8% of the image diagonal).
int default_boundary_tolerance(int h, int w);

// Boundary F-measure: boundaries via 4-connectivity, matched within
// `tolerance_px` under the Chebyshev metric. Both boundaries empty -> 1;
// P + R = 0 -> 0.
double f_measure(const Mask& pred, const Mask& gt, int tolerance_px, float threshold = 0.5f);
double f_mean(const std::vector<MaskPair>& pairs, int tolerance_px = -1, float threshold = 0.5f);

struct MetricsReport {
    double miou = 0.0;
    double j_mean = 0.0;
    double f_mean = 0.0;
    std::vector<double> per_iou;
    std::vector<double> per_f;

    std::string str() const;
    std::string csv() const;
};

MetricsReport evaluate_pairs(const std::vector<MaskPair>& pairs, int tolerance_px = -1,
                             float threshold = 0.5f);

// Soft Jaccard: L = 1 - sum(p*g) / (sum(p) + sum(g) - sum(p*g) + eps).
constexpr double kJaccardEps = 1e-6;
double jaccard_loss(const Mask& pred, const Mask& gt);
// Closed-form dL/dp per pixel.
Mask jaccard_grad(const Mask& pred, const Mask& gt);

// --- toy training on the differentiable op subset ---

struct ToySample {
    LogicalTensor image; // (1,s,s,1)
    Mask gt;
};

struct ToyConfig {
    int image_size = 32;
    int steps = 200;
    float lr = 2.0f;
    uint64_t seed = 1;
    int hidden = 8;
    int n_train = 8;
    int n_eval = 4;
    float noise_sigma = 0.2f;
};

struct ToyResult {
    double final_miou = 0.0;
    std::vector<double> losses; // one per step
};

// Rejects graphs containing anything outside {1x1 conv, activation,
// bilinear upsample, add}.
void check_differentiable(const Graph& g);

// Full-batch gradient descent on the Jaccard loss of the graph's single
// output against each sample's ground truth. Returns the per-step losses.
std::vector<double> train_graph_jaccard(Graph& g, const std::vector<ToySample>& data, int steps,
                                        float lr);

double eval_graph_miou(const Graph& g, const std::vector<ToySample>& data);

// Centered disks of varying radius with additive Gaussian pixel noise.
std::vector<ToySample> make_disk_dataset(int count, int image_size, float noise_sigma, uint64_t seed);

// Builds a small pointwise net, trains it on synthetic disks and reports
// held-out mIoU. Deterministic per seed.
ToyResult train_toy(const ToyConfig& cfg);

} // namespace hseg

// Toy training path: reverse-mode gradients for the pointwise op subset
// (1x1 conv, activation, bilinear upsample, add) driving the Jaccard loss.

#include <cmath>
#include <map>

#include "hseg/metrics.hpp"
#include "hseg/rng.hpp"

namespace hseg {

namespace {

bool differentiable(const OpNode& node) {
    switch (node.kind) {
    case OpKind::Conv2d:
        return node.conv.is_pointwise();
    case OpKind::Activation:
    case OpKind::BilinearUpsample:
    case OpKind::Add:
        return true;
    default:
        return false;
    }
}

using Grad = std::vector<double>; // NHWC flat

size_t flat_index(const Shape& s, int n, int h, int w, int c) {
    return ((static_cast<size_t>(n) * s.h + h) * s.w + w) * s.c + c;
}

struct ForwardState {
    std::map<int, LogicalTensor> values; // tensor id -> activation
};

ForwardState forward_all(const Graph& g, const LogicalTensor& input) {
    ForwardState st;
    st.values[g.inputs().at(0)] = input;
    for (int node_id : topo_schedule(g)) {
        const OpNode* node = nullptr;
        for (const OpNode& n : g.nodes())
            if (n.id == node_id)
                node = &n;
        const LogicalTensor& x = st.values.at(node->inputs[0]);
        switch (node->kind) {
        case OpKind::Conv2d:
            st.values[node->outputs[0]] =
                conv2d(x, g.weights().get(node->weights[0]).data,
                       node->conv.has_bias ? g.weights().get(node->weights[1]).data
                                           : std::vector<float>{},
                       node->conv);
            break;
        case OpKind::Activation:
            st.values[node->outputs[0]] = activation(x, node->act);
            break;
        case OpKind::BilinearUpsample:
            st.values[node->outputs[0]] = bilinear_upsample(x, node->factor);
            break;
        case OpKind::Add:
            st.values[node->outputs[0]] = add(x, st.values.at(node->inputs[1]));
            break;
        default:
            throw ConfigError("node '" + node->name + "' (" + op_kind_name(node->kind) +
                              ") has no gradient implementation");
        }
    }
    return st;
}

struct BackwardState {
    std::map<int, Grad> tensor_grads;
    std::map<std::string, Grad>* weight_grads = nullptr;
};

Grad& grad_for(BackwardState& st, const Graph& g, int tensor_id) {
    auto it = st.tensor_grads.find(tensor_id);
    if (it == st.tensor_grads.end())
        it = st.tensor_grads.emplace(tensor_id, Grad(static_cast<size_t>(g.tensor_shape(tensor_id).elems()), 0.0)).first;
    return it->second;
}

void backward_all(const Graph& g, const ForwardState& fwd, BackwardState& bwd) {
    std::vector<int> order = topo_schedule(g);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const OpNode* node = nullptr;
        for (const OpNode& n : g.nodes())
            if (n.id == *it)
                node = &n;
        auto git = bwd.tensor_grads.find(node->outputs[0]);
        if (git == bwd.tensor_grads.end())
            continue; // no path to the loss
        const Grad& dy = git->second;
        const Shape ys = g.tensor_shape(node->outputs[0]);
        const LogicalTensor& x = fwd.values.at(node->inputs[0]);
        const Shape xs = x.shape();

        switch (node->kind) {
        case OpKind::Conv2d: {
            const ConvSpec& spec = node->conv;
            const std::vector<float>& w = g.weights().get(node->weights[0]).data;
            Grad& dx = grad_for(bwd, g, node->inputs[0]);
            Grad& dw = (*bwd.weight_grads)[node->weights[0]];
            dw.resize(w.size(), 0.0);
            Grad* db = nullptr;
            if (spec.has_bias) {
                db = &(*bwd.weight_grads)[node->weights[1]];
                db->resize(static_cast<size_t>(spec.cout), 0.0);
            }
            for (int n = 0; n < ys.n; ++n)
                for (int h = 0; h < ys.h; ++h)
                    for (int ww = 0; ww < ys.w; ++ww)
                        for (int oc = 0; oc < spec.cout; ++oc) {
                            const double d = dy[flat_index(ys, n, h, ww, oc)];
                            if (db)
                                (*db)[static_cast<size_t>(oc)] += d;
                            for (int ic = 0; ic < spec.cin; ++ic) {
                                const size_t wi = static_cast<size_t>(oc) * spec.cin + ic;
                                dx[flat_index(xs, n, h, ww, ic)] += d * w[wi];
                                dw[wi] += d * x.get(n, h, ww, ic);
                            }
                        }
            break;
        }
        case OpKind::Activation: {
            Grad& dx = grad_for(bwd, g, node->inputs[0]);
            const LogicalTensor& y = fwd.values.at(node->outputs[0]);
            for (int n = 0; n < ys.n; ++n)
                for (int h = 0; h < ys.h; ++h)
                    for (int ww = 0; ww < ys.w; ++ww)
                        for (int c = 0; c < ys.c; ++c) {
                            const size_t i = flat_index(ys, n, h, ww, c);
                            double factor = 1.0;
                            if (node->act == ActKind::ReLU6) {
                                const float xv = x.get(n, h, ww, c);
                                factor = (xv > 0.0f && xv < 6.0f) ? 1.0 : 0.0;
                            } else if (node->act == ActKind::Sigmoid) {
                                const double s = y.get(n, h, ww, c);
                                factor = s * (1.0 - s);
                            }
                            dx[i] += dy[i] * factor;
                        }
            break;
        }
        case OpKind::BilinearUpsample: {
            Grad& dx = grad_for(bwd, g, node->inputs[0]);
            const int f = node->factor;
            auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
            for (int n = 0; n < ys.n; ++n)
                for (int oy = 0; oy < ys.h; ++oy)
                    for (int ox = 0; ox < ys.w; ++ox) {
                        const double sy = (oy + 0.5) / f - 0.5;
                        const double sx = (ox + 0.5) / f - 0.5;
                        const int y0 = static_cast<int>(std::floor(sy));
                        const int x0 = static_cast<int>(std::floor(sx));
                        const double fy = sy - y0, fx = sx - x0;
                        const int yc0 = clampi(y0, xs.h - 1), yc1 = clampi(y0 + 1, xs.h - 1);
                        const int xc0 = clampi(x0, xs.w - 1), xc1 = clampi(x0 + 1, xs.w - 1);
                        for (int c = 0; c < ys.c; ++c) {
                            const double d = dy[flat_index(ys, n, oy, ox, c)];
                            dx[flat_index(xs, n, yc0, xc0, c)] += d * (1 - fy) * (1 - fx);
                            dx[flat_index(xs, n, yc0, xc1, c)] += d * (1 - fy) * fx;
                            dx[flat_index(xs, n, yc1, xc0, c)] += d * fy * (1 - fx);
                            dx[flat_index(xs, n, yc1, xc1, c)] += d * fy * fx;
                        }
                    }
            break;
        }
        case OpKind::Add: {
            Grad& da = grad_for(bwd, g, node->inputs[0]);
            Grad& dbb = grad_for(bwd, g, node->inputs[1]);
            for (size_t i = 0; i < dy.size(); ++i) {
                da[i] += dy[i];
                dbb[i] += dy[i];
            }
            break;
        }
        default:
            throw ConfigError("node '" + node->name + "' has no gradient implementation");
        }
    }
}

Mask output_to_mask(const LogicalTensor& out) {
    const Shape s = out.shape();
    Mask m = make_mask(s.h, s.w);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            m.at(y, x) = out.get(0, y, x, 0);
    return m;
}

} // namespace

void check_differentiable(const Graph& g) {
    for (const OpNode& node : g.nodes())
        if (!differentiable(node))
            throw ConfigError("node '" + node.name + "' (" + op_kind_name(node.kind) +
                              ") is not differentiable in the toy trainer");
}

std::vector<double> train_graph_jaccard(Graph& g, const std::vector<ToySample>& data, int steps,
                                        float lr) {
    check_differentiable(g);
    if (g.inputs().size() != 1 || g.outputs().size() != 1)
        throw ConfigError("toy trainer expects a single-input single-output graph");
    if (g.tensor_shape(g.outputs()[0]).c != 1)
        throw ConfigError("toy trainer expects a 1-channel mask output");
    if (data.empty())
        throw ConfigError("toy trainer requires a nonempty dataset");

    std::vector<double> losses;
    losses.reserve(static_cast<size_t>(steps));
    for (int step = 0; step < steps; ++step) {
        std::map<std::string, Grad> weight_grads;
        double loss_sum = 0.0;
        for (const ToySample& sample : data) {
            ForwardState fwd = forward_all(g, sample.image);
            const LogicalTensor& out = fwd.values.at(g.outputs()[0]);
            const Mask pred = output_to_mask(out);
            loss_sum += jaccard_loss(pred, sample.gt);
            const Mask dmask = jaccard_grad(pred, sample.gt);
            BackwardState bwd;
            bwd.weight_grads = &weight_grads;
            Grad& dout = grad_for(bwd, g, g.outputs()[0]);
            const Shape os = out.shape();
            for (int y = 0; y < os.h; ++y)
                for (int x = 0; x < os.w; ++x)
                    dout[flat_index(os, 0, y, x, 0)] = dmask.at(y, x);
            backward_all(g, fwd, bwd);
        }
        losses.push_back(loss_sum / static_cast<double>(data.size()));

        const double scale = static_cast<double>(lr) / static_cast<double>(data.size());
        for (const auto& [name, grad] : weight_grads) {
            WeightTensor w = g.weights().get(name);
            for (size_t i = 0; i < grad.size(); ++i)
                w.data[i] = static_cast<float>(w.data[i] - scale * grad[i]);
            g.weights().put(name, std::move(w));
        }
    }
    return losses;
}

double eval_graph_miou(const Graph& g, const std::vector<ToySample>& data) {
    std::vector<MaskPair> pairs;
    for (const ToySample& sample : data) {
        ForwardState fwd = forward_all(g, sample.image);
        pairs.push_back({output_to_mask(fwd.values.at(g.outputs()[0])), sample.gt});
    }
    return miou(pairs);
}

std::vector<ToySample> make_disk_dataset(int count, int image_size, float noise_sigma,
                                         uint64_t seed) {
    Rng rng(seed);
    std::vector<ToySample> out;
    out.reserve(static_cast<size_t>(count));
    const double center = (image_size - 1) / 2.0;
    for (int i = 0; i < count; ++i) {
        const double radius = rng.uniform(static_cast<float>(image_size) / 6.0f,
                                          static_cast<float>(image_size) / 3.0f);
        ToySample s;
        s.gt = make_mask(image_size, image_size);
        s.image = make_tensor(Shape{1, image_size, image_size, 1}, Layout::Interleaved);
        for (int y = 0; y < image_size; ++y)
            for (int x = 0; x < image_size; ++x) {
                const double dy = y - center, dx = x - center;
                const float inside = (dy * dy + dx * dx <= radius * radius) ? 1.0f : 0.0f;
                s.gt.at(y, x) = inside;
                s.image.put(0, y, x, 0, inside + rng.normal(0.0f, noise_sigma));
            }
        out.push_back(std::move(s));
    }
    return out;
}

ToyResult train_toy(const ToyConfig& cfg) {
    if (cfg.image_size < 4 || cfg.steps < 0 || cfg.hidden < 1 || cfg.n_train < 1 || cfg.n_eval < 1)
        throw ConfigError("bad toy training config");

    Graph g;
    const int input = g.add_input(Shape{1, cfg.image_size, cfg.image_size, 1});
    Rng rng(cfg.seed);
    auto init_conv = [&](const std::string& name, int in, int cin, int cout) {
        ConvSpec spec;
        spec.cin = cin;
        spec.cout = cout;
        const int out = g.add_conv(name, in, spec);
        WeightTensor w{{cout, cin, 1, 1}, {}};
        const float stddev = std::sqrt(2.0f / static_cast<float>(cin));
        w.data.resize(static_cast<size_t>(w.count()));
        for (float& v : w.data)
            v = rng.normal(0.0f, stddev);
        g.weights().put(name + ".w", std::move(w));
        g.weights().put(name + ".b", WeightTensor{{cout}, std::vector<float>(static_cast<size_t>(cout), 0.0f)});
        return out;
    };
    int x = init_conv("toy.fc0", input, 1, cfg.hidden);
    x = g.add_activation("toy.fc0_act", x, ActKind::ReLU6);
    x = init_conv("toy.fc1", x, cfg.hidden, cfg.hidden);
    x = g.add_activation("toy.fc1_act", x, ActKind::ReLU6);
    x = init_conv("toy.mask", x, cfg.hidden, 1);
    x = g.add_activation("toy.sigmoid", x, ActKind::Sigmoid);
    g.mark_output(x);
    g.validate();

    const auto train_set = make_disk_dataset(cfg.n_train, cfg.image_size, cfg.noise_sigma, cfg.seed * 2 + 1);
    const auto eval_set = make_disk_dataset(cfg.n_eval, cfg.image_size, cfg.noise_sigma, cfg.seed * 2 + 2);

    ToyResult result;
    result.losses = train_graph_jaccard(g, train_set, cfg.steps, cfg.lr);
    result.final_miou = eval_graph_miou(g, eval_set);
    return result;
}

} // namespace hseg

#include "hseg/graph.hpp"

#include <algorithm>
#include <queue>

namespace hseg {

const char* op_kind_name(OpKind k) {
    switch (k) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::BilinearUpsample: return "upsample";
    case OpKind::GlobalAvgPool: return "gap";
    case OpKind::SqueezeExcite: return "se";
    case OpKind::Add: return "add";
    case OpKind::Activation: return "act";
    case OpKind::FusedConv1x1: return "fused_conv1x1";
    }
    return "?";
}

void WeightStore::put(const std::string& name, WeightTensor w) {
    table_[name] = std::move(w);
}

const WeightTensor& WeightStore::get(const std::string& name) const {
    auto it = table_.find(name);
    if (it == table_.end())
        throw ExecError("missing weight tensor '" + name + "'");
    return it->second;
}

std::vector<std::string> WeightStore::names() const {
    std::vector<std::string> out;
    out.reserve(table_.size());
    for (const auto& [k, v] : table_)
        out.push_back(k);
    return out;
}

int Graph::add_tensor(const Shape& shape) {
    const int id = next_tensor_++;
    tensors_[id] = shape;
    return id;
}

int Graph::add_input(const Shape& shape) {
    const int id = add_tensor(shape);
    inputs_.push_back(id);
    return id;
}

void Graph::mark_output(int tensor_id) {
    if (!tensors_.count(tensor_id))
        throw ConfigError("mark_output: unknown tensor id " + std::to_string(tensor_id));
    outputs_.push_back(tensor_id);
}

OpNode& Graph::new_node(const std::string& name, OpKind kind) {
    OpNode node;
    node.id = next_node_++;
    node.name = name;
    node.kind = kind;
    nodes_.push_back(std::move(node));
    return nodes_.back();
}

const Shape& Graph::tensor_shape(int id) const {
    auto it = tensors_.find(id);
    if (it == tensors_.end())
        throw ConfigError("unknown tensor id " + std::to_string(id));
    return it->second;
}

int Graph::add_conv(const std::string& name, int input, const ConvSpec& spec) {
    const Shape out_shape = conv_out_shape(tensor_shape(input), spec);
    OpNode& node = new_node(name, OpKind::Conv2d);
    node.conv = spec;
    node.inputs = {input};
    node.weights = {name + ".w"};
    if (spec.has_bias)
        node.weights.push_back(name + ".b");
    const int out = add_tensor(out_shape);
    node.outputs = {out};
    producer_of_[out] = node.id;
    return out;
}

int Graph::add_upsample(const std::string& name, int input, int factor) {
    if (factor < 1)
        throw ConfigError("upsample factor must be >= 1");
    const Shape in = tensor_shape(input);
    OpNode& node = new_node(name, OpKind::BilinearUpsample);
    node.factor = factor;
    node.inputs = {input};
    const int out = add_tensor(Shape{in.n, in.h * factor, in.w * factor, in.c});
    node.outputs = {out};
    producer_of_[out] = node.id;
    return out;
}

int Graph::add_gap(const std::string& name, int input) {
    const Shape in = tensor_shape(input);
    OpNode& node = new_node(name, OpKind::GlobalAvgPool);
    node.inputs = {input};
    const int out = add_tensor(Shape{in.n, 1, 1, in.c});
    node.outputs = {out};
    producer_of_[out] = node.id;
    return out;
}

int Graph::add_se(const std::string& name, int input, int reduction) {
    const Shape in = tensor_shape(input);
    if (reduction < 1 || in.c % reduction != 0)
        throw ConfigError("se reduction " + std::to_string(reduction) + " must divide channels " +
                          std::to_string(in.c));
    OpNode& node = new_node(name, OpKind::SqueezeExcite);
    node.se_reduction = reduction;
    node.inputs = {input};
    node.weights = {name + ".w1", name + ".b1", name + ".w2", name + ".b2"};
    const int out = add_tensor(in);
    node.outputs = {out};
    producer_of_[out] = node.id;
    return out;
}

int Graph::add_add(const std::string& name, int a, int b) {
    const Shape sa = tensor_shape(a), sb = tensor_shape(b);
    if (!(sa == sb))
        throw ConfigError("add shape mismatch: " + sa.str() + " vs " + sb.str());
    OpNode& node = new_node(name, OpKind::Add);
    node.inputs = {a, b};
    const int out = add_tensor(sa);
    node.outputs = {out};
    producer_of_[out] = node.id;
    return out;
}

int Graph::add_activation(const std::string& name, int input, ActKind kind) {
    OpNode& node = new_node(name, OpKind::Activation);
    node.act = kind;
    node.inputs = {input};
    const int out = add_tensor(tensor_shape(input));
    node.outputs = {out};
    producer_of_[out] = node.id;
    return out;
}

const OpNode* Graph::producer(int tensor_id) const {
    auto it = producer_of_.find(tensor_id);
    if (it == producer_of_.end())
        return nullptr;
    for (const OpNode& n : nodes_)
        if (n.id == it->second)
            return &n;
    return nullptr;
}

std::vector<int> Graph::consumers(int tensor_id) const {
    std::vector<int> out;
    for (const OpNode& n : nodes_)
        for (int in : n.inputs)
            if (in == tensor_id) {
                out.push_back(n.id);
                break;
            }
    return out;
}

Shape Graph::infer_output_shape(const OpNode& node) const {
    switch (node.kind) {
    case OpKind::Conv2d:
        return conv_out_shape(tensor_shape(node.inputs[0]), node.conv);
    case OpKind::BilinearUpsample: {
        const Shape in = tensor_shape(node.inputs[0]);
        return Shape{in.n, in.h * node.factor, in.w * node.factor, in.c};
    }
    case OpKind::GlobalAvgPool: {
        const Shape in = tensor_shape(node.inputs[0]);
        return Shape{in.n, 1, 1, in.c};
    }
    case OpKind::SqueezeExcite:
    case OpKind::Add:
    case OpKind::Activation:
        return tensor_shape(node.inputs[0]);
    case OpKind::FusedConv1x1:
        return conv_out_shape(tensor_shape(node.inputs[0]), node.branches.at(0));
    }
    throw ConfigError("unknown op kind");
}

void Graph::validate() const {
    std::set<int> produced;
    for (const OpNode& node : nodes_) {
        for (int t : node.inputs)
            tensor_shape(t);
        if (node.outputs.empty())
            throw ConfigError("node '" + node.name + "' has no outputs");
        for (int t : node.outputs) {
            if (!produced.insert(t).second)
                throw ConfigError("tensor id " + std::to_string(t) + " has more than one producer");
            for (int in : inputs_)
                if (in == t)
                    throw ConfigError("graph input tensor " + std::to_string(t) + " is also produced");
        }
        if (node.kind == OpKind::FusedConv1x1) {
            if (node.branches.size() != node.outputs.size())
                throw ConfigError("fused node '" + node.name + "' branch/output arity mismatch");
            for (size_t i = 0; i < node.branches.size(); ++i) {
                const Shape want = conv_out_shape(tensor_shape(node.inputs[0]), node.branches[i]);
                if (!(want == tensor_shape(node.outputs[i])))
                    throw ConfigError("fused node '" + node.name + "' branch shape mismatch");
            }
        } else {
            const Shape want = infer_output_shape(node);
            if (!(want == tensor_shape(node.outputs[0])))
                throw ConfigError("node '" + node.name + "' output shape " +
                                  tensor_shape(node.outputs[0]).str() + " != inferred " + want.str());
        }
        if (node.kind == OpKind::Add) {
            const Shape a = tensor_shape(node.inputs[0]), b = tensor_shape(node.inputs[1]);
            if (!(a == b))
                throw ConfigError("add node '" + node.name + "' input shapes differ");
        }
    }
    topo_schedule(*this); // throws on cycles
}

std::vector<int> topo_schedule(const Graph& g) {
    std::map<int, const OpNode*> by_id;
    std::map<int, int> indegree;       // node id -> unmet producer count
    std::map<int, std::vector<int>> dependents; // producer node id -> consumer node ids
    std::map<int, int> producer_node;  // tensor id -> node id
    for (const OpNode& n : g.nodes())
        for (int t : n.outputs)
            producer_node[t] = n.id;
    for (const OpNode& n : g.nodes()) {
        by_id[n.id] = &n;
        int deg = 0;
        for (int t : n.inputs) {
            auto it = producer_node.find(t);
            if (it != producer_node.end()) {
                ++deg;
                dependents[it->second].push_back(n.id);
            }
        }
        indegree[n.id] = deg;
    }
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (const auto& [id, deg] : indegree)
        if (deg == 0)
            ready.push(id);
    std::vector<int> order;
    order.reserve(g.nodes().size());
    while (!ready.empty()) {
        const int id = ready.top();
        ready.pop();
        order.push_back(id);
        for (int dep : dependents[id])
            if (--indegree[dep] == 0)
                ready.push(dep);
    }
    if (order.size() != g.nodes().size())
        throw ConfigError("graph contains a cycle");
    return order;
}

Graph fuse_mrt(const Graph& g) {
    // eligible siblings: 1x1 convs, stride 1, groups 1, sharing one input
    auto eligible = [](const OpNode& n) {
        return n.kind == OpKind::Conv2d && n.conv.kh == 1 && n.conv.kw == 1 && n.conv.sh == 1 &&
               n.conv.sw == 1 && n.conv.groups == 1;
    };
    std::map<int, std::vector<int>> groups; // input tensor id -> node ids, ascending
    for (const OpNode& n : g.nodes())
        if (eligible(n))
            groups[n.inputs[0]].push_back(n.id);

    std::set<int> fused_members;
    std::map<int, std::vector<int>> fuse_at; // first member id -> all member ids
    for (auto& [tensor, members] : groups) {
        if (members.size() < 2)
            continue;
        std::sort(members.begin(), members.end());
        fuse_at[members.front()] = members;
        for (int m : members)
            fused_members.insert(m);
    }

    Graph out;
    out.tensors_ = g.tensors_;
    out.producer_of_ = g.producer_of_;
    out.weights_ = g.weights_;
    out.inputs_ = g.inputs_;
    out.outputs_ = g.outputs_;
    out.next_tensor_ = g.next_tensor_;
    out.next_node_ = g.next_node_;

    std::map<int, const OpNode*> by_id;
    for (const OpNode& n : g.nodes())
        by_id[n.id] = &n;

    for (const OpNode& n : g.nodes()) {
        if (fused_members.count(n.id)) {
            auto it = fuse_at.find(n.id);
            if (it == fuse_at.end())
                continue; // merged into an earlier sibling
            OpNode merged;
            merged.id = n.id;
            merged.kind = OpKind::FusedConv1x1;
            merged.inputs = {n.inputs[0]};
            std::string name;
            for (int m : it->second) {
                const OpNode& member = *by_id.at(m);
                name += (name.empty() ? "" : "+") + member.name;
                merged.branches.push_back(member.conv);
                merged.outputs.push_back(member.outputs[0]);
                merged.weights.insert(merged.weights.end(), member.weights.begin(), member.weights.end());
                out.producer_of_[member.outputs[0]] = merged.id;
            }
            merged.name = name;
            out.nodes_.push_back(std::move(merged));
        } else {
            out.nodes_.push_back(n);
        }
    }
    return out;
}

Layout LayoutPlan::at(int tensor_id) const {
    auto it = assignment.find(tensor_id);
    if (it == assignment.end())
        throw ConfigError("layout plan does not cover tensor id " + std::to_string(tensor_id));
    return it->second;
}

LayoutPlan plan_layouts(const Graph& g, PlanProfile profile) {
    LayoutPlan plan;
    std::set<int> io(g.inputs().begin(), g.inputs().end());
    io.insert(g.outputs().begin(), g.outputs().end());
    for (const auto& [id, shape] : g.tensors()) {
        if (profile == PlanProfile::Reference)
            plan.assignment[id] = Layout::Interleaved;
        else
            plan.assignment[id] = io.count(id) ? Layout::Interleaved : Layout::Packed4;
    }
    return plan;
}

namespace {

const std::vector<float> kNoBias;

const std::vector<float>& weight_data(const WeightStore& ws, const std::string& name,
                                      std::set<std::string>* touched) {
    const WeightTensor& w = ws.get(name);
    if (w.data.empty() && w.count() != 0)
        throw ExecError("weight tensor '" + name + "' has no materialized data");
    if (touched)
        touched->insert(name);
    return w.data;
}

} // namespace

std::vector<LogicalTensor> execute(const Graph& g, const std::vector<LogicalTensor>& inputs,
                                   const LayoutPlan* plan, const ExecOptions& opts) {
    if (inputs.size() != g.inputs().size())
        throw ConfigError("graph expects " + std::to_string(g.inputs().size()) + " inputs, got " +
                          std::to_string(inputs.size()));
    LayoutPlan fallback;
    if (!plan) {
        fallback = plan_layouts(g, PlanProfile::Reference);
        plan = &fallback;
    }

    std::map<int, LogicalTensor> live;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const int id = g.inputs()[i];
        if (!(inputs[i].shape() == g.tensor_shape(id)))
            throw ConfigError("input " + std::to_string(i) + " shape " + inputs[i].shape().str() +
                              " != expected " + g.tensor_shape(id).str());
        const Layout want = plan->at(id);
        live[id] = inputs[i].layout() == want ? inputs[i] : repack(inputs[i], want);
    }

    // consumer counts for eager freeing; graph outputs are pinned
    std::map<int, int> refs;
    for (const OpNode& n : g.nodes())
        for (int t : n.inputs)
            ++refs[t];
    for (int t : g.outputs())
        ++refs[t];

    std::vector<int> order;
    if (opts.schedule) {
        order = *opts.schedule;
        if (order.size() != g.nodes().size())
            throw ConfigError("schedule does not cover all nodes");
    } else {
        order = topo_schedule(g);
    }
    std::map<int, const OpNode*> by_id;
    for (const OpNode& n : g.nodes())
        by_id[n.id] = &n;

    auto input_tensor = [&](int id) -> const LogicalTensor& {
        auto it = live.find(id);
        if (it == live.end())
            throw ExecError("tensor " + std::to_string(id) + " not materialized; bad schedule?");
        return it->second;
    };

    for (int node_id : order) {
        auto nit = by_id.find(node_id);
        if (nit == by_id.end())
            throw ConfigError("schedule references unknown node " + std::to_string(node_id));
        const OpNode& node = *nit->second;
        const WeightStore& ws = g.weights();
        switch (node.kind) {
        case OpKind::Conv2d: {
            const auto& w = weight_data(ws, node.weights[0], opts.touched_weights);
            const auto& b = node.conv.has_bias ? weight_data(ws, node.weights[1], opts.touched_weights) : kNoBias;
            live[node.outputs[0]] = conv2d(input_tensor(node.inputs[0]), w, b, node.conv, plan->at(node.outputs[0]));
            break;
        }
        case OpKind::FusedConv1x1: {
            const LogicalTensor& x = input_tensor(node.inputs[0]);
            size_t wi = 0;
            for (size_t i = 0; i < node.branches.size(); ++i) {
                const ConvSpec& spec = node.branches[i];
                const auto& w = weight_data(ws, node.weights[wi++], opts.touched_weights);
                const auto& b = spec.has_bias ? weight_data(ws, node.weights[wi++], opts.touched_weights) : kNoBias;
                live[node.outputs[i]] = conv2d(x, w, b, spec, plan->at(node.outputs[i]));
            }
            break;
        }
        case OpKind::BilinearUpsample:
            live[node.outputs[0]] =
                bilinear_upsample(input_tensor(node.inputs[0]), node.factor, plan->at(node.outputs[0]));
            break;
        case OpKind::GlobalAvgPool:
            live[node.outputs[0]] = global_avg_pool(input_tensor(node.inputs[0]), plan->at(node.outputs[0]));
            break;
        case OpKind::SqueezeExcite: {
            const auto& w1 = weight_data(ws, node.weights[0], opts.touched_weights);
            const auto& b1 = weight_data(ws, node.weights[1], opts.touched_weights);
            const auto& w2 = weight_data(ws, node.weights[2], opts.touched_weights);
            const auto& b2 = weight_data(ws, node.weights[3], opts.touched_weights);
            live[node.outputs[0]] = squeeze_excite(input_tensor(node.inputs[0]), w1, b1, w2, b2,
                                                   node.se_reduction, plan->at(node.outputs[0]));
            break;
        }
        case OpKind::Add:
            live[node.outputs[0]] = add(input_tensor(node.inputs[0]), input_tensor(node.inputs[1]),
                                        plan->at(node.outputs[0]));
            break;
        case OpKind::Activation:
            live[node.outputs[0]] =
                activation(input_tensor(node.inputs[0]), node.act, plan->at(node.outputs[0]));
            break;
        }
        for (int t : node.inputs) {
            auto rit = refs.find(t);
            if (rit != refs.end() && --rit->second == 0)
                live.erase(t); // eager free
        }
    }

    std::vector<LogicalTensor> out;
    out.reserve(g.outputs().size());
    for (int t : g.outputs())
        out.push_back(input_tensor(t));
    return out;
}

} // namespace hseg

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hseg/ops.hpp"
#include "hseg/tensor.hpp"

namespace hseg {

enum class OpKind {
    Conv2d,
    BilinearUpsample,
    GlobalAvgPool,
    SqueezeExcite,
    Add,
    Activation,
    FusedConv1x1, // sibling 1x1 convs merged into one multi-output node
};

const char* op_kind_name(OpKind k);

struct WeightTensor {
    std::vector<int> dims;
    std::vector<float> data; // may be empty for structure-only builds

    int64_t count() const {
        int64_t c = 1;
        for (int d : dims) c *= d;
        return c;
    }
};

// Weights are keyed by stable string names so serialized weights survive
// graph rewrites such as fusion.
class WeightStore {
public:
    void put(const std::string& name, WeightTensor w);
    const WeightTensor& get(const std::string& name) const; // throws ExecError if absent
    bool has(const std::string& name) const { return table_.count(name) != 0; }
    std::vector<std::string> names() const;
    size_t size() const { return table_.size(); }

private:
    std::map<std::string, WeightTensor> table_;
};

struct OpNode {
    int id = -1;
    std::string name;
    OpKind kind = OpKind::Conv2d;
    std::vector<int> inputs;   // tensor ids
    std::vector<int> outputs;  // tensor ids; one except for FusedConv1x1
    std::vector<std::string> weights;

    ConvSpec conv{};                 // Conv2d
    std::vector<ConvSpec> branches;  // FusedConv1x1, one spec per output
    int factor = 1;                  // BilinearUpsample
    ActKind act = ActKind::Identity; // Activation
    int se_reduction = 4;            // SqueezeExcite
};

// Operator DAG with a tensor table (shape per id) and a named weight store.
// Tensor ids have a single producer; graphs must be acyclic.
class Graph {
public:
    int add_tensor(const Shape& shape);
    int add_input(const Shape& shape);
    void mark_output(int tensor_id);

    // Builder helpers; each returns the new output tensor id. Weight names
    // for a conv are "<name>.w" / "<name>.b", for an SE block
    // "<name>.w1/.b1/.w2/.b2"; data is registered separately in weights().
    int add_conv(const std::string& name, int input, const ConvSpec& spec);
    int add_upsample(const std::string& name, int input, int factor);
    int add_gap(const std::string& name, int input);
    int add_se(const std::string& name, int input, int reduction);
    int add_add(const std::string& name, int a, int b);
    int add_activation(const std::string& name, int input, ActKind kind);

    const std::vector<OpNode>& nodes() const { return nodes_; }
    std::vector<OpNode>& nodes() { return nodes_; }
    const std::map<int, Shape>& tensors() const { return tensors_; }
    const Shape& tensor_shape(int id) const;
    const std::vector<int>& inputs() const { return inputs_; }
    const std::vector<int>& outputs() const { return outputs_; }

    WeightStore& weights() { return weights_; }
    const WeightStore& weights() const { return weights_; }

    const OpNode* producer(int tensor_id) const;
    std::vector<int> consumers(int tensor_id) const; // node ids, ascending

    // Shape/producer consistency and acyclicity; throws ConfigError.
    void validate() const;

private:
    OpNode& new_node(const std::string& name, OpKind kind);
    Shape infer_output_shape(const OpNode& node) const;

    std::vector<OpNode> nodes_;
    std::map<int, Shape> tensors_;
    std::map<int, int> producer_of_; // tensor id -> node id
    WeightStore weights_;
    std::vector<int> inputs_, outputs_;
    int next_tensor_ = 0;
    int next_node_ = 0;

    friend Graph fuse_mrt(const Graph& g);
};

// Deterministic topological order (Kahn, ties broken by smallest node id).
// Throws ConfigError on cycles.
std::vector<int> topo_schedule(const Graph& g);

// Merge sibling 1x1 convolutions (stride 1, groups 1) that read the same
// tensor into single multi-output nodes. Tensor ids, shapes and weight names
// are preserved, so fused and unfused graphs execute bit-identically.
Graph fuse_mrt(const Graph& g);

enum class PlanProfile { Reference, Packed };

// Total layout assignment: Reference pins everything Interleaved; Packed uses
// Packed4 for internal activations and keeps graph I/O Interleaved.
struct LayoutPlan {
    std::map<int, Layout> assignment;
    Layout at(int tensor_id) const;
};

LayoutPlan plan_layouts(const Graph& g, PlanProfile profile);

struct ExecOptions {
    const std::vector<int>* schedule = nullptr;        // node ids; defaults to topo_schedule
    std::set<std::string>* touched_weights = nullptr;  // filled with weight names read
};

// Sequential reference executor. Outputs are independent of the schedule and
// of the layout plan (bit-deterministic); intermediates are freed eagerly
// once their consumer count drops to zero.
std::vector<LogicalTensor> execute(const Graph& g, const std::vector<LogicalTensor>& inputs,
                                   const LayoutPlan* plan = nullptr, const ExecOptions& opts = {});

} // namespace hseg

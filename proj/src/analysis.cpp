#include "hseg/analysis.hpp"

#include <cstdio>
#include <sstream>

namespace hseg {

namespace {

int64_t conv_cost(const Graph& g, const ConvSpec& spec, const Shape& out, bool* with_bias,
                  int64_t* params) {
    (void)g;
    const int64_t kernel_terms = static_cast<int64_t>(spec.kh) * spec.kw * (spec.cin / spec.groups);
    *params = kernel_terms * spec.cout + (spec.has_bias ? spec.cout : 0);
    if (with_bias)
        *with_bias = spec.has_bias;
    return static_cast<int64_t>(out.n) * out.h * out.w * kernel_terms * spec.cout;
}

} // namespace

std::set<std::string> CostReport::weight_names() const {
    std::set<std::string> names;
    for (const NodeCost& n : nodes)
        names.insert(n.weight_names.begin(), n.weight_names.end());
    return names;
}

NodeCost count_node(const Graph& g, const OpNode& node) {
    NodeCost cost;
    cost.id = node.id;
    cost.name = node.name;
    cost.kind = op_kind_name(node.kind);
    cost.weight_names = node.weights;
    for (size_t i = 0; i < node.outputs.size(); ++i) {
        if (i)
            cost.output_shape += "|";
        cost.output_shape += g.tensor_shape(node.outputs[i]).str();
    }
    switch (node.kind) {
    case OpKind::Conv2d: {
        int64_t params = 0;
        cost.macs = conv_cost(g, node.conv, g.tensor_shape(node.outputs[0]), nullptr, &params);
        cost.params = params;
        break;
    }
    case OpKind::FusedConv1x1: {
        for (size_t i = 0; i < node.branches.size(); ++i) {
            int64_t params = 0;
            cost.macs += conv_cost(g, node.branches[i], g.tensor_shape(node.outputs[i]), nullptr, &params);
            cost.params += params;
        }
        break;
    }
    case OpKind::BilinearUpsample:
        cost.macs = 4 * g.tensor_shape(node.outputs[0]).elems();
        break;
    case OpKind::GlobalAvgPool:
        cost.macs = g.tensor_shape(node.inputs[0]).elems();
        break;
    case OpKind::SqueezeExcite: {
        const int c = g.tensor_shape(node.inputs[0]).c;
        const int cr = c / node.se_reduction;
        cost.params = static_cast<int64_t>(c) * cr + cr + static_cast<int64_t>(cr) * c + c;
        cost.macs = 2 * static_cast<int64_t>(c) * cr;
        break;
    }
    case OpKind::Add:
    case OpKind::Activation:
        cost.macs = g.tensor_shape(node.outputs[0]).elems();
        break;
    }
    return cost;
}

CostReport analyze(const Graph& g) {
    CostReport report;
    report.nodes.reserve(g.nodes().size());
    for (const OpNode& node : g.nodes()) {
        report.nodes.push_back(count_node(g, node));
        report.total_params += report.nodes.back().params;
        report.total_macs += report.nodes.back().macs;
    }
    return report;
}

std::string graph_summary(const Graph& g) {
    std::ostringstream os;
    for (const OpNode& node : g.nodes()) {
        const NodeCost c = count_node(g, node);
        os << c.id << " " << c.kind << " " << c.output_shape << " " << c.params << " " << c.macs
           << "\n";
    }
    return os.str();
}

std::string cost_report_csv(const CostReport& report) {
    std::ostringstream os;
    os << "node_id,name,kind,output_shape,params,macs\n";
    for (const NodeCost& n : report.nodes)
        os << n.id << "," << n.name << "," << n.kind << "," << n.output_shape << "," << n.params
           << "," << n.macs << "\n";
    os << "total,,,," << report.total_params << "," << report.total_macs << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "# ops=2*macs: %.3fe9 ops, size %.3f MB (4 bytes/param)\n",
                  report.ops_e9(), report.size_mb());
    os << line;
    os << "# mac-equivalents: conv=exact, upsample=4/elt, add=1/elt, activation=1/elt, "
          "gap=1/input-elt, se=projections only\n";
    return os.str();
}

std::vector<AblationRow> ablation_report(const std::vector<ModelConfig>& configs) {
    std::vector<AblationRow> rows;
    rows.reserve(configs.size());
    BuildOptions opts;
    opts.init_weights = false;
    for (const ModelConfig& cfg : configs) {
        const Graph g = build_model(cfg, opts);
        const CostReport report = analyze(g);
        rows.push_back({cfg.summary(), report.total_params, report.size_mb(), report.ops_e9()});
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "config,params,size_mb,ops_e9\n";
    for (const AblationRow& r : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%lld,%.3f,%.3f\n", r.config.c_str(),
                      static_cast<long long>(r.params), r.size_mb, r.ops_e9);
        os << line;
    }
    return os.str();
}

} // namespace hseg

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hseg/graph.hpp"
#include "hseg/model_zoo.hpp"

namespace hseg {

struct NodeCost {
    int id = 0;
    std::string name;
    std::string kind;
    std::string output_shape;
    int64_t params = 0;
    int64_t macs = 0;
    std::vector<std::string> weight_names;
};

// Static per-node and per-model cost model. ops = 2*macs; size follows the
// 4-bytes-per-parameter convention (decimal MB).
struct CostReport {
    std::vector<NodeCost> nodes;
    int64_t total_params = 0;
    int64_t total_macs = 0;

    int64_t total_ops() const { return 2 * total_macs; }
    double size_mb() const { return static_cast<double>(total_params) * 4.0 / 1e6; }
    double ops_e9() const { return static_cast<double>(total_ops()) / 1e9; }
    std::set<std::string> weight_names() const;
};

// Elementwise MAC-equivalent conventions (also emitted as a report footer):
// upsample 4/output element, add and activation 1/element, gap 1/input
// element, squeeze-excite counts only its two projections.
NodeCost count_node(const Graph& g, const OpNode& node);

CostReport analyze(const Graph& g);

// One line per node: `id kind output_shape params macs`.
std::string graph_summary(const Graph& g);

// Per-node CSV with totals row and the MAC-equivalent footer.
std::string cost_report_csv(const CostReport& report);

struct AblationRow {
    std::string config;
    int64_t params = 0;
    double size_mb = 0.0;
    double ops_e9 = 0.0;
};

// Builds (structure-only) and analyzes each config.
std::vector<AblationRow> ablation_report(const std::vector<ModelConfig>& configs);

// CSV: `config,params,size_mb,ops_e9`, 3 decimal places.
std::string ablation_csv(const std::vector<AblationRow>& rows);

} // namespace hseg

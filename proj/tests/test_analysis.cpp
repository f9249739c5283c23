#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hseg/analysis.hpp"
#include "hseg/rng.hpp"

using namespace hseg;

namespace {

ModelConfig final_cfg(int resolution = 512, float mult = 1.0f) {
    ModelConfig cfg;
    cfg.resolution = resolution;
    cfg.width_multiplier = mult;
    cfg.decoder = DecoderVariant::MLP;
    cfg.conv_type = ConvType::Group;
    cfg.group_size = 4;
    return cfg;
}

const BuildOptions kNoWeights{false};

} // namespace

TEST_CASE("depthwise 3x3 over 8 channels counts 80 parameters") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 8});
    ConvSpec spec;
    spec.kh = spec.kw = 3;
    spec.cin = spec.cout = spec.groups = 8;
    g.add_conv("dw", in, spec);
    const NodeCost cost = count_node(g, g.nodes()[0]);
    CHECK(cost.params == 3 * 3 * 8 + 8);
    CHECK(cost.macs == 4 * 4 * 3 * 3 * 1 * 8);
}

TEST_CASE("group 3x3 8->8 with 2 groups counts 296 parameters") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 8});
    ConvSpec spec;
    spec.kh = spec.kw = 3;
    spec.cin = spec.cout = 8;
    spec.groups = 2;
    g.add_conv("grp", in, spec);
    const NodeCost cost = count_node(g, g.nodes()[0]);
    CHECK(cost.params == 3 * 3 * 4 * 8 + 8);
}

TEST_CASE("minimal pointwise conv counts params 2 macs 1") {
    Graph g;
    const int in = g.add_input(Shape{1, 1, 1, 1});
    ConvSpec spec;
    spec.cin = spec.cout = 1;
    g.add_conv("pw", in, spec);
    const NodeCost cost = count_node(g, g.nodes()[0]);
    CHECK(cost.params == 2);
    CHECK(cost.macs == 1);
}

TEST_CASE("elementwise mac-equivalent conventions") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 2});
    const int up = g.add_upsample("up", in, 2);
    const int act = g.add_activation("act", up, ActKind::ReLU6);
    const int gp = g.add_gap("gap", act);
    (void)gp;
    const NodeCost up_cost = count_node(g, g.nodes()[0]);
    CHECK(up_cost.params == 0);
    CHECK(up_cost.macs == 4 * (8 * 8 * 2));
    const NodeCost act_cost = count_node(g, g.nodes()[1]);
    CHECK(act_cost.macs == 8 * 8 * 2);
    const NodeCost gap_cost = count_node(g, g.nodes()[2]);
    CHECK(gap_cost.macs == 8 * 8 * 2); // input elements
    CHECK(gap_cost.params == 0);
}

TEST_CASE("squeeze excite counts its two projections") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 8});
    g.add_se("se", in, 4);
    const NodeCost cost = count_node(g, g.nodes()[0]);
    CHECK(cost.params == 8 * 2 + 2 + 2 * 8 + 8);
    CHECK(cost.macs == 2 * 8 * 2);
}

TEST_CASE("totals equal node sums and ops is twice macs") {
    const Graph g = build_model(final_cfg(64), kNoWeights);
    const CostReport report = analyze(g);
    int64_t params = 0, macs = 0;
    for (const NodeCost& n : report.nodes) {
        params += n.params;
        macs += n.macs;
        CHECK(n.params >= 0);
        CHECK(n.macs >= 0);
    }
    CHECK(report.total_params == params);
    CHECK(report.total_macs == macs);
    CHECK(report.total_ops() == 2 * macs);
}

TEST_CASE("macs scale quadratically with resolution within 1 percent") {
    const CostReport base = analyze(build_model(final_cfg(128), kNoWeights));
    for (int res : {256, 384, 512}) {
        const CostReport scaled = analyze(build_model(final_cfg(res), kNoWeights));
        const double expect = static_cast<double>(res) * res / (128.0 * 128.0);
        const double actual =
            static_cast<double>(scaled.total_macs) / static_cast<double>(base.total_macs);
        CHECK(std::abs(actual / expect - 1.0) < 0.01);
        CHECK(scaled.total_params == base.total_params); // fully convolutional
    }
}

TEST_CASE("width multiplier is monotone in params and macs") {
    const CostReport w10 = analyze(build_model(final_cfg(128, 1.0f), kNoWeights));
    const CostReport w15 = analyze(build_model(final_cfg(128, 1.5f), kNoWeights));
    const CostReport w20 = analyze(build_model(final_cfg(128, 2.0f), kNoWeights));
    CHECK(w20.total_params > w15.total_params);
    CHECK(w15.total_params > w10.total_params);
    CHECK(w20.total_macs > w15.total_macs);
    CHECK(w15.total_macs > w10.total_macs);
}

TEST_CASE("executor touches exactly the weights the analyzer counted") {
    const ModelConfig cfg = [] {
        ModelConfig c;
        c.resolution = 32;
        c.conv_type = ConvType::Depthwise;
        return c;
    }();
    const Graph g = build_model(cfg);
    const CostReport report = analyze(g);
    std::set<std::string> touched;
    ExecOptions opts;
    opts.touched_weights = &touched;
    const LogicalTensor x = make_random(Shape{1, 32, 32, 3}, Layout::Interleaved, 2);
    execute(g, {x}, nullptr, opts);
    CHECK(touched == report.weight_names());
}

TEST_CASE("graph summary prints one line per node") {
    const Graph g = build_model(final_cfg(64), kNoWeights);
    const std::string summary = graph_summary(g);
    size_t lines = 0;
    for (char ch : summary)
        if (ch == '\n')
            ++lines;
    CHECK(lines == g.nodes().size());
    // first line: id kind shape params macs
    std::istringstream is(summary);
    int id;
    std::string kind, shape;
    int64_t params, macs;
    is >> id >> kind >> shape >> params >> macs;
    CHECK(id == 0);
    CHECK(kind == "conv2d");
    CHECK(shape == "1x32x32x32");
}

TEST_CASE("empty ablation produces only the header") {
    CHECK(ablation_csv({}) == "config,params,size_mb,ops_e9\n");
}

TEST_CASE("resolution rows are monotone in ops") {
    std::vector<ModelConfig> configs;
    for (int res : {256, 384, 512, 640})
        configs.push_back(final_cfg(res));
    const auto rows = ablation_report(configs);
    REQUIRE(rows.size() == 4);
    for (size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].ops_e9 > rows[i - 1].ops_e9);
    // all sizes equal: fully convolutional
    for (size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].size_mb == rows[0].size_mb);
}

TEST_CASE("group rows are larger than depthwise rows") {
    ModelConfig dw = final_cfg(256);
    dw.conv_type = ConvType::Depthwise;
    const auto rows = ablation_report({dw, final_cfg(256)});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].size_mb > rows[0].size_mb);
    CHECK(rows[1].ops_e9 > rows[0].ops_e9);
}

TEST_CASE("ablation csv formats three decimals") {
    const auto rows = ablation_report({final_cfg(256)});
    const std::string csv = ablation_csv(rows);
    CHECK(csv.find("config,params,size_mb,ops_e9\n") == 0);
    CHECK(csv.find("r256_w1.0_mlp_group4,") != std::string::npos);
    // 3 decimal places on the floats
    const size_t comma = csv.rfind(',');
    const std::string last = csv.substr(comma + 1);
    CHECK(last.find('.') == last.size() - 5); // d.ddd\n
}

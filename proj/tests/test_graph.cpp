#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "hseg/graph.hpp"
#include "hseg/rng.hpp"

using namespace hseg;

namespace {

void put_conv_weights(Graph& g, const std::string& name, const ConvSpec& spec, Rng& rng) {
    WeightTensor w{{spec.cout, spec.cin / spec.groups, spec.kh, spec.kw}, {}};
    w.data.resize(static_cast<size_t>(w.count()));
    for (float& v : w.data)
        v = rng.uniform(-1.0f, 1.0f);
    g.weights().put(name + ".w", std::move(w));
    if (spec.has_bias) {
        WeightTensor b{{spec.cout}, {}};
        b.data.resize(static_cast<size_t>(spec.cout));
        for (float& v : b.data)
            v = rng.uniform(-1.0f, 1.0f);
        g.weights().put(name + ".b", std::move(b));
    }
}

int add_conv_with_weights(Graph& g, const std::string& name, int input, const ConvSpec& spec,
                          Rng& rng) {
    const int out = g.add_conv(name, input, spec);
    put_conv_weights(g, name, spec, rng);
    return out;
}

// random fan-out graph: a chain of elementwise/conv nodes with occasional
// sibling 1x1 convs re-merged through adds
Graph random_graph(Rng& rng, int node_budget) {
    Graph g;
    const int c = 4;
    const int input = g.add_input(Shape{1, 6, 6, c});
    std::vector<int> frontier = {input};
    int made = 0;
    while (made < node_budget) {
        const int src = frontier[rng.below(static_cast<uint32_t>(frontier.size()))];
        const std::string name = "n" + std::to_string(made);
        switch (rng.below(5)) {
        case 0: {
            ConvSpec spec;
            spec.cin = spec.cout = c;
            frontier.push_back(add_conv_with_weights(g, name, src, spec, rng));
            break;
        }
        case 1: {
            ConvSpec spec;
            spec.kh = spec.kw = 3;
            spec.cin = spec.cout = c;
            spec.groups = rng.below(2) ? c : 1;
            frontier.push_back(add_conv_with_weights(g, name, src, spec, rng));
            break;
        }
        case 2:
            frontier.push_back(g.add_activation(name, src, ActKind::ReLU6));
            break;
        case 3: {
            const int other = frontier[rng.below(static_cast<uint32_t>(frontier.size()))];
            if (g.tensor_shape(other) == g.tensor_shape(src)) {
                frontier.push_back(g.add_add(name, src, other));
                break;
            }
            frontier.push_back(g.add_activation(name, src, ActKind::Sigmoid));
            break;
        }
        default: {
            ConvSpec spec;
            spec.cin = c;
            spec.cout = c;
            frontier.push_back(add_conv_with_weights(g, name, src, spec, rng));
            break;
        }
        }
        ++made;
    }
    g.mark_output(frontier.back());
    g.validate();
    return g;
}

} // namespace

TEST_CASE("single node schedule") {
    Graph g;
    const int in = g.add_input(Shape{1, 2, 2, 1});
    ConvSpec spec;
    spec.cin = spec.cout = 1;
    g.add_conv("only", in, spec);
    const auto order = topo_schedule(g);
    REQUIRE(order.size() == 1);
    CHECK(order[0] == g.nodes()[0].id);
}

TEST_CASE("diamond schedules source first and sink last") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 2});
    ConvSpec spec;
    spec.cin = spec.cout = 2;
    const int a = g.add_conv("a", in, spec);
    const int b = g.add_conv("b", a, spec);
    const int c = g.add_conv("c", a, spec);
    g.add_add("d", b, c);
    const auto order = topo_schedule(g);
    REQUIRE(order.size() == 4);
    CHECK(order.front() == 0); // a
    CHECK(order.back() == 3);  // d
}

TEST_CASE("random DAG schedules respect every edge") {
    Rng rng(17);
    for (int iter = 0; iter < 10; ++iter) {
        const Graph g = random_graph(rng, 20);
        const auto order = topo_schedule(g);
        REQUIRE(order.size() == g.nodes().size());
        // dependency oracle: producer position < consumer position
        std::map<int, size_t> position;
        for (size_t i = 0; i < order.size(); ++i)
            position[order[i]] = i;
        std::map<int, int> producer;
        for (const OpNode& n : g.nodes())
            for (int t : n.outputs)
                producer[t] = n.id;
        for (const OpNode& n : g.nodes())
            for (int t : n.inputs)
                if (producer.count(t))
                    CHECK(position.at(producer.at(t)) < position.at(n.id));
    }
}

TEST_CASE("cycles are rejected") {
    Graph g;
    const int in = g.add_input(Shape{1, 2, 2, 1});
    ConvSpec spec;
    spec.cin = spec.cout = 1;
    g.add_conv("a", in, spec);
    // manufacture a cycle by rewiring node a to consume its own output
    g.nodes()[0].inputs[0] = g.nodes()[0].outputs[0];
    CHECK_THROWS_AS(topo_schedule(g), ConfigError);
}

TEST_CASE("identity graph executes") {
    Graph g;
    const int in = g.add_input(Shape{1, 2, 2, 1});
    ConvSpec spec;
    spec.cin = spec.cout = 1;
    const int out = g.add_conv("id", in, spec);
    g.weights().put("id.w", WeightTensor{{1, 1, 1, 1}, {1.0f}});
    g.weights().put("id.b", WeightTensor{{1}, {0.0f}});
    g.mark_output(out);
    const LogicalTensor x = make_random(Shape{1, 2, 2, 1}, Layout::Interleaved, 5);
    const auto outputs = execute(g, {x});
    REQUIRE(outputs.size() == 1);
    CHECK(tensors_equal(outputs[0], x));
}

TEST_CASE("graph execution equals manual op composition") {
    Rng rng(23);
    Graph g;
    const int in = g.add_input(Shape{1, 5, 5, 2});
    ConvSpec spec;
    spec.kh = spec.kw = 3;
    spec.cin = 2;
    spec.cout = 4;
    const int conv_id = add_conv_with_weights(g, "conv", in, spec, rng);
    const int act_id = g.add_activation("act", conv_id, ActKind::ReLU6);
    const int up_id = g.add_upsample("up", act_id, 2);
    g.mark_output(up_id);
    g.validate();

    const LogicalTensor x = make_random(Shape{1, 5, 5, 2}, Layout::Interleaved, 9);
    const auto outputs = execute(g, {x});

    const LogicalTensor manual = bilinear_upsample(
        activation(conv2d(x, g.weights().get("conv.w").data, g.weights().get("conv.b").data, spec),
                   ActKind::ReLU6),
        2);
    CHECK(tensors_equal(outputs[0], manual));
}

TEST_CASE("execution is deterministic across runs") {
    Rng rng(31);
    const Graph g = random_graph(rng, 15);
    const LogicalTensor x = make_random(g.tensor_shape(g.inputs()[0]), Layout::Interleaved, 77);
    const auto a = execute(g, {x});
    const auto b = execute(g, {x});
    CHECK(tensors_equal(a[0], b[0]));
}

TEST_CASE("missing weight raises an execution error") {
    Graph g;
    const int in = g.add_input(Shape{1, 2, 2, 1});
    ConvSpec spec;
    spec.cin = spec.cout = 1;
    const int out = g.add_conv("orphan", in, spec);
    g.mark_output(out);
    const LogicalTensor x = make_tensor(Shape{1, 2, 2, 1}, Layout::Interleaved, 1.0f);
    CHECK_THROWS_AS(execute(g, {x}), ExecError);
}

TEST_CASE("two sibling 1x1 convs fuse into one multi-output node") {
    Rng rng(41);
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 3});
    ConvSpec spec;
    spec.cin = 3;
    spec.cout = 2;
    const int a = add_conv_with_weights(g, "a", in, spec, rng);
    const int b = add_conv_with_weights(g, "b", in, spec, rng);
    g.mark_output(a);
    g.mark_output(b);
    g.validate();

    const Graph fused = fuse_mrt(g);
    fused.validate();
    REQUIRE(fused.nodes().size() == 1);
    CHECK(fused.nodes()[0].kind == OpKind::FusedConv1x1);
    CHECK(fused.nodes()[0].outputs.size() == 2);

    const LogicalTensor x = make_random(Shape{1, 4, 4, 3}, Layout::Interleaved, 3);
    const auto unfused_out = execute(g, {x});
    const auto fused_out = execute(fused, {x});
    REQUIRE(unfused_out.size() == fused_out.size());
    for (size_t i = 0; i < fused_out.size(); ++i)
        CHECK(tensors_equal(unfused_out[i], fused_out[i]));
}

TEST_CASE("graph without fusible siblings is unchanged") {
    Rng rng(43);
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 2});
    ConvSpec spec;
    spec.cin = spec.cout = 2;
    const int a = add_conv_with_weights(g, "a", in, spec, rng);
    const int b = g.add_activation("act", a, ActKind::ReLU6);
    g.mark_output(b);
    const Graph fused = fuse_mrt(g);
    CHECK(fused.nodes().size() == g.nodes().size());
    for (size_t i = 0; i < g.nodes().size(); ++i)
        CHECK(fused.nodes()[i].kind == g.nodes()[i].kind);
}

TEST_CASE("only the 1x1 siblings fuse out of a mixed trio") {
    Rng rng(47);
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 3});
    ConvSpec p1;
    p1.cin = 3;
    p1.cout = 2;
    ConvSpec p3;
    p3.kh = p3.kw = 3;
    p3.cin = 3;
    p3.cout = 2;
    const int a = add_conv_with_weights(g, "a", in, p1, rng);
    const int b = add_conv_with_weights(g, "b", in, p3, rng);
    const int c = add_conv_with_weights(g, "c", in, p1, rng);
    g.mark_output(a);
    g.mark_output(b);
    g.mark_output(c);

    const Graph fused = fuse_mrt(g);
    fused.validate();
    CHECK(fused.nodes().size() == 2); // fused(a,c) + the 3x3
    int fused_nodes = 0, conv_nodes = 0;
    for (const OpNode& n : fused.nodes()) {
        if (n.kind == OpKind::FusedConv1x1) {
            ++fused_nodes;
            CHECK(n.outputs.size() == 2);
        }
        if (n.kind == OpKind::Conv2d)
            ++conv_nodes;
    }
    CHECK(fused_nodes == 1);
    CHECK(conv_nodes == 1);

    const LogicalTensor x = make_random(Shape{1, 4, 4, 3}, Layout::Interleaved, 8);
    const auto u = execute(g, {x});
    const auto f = execute(fused, {x});
    for (size_t i = 0; i < u.size(); ++i)
        CHECK(tensors_equal(u[i], f[i]));
}

TEST_CASE("fusion soundness over random graphs") {
    Rng rng(53);
    for (int iter = 0; iter < 15; ++iter) {
        const Graph g = random_graph(rng, 18);
        const Graph fused = fuse_mrt(g);
        fused.validate();
        CHECK(fused.nodes().size() <= g.nodes().size());
        const LogicalTensor x = make_random(g.tensor_shape(g.inputs()[0]), Layout::Interleaved,
                                            rng.next_u64());
        const auto a = execute(g, {x});
        const auto b = execute(fused, {x});
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(tensors_equal(a[i], b[i]));
    }
}

TEST_CASE("reference plan assigns interleaved everywhere") {
    Rng rng(61);
    const Graph g = random_graph(rng, 10);
    const LayoutPlan plan = plan_layouts(g, PlanProfile::Reference);
    CHECK(plan.assignment.size() == g.tensors().size());
    for (const auto& [id, layout] : plan.assignment)
        CHECK(layout == Layout::Interleaved);
}

TEST_CASE("packed plan keeps io interleaved and internals packed") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 2});
    ConvSpec spec;
    spec.cin = spec.cout = 2;
    Rng rng(67);
    const int mid = add_conv_with_weights(g, "a", in, spec, rng);
    const int mid2 = add_conv_with_weights(g, "b", mid, spec, rng);
    const int out = add_conv_with_weights(g, "c", mid2, spec, rng);
    g.mark_output(out);
    const LayoutPlan plan = plan_layouts(g, PlanProfile::Packed);
    CHECK(plan.at(in) == Layout::Interleaved);
    CHECK(plan.at(out) == Layout::Interleaved);
    CHECK(plan.at(mid) == Layout::Packed4);
    CHECK(plan.at(mid2) == Layout::Packed4);
}

TEST_CASE("outputs are bit equal under both layout plans") {
    Rng rng(71);
    for (int iter = 0; iter < 10; ++iter) {
        const Graph g = random_graph(rng, 14);
        const LogicalTensor x = make_random(g.tensor_shape(g.inputs()[0]), Layout::Interleaved,
                                            rng.next_u64());
        const LayoutPlan reference = plan_layouts(g, PlanProfile::Reference);
        const LayoutPlan packed = plan_layouts(g, PlanProfile::Packed);
        const auto a = execute(g, {x}, &reference);
        const auto b = execute(g, {x}, &packed);
        CHECK(tensors_equal(a[0], b[0]));
        CHECK(b[0].layout() == Layout::Interleaved);
    }
}

TEST_CASE("any valid schedule yields identical outputs") {
    Rng rng(73);
    const Graph g = random_graph(rng, 16);
    const LogicalTensor x = make_random(g.tensor_shape(g.inputs()[0]), Layout::Interleaved, 4);
    const auto baseline = execute(g, {x});

    // alternative valid order: reverse-id tie break via stable re-sort
    std::vector<int> order = topo_schedule(g);
    std::map<int, std::vector<int>> deps; // node -> producer nodes
    std::map<int, int> producer;
    for (const OpNode& n : g.nodes())
        for (int t : n.outputs)
            producer[t] = n.id;
    for (const OpNode& n : g.nodes())
        for (int t : n.inputs)
            if (producer.count(t))
                deps[n.id].push_back(producer.at(t));
    std::vector<int> alt;
    std::vector<int> remaining = order;
    std::map<int, bool> done;
    while (!remaining.empty()) {
        // pick the LARGEST id whose producers are all done
        for (auto it = remaining.rbegin(); it != remaining.rend(); ++it) {
            bool ready = true;
            for (int d : deps[*it])
                if (!done[d])
                    ready = false;
            if (ready) {
                alt.push_back(*it);
                done[*it] = true;
                remaining.erase(std::next(it).base());
                break;
            }
        }
    }
    REQUIRE(alt.size() == order.size());
    ExecOptions opts;
    opts.schedule = &alt;
    const auto alternative = execute(g, {x}, nullptr, opts);
    CHECK(tensors_equal(baseline[0], alternative[0]));
}

TEST_CASE("executor reports touched weights") {
    Rng rng(79);
    const Graph g = random_graph(rng, 12);
    const LogicalTensor x = make_random(g.tensor_shape(g.inputs()[0]), Layout::Interleaved, 1);
    std::set<std::string> touched;
    ExecOptions opts;
    opts.touched_weights = &touched;
    execute(g, {x}, nullptr, opts);
    std::set<std::string> everything;
    for (const std::string& name : g.weights().names())
        everything.insert(name);
    CHECK(touched == everything);
}

TEST_CASE("input shape mismatches are config errors") {
    Graph g;
    const int in = g.add_input(Shape{1, 4, 4, 2});
    ConvSpec spec;
    spec.cin = spec.cout = 2;
    Rng rng(83);
    g.mark_output(add_conv_with_weights(g, "a", in, spec, rng));
    const LogicalTensor bad = make_tensor(Shape{1, 4, 4, 3}, Layout::Interleaved);
    CHECK_THROWS_AS(execute(g, {bad}), ConfigError);
    CHECK_THROWS_AS(execute(g, {}), ConfigError);
}

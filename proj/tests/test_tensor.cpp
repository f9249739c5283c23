#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include "hseg/rng.hpp"
#include "hseg/tensor.hpp"

using namespace hseg;

namespace {

const Layout kLayouts[] = {Layout::Interleaved, Layout::Planar, Layout::Packed4};

Shape random_shape(Rng& rng) {
    return Shape{rng.range(1, 2), rng.range(1, 8), rng.range(1, 8), rng.range(1, 9)};
}

} // namespace

TEST_CASE("constant fill is layout independent") {
    for (Layout layout : kLayouts) {
        const LogicalTensor t = make_tensor(Shape{1, 2, 2, 1}, layout, 0.0f);
        for (int h = 0; h < 2; ++h)
            for (int w = 0; w < 2; ++w)
                CHECK(t.at(0, h, w, 0) == 0.0f);
    }
}

TEST_CASE("packed4 slice count and zero padding lanes") {
    const LogicalTensor t = make_random(Shape{1, 1, 1, 6}, Layout::Packed4, 99);
    CHECK(packed_slices(6) == 2);
    CHECK(t.extent() == 8);
    // lanes 6 and 7 live at raw offsets 6,7 of the second slice
    const auto& raw = t.buffer()->storage;
    REQUIRE(raw.size() == 8);
    CHECK(raw[6] == 0.0f);
    CHECK(raw[7] == 0.0f);
    for (int c = 0; c < 6; ++c)
        CHECK(t.at(0, 0, 0, c) != 0.0f);
}

TEST_CASE("same seed gives identical contents") {
    const Shape s{2, 3, 3, 5};
    const LogicalTensor a = make_random(s, Layout::Interleaved, 42);
    const LogicalTensor b = make_random(s, Layout::Interleaved, 42);
    CHECK(tensors_equal(a, b));
    const LogicalTensor c = make_random(s, Layout::Interleaved, 43);
    CHECK_FALSE(tensors_equal(a, c));
}

TEST_CASE("random fill value map does not depend on layout") {
    const Shape s{1, 4, 5, 7};
    const LogicalTensor a = make_random(s, Layout::Interleaved, 7);
    const LogicalTensor b = make_random(s, Layout::Packed4, 7);
    const LogicalTensor c = make_random(s, Layout::Planar, 7);
    CHECK(tensors_equal(a, b));
    CHECK(tensors_equal(a, c));
}

TEST_CASE("repack to same layout copies values") {
    const LogicalTensor t = make_random(Shape{1, 3, 3, 4}, Layout::Planar, 5);
    const LogicalTensor copy = repack(t, Layout::Planar);
    CHECK(tensors_equal(t, copy));
    CHECK(copy.buffer()->id != t.buffer()->id);
}

TEST_CASE("interleaved -> packed4 -> interleaved round trip is bit equal") {
    const LogicalTensor t = make_random(Shape{1, 3, 3, 5}, Layout::Interleaved, 11);
    const LogicalTensor back = repack(repack(t, Layout::Packed4), Layout::Interleaved);
    CHECK(tensors_equal(t, back));
}

TEST_CASE("interleaved to planar storage order") {
    // (1,1,2,3) holding 1..6: planar storage groups by channel
    LogicalTensor t = make_tensor(Shape{1, 1, 2, 3}, Layout::Interleaved);
    float v = 1.0f;
    for (int w = 0; w < 2; ++w)
        for (int c = 0; c < 3; ++c)
            t.set(0, 0, w, c, v++);
    const LogicalTensor p = repack(t, Layout::Planar);
    const std::vector<float> expect = {1, 4, 2, 5, 3, 6};
    REQUIRE(p.buffer()->storage.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i)
        CHECK(p.buffer()->storage[i] == expect[i]);
}

TEST_CASE("packed4 padding stays zero after repack") {
    const LogicalTensor t = make_random(Shape{2, 2, 2, 5}, Layout::Interleaved, 3);
    const LogicalTensor p = repack(t, Layout::Packed4);
    const Shape s = p.shape();
    const Shape padded{s.n, s.h, s.w, packed_slices(s.c) * 4};
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int lane = s.c; lane < packed_slices(s.c) * 4; ++lane) {
                    const int64_t idx = layout_index(padded, Layout::Packed4, n, h, w, lane);
                    CHECK(p.buffer()->storage[static_cast<size_t>(idx)] == 0.0f);
                }
}

TEST_CASE("write then read round trip per layout") {
    for (Layout layout : kLayouts) {
        LogicalTensor t = make_tensor(Shape{2, 3, 4, 5}, layout);
        t.set(1, 2, 3, 4, 3.5f);
        t.set(0, 0, 0, 0, -1.25f);
        CHECK(t.at(1, 2, 3, 4) == 3.5f);
        CHECK(t.at(0, 0, 0, 0) == -1.25f);
    }
}

TEST_CASE("read after repack equals read before") {
    const LogicalTensor t = make_random(Shape{1, 5, 4, 3}, Layout::Interleaved, 21);
    const LogicalTensor p = repack(t, Layout::Packed4);
    for (int h = 0; h < 5; ++h)
        for (int w = 0; w < 4; ++w)
            for (int c = 0; c < 3; ++c)
                CHECK(t.at(0, h, w, c) == p.at(0, h, w, c));
}

TEST_CASE("full scan matches construction fill sequence") {
    // fill (2,2,2,2) in logical row-major order with 0..15 and scan it back
    for (Layout layout : kLayouts) {
        LogicalTensor t = make_tensor(Shape{2, 2, 2, 2}, layout);
        float v = 0.0f;
        for (int n = 0; n < 2; ++n)
            for (int h = 0; h < 2; ++h)
                for (int w = 0; w < 2; ++w)
                    for (int c = 0; c < 2; ++c)
                        t.set(n, h, w, c, v++);
        v = 0.0f;
        for (int n = 0; n < 2; ++n)
            for (int h = 0; h < 2; ++h)
                for (int w = 0; w < 2; ++w)
                    for (int c = 0; c < 2; ++c)
                        CHECK(t.at(n, h, w, c) == v++);
    }
}

TEST_CASE("layout transparency under random repack chains") {
    Rng rng(2024);
    for (int iter = 0; iter < 50; ++iter) {
        const Shape s = random_shape(rng);
        const LogicalTensor original = make_random(s, kLayouts[rng.below(3)], rng.next_u64());
        LogicalTensor t = original;
        for (int hop = 0; hop < 4; ++hop)
            t = repack(t, kLayouts[rng.below(3)]);
        CHECK(tensors_equal(original, t));
    }
}

TEST_CASE("aliasing through one buffer is observable") {
    const Shape s{1, 2, 2, 2};
    BufferPtr buf = alloc_buffer(layout_extent(s, Layout::Interleaved));
    LogicalTensor a = make_view(s, Layout::Interleaved, buf, 0);
    LogicalTensor b = make_view(s, Layout::Interleaved, buf, 0);
    a.set(0, 1, 1, 1, 9.0f);
    CHECK(b.at(0, 1, 1, 1) == 9.0f);

    // a planar view over the same storage sees the same raw slots
    LogicalTensor c = make_view(s, Layout::Planar, buf, 0);
    const int64_t planar_idx = layout_index(s, Layout::Planar, 0, 0, 1, 0);
    buf->storage[static_cast<size_t>(planar_idx)] = -4.0f;
    CHECK(c.at(0, 0, 1, 0) == -4.0f);
}

TEST_CASE("view must fit the buffer") {
    BufferPtr buf = alloc_buffer(8);
    CHECK_THROWS_AS(make_view(Shape{1, 3, 3, 1}, Layout::Interleaved, buf, 0), ConfigError);
    CHECK_THROWS_AS(make_view(Shape{1, 2, 2, 2}, Layout::Interleaved, buf, 1), ConfigError);
    CHECK_NOTHROW(make_view(Shape{1, 2, 2, 2}, Layout::Interleaved, buf, 0));
}

TEST_CASE("out of range indexing throws") {
    LogicalTensor t = make_tensor(Shape{1, 2, 2, 2}, Layout::Interleaved);
    CHECK_THROWS_AS(t.at(0, 2, 0, 0), std::out_of_range);
    CHECK_THROWS_AS(t.at(0, 0, 0, -1), std::out_of_range);
    CHECK_THROWS_AS(t.set(1, 0, 0, 0, 1.0f), std::out_of_range);
}

TEST_CASE("invalid shapes are rejected") {
    CHECK_THROWS_AS(make_tensor(Shape{0, 1, 1, 1}, Layout::Interleaved), ConfigError);
    CHECK_THROWS_AS(make_tensor(Shape{1, 1, 1, 0}, Layout::Interleaved), ConfigError);
    // element count overflow
    CHECK_THROWS_AS(make_tensor(Shape{1 << 30, 1 << 30, 1 << 30, 4}, Layout::Interleaved),
                    ConfigError);
}

TEST_CASE("dump header is exactly 24 bytes and round trips") {
    const LogicalTensor t = make_random(Shape{2, 3, 4, 5}, Layout::Packed4, 17);
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    dump_tensor(ss, t);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 24 + static_cast<size_t>(t.shape().elems()) * 4);
    CHECK(std::memcmp(bytes.data(), "HSEG", 4) == 0);
    const auto u32at = [&](size_t off) {
        uint32_t v;
        std::memcpy(&v, bytes.data() + off, 4);
        return v;
    };
    CHECK(u32at(4) == 1);  // version
    CHECK(u32at(8) == 2);  // n
    CHECK(u32at(12) == 3); // h
    CHECK(u32at(16) == 4); // w
    CHECK(u32at(20) == 5); // c

    // payload is interleaved order: first value = element (0,0,0,0)
    float first;
    std::memcpy(&first, bytes.data() + 24, 4);
    CHECK(first == t.at(0, 0, 0, 0));

    ss.seekg(0);
    const LogicalTensor back = load_tensor(ss, Layout::Planar);
    CHECK(tensors_equal(t, back));
}

TEST_CASE("load rejects bad magic") {
    std::stringstream ss("XXXXgarbage");
    CHECK_THROWS_AS(load_tensor(ss), ExecError);
}

#include "hseg/tensor.hpp"

#include <atomic>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "hseg/rng.hpp"

namespace hseg {

namespace {

std::atomic<uint64_t> g_next_buffer_id{1};

void check_shape(const Shape& s) {
    if (s.n < 1 || s.h < 1 || s.w < 1 || s.c < 1)
        throw ConfigError("shape dimensions must be >= 1, got " + s.str());
    // guard n*h*w*c (and the packed extent) against index overflow
    const int64_t limit = std::numeric_limits<int64_t>::max() / 8;
    int64_t acc = 1;
    for (int64_t d : {int64_t(s.n), int64_t(s.h), int64_t(s.w), int64_t(packed_slices(s.c)) * 4}) {
        if (acc > limit / d)
            throw ConfigError("element count overflows index range for shape " + s.str());
        acc *= d;
    }
}

} // namespace

std::string Shape::str() const {
    return std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

const char* layout_name(Layout l) {
    switch (l) {
    case Layout::Interleaved: return "interleaved";
    case Layout::Planar: return "planar";
    case Layout::Packed4: return "packed4";
    }
    return "?";
}

int64_t layout_extent(const Shape& s, Layout layout) {
    switch (layout) {
    case Layout::Interleaved:
    case Layout::Planar:
        return s.elems();
    case Layout::Packed4:
        return static_cast<int64_t>(s.n) * packed_slices(s.c) * s.h * s.w * 4;
    }
    return 0;
}

int64_t layout_index(const Shape& s, Layout layout, int n, int h, int w, int c) {
    switch (layout) {
    case Layout::Interleaved:
        return ((static_cast<int64_t>(n) * s.h + h) * s.w + w) * s.c + c;
    case Layout::Planar:
        return ((static_cast<int64_t>(n) * s.c + c) * s.h + h) * s.w + w;
    case Layout::Packed4: {
        const int slice = c / 4, lane = c % 4;
        return (((static_cast<int64_t>(n) * packed_slices(s.c) + slice) * s.h + h) * s.w + w) * 4 + lane;
    }
    }
    return 0;
}

BufferPtr alloc_buffer(int64_t elems) {
    auto buf = std::make_shared<PhysicalBuffer>();
    buf->id = g_next_buffer_id.fetch_add(1, std::memory_order_relaxed);
    try {
        buf->storage.assign(static_cast<size_t>(elems), 0.0f);
    } catch (const std::bad_alloc&) {
        throw ConfigError("allocation of " + std::to_string(elems) + " elements failed");
    }
    return buf;
}

LogicalTensor::LogicalTensor(Shape shape, Layout layout, BufferPtr buffer, int64_t offset)
    : shape_(shape), layout_(layout), buffer_(std::move(buffer)), offset_(offset) {
    check_shape(shape_);
    if (!buffer_)
        throw ConfigError("logical tensor requires a buffer");
    if (offset_ < 0 || offset_ + extent() > buffer_->capacity())
        throw ConfigError("tensor view [" + std::to_string(offset_) + ", +" + std::to_string(extent()) +
                          ") exceeds buffer capacity " + std::to_string(buffer_->capacity()));
}

float LogicalTensor::at(int n, int h, int w, int c) const {
    if (n < 0 || n >= shape_.n || h < 0 || h >= shape_.h || w < 0 || w >= shape_.w || c < 0 || c >= shape_.c)
        throw std::out_of_range("tensor index out of range for shape " + shape_.str());
    return get(n, h, w, c);
}

void LogicalTensor::set(int n, int h, int w, int c, float v) {
    if (n < 0 || n >= shape_.n || h < 0 || h >= shape_.h || w < 0 || w >= shape_.w || c < 0 || c >= shape_.c)
        throw std::out_of_range("tensor index out of range for shape " + shape_.str());
    put(n, h, w, c, v);
}

LogicalTensor make_tensor(const Shape& shape, Layout layout, float fill) {
    check_shape(shape);
    LogicalTensor t(shape, layout, alloc_buffer(layout_extent(shape, layout)));
    if (fill != 0.0f) {
        for (int n = 0; n < shape.n; ++n)
            for (int h = 0; h < shape.h; ++h)
                for (int w = 0; w < shape.w; ++w)
                    for (int c = 0; c < shape.c; ++c)
                        t.put(n, h, w, c, fill);
    }
    return t;
}

LogicalTensor make_random(const Shape& shape, Layout layout, uint64_t seed) {
    check_shape(shape);
    LogicalTensor t(shape, layout, alloc_buffer(layout_extent(shape, layout)));
    Rng rng(seed);
    // draw in logical row-major order so the value map is layout-independent
    for (int n = 0; n < shape.n; ++n)
        for (int h = 0; h < shape.h; ++h)
            for (int w = 0; w < shape.w; ++w)
                for (int c = 0; c < shape.c; ++c)
                    t.put(n, h, w, c, rng.uniform(-1.0f, 1.0f));
    return t;
}

LogicalTensor make_view(const Shape& shape, Layout layout, BufferPtr buffer, int64_t offset) {
    return LogicalTensor(shape, layout, std::move(buffer), offset);
}

LogicalTensor repack(const LogicalTensor& t, Layout target) {
    const Shape& s = t.shape();
    LogicalTensor out(s, target, alloc_buffer(layout_extent(s, target)));
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int c = 0; c < s.c; ++c)
                    out.put(n, h, w, c, t.get(n, h, w, c));
    return out;
}

bool tensors_equal(const LogicalTensor& a, const LogicalTensor& b) {
    if (!(a.shape() == b.shape()))
        return false;
    const Shape& s = a.shape();
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int c = 0; c < s.c; ++c) {
                    float x = a.get(n, h, w, c), y = b.get(n, h, w, c);
                    if (std::memcmp(&x, &y, sizeof(float)) != 0)
                        return false;
                }
    return true;
}

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char bytes[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw ExecError("truncated tensor stream");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_f32_le(std::ostream& os, float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    write_le(os, u);
}

float read_f32_le(std::istream& is) {
    uint32_t u = read_u32_le(is);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

constexpr uint32_t kTensorVersion = 1;

} // namespace

void dump_tensor(std::ostream& os, const LogicalTensor& t) {
    const Shape& s = t.shape();
    os.write("HSEG", 4);
    write_le(os, kTensorVersion);
    write_le(os, static_cast<uint32_t>(s.n));
    write_le(os, static_cast<uint32_t>(s.h));
    write_le(os, static_cast<uint32_t>(s.w));
    write_le(os, static_cast<uint32_t>(s.c));
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int c = 0; c < s.c; ++c)
                    write_f32_le(os, t.get(n, h, w, c));
}

LogicalTensor load_tensor(std::istream& is, Layout layout) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "HSEG", 4) != 0)
        throw ExecError("bad tensor magic");
    uint32_t version = read_u32_le(is);
    if (version != kTensorVersion)
        throw ExecError("unsupported tensor version " + std::to_string(version));
    Shape s;
    s.n = static_cast<int>(read_u32_le(is));
    s.h = static_cast<int>(read_u32_le(is));
    s.w = static_cast<int>(read_u32_le(is));
    s.c = static_cast<int>(read_u32_le(is));
    LogicalTensor t = make_tensor(s, layout);
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
                for (int c = 0; c < s.c; ++c)
                    t.put(n, h, w, c, read_f32_le(is));
    return t;
}

} // namespace hseg

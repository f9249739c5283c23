#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "hseg/error.hpp"

namespace hseg {

// Logical NHWC shape. Storage order is a property of Layout, not Shape.
struct Shape {
    int n = 1;
    int h = 1;
    int w = 1;
    int c = 1;

    int64_t elems() const {
        return static_cast<int64_t>(n) * h * w * c;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// Physical storage order for a 4-D tensor.
//   Interleaved: channel-last, [n][h][w][c]
//   Planar:      channel-first, [n][c][h][w]
//   Packed4:     channels grouped into slices of 4, [n][slice][h][w][lane],
//                padding lanes kept at exactly zero
enum class Layout { Interleaved, Planar, Packed4 };

const char* layout_name(Layout l);

inline int packed_slices(int c) { return (c + 3) / 4; }

// Storage elements needed for `shape` under `layout` (>= shape.elems()).
int64_t layout_extent(const Shape& shape, Layout layout);

// Flat storage index of logical element (n,h,w,c); row-major within the layout.
int64_t layout_index(const Shape& shape, Layout layout, int n, int h, int w, int c);

// Flat float32 storage. A buffer may back multiple logical tensors; aliasing
// happens only through explicitly constructed views.
struct PhysicalBuffer {
    std::vector<float> storage;
    uint64_t id = 0;

    int64_t capacity() const { return static_cast<int64_t>(storage.size()); }
    int64_t byte_len() const { return capacity() * 4; }
};

using BufferPtr = std::shared_ptr<PhysicalBuffer>;

BufferPtr alloc_buffer(int64_t elems);

// A shaped, laid-out view over a PhysicalBuffer. Values are addressed by
// logical (n,h,w,c) regardless of the physical layout.
class LogicalTensor {
public:
    LogicalTensor() = default;
    LogicalTensor(Shape shape, Layout layout, BufferPtr buffer, int64_t offset = 0);

    const Shape& shape() const { return shape_; }
    Layout layout() const { return layout_; }
    const BufferPtr& buffer() const { return buffer_; }
    int64_t offset() const { return offset_; }
    int64_t extent() const { return layout_extent(shape_, layout_); }

    float at(int n, int h, int w, int c) const;          // bounds-checked
    void set(int n, int h, int w, int c, float v);       // bounds-checked

    // Unchecked accessors for kernels; indices must be in range.
    float get(int n, int h, int w, int c) const {
        return buffer_->storage[static_cast<size_t>(offset_ + layout_index(shape_, layout_, n, h, w, c))];
    }
    void put(int n, int h, int w, int c, float v) {
        buffer_->storage[static_cast<size_t>(offset_ + layout_index(shape_, layout_, n, h, w, c))] = v;
    }

    bool valid() const { return buffer_ != nullptr; }

private:
    Shape shape_{};
    Layout layout_ = Layout::Interleaved;
    BufferPtr buffer_;
    int64_t offset_ = 0;
};

// Fresh tensor filled with a constant. Packed4 padding lanes are zero.
LogicalTensor make_tensor(const Shape& shape, Layout layout, float fill = 0.0f);

// Fresh tensor with seeded uniform [-1,1) values. The logical value map
// depends only on the seed, not on the layout.
LogicalTensor make_random(const Shape& shape, Layout layout, uint64_t seed);

// View over an existing buffer (explicit aliasing).
LogicalTensor make_view(const Shape& shape, Layout layout, BufferPtr buffer, int64_t offset);

// Copy into a new tensor with `target` layout; every logical value is
// preserved bit-exactly and Packed4 padding lanes are zeroed.
LogicalTensor repack(const LogicalTensor& t, Layout target);

// True when the logical value maps are bit-identical.
bool tensors_equal(const LogicalTensor& a, const LogicalTensor& b);

// Raw tensor dump: 24-byte header (magic "HSEG", version u32, n/h/w/c u32,
// little-endian) followed by float32 values in Interleaved order.
void dump_tensor(std::ostream& os, const LogicalTensor& t);
LogicalTensor load_tensor(std::istream& is, Layout layout = Layout::Interleaved);

} // namespace hseg

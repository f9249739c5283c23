#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hseg/metrics.hpp"
#include "hseg/tensor.hpp"

namespace hseg {

// 8-bit image, interleaved channels; 1 channel for PGM (P5), 3 for PPM (P6).
struct ImageU8 {
    int w = 0, h = 0, channels = 1;
    std::vector<uint8_t> data;

    uint8_t at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * w + x) * channels + c];
    }
};

ImageU8 read_pnm(std::istream& is);              // P5 or P6, maxval 255
ImageU8 read_pnm_file(const std::string& path);
void write_pgm(std::ostream& os, const ImageU8& img); // P5
void write_pgm_file(const std::string& path, const ImageU8& img);

// Ground-truth binarization: byte >= 128 is foreground.
Mask mask_from_image(const ImageU8& img);
// round(p * 255) per pixel.
ImageU8 mask_to_image(const Mask& m);

// (1,h,w,3) tensor; grayscale replicated across channels, values
// (byte/255 - mean) / std.
LogicalTensor image_to_tensor(const ImageU8& img, float mean, float stddev);

} // namespace hseg

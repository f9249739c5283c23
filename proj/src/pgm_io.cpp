#include "hseg/pgm_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace hseg {

namespace {

// next whitespace-delimited token, skipping '#' comments
std::string next_token(std::istream& is) {
    std::string token;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n')
                ;
            continue;
        }
        if (std::isspace(ch)) {
            if (!token.empty())
                return token;
            continue;
        }
        token.push_back(static_cast<char>(ch));
    }
    if (token.empty())
        throw ExecError("truncated PNM header");
    return token;
}

int parse_dim(const std::string& token) {
    try {
        const int v = std::stoi(token);
        if (v < 1)
            throw ExecError("PNM dimension must be positive");
        return v;
    } catch (const std::logic_error&) {
        throw ExecError("bad PNM header token '" + token + "'");
    }
}

} // namespace

ImageU8 read_pnm(std::istream& is) {
    const std::string magic = next_token(is);
    ImageU8 img;
    if (magic == "P5")
        img.channels = 1;
    else if (magic == "P6")
        img.channels = 3;
    else
        throw ExecError("unsupported PNM magic '" + magic + "' (want binary P5 or P6)");
    img.w = parse_dim(next_token(is));
    img.h = parse_dim(next_token(is));
    const int maxval = parse_dim(next_token(is));
    if (maxval != 255)
        throw ExecError("only maxval 255 PNM files are supported");
    // header ends with exactly one whitespace byte, already consumed by next_token
    img.data.resize(static_cast<size_t>(img.w) * img.h * img.channels);
    if (!is.read(reinterpret_cast<char*>(img.data.data()),
                 static_cast<std::streamsize>(img.data.size())))
        throw ExecError("truncated PNM pixel data");
    return img;
}

ImageU8 read_pnm_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ExecError("cannot open image file '" + path + "'");
    return read_pnm(f);
}

void write_pgm(std::ostream& os, const ImageU8& img) {
    if (img.channels != 1)
        throw ExecError("write_pgm expects a single-channel image");
    os << "P5\n" << img.w << " " << img.h << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()),
             static_cast<std::streamsize>(img.data.size()));
    if (!os)
        throw ExecError("PGM write failed");
}

void write_pgm_file(const std::string& path, const ImageU8& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ExecError("cannot open '" + path + "' for writing");
    write_pgm(f, img);
}

Mask mask_from_image(const ImageU8& img) {
    Mask m = make_mask(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            m.at(y, x) = img.at(y, x, 0) >= 128 ? 1.0f : 0.0f;
    return m;
}

ImageU8 mask_to_image(const Mask& m) {
    ImageU8 img;
    img.w = m.w;
    img.h = m.h;
    img.channels = 1;
    img.data.resize(static_cast<size_t>(m.w) * m.h);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            const float v = std::min(std::max(m.at(y, x), 0.0f), 1.0f);
            img.data[static_cast<size_t>(y) * m.w + x] =
                static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    return img;
}

LogicalTensor image_to_tensor(const ImageU8& img, float mean, float stddev) {
    LogicalTensor t = make_tensor(Shape{1, img.h, img.w, 3}, Layout::Interleaved);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const uint8_t byte = img.channels == 3 ? img.at(y, x, c) : img.at(y, x, 0);
                t.put(0, y, x, c, (static_cast<float>(byte) / 255.0f - mean) / stddev);
            }
    return t;
}

} // namespace hseg

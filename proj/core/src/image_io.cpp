#include "refnet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace refnet {
namespace {

std::uint8_t quantize8(float v) {
    float q = std::round(std::clamp(v, 0.f, 1.f) * 255.f);
    return static_cast<std::uint8_t>(q);
}

void skip_ws_and_comments(std::istream& in) {
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
}

void read_header(std::istream& in, const std::string& magic, int& w, int& h, int& maxval) {
    std::string m;
    in >> m;
    if (m != magic) throw std::runtime_error("image read: expected " + magic + ", got " + m);
    skip_ws_and_comments(in);
    in >> w;
    skip_ws_and_comments(in);
    in >> h;
    skip_ws_and_comments(in);
    in >> maxval;
    in.get(); // single whitespace before raster
    if (!in || w <= 0 || h <= 0) throw std::runtime_error("image read: bad header");
}

} // namespace

void write_ppm(const std::string& path, const Image& img) {
    if (img.channels != 3) throw std::invalid_argument("write_ppm: need 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<std::size_t>(x) * 3 + c] = quantize8(img.at(c, y, x));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    int w, h, maxval;
    read_header(in, "P6", w, h, maxval);
    Image img(h, w, 3);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw std::runtime_error("read_ppm: truncated raster in " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = row[static_cast<std::size_t>(x) * 3 + c] / 255.f;
    }
    return img;
}

void write_pgm(const std::string& path, const BinaryMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

BinaryMask read_pgm_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm_binary: cannot open " + path);
    int w, h, maxval;
    read_header(in, "P5", w, h, maxval);
    BinaryMask mask(h, w);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw std::runtime_error("read_pgm_binary: truncated raster in " + path);
        for (int x = 0; x < w; ++x) mask.at(y, x) = row[x] >= 128 ? 1 : 0;
    }
    return mask;
}

void write_pgm16(const std::string& path, const SoftMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm16: cannot open " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n65535\n";
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            auto v = static_cast<std::uint16_t>(
                std::round(std::clamp(mask.at(y, x), 0.f, 1.f) * 65535.f));
            // PGM 16-bit is big-endian
            std::uint8_t bytes[2] = {static_cast<std::uint8_t>(v >> 8),
                                     static_cast<std::uint8_t>(v & 0xff)};
            out.write(reinterpret_cast<const char*>(bytes), 2);
        }
    if (!out) throw std::runtime_error("write_pgm16: write failed for " + path);
}

SoftMask read_pgm16(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm16: cannot open " + path);
    int w, h, maxval;
    read_header(in, "P5", w, h, maxval);
    if (maxval != 65535) throw std::runtime_error("read_pgm16: not a 16-bit PGM: " + path);
    SoftMask mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t bytes[2];
            in.read(reinterpret_cast<char*>(bytes), 2);
            if (!in) throw std::runtime_error("read_pgm16: truncated raster in " + path);
            mask.at(y, x) = static_cast<float>((bytes[0] << 8) | bytes[1]) / 65535.f;
        }
    return mask;
}

} // namespace refnet

#include "refnet/morphology.hpp"

#include <stdexcept>

namespace refnet {

DiskStrel disk_strel(int r) {
    if (r < 0) throw std::invalid_argument("disk_strel: negative radius");
    DiskStrel s;
    s.radius = r;
    const int r2 = r * r;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dy * dy + dx * dx <= r2) s.offsets.emplace_back(dy, dx);
    return s;
}

BinaryMask dilate(const BinaryMask& m, int r) {
    if (r < 0) throw std::invalid_argument("dilate: negative radius");
    if (r == 0) return m;
    const DiskStrel s = disk_strel(r);
    BinaryMask out(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 0;
            for (const auto& [dy, dx] : s.offsets) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width) continue;
                if (m.at(ny, nx)) { v = 1; break; }
            }
            out.at(y, x) = v;
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& m, int r) {
    if (r < 0) throw std::invalid_argument("erode: negative radius");
    if (r == 0) return m;
    const DiskStrel s = disk_strel(r);
    BinaryMask out(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            std::uint8_t v = 1;
            for (const auto& [dy, dx] : s.offsets) {
                const int ny = y + dy, nx = x + dx;
                // out-of-bounds reads as 1 for erosion
                if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width) continue;
                if (!m.at(ny, nx)) { v = 0; break; }
            }
            out.at(y, x) = v;
        }
    }
    return out;
}

WeightMap boundary_weight_map(const BinaryMask& m, int r) {
    if (r < 0) throw std::invalid_argument("boundary_weight_map: negative radius");
    WeightMap w(m.height, m.width);
    if (r == 0) return w; // degenerate: dilation == erosion == m
    const BinaryMask d = dilate(m, r);
    const BinaryMask e = erode(m, r);
    for (std::size_t i = 0; i < w.grid.size(); ++i)
        w.grid[i] = static_cast<std::uint8_t>(d.grid[i] - e.grid[i]);
    return w;
}

WeightMap boundary_weight_map(const SoftMask& m, int r) {
    return boundary_weight_map(m.binarize(0.5f), r);
}

} // namespace refnet

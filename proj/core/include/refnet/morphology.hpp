#pragma once

#include <utility>
#include <vector>

#include "refnet/image.hpp"

namespace refnet {

/// Disk-shaped structuring element: all integer offsets within radius r of
/// the origin, i.e. { (dy,dx) : dy^2 + dx^2 <= r^2 }.
struct DiskStrel {
    int radius = 0;
    std::vector<std::pair<int, int>> offsets; // (dy, dx)
};

DiskStrel disk_strel(int r);

/// Binary dilation with a disk strel. Out-of-bounds neighbors read as 0, so
/// an all-zero mask stays all-zero for any radius.
BinaryMask dilate(const BinaryMask& m, int r);

/// Binary erosion, dual of dilation: erode(m, r) == complement(dilate(complement(m), r)).
/// Out-of-bounds pixels read as 1, so an all-ones mask is a fixed point.
BinaryMask erode(const BinaryMask& m, int r);

/// Boundary-neighborhood band of a soft mask: binarize at 0.5, then
/// dilate(m, r) - erode(m, r) elementwise. Identically zero on constant
/// masks. r = 0 yields the all-zero map.
WeightMap boundary_weight_map(const SoftMask& m, int r);
WeightMap boundary_weight_map(const BinaryMask& m, int r);

} // namespace refnet

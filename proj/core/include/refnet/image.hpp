#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace refnet {

/// H x W x C image, planar channel layout (all of channel 0, then channel 1, ...).
/// Values live in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("Image: non-positive dims");
    }

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

struct BinaryMask;

/// H x W mask with values in [0, 1].
struct SoftMask {
    int height = 0;
    int width = 0;
    std::vector<float> grid;

    SoftMask() = default;
    SoftMask(int h, int w, float fill = 0.f)
        : height(h), width(w), grid(static_cast<std::size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("SoftMask: non-positive dims");
    }

    float& at(int y, int x) { return grid[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }

    BinaryMask binarize(float threshold = 0.5f) const;
};

/// H x W mask with values in {0, 1}.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> grid;

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), grid(static_cast<std::size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("BinaryMask: non-positive dims");
    }

    std::uint8_t& at(int y, int x) { return grid[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x]; }

    BinaryMask complement() const;
    SoftMask to_soft() const;
    std::size_t count() const;

    bool operator==(const BinaryMask& o) const {
        return height == o.height && width == o.width && grid == o.grid;
    }
};

/// Boundary-band map; nonzero only near a mask boundary. Same representation
/// as a BinaryMask (values in {0,1}).
using WeightMap = BinaryMask;

/// Zero the image outside the mask (pixel-wise multiplication per channel).
Image masked_image(const Image& img, const BinaryMask& m);
Image masked_image(const Image& img, const SoftMask& m);

} // namespace refnet

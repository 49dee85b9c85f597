#include "refnet/image.hpp"

namespace refnet {

BinaryMask SoftMask::binarize(float threshold) const {
    BinaryMask out(height, width);
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.grid[i] = grid[i] >= threshold ? 1 : 0;
    return out;
}

BinaryMask BinaryMask::complement() const {
    BinaryMask out(height, width);
    for (std::size_t i = 0; i < grid.size(); ++i) out.grid[i] = grid[i] ? 0 : 1;
    return out;
}

SoftMask BinaryMask::to_soft() const {
    SoftMask out(height, width);
    for (std::size_t i = 0; i < grid.size(); ++i) out.grid[i] = static_cast<float>(grid[i]);
    return out;
}

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (auto v : grid) n += v;
    return n;
}

Image masked_image(const Image& img, const BinaryMask& m) {
    if (img.height != m.height || img.width != m.width)
        throw std::invalid_argument("masked_image: shape mismatch");
    Image out = img;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = m.at(y, x) ? img.at(c, y, x) : 0.f;
    return out;
}

Image masked_image(const Image& img, const SoftMask& m) {
    if (img.height != m.height || img.width != m.width)
        throw std::invalid_argument("masked_image: shape mismatch");
    Image out = img;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = m.at(y, x) * img.at(c, y, x);
    return out;
}

} // namespace refnet

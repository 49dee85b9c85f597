#pragma once

#include <array>
#include <string>
#include <vector>

#include "refnet/image.hpp"
#include "refnet/rng.hpp"

namespace refnet {

enum class ShapeCategory { Circle, Square, Triangle, Cross, Star, Ring };

std::string to_string(ShapeCategory c);
ShapeCategory category_from_string(const std::string& s);

struct ShapeSceneSpec {
    int height = 64;
    int width = 64;
    std::vector<ShapeCategory> categories{ShapeCategory::Circle, ShapeCategory::Square,
                                          ShapeCategory::Triangle};
    int min_objects = 1;
    int max_objects = 2;
    double min_size_frac = 0.15; // object radius as a fraction of min(h, w)
    double max_size_frac = 0.30;
    std::vector<std::array<float, 3>> palette; // empty: random colors
    double background_noise = 0.02;
    double min_color_contrast = 0.35;

    void validate() const;
};

struct SceneObject {
    ShapeCategory category;
    double cx, cy;      // pixel coordinates
    double radius;      // circumscribed radius in pixels
    double rotation;    // radians
    std::array<float, 3> color;
};

struct Scene {
    Image image;
    std::vector<std::pair<ShapeCategory, BinaryMask>> masks; // one union mask per category present
    std::vector<SceneObject> objects;
};

/// Rasterize one shape onto the image (alpha-composited, 3x3 supersampled)
/// and OR its coverage into the mask.
void rasterize_shape(Image& img, BinaryMask& mask, const SceneObject& obj);

/// Anti-aliased scene with non-overlapping objects; deterministic per rng
/// state. Per-category masks are unions over that category's instances.
Scene generate_scene(const ShapeSceneSpec& spec, Rng& rng);

} // namespace refnet

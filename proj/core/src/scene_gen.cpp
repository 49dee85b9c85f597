#include "refnet/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x, y;
};

Vec2 rotate(Vec2 p, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// signed distance to a simple polygon (negative inside, even-odd rule)
double polygon_sdf(const std::vector<Vec2>& v, Vec2 p) {
    double d2 = 1e30;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Vec2 e{v[j].x - v[i].x, v[j].y - v[i].y};
        const Vec2 w{p.x - v[i].x, p.y - v[i].y};
        const double t = std::clamp((w.x * e.x + w.y * e.y) / (e.x * e.x + e.y * e.y), 0.0, 1.0);
        const Vec2 d{w.x - e.x * t, w.y - e.y * t};
        d2 = std::min(d2, d.x * d.x + d.y * d.y);
        const bool crosses = (v[i].y > p.y) != (v[j].y > p.y);
        if (crosses && p.x < v[i].x + (p.y - v[i].y) / (v[j].y - v[i].y) * (v[j].x - v[i].x))
            inside = !inside;
    }
    return (inside ? -1.0 : 1.0) * std::sqrt(d2);
}

std::vector<Vec2> shape_polygon(ShapeCategory c, double r) {
    std::vector<Vec2> v;
    switch (c) {
    case ShapeCategory::Square: {
        const double s = r * 0.78;
        v = {{-s, -s}, {s, -s}, {s, s}, {-s, s}};
        break;
    }
    case ShapeCategory::Triangle: {
        for (int k = 0; k < 3; ++k) {
            const double a = -kPi / 2 + 2 * kPi * k / 3;
            v.push_back({r * std::cos(a), r * std::sin(a)});
        }
        break;
    }
    case ShapeCategory::Cross: {
        const double t = r * 0.32, l = r;
        v = {{-t, -l}, {t, -l}, {t, -t}, {l, -t}, {l, t}, {t, t},
             {t, l},  {-t, l}, {-t, t}, {-l, t}, {-l, -t}, {-t, -t}};
        break;
    }
    case ShapeCategory::Star: {
        const double inner = r * 0.45;
        for (int k = 0; k < 10; ++k) {
            const double rad = (k % 2 == 0) ? r : inner;
            const double a = -kPi / 2 + kPi * k / 5;
            v.push_back({rad * std::cos(a), rad * std::sin(a)});
        }
        break;
    }
    default:
        throw std::logic_error("shape_polygon: not a polygon category");
    }
    return v;
}

double shape_sdf(const SceneObject& obj, double px, double py) {
    Vec2 p{px - obj.cx, py - obj.cy};
    switch (obj.category) {
    case ShapeCategory::Circle:
        return std::hypot(p.x, p.y) - obj.radius;
    case ShapeCategory::Ring: {
        const double d = std::hypot(p.x, p.y);
        return std::max(d - obj.radius, obj.radius * 0.55 - d);
    }
    default:
        return polygon_sdf(shape_polygon(obj.category, obj.radius), rotate(p, -obj.rotation));
    }
}

} // namespace

std::string to_string(ShapeCategory c) {
    switch (c) {
    case ShapeCategory::Circle: return "circle";
    case ShapeCategory::Square: return "square";
    case ShapeCategory::Triangle: return "triangle";
    case ShapeCategory::Cross: return "cross";
    case ShapeCategory::Star: return "star";
    case ShapeCategory::Ring: return "ring";
    }
    throw std::logic_error("to_string: bad category");
}

ShapeCategory category_from_string(const std::string& s) {
    if (s == "circle") return ShapeCategory::Circle;
    if (s == "square") return ShapeCategory::Square;
    if (s == "triangle") return ShapeCategory::Triangle;
    if (s == "cross") return ShapeCategory::Cross;
    if (s == "star") return ShapeCategory::Star;
    if (s == "ring") return ShapeCategory::Ring;
    throw std::invalid_argument("unknown shape category: " + s);
}

void ShapeSceneSpec::validate() const {
    if (height < 8 || width < 8) throw std::invalid_argument("scene spec: canvas too small");
    if (min_objects < 0 || max_objects < min_objects)
        throw std::invalid_argument("scene spec: bad object count range");
    if (min_size_frac <= 0 || max_size_frac < min_size_frac)
        throw std::invalid_argument("scene spec: bad size range");
    if (max_objects > 0) {
        const double rmin = min_size_frac * std::min(height, width);
        if (rmin < 1.0 || 2.0 * (rmin + 1.5) >= std::min(height, width))
            throw std::invalid_argument("scene spec: canvas too small for min object size");
    }
    if (categories.empty() && max_objects > 0)
        throw std::invalid_argument("scene spec: no categories");
}

void rasterize_shape(Image& img, BinaryMask& mask, const SceneObject& obj) {
    const int x0 = std::max(0, static_cast<int>(std::floor(obj.cx - obj.radius - 2)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(obj.cx + obj.radius + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(obj.cy - obj.radius - 2)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(obj.cy + obj.radius + 2)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            int hits = 0;
            for (int sy = 0; sy < 3; ++sy)
                for (int sx = 0; sx < 3; ++sx) {
                    const double px = x + (sx - 1) / 3.0;
                    const double py = y + (sy - 1) / 3.0;
                    if (shape_sdf(obj, px, py) < 0) ++hits;
                }
            if (hits == 0) continue;
            const float a = hits / 9.f;
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = (1 - a) * img.at(c, y, x) + a * obj.color[c];
            if (a >= 0.5f) mask.at(y, x) = 1;
        }
    }
}

Scene generate_scene(const ShapeSceneSpec& spec, Rng& rng) {
    spec.validate();
    Scene scene;
    scene.image = Image(spec.height, spec.width, 3);

    std::array<float, 3> bg;
    for (auto& v : bg) v = static_cast<float>(rng.uniform(0.1, 0.9));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const double noise = spec.background_noise > 0
                                         ? rng.normal(0.0, spec.background_noise)
                                         : 0.0;
                scene.image.at(c, y, x) =
                    std::clamp(bg[c] + static_cast<float>(noise), 0.f, 1.f);
            }

    const int count = spec.max_objects == 0 ? 0 : rng.uniform_int(spec.min_objects, spec.max_objects);
    const double rmin = spec.min_size_frac * std::min(spec.height, spec.width);
    const double rmax = spec.max_size_frac * std::min(spec.height, spec.width);

    auto pick_color = [&]() {
        for (int attempt = 0; attempt < 64; ++attempt) {
            std::array<float, 3> col;
            if (!spec.palette.empty()) {
                col = spec.palette[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int>(spec.palette.size()) - 1))];
                for (auto& v : col)
                    v = std::clamp(v + static_cast<float>(rng.uniform(-0.05, 0.05)), 0.f, 1.f);
            } else {
                for (auto& v : col) v = static_cast<float>(rng.uniform(0.05, 0.95));
            }
            double d2 = 0;
            for (int c = 0; c < 3; ++c) d2 += (col[c] - bg[c]) * (col[c] - bg[c]);
            if (std::sqrt(d2) >= spec.min_color_contrast) return col;
        }
        return std::array<float, 3>{1.f, 1.f, 1.f};
    };

    for (int k = 0; k < count; ++k) {
        SceneObject obj;
        obj.category = spec.categories[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(spec.categories.size()) - 1))];
        obj.radius = rng.uniform(rmin, rmax);
        obj.rotation = rng.uniform(0.0, 2 * kPi);
        obj.color = pick_color();
        bool placed = false;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            const double margin = obj.radius + 1.5;
            if (2 * margin >= std::min(spec.height, spec.width)) break;
            obj.cx = rng.uniform(margin, spec.width - margin);
            obj.cy = rng.uniform(margin, spec.height - margin);
            placed = true;
            for (const auto& other : scene.objects) {
                const double d = std::hypot(obj.cx - other.cx, obj.cy - other.cy);
                if (d < obj.radius + other.radius + 2.0) {
                    placed = false;
                    break;
                }
            }
        }
        if (placed) scene.objects.push_back(obj);
    }

    for (const auto& obj : scene.objects) {
        BinaryMask* target = nullptr;
        for (auto& [cat, mask] : scene.masks)
            if (cat == obj.category) target = &mask;
        if (!target) {
            scene.masks.emplace_back(obj.category, BinaryMask(spec.height, spec.width));
            target = &scene.masks.back().second;
        }
        rasterize_shape(scene.image, *target, obj);
    }
    return scene;
}

} // namespace refnet

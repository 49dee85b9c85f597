#include "refnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "refnet/image_io.hpp"

namespace refnet {

namespace {

struct Color {
    float r, g, b;
};

const Color kPalette[] = {{0.85f, 0.25f, 0.20f}, {0.20f, 0.45f, 0.85f}, {0.15f, 0.65f, 0.30f},
                          {0.80f, 0.60f, 0.10f}, {0.55f, 0.25f, 0.75f}, {0.10f, 0.65f, 0.65f}};

void put(Image& img, int x, int y, Color c) {
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
    img.at(0, y, x) = c.r;
    img.at(1, y, x) = c.g;
    img.at(2, y, x) = c.b;
}

void line(Image& img, int x0, int y0, int x1, int y1, Color c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put(img, x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

// 5x7 bitmap glyphs for the characters chart labels need
const char* glyph(char ch) {
    switch (std::toupper(static_cast<unsigned char>(ch))) {
    case '0': return "011101001110011101011100101110";
    case '1': return "001000110000100001000010001110";
    case '2': return "011101000100010001000100011111";
    case '3': return "111100000100110000010000111110";
    case '4': return "100101001010010111110001000010";
    case '5': return "111111000011110000010000111110";
    case '6': return "011101000011110100011000101110";
    case '7': return "111110000100010001000100001000";
    case '8': return "011101000101110100011000101110";
    case '9': return "011101000101111000010000101110";
    case '.': return "000000000000000000000000001100";
    case '-': return "000000000001111000000000000000";
    case '_': return "000000000000000000000000011111";
    case '=': return "000001111100000111110000000000";
    case 'A': return "011101000110001111111000110001";
    case 'B': return "111101000111110100011000111110";
    case 'C': return "011101000110000100001000101110";
    case 'D': return "111101000110001100011000111110";
    case 'E': return "111111000011110100001000011111";
    case 'F': return "111111000011110100001000010000";
    case 'G': return "011101000010000101111000101110";
    case 'H': return "100011000111111100011000110001";
    case 'I': return "011100010000100001000010001110";
    case 'J': return "001110001000010000101001001100";
    case 'K': return "100101010011000101001001010010";
    case 'L': return "100001000010000100001000011111";
    case 'M': return "100011101110101100011000110001";
    case 'N': return "100011100110101100111000110001";
    case 'O': return "011101000110001100011000101110";
    case 'P': return "111101000110001111101000010000";
    case 'Q': return "011101000110001101011001001101";
    case 'R': return "111101000110001111101001010001";
    case 'S': return "011111000001110000010000111110";
    case 'T': return "111110010000100001000010000100";
    case 'U': return "100011000110001100011000101110";
    case 'V': return "100011000110001010100101000100";
    case 'W': return "100011000110101101011010101010";
    case 'X': return "100010101000100010100101010001";
    case 'Y': return "100010101000100001000010000100";
    case 'Z': return "111110001000100010001000011111";
    case ' ': return nullptr;
    default: return "000000000001110001110000000000"; // unknown: small box
    }
}

void draw_text(Image& img, int x, int y, const std::string& text, Color c) {
    for (char ch : text) {
        const char* g = glyph(ch);
        if (g) {
            for (int row = 0; row < 6; ++row)
                for (int col = 0; col < 5; ++col)
                    if (g[row * 5 + col] == '1') put(img, x + col, y + row, c);
        }
        x += 6;
    }
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

Image canvas(int w, int h) { return Image(h, w, 3, 1.f); }

constexpr int kMargin = 46;
const Color kAxis{0.2f, 0.2f, 0.2f};

void draw_frame(Image& img, const std::string& title, double lo, double hi) {
    line(img, kMargin, img.height - kMargin, img.width - 12, img.height - kMargin, kAxis);
    line(img, kMargin, img.height - kMargin, kMargin, 12, kAxis);
    draw_text(img, kMargin, 4, title, kAxis);
    draw_text(img, 2, 12, fmt_tick(hi), kAxis);
    draw_text(img, 2, img.height - kMargin - 3, fmt_tick(lo), kAxis);
}

} // namespace

void write_line_chart(const std::string& path, const std::vector<PlotSeries>& series,
                      const std::string& title, int width, int height) {
    Image img = canvas(width, height);
    double lo = 0, hi = 1e-9;
    std::size_t maxlen = 2;
    for (const auto& s : series)
        for (double v : s.values)
            if (std::isfinite(v)) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (const auto& s : series) maxlen = std::max(maxlen, s.values.size());
    if (hi <= lo) hi = lo + 1;

    draw_frame(img, title, lo, hi);
    const int plot_w = width - kMargin - 12, plot_h = height - kMargin - 12;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Color c = kPalette[si % 6];
        const auto& vals = series[si].values;
        int px = -1, py = -1;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!std::isfinite(vals[i])) continue;
            const int x = kMargin + static_cast<int>(static_cast<double>(i) /
                                                     std::max<std::size_t>(maxlen - 1, 1) * plot_w);
            const int y = height - kMargin -
                          static_cast<int>((vals[i] - lo) / (hi - lo) * plot_h);
            if (px >= 0) line(img, px, py, x, y, c);
            px = x;
            py = y;
        }
        draw_text(img, kMargin + 8, 14 + static_cast<int>(si) * 9, series[si].label, c);
    }
    write_ppm(path, img);
}

void write_bar_chart(const std::string& path,
                     const std::vector<std::pair<std::string, double>>& bars,
                     const std::string& title, int width, int height) {
    Image img = canvas(width, height);
    double hi = 1e-9;
    for (const auto& [_, v] : bars) hi = std::max(hi, v);
    draw_frame(img, title, 0, hi);
    if (bars.empty()) {
        write_ppm(path, img);
        return;
    }
    const int plot_w = width - kMargin - 12, plot_h = height - kMargin - 12;
    const int slot = plot_w / static_cast<int>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const Color c = kPalette[i % 6];
        const int x0 = kMargin + static_cast<int>(i) * slot + slot / 6;
        const int x1 = kMargin + static_cast<int>(i + 1) * slot - slot / 6;
        const int y1 = img.height - kMargin;
        const int y0 = y1 - static_cast<int>(bars[i].second / hi * plot_h);
        for (int x = x0; x <= x1; ++x) line(img, x, y0, x, y1 - 1, c);
        draw_text(img, x0, y1 + 4, bars[i].first.substr(0, 7), kAxis);
        draw_text(img, x0, y0 - 8, fmt_tick(bars[i].second), kAxis);
    }
    write_ppm(path, img);
}

} // namespace refnet

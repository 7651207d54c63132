#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairkit/errors.hpp"

namespace fairkit {

// 8-bit RGB image with an optional background mask (true = background pixel,
// excluded from every ITA computation). Without an explicit mask, near-black
// pixels (all channels <= 2) are treated as background by the fundus pipeline.
struct RgbImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> rgb;        // 3 bytes per pixel, row-major
    std::vector<std::uint8_t> background; // optional, 1 byte per pixel (0/1)

    std::size_t pixel_count() const { return width * height; }
    const std::uint8_t* pixel(std::size_t x, std::size_t y) const {
        return rgb.data() + 3 * (y * width + x);
    }
    bool is_background(std::size_t x, std::size_t y) const {
        if (background.empty()) return false;
        return background[y * width + x] != 0;
    }
    static RgbImage solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g,
                          std::uint8_t b);
};

// Binary P6 portable pixmap, maxval 255.
RgbImage load_ppm(const std::string& path);
void save_ppm(const RgbImage& image, const std::string& path);

// 8-bit PNG via libpng; grayscale/palette/alpha inputs are expanded to RGB.
RgbImage load_png(const std::string& path);

// Dispatch on extension (.png / .ppm).
RgbImage load_image(const std::string& path);

// Polygonal region in pixel coordinates (used for face-region ITA).
struct RegionPolygon {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

// JSON sidecar: [{"name": "...", "points": [[x, y], ...]}, ...]
std::vector<RegionPolygon> load_regions_json(const std::string& path);

bool point_in_polygon(const RegionPolygon& poly, double x, double y);

}  // namespace fairkit

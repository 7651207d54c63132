#include "fairkit/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fairkit {

RgbImage RgbImage::solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) {
    RgbImage img;
    img.width = w;
    img.height = h;
    img.rgb.resize(3 * w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
        img.rgb[3 * i] = r;
        img.rgb[3 * i + 1] = g;
        img.rgb[3 * i + 2] = b;
    }
    return img;
}

RgbImage load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_ppm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw DataError("load_ppm: not a binary P6 pixmap: " + path);
    auto next_token = [&]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        throw DataError("load_ppm: truncated header in " + path);
    };
    const std::size_t w = std::stoul(next_token());
    const std::size_t h = std::stoul(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255) throw DataError("load_ppm: only maxval 255 supported");
    is.get();  // single whitespace after maxval
    RgbImage img;
    img.width = w;
    img.height = h;
    img.rgb.resize(3 * w * h);
    is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!is) throw DataError("load_ppm: truncated pixel data in " + path);
    return img;
}

void save_ppm(const RgbImage& image, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_ppm: cannot open for write " + path);
    os << "P6\n" << image.width << " " << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.rgb.data()),
             static_cast<std::streamsize>(image.rgb.size()));
}

RgbImage load_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw DataError("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("load_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("load_png: decode failed for " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    RgbImage img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("load_png: unexpected channel count in " + path);
    }
    img.rgb.resize(3 * img.width * img.height);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.rgb.data() + 3 * img.width * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

RgbImage load_image(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".png") return load_png(path);
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm") return load_ppm(path);
    throw DataError("load_image: unsupported extension on " + path);
}

std::vector<RegionPolygon> load_regions_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("load_regions_json: cannot open " + path);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const std::exception& e) {
        throw DataError("load_regions_json: bad JSON in " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw DataError("load_regions_json: expected a top-level array");
    std::vector<RegionPolygon> regions;
    for (const auto& item : doc) {
        RegionPolygon poly;
        poly.name = item.value("name", "region" + std::to_string(regions.size()));
        for (const auto& pt : item.at("points"))
            poly.points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
        if (poly.points.size() < 3)
            throw DataError("load_regions_json: polygon '" + poly.name + "' has <3 points");
        regions.push_back(std::move(poly));
    }
    return regions;
}

bool point_in_polygon(const RegionPolygon& poly, double x, double y) {
    bool inside = false;
    const auto& pts = poly.points;
    for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
        const auto [xi, yi] = pts[i];
        const auto [xj, yj] = pts[j];
        const bool crosses = (yi > y) != (yj > y);
        if (crosses && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

}  // namespace fairkit

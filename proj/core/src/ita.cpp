#include "fairkit/ita.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairkit {

namespace {

// Published 4-decimal sRGB(D65) -> XYZ matrix; the white point is the row sum,
// which keeps pure white at exactly a = b = 0.
constexpr double kM[3][3] = {
    {0.4124, 0.3576, 0.1805},
    {0.2126, 0.7152, 0.0722},
    {0.0193, 0.1192, 0.9505},
};
constexpr double kXn = 0.4124 + 0.3576 + 0.1805;
constexpr double kYn = 0.2126 + 0.7152 + 0.0722;
constexpr double kZn = 0.0193 + 0.1192 + 0.9505;

double srgb_linear(std::uint8_t c8) {
    const double c = static_cast<double>(c8) / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    if (t > delta * delta * delta) return std::cbrt(t);
    return t / (3.0 * delta * delta) + 4.0 / 29.0;
}

bool default_background(const std::uint8_t* px) {
    return px[0] <= 2 && px[1] <= 2 && px[2] <= 2;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double idx = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

}  // namespace

LabPixel srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double rl = srgb_linear(r8), gl = srgb_linear(g8), bl = srgb_linear(b8);
    const double x = kM[0][0] * rl + kM[0][1] * gl + kM[0][2] * bl;
    const double y = kM[1][0] * rl + kM[1][1] * gl + kM[1][2] * bl;
    const double z = kM[2][0] * rl + kM[2][1] * gl + kM[2][2] * bl;
    const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
    LabPixel lab;
    lab.l = 116.0 * fy - 16.0;
    lab.a = 500.0 * (fx - fy);
    lab.b = 200.0 * (fy - fz);
    return lab;
}

double ita_pixel(const LabPixel& lab) {
    constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
    if (lab.b == 0.0) {
        if (lab.l > 50.0) return 90.0;
        if (lab.l < 50.0) return -90.0;
        return 0.0;
    }
    return kRadToDeg * std::atan((lab.l - 50.0) / lab.b);
}

const char* ita_method_name(ItaMethod method) {
    switch (method) {
        case ItaMethod::FundusMask: return "fundus_mask";
        case ItaMethod::FaceRegions: return "face_regions";
        case ItaMethod::WholeImage: return "whole_image";
    }
    return "?";
}

std::vector<std::uint8_t> fundus_mask(const RgbImage& image) {
    const std::size_t n = image.pixel_count();
    if (n == 0) throw DataError("fundus_mask: empty image");
    std::vector<std::uint8_t> mask(n, 0);
    std::vector<double> lightness(n, 0.0);
    std::vector<double> fg;
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            const std::size_t i = y * image.width + x;
            const std::uint8_t* px = image.pixel(x, y);
            const bool bg =
                image.background.empty() ? default_background(px) : image.is_background(x, y);
            if (bg) continue;
            const LabPixel lab = srgb_to_lab(px[0], px[1], px[2]);
            lightness[i] = lab.l;
            mask[i] = 1;
            fg.push_back(lab.l);
        }
    }
    if (fg.empty()) throw DataError("fundus_mask: no foreground pixels");
    std::sort(fg.begin(), fg.end());
    const double lo = quantile_sorted(fg, 0.10);
    const double hi = quantile_sorted(fg, 0.90);
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i] && (lightness[i] < lo || lightness[i] > hi)) mask[i] = 0;
    return mask;
}

namespace {

// Edge-renormalized separable Gaussian blur over valid pixels only; a blur of
// a constant field stays exactly constant.
std::vector<double> blur_map(const std::vector<double>& values,
                             const std::vector<std::uint8_t>& valid, std::size_t width,
                             std::size_t height, int kernel_size, double sigma) {
    const int half = kernel_size / 2;
    std::vector<double> w(kernel_size);
    for (int k = -half; k <= half; ++k)
        w[k + half] = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));

    std::vector<double> pass1(values.size(), 0.0), out(values.size(), 0.0);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t i = y * width + x;
            if (!valid[i]) continue;
            double acc = 0, norm = 0;
            for (int k = -half; k <= half; ++k) {
                const long xx = static_cast<long>(x) + k;
                if (xx < 0 || xx >= static_cast<long>(width)) continue;
                const std::size_t j = y * width + static_cast<std::size_t>(xx);
                if (!valid[j]) continue;
                acc += w[k + half] * values[j];
                norm += w[k + half];
            }
            pass1[i] = acc / norm;
        }
    }
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t i = y * width + x;
            if (!valid[i]) continue;
            double acc = 0, norm = 0;
            for (int k = -half; k <= half; ++k) {
                const long yy = static_cast<long>(y) + k;
                if (yy < 0 || yy >= static_cast<long>(height)) continue;
                const std::size_t j = static_cast<std::size_t>(yy) * width + x;
                if (!valid[j]) continue;
                acc += w[k + half] * pass1[j];
                norm += w[k + half];
            }
            out[i] = acc / norm;
        }
    }
    return out;
}

}  // namespace

ItaResult face_region_ita(const RgbImage& image, const std::vector<RegionPolygon>& regions) {
    if (regions.empty()) throw DomainError("face_region_ita: at least one region required");
    const std::size_t n = image.pixel_count();
    if (n == 0) throw DataError("face_region_ita: empty image");

    std::vector<double> ita_map(n, 0.0);
    std::vector<std::uint8_t> valid(n, 0);
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            const std::size_t i = y * image.width + x;
            if (image.is_background(x, y)) continue;
            const std::uint8_t* px = image.pixel(x, y);
            ita_map[i] = ita_pixel(srgb_to_lab(px[0], px[1], px[2]));
            valid[i] = 1;
        }
    }
    const auto blurred = blur_map(ita_map, valid, image.width, image.height, 11, 11.0 / 6.0);

    std::vector<double> region_medians;
    std::size_t used_pixels = 0;
    for (const auto& region : regions) {
        std::vector<double> inside;
        for (std::size_t y = 0; y < image.height; ++y) {
            for (std::size_t x = 0; x < image.width; ++x) {
                const std::size_t i = y * image.width + x;
                if (!valid[i]) continue;
                if (point_in_polygon(region, static_cast<double>(x) + 0.5,
                                     static_cast<double>(y) + 0.5))
                    inside.push_back(blurred[i]);
            }
        }
        if (inside.empty()) continue;  // empty region skipped
        used_pixels += inside.size();
        region_medians.push_back(median(std::move(inside)));
    }
    if (region_medians.empty()) throw DataError("face_region_ita: every region is empty");

    ItaResult res;
    res.method = ItaMethod::FaceRegions;
    res.ita_degrees = std::accumulate(region_medians.begin(), region_medians.end(), 0.0) /
                      static_cast<double>(region_medians.size());
    res.mask_coverage = static_cast<double>(used_pixels) / static_cast<double>(n);
    return res;
}

ItaResult image_ita(const RgbImage& image, ItaMethod method,
                    const std::vector<RegionPolygon>& regions) {
    if (method == ItaMethod::FaceRegions) return face_region_ita(image, regions);
    const std::size_t n = image.pixel_count();
    if (n == 0) throw DataError("image_ita: empty image");

    std::vector<std::uint8_t> mask;
    if (method == ItaMethod::FundusMask) {
        mask = fundus_mask(image);
    } else {
        mask.assign(n, 0);
        for (std::size_t y = 0; y < image.height; ++y)
            for (std::size_t x = 0; x < image.width; ++x)
                if (!image.is_background(x, y)) mask[y * image.width + x] = 1;
    }
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            if (!mask[y * image.width + x]) continue;
            const std::uint8_t* px = image.pixel(x, y);
            sum += ita_pixel(srgb_to_lab(px[0], px[1], px[2]));
            ++used;
        }
    }
    if (used == 0) throw DataError("image_ita: empty mask");
    ItaResult res;
    res.method = method;
    res.ita_degrees = sum / static_cast<double>(used);
    res.mask_coverage = static_cast<double>(used) / static_cast<double>(n);
    return res;
}

bool binarize(double ita_degrees, double cutoff) { return ita_degrees <= cutoff; }

ItaResult binarize(ItaResult result, double cutoff) {
    result.binary_attribute = binarize(result.ita_degrees, cutoff);
    return result;
}

CutoffSweep cutoff_sweep(const std::vector<double>& itas, const std::vector<int>& reference_labels,
                         int cutoff_lo, int cutoff_hi) {
    if (itas.size() != reference_labels.size())
        throw ShapeError("cutoff_sweep: itas/labels size mismatch");
    if (itas.size() < 2) throw DataError("cutoff_sweep: too few samples");
    if (cutoff_lo > cutoff_hi) throw DomainError("cutoff_sweep: empty cutoff range");
    const double n = static_cast<double>(itas.size());
    double label_mean = 0;
    for (int v : reference_labels) label_mean += v;
    label_mean /= n;
    double label_var = 0;
    for (int v : reference_labels) label_var += (v - label_mean) * (v - label_mean);
    if (label_var == 0) throw DataError("cutoff_sweep: reference labels are constant");

    CutoffSweep sweep;
    double best = -2;
    for (int c = cutoff_lo; c <= cutoff_hi; ++c) {
        double t_mean = 0;
        for (double v : itas) t_mean += (v <= c) ? 1.0 : 0.0;
        t_mean /= n;
        double cov = 0, t_var = 0;
        for (std::size_t i = 0; i < itas.size(); ++i) {
            const double t = (itas[i] <= c) ? 1.0 : 0.0;
            cov += (t - t_mean) * (reference_labels[i] - label_mean);
            t_var += (t - t_mean) * (t - t_mean);
        }
        // A cutoff that classifies everything the same way carries no signal.
        const double corr = (t_var == 0) ? 0.0 : cov / std::sqrt(t_var * label_var);
        sweep.cutoffs.push_back(c);
        sweep.correlations.push_back(corr);
        if (corr > best + 1e-15) {
            best = corr;
            sweep.best_cutoff = c;
            sweep.best_correlation = corr;
        }
    }
    return sweep;
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
    if (bins == 0 || hi <= lo) throw DomainError("histogram: bad bin spec");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        if (v < lo || v > hi) continue;
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        if (b == bins) b = bins - 1;
        h.counts[b] += 1;
    }
    return h;
}

}  // namespace fairkit

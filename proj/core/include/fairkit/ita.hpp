#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/image_io.hpp"

namespace fairkit {

// CIELab triplet from sRGB under the D65 white point.
struct LabPixel {
    double l = 0;  // lightness, [0, 100]
    double a = 0;  // red-green axis
    double b = 0;  // blue-yellow axis
};

LabPixel srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Individual typology angle in degrees: (180/pi) * arctan((L-50)/b), with the
// b=0 column resolved as +90 (L>50), -90 (L<50), 0 (L=50).
double ita_pixel(const LabPixel& lab);

enum class ItaMethod { FundusMask, FaceRegions, WholeImage };

const char* ita_method_name(ItaMethod method);

struct ItaResult {
    double ita_degrees = 0;
    double mask_coverage = 0;  // fraction of image pixels used
    ItaMethod method = ItaMethod::WholeImage;
    std::optional<bool> binary_attribute;  // set by binarize
};

// Foreground selector for fundus-style images: drops background, then keeps
// pixels whose lightness falls inside the central 80% band (10th..90th
// percentile) — a deterministic surrogate for the one-class luminance
// boundary, stripping light artifacts.
std::vector<std::uint8_t> fundus_mask(const RgbImage& image);

// Face-region pipeline: per-pixel ITA map, Gaussian blur (kernel 11,
// sigma = 11/6, edge-renormalized), median per region polygon, mean over
// regions.
ItaResult face_region_ita(const RgbImage& image, const std::vector<RegionPolygon>& regions);

// Mean per-pixel ITA over the method's mask. The FaceRegions method needs the
// region polygons.
ItaResult image_ita(const RgbImage& image, ItaMethod method,
                    const std::vector<RegionPolygon>& regions = {});

// dark = (ita <= cutoff), inclusive at the cutoff.
bool binarize(double ita_degrees, double cutoff);
ItaResult binarize(ItaResult result, double cutoff);

struct CutoffSweep {
    std::vector<int> cutoffs;
    std::vector<double> correlations;  // Pearson of 1{ita<=c} vs reference label
    int best_cutoff = 0;               // argmax correlation, ties -> lowest cutoff
    double best_correlation = 0;
};

CutoffSweep cutoff_sweep(const std::vector<double>& itas, const std::vector<int>& reference_labels,
                         int cutoff_lo, int cutoff_hi);

// Density export for the distribution plots: equal-width bins over [lo, hi].
struct Histogram {
    double lo = 0, hi = 0;
    std::vector<std::size_t> counts;
};

Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins);

}  // namespace fairkit

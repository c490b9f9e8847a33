#pragma once

// First-level descriptors over grayscale images: HoG, LBP histograms and the
// flattened raw pixels.
//
// Orientation convention (HoG): columns grow to the right (+x) and rows grow
// downward (+y). gx = I(r, c+1) - I(r, c-1), gy = I(r+1, c) - I(r-1, c), with
// edge replication. The angle is atan2(gy, gx) folded into [0, 180) degrees
// for unsigned gradients; bin k covers [k*180/n, (k+1)*180/n). A vertical
// step edge (dark left, bright right) therefore lands in bin 0.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace outskirt::features {

using FeatureVector = std::vector<double>;

/// Row-major grayscale image with pixels in [0, 1].
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::vector<double> px);

    double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
    double& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }

    bool operator==(const GrayImage&) const = default;
};

struct HogConfig {
    std::size_t orientations = 9;
    std::size_t cell_rows = 14;
    std::size_t cell_cols = 14;
    std::size_t block_rows = 1;
    std::size_t block_cols = 1;
    bool is_signed = false;

    void validate() const;
};

enum class LbpMethod { standard, ror, uniform, var };

LbpMethod parse_lbp_method(std::string_view name);
std::string_view to_string(LbpMethod m);

struct LbpConfig {
    std::size_t points = 4;
    double radius = 8.0;
    LbpMethod method = LbpMethod::uniform;

    void validate() const;
};

/// Length of the HoG vector for an image of the given size.
std::size_t hog_length(const HogConfig& cfg, std::size_t width, std::size_t height);

/// Block-normalized (L2, eps 1e-6) histograms of gradient orientation.
FeatureVector hog(const GrayImage& image, const HogConfig& cfg);

/// Number of histogram bins for an LBP method.
std::size_t lbp_bins(const LbpConfig& cfg);

/// Per-pixel LBP code for the pixel at (row, col). The neighbor circle must
/// lie inside the image.
std::size_t lbp_code(const GrayImage& image, const LbpConfig& cfg, std::size_t row, std::size_t col);

/// Uniform-pattern bin for a P-bit code: popcount if at most two circular
/// transitions, P+1 otherwise.
std::size_t uniform_bin(std::size_t code, std::size_t points);

/// Histogram over pixels whose neighbor circle lies fully inside the image,
/// normalized to sum 1.
FeatureVector lbp_histogram(const GrayImage& image, const LbpConfig& cfg);

FeatureVector raw(const GrayImage& image);

}  // namespace outskirt::features

#include "outskirt/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "outskirt/error.hpp"

namespace outskirt::features {

GrayImage::GrayImage(std::size_t w, std::size_t h, std::vector<double> px)
    : width(w), height(h), pixels(std::move(px)) {
    if (w == 0 || h == 0) throw DataError("image dimensions must be positive");
    if (pixels.size() != w * h) {
        throw DataError("image has " + std::to_string(pixels.size()) + " pixels, expected " +
                        std::to_string(w * h));
    }
    for (double v : pixels) {
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("pixel value outside [0, 1]");
    }
}

// ---------------------------------------------------------------------------
// HoG

void HogConfig::validate() const {
    if (orientations == 0 || cell_rows == 0 || cell_cols == 0 || block_rows == 0 || block_cols == 0) {
        throw ConfigError("hog: orientations, cell and block sizes must be positive");
    }
}

namespace {

struct CellGrid {
    std::size_t rows;
    std::size_t cols;
};

CellGrid cell_grid(const HogConfig& cfg, std::size_t width, std::size_t height) {
    cfg.validate();
    const CellGrid g{height / cfg.cell_rows, width / cfg.cell_cols};
    if (g.rows == 0 || g.cols == 0) {
        throw ConfigError("hog: image " + std::to_string(width) + "x" + std::to_string(height) +
                          " is smaller than one " + std::to_string(cfg.cell_cols) + "x" +
                          std::to_string(cfg.cell_rows) + " cell");
    }
    if (g.rows < cfg.block_rows || g.cols < cfg.block_cols) {
        throw ConfigError("hog: cell grid is smaller than one block");
    }
    return g;
}

}  // namespace

std::size_t hog_length(const HogConfig& cfg, std::size_t width, std::size_t height) {
    const auto g = cell_grid(cfg, width, height);
    return (g.rows - cfg.block_rows + 1) * (g.cols - cfg.block_cols + 1) * cfg.block_rows *
           cfg.block_cols * cfg.orientations;
}

FeatureVector hog(const GrayImage& image, const HogConfig& cfg) {
    const auto g = cell_grid(cfg, image.width, image.height);
    const std::size_t w = image.width, h = image.height, n_bins = cfg.orientations;
    const double span = cfg.is_signed ? 360.0 : 180.0;
    const double bin_width = span / static_cast<double>(n_bins);

    std::vector<double> cells(g.rows * g.cols * n_bins, 0.0);
    for (std::size_t r = 0; r < g.rows * cfg.cell_rows; ++r) {
        for (std::size_t c = 0; c < g.cols * cfg.cell_cols; ++c) {
            const double gx = image.at(r, std::min(c + 1, w - 1)) - image.at(r, c == 0 ? 0 : c - 1);
            const double gy = image.at(std::min(r + 1, h - 1), c) - image.at(r == 0 ? 0 : r - 1, c);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
            angle = std::fmod(angle + 360.0, span);
            auto bin = static_cast<std::size_t>(angle / bin_width);
            if (bin >= n_bins) bin = n_bins - 1;
            const auto cell = (r / cfg.cell_rows) * g.cols + (c / cfg.cell_cols);
            cells[cell * n_bins + bin] += mag;
        }
    }

    constexpr double eps = 1e-6;
    FeatureVector out;
    out.reserve(hog_length(cfg, w, h));
    for (std::size_t br = 0; br + cfg.block_rows <= g.rows; ++br) {
        for (std::size_t bc = 0; bc + cfg.block_cols <= g.cols; ++bc) {
            const auto start = out.size();
            double sq = 0.0;
            for (std::size_t i = 0; i < cfg.block_rows; ++i) {
                for (std::size_t j = 0; j < cfg.block_cols; ++j) {
                    const auto cell = (br + i) * g.cols + (bc + j);
                    for (std::size_t b = 0; b < n_bins; ++b) {
                        const double v = cells[cell * n_bins + b];
                        sq += v * v;
                        out.push_back(v);
                    }
                }
            }
            const double norm = std::sqrt(sq + eps * eps);
            for (auto i = start; i < out.size(); ++i) out[i] /= norm;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// LBP

LbpMethod parse_lbp_method(std::string_view name) {
    if (name == "default") return LbpMethod::standard;
    if (name == "ror") return LbpMethod::ror;
    if (name == "uniform") return LbpMethod::uniform;
    if (name == "var") return LbpMethod::var;
    throw ConfigError("unknown lbp method '" + std::string(name) +
                      "' (expected default, ror, uniform or var)");
}

std::string_view to_string(LbpMethod m) {
    switch (m) {
        case LbpMethod::standard: return "default";
        case LbpMethod::ror: return "ror";
        case LbpMethod::uniform: return "uniform";
        case LbpMethod::var: return "var";
    }
    return "?";
}

void LbpConfig::validate() const {
    if (points < 4) throw ConfigError("lbp.points must be >= 4");
    if (points > 24) throw ConfigError("lbp.points must be <= 24");
    if (!(radius >= 1.0) || !std::isfinite(radius)) throw ConfigError("lbp.radius must be >= 1");
}

std::size_t lbp_bins(const LbpConfig& cfg) {
    switch (cfg.method) {
        case LbpMethod::standard:
        case LbpMethod::ror: return std::size_t{1} << cfg.points;
        case LbpMethod::uniform:
        case LbpMethod::var: return cfg.points + 2;
    }
    return 0;
}

std::size_t uniform_bin(std::size_t code, std::size_t points) {
    std::size_t transitions = 0;
    for (std::size_t p = 0; p < points; ++p) {
        const auto a = (code >> p) & 1U;
        const auto b = (code >> ((p + 1) % points)) & 1U;
        transitions += (a != b);
    }
    if (transitions <= 2) return static_cast<std::size_t>(std::popcount(code));
    return points + 1;
}

namespace {

struct Offset {
    double dr;
    double dc;
};

std::vector<Offset> circle_offsets(const LbpConfig& cfg) {
    std::vector<Offset> offs;
    const auto p_count = static_cast<double>(cfg.points);
    for (std::size_t p = 0; p < cfg.points; ++p) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(p) / p_count;
        // round away trigonometric noise so axis-aligned neighbors hit pixel centers
        const double dr = std::round(-cfg.radius * std::sin(theta) * 1e9) / 1e9;
        const double dc = std::round(cfg.radius * std::cos(theta) * 1e9) / 1e9;
        offs.push_back({dr, dc});
    }
    return offs;
}

double bilinear(const GrayImage& img, double r, double c) {
    const double r0 = std::floor(r), c0 = std::floor(c);
    const double fr = r - r0, fc = c - c0;
    const auto ir = static_cast<std::size_t>(r0), ic = static_cast<std::size_t>(c0);
    const auto ir1 = std::min(ir + 1, img.height - 1), ic1 = std::min(ic + 1, img.width - 1);
    if (fr == 0.0 && fc == 0.0) return img.at(ir, ic);
    return (1 - fr) * (1 - fc) * img.at(ir, ic) + (1 - fr) * fc * img.at(ir, ic1) +
           fr * (1 - fc) * img.at(ir1, ic) + fr * fc * img.at(ir1, ic1);
}

struct Band {
    std::size_t r0, r1, c0, c1;  // inclusive
};

Band valid_band(const GrayImage& image, const LbpConfig& cfg) {
    cfg.validate();
    const auto margin = static_cast<std::size_t>(std::ceil(cfg.radius));
    if (image.height < 2 * margin + 1 || image.width < 2 * margin + 1) {
        throw ConfigError("lbp: image " + std::to_string(image.width) + "x" +
                          std::to_string(image.height) + " too small for radius " +
                          std::to_string(cfg.radius));
    }
    return {margin, image.height - 1 - margin, margin, image.width - 1 - margin};
}

std::size_t code_from(const GrayImage& image, const LbpConfig& cfg, const std::vector<Offset>& offs,
                      std::size_t row, std::size_t col) {
    const double center = image.at(row, col);
    std::vector<double> samples(cfg.points);
    std::size_t code = 0;
    for (std::size_t p = 0; p < cfg.points; ++p) {
        samples[p] = bilinear(image, static_cast<double>(row) + offs[p].dr,
                              static_cast<double>(col) + offs[p].dc);
        if (samples[p] >= center) code |= std::size_t{1} << p;
    }
    switch (cfg.method) {
        case LbpMethod::standard: return code;
        case LbpMethod::ror: {
            const std::size_t mask = (std::size_t{1} << cfg.points) - 1;
            std::size_t best = code;
            for (std::size_t s = 1; s < cfg.points; ++s) {
                const std::size_t rot = ((code >> s) | (code << (cfg.points - s))) & mask;
                best = std::min(best, rot);
            }
            return best;
        }
        case LbpMethod::uniform: return uniform_bin(code, cfg.points);
        case LbpMethod::var: {
            double mean = 0.0;
            for (double s : samples) mean += s;
            mean /= static_cast<double>(cfg.points);
            double var = 0.0;
            for (double s : samples) var += (s - mean) * (s - mean);
            var /= static_cast<double>(cfg.points);
            // variance of values in [0,1] is at most 0.25
            const auto bins = cfg.points + 2;
            const auto bin = static_cast<std::size_t>(var / 0.25 * static_cast<double>(bins));
            return std::min(bin, bins - 1);
        }
    }
    return 0;
}

}  // namespace

std::size_t lbp_code(const GrayImage& image, const LbpConfig& cfg, std::size_t row, std::size_t col) {
    const auto band = valid_band(image, cfg);
    if (row < band.r0 || row > band.r1 || col < band.c0 || col > band.c1) {
        throw ConfigError("lbp: pixel neighbor circle leaves the image");
    }
    return code_from(image, cfg, circle_offsets(cfg), row, col);
}

FeatureVector lbp_histogram(const GrayImage& image, const LbpConfig& cfg) {
    const auto band = valid_band(image, cfg);
    const auto offs = circle_offsets(cfg);
    FeatureVector hist(lbp_bins(cfg), 0.0);
    std::size_t count = 0;
    for (auto r = band.r0; r <= band.r1; ++r) {
        for (auto c = band.c0; c <= band.c1; ++c) {
            hist[code_from(image, cfg, offs, r, c)] += 1.0;
            ++count;
        }
    }
    for (double& v : hist) v /= static_cast<double>(count);
    return hist;
}

FeatureVector raw(const GrayImage& image) { return image.pixels; }

}  // namespace outskirt::features

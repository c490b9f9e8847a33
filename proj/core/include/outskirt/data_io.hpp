#pragma once

// Dataset loaders (MNIST IDX, PGM folders, CSV) and synthetic blobs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "outskirt/features.hpp"
#include "outskirt/nnet.hpp"

namespace outskirt::data_io {

using features::GrayImage;
using nnet::Matrix;

struct Dataset {
    std::vector<GrayImage> images;
    std::vector<int> labels;
    std::string source;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }

    /// Rows at `indices`, in that order.
    Dataset subset(const std::vector<std::size_t>& indices) const;

    /// Indices whose label equals / differs from `label`.
    std::vector<std::size_t> indices_of(int label) const;
    std::vector<std::size_t> indices_except(int label) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Either may be gzip-compressed.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Every `*images-idx3-ubyte[.gz]` file in `dir` with its matching labels
/// file, concatenated in filename order.
Dataset load_mnist_dir(const std::filesystem::path& dir);

/// Binary PGM (P5), maxval <= 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Each subdirectory is a class; its name is the label (non-numeric names
/// get their index in sorted order). Files at the top level get label 0.
/// Files are read in filename order.
Dataset load_pgm_dir(const std::filesystem::path& dir);

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

/// Numeric CSV with one header row.
CsvTable load_csv(const std::filesystem::path& path);
void save_csv(const std::filesystem::path& path, const Matrix& values,
              const std::vector<std::string>& header = {});

/// Default header: x0, x1, ...
std::vector<std::string> default_header(std::size_t cols, const std::string& prefix = "x");

struct Blobs {
    Matrix inliers;           // N(0, I)
    Matrix outliers;          // N(separation * u, I)
    Eigen::VectorXd direction;  // u, unit length
};

Blobs make_blobs(std::size_t n_in, std::size_t n_out, std::size_t dim, double separation,
                 std::uint64_t seed);

/// Content hash (hex FNV-1a) used in run manifests.
std::string fingerprint(const Dataset& d);
std::string fingerprint(const Matrix& m);

}  // namespace outskirt::data_io

#include "outskirt/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <zlib.h>

#include "outskirt/error.hpp"
#include "outskirt/rng.hpp"

namespace fs = std::filesystem;

namespace outskirt::data_io {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.source = source;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        if (i >= images.size()) throw DataError("dataset index " + std::to_string(i) + " out of range");
        out.images.push_back(images[i]);
        out.labels.push_back(labels[i]);
    }
    return out;
}

std::vector<std::size_t> Dataset::indices_of(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) out.push_back(i);
    return out;
}

std::vector<std::size_t> Dataset::indices_except(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != label) out.push_back(i);
    return out;
}

namespace {

// Whole file, transparently gunzipped.
std::vector<unsigned char> read_bytes(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("file not found: " + path.string());
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw DataError("cannot open " + path.string());
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    for (;;) {
        const int got = gzread(f, buf, sizeof buf);
        if (got < 0) {
            int errnum = 0;
            std::string msg = gzerror(f, &errnum);
            gzclose(f);
            throw DataError("read error in " + path.string() + ": " + msg);
        }
        if (got == 0) break;
        out.insert(out.end(), buf, buf + got);
    }
    gzclose(f);
    return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const fs::path& path) {
    if (off + 4 > b.size()) {
        throw DataError(path.string() + ": truncated header at offset " + std::to_string(off));
    }
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
           (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

void expect_magic(const std::vector<unsigned char>& b, std::uint32_t want, const fs::path& path) {
    const auto got = be32(b, 0, path);
    if (got != want) {
        throw DataError(path.string() + ": bad IDX magic " + hex32(got) + " at offset 0 (expected " +
                        hex32(want) + ")");
    }
}

}  // namespace

Dataset load_idx(const fs::path& images, const fs::path& labels) {
    const auto ib = read_bytes(images);
    const auto lb = read_bytes(labels);
    expect_magic(ib, 0x00000803u, images);
    expect_magic(lb, 0x00000801u, labels);

    const std::size_t n = be32(ib, 4, images);
    const std::size_t rows = be32(ib, 8, images);
    const std::size_t cols = be32(ib, 12, images);
    const std::size_t nl = be32(lb, 4, labels);
    if (n != nl) {
        throw DataError("IDX count mismatch: " + images.string() + " has " + std::to_string(n) +
                        " images, " + labels.string() + " has " + std::to_string(nl) + " labels");
    }
    const std::size_t px = rows * cols;
    if (ib.size() < 16 + n * px) {
        throw DataError(images.string() + ": truncated payload at offset " + std::to_string(ib.size()) +
                        " (expected " + std::to_string(16 + n * px) + " bytes)");
    }
    if (lb.size() < 8 + n) {
        throw DataError(labels.string() + ": truncated payload at offset " + std::to_string(lb.size()) +
                        " (expected " + std::to_string(8 + n) + " bytes)");
    }

    Dataset d;
    d.source = "idx:" + images.filename().string();
    d.images.reserve(n);
    d.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> p(px);
        const unsigned char* src = ib.data() + 16 + i * px;
        for (std::size_t k = 0; k < px; ++k) p[k] = src[k] / 255.0;
        d.images.emplace_back(cols, rows, std::move(p));
        d.labels.push_back(lb[8 + i]);
    }
    return d;
}

Dataset load_mnist_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("MNIST directory not found: " + dir.string());
    std::vector<fs::path> image_files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.find("images-idx3-ubyte") != std::string::npos) {
            image_files.push_back(e.path());
        }
    }
    if (image_files.empty()) {
        throw DataError("no *images-idx3-ubyte files in " + dir.string());
    }
    std::sort(image_files.begin(), image_files.end());

    Dataset all;
    all.source = "mnist:" + dir.string();
    for (const auto& img : image_files) {
        auto name = img.filename().string();
        name.replace(name.find("images-idx3"), 11, "labels-idx1");
        const auto part = load_idx(img, img.parent_path() / name);
        all.images.insert(all.images.end(), part.images.begin(), part.images.end());
        all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    }
    return all;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(const std::vector<unsigned char>& b, std::size_t& pos, const fs::path& path) {
    for (;;) {
        while (pos < b.size() && std::isspace(b[pos])) ++pos;
        if (pos < b.size() && b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    while (pos < b.size() && !std::isspace(b[pos])) ++pos;
    if (start == pos) throw DataError(path.string() + ": malformed PGM header at offset " + std::to_string(pos));
    return {b.begin() + static_cast<std::ptrdiff_t>(start), b.begin() + static_cast<std::ptrdiff_t>(pos)};
}

std::size_t pgm_number(const std::vector<unsigned char>& b, std::size_t& pos, const fs::path& path) {
    const auto at = pos;
    const auto tok = pgm_token(b, pos, path);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) {
        throw DataError(path.string() + ": malformed PGM header value '" + tok + "' at offset " +
                        std::to_string(at));
    }
    return v;
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    if (pgm_token(b, pos, path) != "P5") throw DataError(path.string() + ": not a binary PGM (P5) file");
    const auto w = pgm_number(b, pos, path);
    const auto h = pgm_number(b, pos, path);
    const auto maxval = pgm_number(b, pos, path);
    if (w == 0 || h == 0) throw DataError(path.string() + ": zero image dimension");
    if (maxval == 0 || maxval > 255) {
        throw DataError(path.string() + ": unsupported PGM maxval " + std::to_string(maxval));
    }
    ++pos;  // single whitespace before the raster
    if (b.size() < pos + w * h) {
        throw DataError(path.string() + ": truncated PGM raster at offset " + std::to_string(b.size()));
    }
    std::vector<double> p(w * h);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::min<double>(b[pos + i], maxval) / maxval;
    return GrayImage(w, h, std::move(p));
}

void write_pgm(const fs::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    for (double v : image.pixels) out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (directories ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool is_pgm(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm";
}

void load_class(Dataset& d, const fs::path& dir, int label) {
    std::size_t w = 0, h = 0;
    for (const auto& f : sorted_entries(dir, false)) {
        if (!is_pgm(f)) continue;
        auto img = read_pgm(f);
        if (w == 0) {
            w = img.width;
            h = img.height;
        } else if (img.width != w || img.height != h) {
            throw DataError(f.string() + ": size " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + " differs from the rest of its class (" +
                            std::to_string(w) + "x" + std::to_string(h) + ")");
        }
        d.images.push_back(std::move(img));
        d.labels.push_back(label);
    }
}

}  // namespace

Dataset load_pgm_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("PGM directory not found: " + dir.string());
    Dataset d;
    d.source = "pgm:" + dir.string();
    load_class(d, dir, 0);

    const auto subdirs = sorted_entries(dir, true);
    bool numeric = true;
    std::vector<int> ids;
    for (const auto& s : subdirs) {
        const auto name = s.filename().string();
        int v = 0;
        auto [p, ec] = std::from_chars(name.data(), name.data() + name.size(), v);
        numeric = numeric && ec == std::errc{} && p == name.data() + name.size();
        ids.push_back(v);
    }
    for (std::size_t i = 0; i < subdirs.size(); ++i) {
        load_class(d, subdirs[i], numeric ? ids[i] : static_cast<int>(i));
    }
    return d;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t lead = 0;
        while (lead < cell.size() && cell[lead] == ' ') ++lead;
        out.push_back(cell.substr(lead));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable load_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty CSV (header row required)");
    t.header = split_csv_line(line);
    std::vector<double> vals;
    std::size_t rows = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != t.header.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " columns, got " + std::to_string(cells.size()));
        }
        for (const auto& c : cells) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc{} || p != c.data() + c.size()) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + c + "'");
            }
            vals.push_back(v);
        }
        ++rows;
    }
    t.values = Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(t.header.size()));
    std::copy(vals.begin(), vals.end(), t.values.data());
    return t;
}

std::vector<std::string> default_header(std::size_t cols, const std::string& prefix) {
    std::vector<std::string> h(cols);
    for (std::size_t i = 0; i < cols; ++i) h[i] = prefix + std::to_string(i);
    return h;
}

void save_csv(const fs::path& path, const Matrix& values, const std::vector<std::string>& header) {
    const auto h = header.empty() ? default_header(static_cast<std::size_t>(values.cols())) : header;
    if (h.size() != static_cast<std::size_t>(values.cols())) {
        throw ConfigError("CSV header has " + std::to_string(h.size()) + " names for " +
                          std::to_string(values.cols()) + " columns");
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, values(r, c));
            (void)ec;
            if (c) out << ',';
            out.write(buf, p - buf);
        }
        out << '\n';
    }
}

Blobs make_blobs(std::size_t n_in, std::size_t n_out, std::size_t dim, double separation,
                 std::uint64_t seed) {
    if (n_in < 10) throw ConfigError("make_blobs needs n_in >= 10");
    if (dim < 1) throw ConfigError("make_blobs needs dim >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    Blobs b;
    Engine dir_engine(derive_seed(seed, "blobs-direction"));
    b.direction.resize(static_cast<Eigen::Index>(dim));
    do {
        for (Eigen::Index i = 0; i < b.direction.size(); ++i) b.direction[i] = normal(dir_engine);
    } while (b.direction.norm() < 1e-12);
    b.direction.normalize();

    Engine in_engine(derive_seed(seed, "blobs-inliers"));
    b.inliers.resize(static_cast<Eigen::Index>(n_in), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < b.inliers.size(); ++i) b.inliers.data()[i] = normal(in_engine);

    Engine out_engine(derive_seed(seed, "blobs-outliers"));
    b.outliers.resize(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < b.outliers.size(); ++i) b.outliers.data()[i] = normal(out_engine);
    b.outliers.rowwise() += (separation * b.direction).transpose();
    return b;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t hash_doubles(const double* p, std::size_t n, std::uint64_t h) {
    return fnv1a(std::string_view(reinterpret_cast<const char*>(p), n * sizeof(double)), h);
}

}  // namespace

std::string fingerprint(const Dataset& d) {
    std::uint64_t h = fnv1a("dataset");
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& img = d.images[i];
        const std::uint64_t meta[3] = {img.width, img.height, static_cast<std::uint64_t>(d.labels[i])};
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(meta), sizeof meta), h);
        h = hash_doubles(img.pixels.data(), img.pixels.size(), h);
    }
    return hex64(h);
}

std::string fingerprint(const Matrix& m) {
    const std::uint64_t meta[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    auto h = fnv1a(std::string_view(reinterpret_cast<const char*>(meta), sizeof meta));
    return hex64(hash_doubles(m.data(), static_cast<std::size_t>(m.size()), h));
}

}  // namespace outskirt::data_io

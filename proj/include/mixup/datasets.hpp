#ifndef MIXUP_DATASETS_HPP
#define MIXUP_DATASETS_HPP

#include "core.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

namespace mixup {

/// Finite class supports X_1..X_k in R^n under the normalized counting
/// measure (each point has mass 1/m).
class LabeledDataset {
public:
    LabeledDataset(PointMatrix points, std::vector<int> labels, int k, std::string name = {})
        : points_(std::move(points)), labels_(std::move(labels)), k_(k), name_(std::move(name)) {
        validate();
        by_class_.assign(static_cast<std::size_t>(k_), {});
        for (std::size_t i = 0; i < labels_.size(); ++i)
            by_class_[static_cast<std::size_t>(labels_[i] - 1)].push_back(i);
    }

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
    int num_classes() const noexcept { return k_; }
    const std::string& name() const noexcept { return name_; }
    const PointMatrix& points() const noexcept { return points_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    int label(std::size_t i) const { return labels_.at(i); }
    auto point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)); }
    /// Indices of the points of class c (1-based).
    const std::vector<std::size_t>& class_members(int c) const {
        return by_class_.at(static_cast<std::size_t>(c - 1));
    }

    /// +1 / -1 view of a binary dataset: class 1 is +1, class 2 is -1.
    double signed_label(std::size_t i) const {
        if (k_ != 2) throw ContractError("signed labels need a 2-class dataset");
        return labels_.at(i) == 1 ? 1.0 : -1.0;
    }

    double diameter() const {
        double best = 0.0;
        for (Eigen::Index a = 0; a < points_.rows(); ++a)
            for (Eigen::Index b = a + 1; b < points_.rows(); ++b)
                best = std::max(best, (points_.row(a) - points_.row(b)).squaredNorm());
        return std::sqrt(best);
    }

    bool operator==(const LabeledDataset& o) const {
        return k_ == o.k_ && labels_ == o.labels_ && points_.rows() == o.points_.rows() &&
               points_.cols() == o.points_.cols() && points_ == o.points_;
    }

private:
    struct RowHash {
        std::size_t operator()(const std::vector<double>& v) const noexcept {
            std::size_t h = 1469598103934665603ull;
            for (double x : v) {
                std::uint64_t bits;
                std::memcpy(&bits, &x, sizeof bits);
                h = (h ^ bits) * 1099511628211ull;
            }
            return h;
        }
    };

    void validate() const {
        if (points_.rows() == 0) throw DatasetError("dataset has no points");
        if (points_.cols() < 1) throw DatasetError("points must have dimension >= 1");
        if (static_cast<std::size_t>(points_.rows()) != labels_.size())
            throw DatasetError("point and label counts differ");
        if (k_ < 1) throw DatasetError("class count must be positive");
        std::vector<int> count(static_cast<std::size_t>(k_), 0);
        for (int l : labels_) {
            if (l < 1 || l > k_) throw DatasetError("label " + std::to_string(l) + " outside 1.." + std::to_string(k_));
            ++count[static_cast<std::size_t>(l - 1)];
        }
        for (int c = 0; c < k_; ++c)
            if (count[static_cast<std::size_t>(c)] == 0)
                throw DatasetError("class " + std::to_string(c + 1) + " empty");
        if (!points_.allFinite()) throw DatasetError("non-finite coordinate");

        std::unordered_map<std::vector<double>, int, RowHash> seen;
        seen.reserve(labels_.size());
        std::vector<double> key(static_cast<std::size_t>(points_.cols()));
        for (Eigen::Index i = 0; i < points_.rows(); ++i) {
            for (Eigen::Index j = 0; j < points_.cols(); ++j) key[static_cast<std::size_t>(j)] = points_(i, j) + 0.0;
            auto [it, inserted] = seen.emplace(key, labels_[static_cast<std::size_t>(i)]);
            if (!inserted && it->second != labels_[static_cast<std::size_t>(i)])
                throw DatasetError("point " + std::to_string(i) + " appears with two labels (" +
                                   std::to_string(it->second) + " and " +
                                   std::to_string(labels_[static_cast<std::size_t>(i)]) + ")");
        }
    }

    PointMatrix points_;
    std::vector<int> labels_;
    int k_;
    std::string name_;
    std::vector<std::vector<std::size_t>> by_class_;
};

namespace datasets {

/// Points 0..m-1 on the line, point i labelled (i mod k) + 1.
inline LabeledDataset alternating_line(int m, int k) {
    if (m < 2 || k < 2) throw DatasetError("alternating_line needs m >= 2 and k >= 2");
    if (k > m) throw DatasetError("alternating_line: k > m leaves a class empty");
    PointMatrix pts(m, 1);
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        pts(i, 0) = i;
        labels[static_cast<std::size_t>(i)] = i % k + 1;
    }
    return {std::move(pts), std::move(labels), k, "x" + std::to_string(m) + "k" + std::to_string(k)};
}

/// X_1 = {(0,1),(0,-1)}, X_2 = {(1,0),(-1,0)}.
inline LabeledDataset four_point_cross() {
    PointMatrix pts(4, 2);
    pts << 0, 1, 0, -1, 1, 0, -1, 0;
    return {std::move(pts), {1, 1, 2, 2}, 2, "cross"};
}

/// Two interleaved half circles. Class 1: (cos t, sin t); class 2:
/// (1 - cos t, -sin t - separation); t ~ U[0, pi], plus N(0, noise_sd^2 I).
/// Class 1 points come first.
inline LabeledDataset two_moons(int n_per_class, double separation, double noise_sd, std::uint64_t seed) {
    if (n_per_class < 1) throw DatasetError("two_moons needs n_per_class >= 1");
    if (!(noise_sd >= 0.0)) throw DatasetError("two_moons needs noise_sd >= 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);
    PointMatrix pts(2 * n_per_class, 2);
    std::vector<int> labels(static_cast<std::size_t>(2 * n_per_class));
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            const int r = c * n_per_class + i;
            const double t = angle(rng);
            double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
            double y = c == 0 ? std::sin(t) : -std::sin(t) - separation;
            if (noise_sd > 0.0) {
                x += noise_sd * noise(rng);
                y += noise_sd * noise(rng);
            }
            pts(r, 0) = x;
            pts(r, 1) = y;
            labels[static_cast<std::size_t>(r)] = c + 1;
        }
    }
    return {std::move(pts), std::move(labels), 2, "moons"};
}

/// Centre of the half circle each moon lies on.
inline Eigen::Vector2d moon_center(int cls, double separation) {
    return cls == 1 ? Eigen::Vector2d(0.0, 0.0) : Eigen::Vector2d(1.0, -separation);
}

/// n i.i.d. N(0, I_d) points; even indices class 1 (+1), odd class 2 (-1).
inline LabeledDataset gaussian_binary(int n, int d, std::uint64_t seed) {
    if (n < 2 || d < 1) throw DatasetError("gaussian_binary needs n >= 2 and d >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    PointMatrix pts(n, d);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) pts(i, j) = normal(rng);
        labels[static_cast<std::size_t>(i)] = i % 2 == 0 ? 1 : 2;
    }
    return {std::move(pts), std::move(labels), 2, "gaussian"};
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, std::size_t lineno) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || b == e) throw ParseError("non-numeric field '" + s + "'", lineno);
    return v;
}
} // namespace detail

/// CSV with header `label,f0,f1,...`; labels are positive class indices and
/// k is the largest label present.
inline LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'", 0);
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = detail::split_csv(line);
        if (width == 0) {
            if (fields.size() < 2 || fields[0] != "label")
                throw ParseError("expected header 'label,f0,...'", lineno);
            width = fields.size();
            continue;
        }
        if (fields.size() != width)
            throw ParseError("ragged row: " + std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(width),
                             lineno);
        const double lab = detail::parse_double(fields[0], lineno);
        if (lab < 1.0 || lab != std::floor(lab) || lab > 1e9)
            throw ParseError("label must be a positive integer", lineno);
        labels.push_back(static_cast<int>(lab));
        std::vector<double> row;
        for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(detail::parse_double(fields[j], lineno));
        rows.push_back(std::move(row));
    }
    if (width == 0) throw ParseError("empty file '" + path + "'", lineno);
    if (rows.empty()) throw ParseError("no data rows in '" + path + "'", lineno);
    PointMatrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    const int k = *std::max_element(labels.begin(), labels.end());
    return {std::move(pts), std::move(labels), k, path};
}

inline void write_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "label";
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.label(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) out << ',' << ds.points()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        out << '\n';
    }
}

namespace detail {
inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open IDX file '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off, const std::string& path) {
    if (buf.size() < off + 4) throw FormatError("truncated IDX header in '" + path + "'");
    return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
           (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}
} // namespace detail

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

/// MNIST-style IDX pair. Pixels are scaled by 1/255, class = digit + 1, and
/// ceil(fraction * N) rows are kept (uniformly without replacement, in file
/// order).
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path, double fraction,
                               std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw DatasetError("load_idx: fraction must be in (0, 1]");
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);
    if (detail::read_be32(img, 0, images_path) != idx_images_magic)
        throw FormatError("bad magic number in IDX images file '" + images_path + "'");
    if (detail::read_be32(lab, 0, labels_path) != idx_labels_magic)
        throw FormatError("bad magic number in IDX labels file '" + labels_path + "'");
    const std::size_t n = detail::read_be32(img, 4, images_path);
    const std::size_t rows = detail::read_be32(img, 8, images_path);
    const std::size_t cols = detail::read_be32(img, 12, images_path);
    const std::size_t n_labels = detail::read_be32(lab, 4, labels_path);
    if (n != n_labels)
        throw FormatError("count mismatch: '" + images_path + "' has " + std::to_string(n) + " images, '" +
                          labels_path + "' has " + std::to_string(n_labels) + " labels");
    const std::size_t pix = rows * cols;
    if (img.size() < 16 + n * pix) throw FormatError("truncated IDX images file '" + images_path + "'");
    if (lab.size() < 8 + n) throw FormatError("truncated IDX labels file '" + labels_path + "'");
    if (n == 0) throw FormatError("IDX file '" + images_path + "' holds no images");

    std::vector<std::size_t> keep(n);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    if (target < n) {
        Rng rng(seed);
        std::shuffle(keep.begin(), keep.end(), rng);
        keep.resize(target);
        std::sort(keep.begin(), keep.end());
    }
    PointMatrix pts(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(pix));
    std::vector<int> labels(keep.size());
    int k = 0;
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const std::size_t src = keep[r];
        for (std::size_t p = 0; p < pix; ++p)
            pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = img[16 + src * pix + p] / 255.0;
        labels[r] = static_cast<int>(lab[8 + src]) + 1;
        k = std::max(k, labels[r]);
    }
    return {std::move(pts), std::move(labels), k, images_path};
}

} // namespace datasets
} // namespace mixup

#endif // MIXUP_DATASETS_HPP

#include "mixup/assumptions.hpp"
#include "mixup/datasets.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace ds = mixup::datasets;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mixup_datasets_test";
    fs::create_directories(dir);
    return dir / name;
}

double min_cross_distance(const mixup::LabeledDataset& d) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < d.size(); ++a)
        for (std::size_t b = 0; b < d.size(); ++b)
            if (d.label(a) != d.label(b)) best = std::min(best, (d.point(a) - d.point(b)).norm());
    return best;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

// Synthetic IDX pair with n 2x2 images; image i has pixels (i % 256, i / 256, 0, 0) and label i % 10.
void write_idx(const fs::path& img, const fs::path& lab, std::uint32_t n, std::uint32_t img_magic = 0x803,
               std::uint32_t n_labels = 0, bool truncate = false) {
    std::ofstream oi(img, std::ios::binary), ol(lab, std::ios::binary);
    write_be32(oi, img_magic);
    write_be32(oi, n);
    write_be32(oi, 2);
    write_be32(oi, 2);
    const std::uint32_t stored = truncate ? n - 1 : n;
    for (std::uint32_t i = 0; i < stored; ++i)
        for (std::uint32_t p : {i % 256, i / 256, 0u, 0u}) oi.put(static_cast<char>(p));
    write_be32(ol, 0x801);
    write_be32(ol, n_labels ? n_labels : n);
    for (std::uint32_t i = 0; i < n; ++i) ol.put(static_cast<char>(i % 10));
}
} // namespace

TEST(AlternatingLine, Examples) {
    const auto x32 = ds::alternating_line(3, 2);
    EXPECT_EQ(x32.size(), 3u);
    EXPECT_EQ(x32.class_members(1), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(x32.class_members(2), (std::vector<std::size_t>{1}));
    EXPECT_EQ(x32.name(), "x3k2");

    const auto x1010 = ds::alternating_line(10, 10);
    for (int c = 1; c <= 10; ++c) {
        ASSERT_EQ(x1010.class_members(c).size(), 1u);
        EXPECT_EQ(x1010.point(x1010.class_members(c)[0])(0), c - 1);
    }
    const auto x102 = ds::alternating_line(10, 2);
    EXPECT_EQ(x102.class_members(1), (std::vector<std::size_t>{0, 2, 4, 6, 8}));
    EXPECT_EQ(x102.class_members(2), (std::vector<std::size_t>{1, 3, 5, 7, 9}));
    EXPECT_THROW(ds::alternating_line(3, 4), mixup::DatasetError);
}

TEST(AlternatingLine, EveryInteriorPointViolatesNoCollinearity) {
    for (auto [m, k] : {std::pair{3, 2}, {5, 2}, {9, 3}, {10, 10}}) {
        const auto d = ds::alternating_line(m, k);
        const auto v = mixup::assumptions::check_assumption1(d, 1e-9);
        for (int i = 1; i + 1 < m; ++i) {
            const bool found = std::any_of(v.begin(), v.end(), [&](const auto& c) { return c.x_index == static_cast<std::size_t>(i); });
            EXPECT_TRUE(found) << "m=" << m << " k=" << k << " point " << i;
        }
    }
}

TEST(FourPointCross, Geometry) {
    const auto d = ds::four_point_cross();
    EXPECT_EQ(d.size(), 4u);
    EXPECT_EQ(d.num_classes(), 2);
    for (std::size_t i : d.class_members(1)) EXPECT_EQ(d.point(i)(0), 0.0);
    for (std::size_t i : d.class_members(2)) EXPECT_EQ(d.point(i)(1), 0.0);
    const Eigen::RowVector2d mid = 0.5 * (d.point(0) + d.point(1));
    EXPECT_EQ(mid.norm(), 0.0);
    EXPECT_NEAR(min_cross_distance(d), std::sqrt(2.0), 1e-15);
    EXPECT_TRUE(mixup::assumptions::check_assumption1(d, 1e-9).empty());
}

TEST(TwoMoons, NoiseFreeGeometry) {
    const auto d = ds::two_moons(100, 0.5, 0.0, 3);
    for (std::size_t i : d.class_members(1)) EXPECT_NEAR(d.point(i).squaredNorm(), 1.0, 1e-15);
    for (std::size_t i : d.class_members(2))
        EXPECT_NEAR((d.point(i).transpose() - ds::moon_center(2, 0.5)).squaredNorm(), 1.0, 1e-14);
    EXPECT_GE(min_cross_distance(d), 0.5 - 0.05);
}

TEST(TwoMoons, DeterministicAndSeparationOrdering) {
    const auto a = ds::two_moons(500, 0.5, 0.1, 7), b = ds::two_moons(500, 0.5, 0.1, 7);
    EXPECT_EQ(a.size(), 1000u);
    EXPECT_TRUE(a == b);
    const auto c = ds::two_moons(500, 0.1, 0.1, 7);
    EXPECT_LT(min_cross_distance(c), min_cross_distance(a));
    EXPECT_FALSE(a == ds::two_moons(500, 0.5, 0.1, 8));
}

TEST(TwoMoons, GeneralPosition) {
    EXPECT_TRUE(mixup::assumptions::check_assumption1(ds::two_moons(100, 0.5, 0.1, 1), 1e-9).empty());
}

TEST(GaussianBinary, ShapeRankAndLabels) {
    const auto d = ds::gaussian_binary(20, 650, 1);
    EXPECT_EQ(d.size(), 20u);
    EXPECT_EQ(d.dim(), 650u);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(d.points());
    EXPECT_EQ(lu.rank(), 20);
    EXPECT_EQ(d.class_members(1).size(), 10u);
    EXPECT_EQ(d.signed_label(0), 1.0);
    EXPECT_EQ(d.signed_label(1), -1.0);
    EXPECT_EQ(ds::gaussian_binary(5, 3, 2).class_members(1).size(), 3u);
    EXPECT_GT(650.0, 10 * 20 * std::log(20.0) + 19);
    EXPECT_TRUE(d == ds::gaussian_binary(20, 650, 1));
}

TEST(Dataset, ValidationErrors) {
    mixup::PointMatrix p(2, 1);
    p << 0, 0;
    EXPECT_THROW(mixup::LabeledDataset(p, {1, 2}, 2, "dup"), mixup::DatasetError);
    mixup::PointMatrix q(2, 1);
    q << 0, 1;
    try {
        mixup::LabeledDataset(q, {1, 3}, 3, "gap");
        FAIL();
    } catch (const mixup::DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("class 2 empty"), std::string::npos);
    }
    EXPECT_THROW(mixup::LabeledDataset(q, {1}, 1, "count"), mixup::DatasetError);
    EXPECT_THROW(mixup::LabeledDataset(q, {0, 1}, 1, "zero label"), mixup::DatasetError);
    // The same point under the same label is allowed.
    EXPECT_NO_THROW(mixup::LabeledDataset(p, {1, 1}, 1, "repeat"));
}

TEST(Csv, LoadMatchesAlternatingLine) {
    const auto path = scratch("x32.csv");
    std::ofstream(path) << "label,f0\n1,0\n2,1\n1,2\n";
    const auto d = ds::load_csv(path.string());
    EXPECT_TRUE(d == ds::alternating_line(3, 2));
}

TEST(Csv, RoundTrip) {
    const auto orig = ds::two_moons(10, 0.5, 0.1, 4);
    const auto path = scratch("moons.csv");
    ds::write_csv(orig, path.string());
    EXPECT_TRUE(ds::load_csv(path.string()) == orig);
}

TEST(Csv, Errors) {
    const auto empty = scratch("empty.csv");
    std::ofstream(empty) << "";
    EXPECT_THROW(ds::load_csv(empty.string()), mixup::ParseError);

    const auto gap = scratch("gap.csv");
    std::ofstream(gap) << "label,f0\n1,0\n3,1\n";
    try {
        ds::load_csv(gap.string());
        FAIL();
    } catch (const mixup::DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("class 2 empty"), std::string::npos);
    }

    const auto ragged = scratch("ragged.csv");
    std::ofstream(ragged) << "label,f0,f1\n1,0,0\n2,1\n";
    try {
        ds::load_csv(ragged.string());
        FAIL();
    } catch (const mixup::ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }

    const auto text = scratch("text.csv");
    std::ofstream(text) << "label,f0\n1,abc\n";
    EXPECT_THROW(ds::load_csv(text.string()), mixup::ParseError);
}

TEST(Idx, LoadsScalesAndDownsamples) {
    const auto img = scratch("imgs.idx"), lab = scratch("labs.idx");
    write_idx(img, lab, 50);
    const auto full = ds::load_idx(img.string(), lab.string(), 1.0, 1);
    EXPECT_EQ(full.size(), 50u);
    EXPECT_EQ(full.dim(), 4u);
    EXPECT_EQ(full.num_classes(), 10);
    EXPECT_NEAR(full.points()(49, 0), 49.0 / 255.0, 1e-15);
    EXPECT_EQ(full.label(13), 4);

    write_idx(img, lab, 500);
    const auto part = ds::load_idx(img.string(), lab.string(), 0.2, 1);
    EXPECT_EQ(part.size(), 100u);
    EXPECT_TRUE(part == ds::load_idx(img.string(), lab.string(), 0.2, 1));
    EXPECT_FALSE(part == ds::load_idx(img.string(), lab.string(), 0.2, 2));
}

TEST(Idx, FormatErrorsNameTheFile) {
    const auto img = scratch("bad_imgs.idx"), lab = scratch("bad_labs.idx");
    write_idx(img, lab, 20, 0x804);
    try {
        ds::load_idx(img.string(), lab.string(), 1.0, 1);
        FAIL();
    } catch (const mixup::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find(img.string()), std::string::npos);
    }
    write_idx(img, lab, 20, 0x803, 21);
    EXPECT_THROW(ds::load_idx(img.string(), lab.string(), 1.0, 1), mixup::FormatError);
    write_idx(img, lab, 20, 0x803, 0, true);
    EXPECT_THROW(ds::load_idx(img.string(), lab.string(), 1.0, 1), mixup::FormatError);
}

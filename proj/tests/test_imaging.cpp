#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lowlight/demosaic.hpp"
#include "lowlight/image.hpp"
#include "lowlight/rng.hpp"

using namespace lowlight;
using img::AugmentOp;
using img::BayerImage;
using img::GrayImage;
using img::RgbImage;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

GrayImage random_gray(Rng& rng, std::size_t w, std::size_t h, int maxval = 255) {
    GrayImage g(w, h);
    g.maxval = maxval;
    for (double& v : g.values)
        v = double(rng.uniform_index(std::uint64_t(maxval) + 1)) / double(maxval);
    return g;
}

RgbImage random_rgb(Rng& rng, std::size_t w, std::size_t h, int maxval = 255) {
    RgbImage c(w, h);
    c.maxval = maxval;
    for (double& v : c.values)
        v = double(rng.uniform_index(std::uint64_t(maxval) + 1)) / double(maxval);
    return c;
}

BayerImage random_bayer(Rng& rng, std::size_t w, std::size_t h, int white_level) {
    BayerImage b(w, h);
    b.white_level = white_level;
    for (auto& v : b.values)
        v = std::uint16_t(rng.uniform_index(std::uint64_t(white_level) + 1));
    return b;
}

std::size_t reflect101(long i, long n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return std::size_t(i);
}

// CFA color at a nominal (possibly out-of-range) coordinate; mirror padding
// preserves parity, so the nominal parity equals the reflected site's color.
std::size_t cfa_color(long x, long y, int row_offset, int col_offset) {
    const bool even_row = (((y + row_offset) % 2) + 2) % 2 == 0;
    const bool even_col = (((x + col_offset) % 2) + 2) % 2 == 0;
    if (even_row && even_col) return 0;
    if (!even_row && !even_col) return 2;
    return 1;
}

// Independent formulation: each channel averages the same-color sites at the
// smallest displacement radius within the 3x3 window (multiplicity kept when
// mirroring folds displacements onto one source pixel).
RgbImage demosaic_oracle(const BayerImage& b) {
    RgbImage out(b.width, b.height);
    out.maxval = b.white_level;
    for (long y = 0; y < long(b.height); ++y) {
        for (long x = 0; x < long(b.width); ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                long best = 99;
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx)
                        if (cfa_color(x + dx, y + dy, b.row_offset, b.col_offset) == c)
                            best = std::min(best, dx * dx + dy * dy);
                double sum = 0.0;
                int count = 0;
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx)
                        if (cfa_color(x + dx, y + dy, b.row_offset, b.col_offset) == c &&
                            dx * dx + dy * dy == best) {
                            sum += double(b.at(reflect101(x + dx, long(b.width)),
                                               reflect101(y + dy, long(b.height))));
                            ++count;
                        }
                out.at(std::size_t(x), std::size_t(y), c) =
                    sum / double(count) / double(b.white_level);
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("demosaic matches the nearest-same-color oracle on random mosaics") {
    Rng rng(20240814);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t w = 4 + 2 * rng.uniform_index(7);  // 4..16, even
        const std::size_t h = 4 + 2 * rng.uniform_index(7);
        const int white = trial % 3 == 0 ? 1023 : 255;
        BayerImage b = random_bayer(rng, w, h, white);
        b.row_offset = int(trial % 2);
        b.col_offset = int((trial / 2) % 2);
        const RgbImage got = img::demosaic_bilinear(b);
        const RgbImage want = demosaic_oracle(b);
        REQUIRE(got.width == want.width);
        REQUIRE(got.height == want.height);
        for (std::size_t i = 0; i < got.values.size(); ++i)
            REQUIRE(got.values[i] == want.values[i]);
    }
}

TEST_CASE("demosaic interior arithmetic on a hand-built mosaic") {
    // 4x4 RGGB, values chosen so each mean is easily checked by hand
    BayerImage b(4, 4);
    b.white_level = 100;
    const std::uint16_t raw[16] = {10, 20, 30, 40,  50, 60, 70, 80,
                                   90, 12, 34, 56,  78, 91, 23, 45};
    for (std::size_t i = 0; i < 16; ++i) b.values[i] = raw[i];
    const RgbImage rgb = img::demosaic_bilinear(b);

    // (1,1) is a blue site: B = itself, G = 4-cross mean, R = diagonal mean
    CHECK(rgb.at(1, 1, 2) == doctest::Approx(60.0 / 100.0));
    CHECK(rgb.at(1, 1, 1) == doctest::Approx((20.0 + 50.0 + 70.0 + 12.0) / 4.0 / 100.0));
    CHECK(rgb.at(1, 1, 0) == doctest::Approx((10.0 + 30.0 + 90.0 + 34.0) / 4.0 / 100.0));

    // (2,1) is a green site in a blue row: B pairs horizontally, R vertically
    CHECK(rgb.at(2, 1, 1) == doctest::Approx(70.0 / 100.0));
    CHECK(rgb.at(2, 1, 2) == doctest::Approx((60.0 + 80.0) / 2.0 / 100.0));
    CHECK(rgb.at(2, 1, 0) == doctest::Approx((30.0 + 34.0) / 2.0 / 100.0));

    // (0,0) red corner: mirror padding folds the cross onto two sources
    CHECK(rgb.at(0, 0, 0) == doctest::Approx(10.0 / 100.0));
    CHECK(rgb.at(0, 0, 1) == doctest::Approx((20.0 + 20.0 + 50.0 + 50.0) / 4.0 / 100.0));
    CHECK(rgb.at(0, 0, 2) == doctest::Approx(60.0 / 100.0));
}

TEST_CASE("demosaic rejects odd extents and accepts the 2x2 minimum") {
    CHECK_THROWS_AS(img::demosaic_bilinear(BayerImage(5, 4)), ContractError);
    CHECK_THROWS_AS(img::demosaic_bilinear(BayerImage(4, 5)), ContractError);

    Rng rng(3);
    const BayerImage tiny = random_bayer(rng, 2, 2, 255);
    const RgbImage got = img::demosaic_bilinear(tiny);
    const RgbImage want = demosaic_oracle(tiny);
    for (std::size_t i = 0; i < got.values.size(); ++i)
        CHECK(got.values[i] == doctest::Approx(want.values[i]).epsilon(1e-15));
}

TEST_CASE("mosaic of a demosaiced image returns the raw values bit-exactly") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        BayerImage b = random_bayer(rng, 8, 6, 255);
        b.row_offset = trial % 2;
        b.col_offset = (trial / 2) % 2;
        const BayerImage back = img::mosaic(img::demosaic_bilinear(b), b.white_level,
                                            b.row_offset, b.col_offset);
        REQUIRE(back.values == b.values);
    }
}

TEST_CASE("augment obeys the dihedral relations") {
    Rng rng(42);
    const GrayImage g = random_gray(rng, 7, 5);

    GrayImage r = g;
    for (int i = 0; i < 4; ++i) r = img::augment(r, AugmentOp::kRot90);
    CHECK(r.values == g.values);

    CHECK(img::augment(img::augment(g, AugmentOp::kFlipH), AugmentOp::kFlipH).values == g.values);
    CHECK(img::augment(img::augment(g, AugmentOp::kFlipV), AugmentOp::kFlipV).values == g.values);

    const GrayImage lhs = img::augment(img::augment(g, AugmentOp::kFlipH), AugmentOp::kFlipV);
    CHECK(lhs.values == img::augment(g, AugmentOp::kRot180).values);

    const GrayImage twice = img::augment(img::augment(g, AugmentOp::kRot90), AugmentOp::kRot90);
    CHECK(twice.values == img::augment(g, AugmentOp::kRot180).values);

    const GrayImage thrice =
        img::augment(img::augment(g, AugmentOp::kRot180), AugmentOp::kRot90);
    CHECK(thrice.values == img::augment(g, AugmentOp::kRot270).values);

    const GrayImage rot = img::augment(g, AugmentOp::kRot90);
    CHECK(rot.width == g.height);
    CHECK(rot.height == g.width);
    // rotation is a permutation: multiset of values is preserved
    std::vector<double> a = g.values, b = rot.values;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("augmenting a pair applies one op to both members") {
    Rng rng(43);
    img::ImagePair p{random_gray(rng, 6, 4), random_gray(rng, 6, 4)};
    const img::ImagePair q = img::augment(p, AugmentOp::kRot90);
    CHECK(q.low.values == img::augment(p.low, AugmentOp::kRot90).values);
    CHECK(q.high.values == img::augment(p.high, AugmentOp::kRot90).values);
}

TEST_CASE("center_crop takes the middle block") {
    GrayImage g(6, 6);
    for (std::size_t i = 0; i < 36; ++i) g.values[i] = double(i);
    const GrayImage c = img::center_crop(g, 2);
    REQUIRE(c.width == 2);
    REQUIRE(c.height == 2);
    CHECK(c.at(0, 0) == g.at(2, 2));
    CHECK(c.at(1, 1) == g.at(3, 3));
    CHECK_THROWS_AS(img::center_crop(g, 7), ContractError);
}

TEST_CASE("gray file round-trip is bit-exact at 8 and 16 bits") {
    Rng rng(7);
    for (int maxval : {255, 65535, 1023}) {
        const GrayImage g = random_gray(rng, 9, 4, maxval);
        const std::string p1 = temp_path("img_a.pgm"), p2 = temp_path("img_b.pgm");
        img::write_gray(p1, g);
        const GrayImage back = img::read_gray(p1);
        REQUIRE(back.width == g.width);
        REQUIRE(back.height == g.height);
        REQUIRE(back.maxval == g.maxval);
        REQUIRE(back.values == g.values);
        img::write_gray(p2, back);
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string s1((std::istreambuf_iterator<char>(f1)), {});
        const std::string s2((std::istreambuf_iterator<char>(f2)), {});
        REQUIRE(s1 == s2);
    }
}

TEST_CASE("rgb file round-trip is bit-exact") {
    Rng rng(8);
    for (int maxval : {255, 4095}) {
        const RgbImage c = random_rgb(rng, 5, 7, maxval);
        const std::string p = temp_path("img_c.ppm");
        img::write_rgb(p, c);
        const RgbImage back = img::read_rgb(p);
        REQUIRE(back.maxval == c.maxval);
        REQUIRE(back.values == c.values);
    }
}

TEST_CASE("bayer file round-trip preserves raw counts") {
    Rng rng(9);
    const BayerImage b = random_bayer(rng, 8, 8, 1023);
    const std::string p = temp_path("img_d.pgm");
    img::write_bayer(p, b);
    const BayerImage back = img::read_bayer(p);
    REQUIRE(back.white_level == b.white_level);
    REQUIRE(back.values == b.values);
}

TEST_CASE("reader rejects malformed files") {
    const std::string p = temp_path("img_bad.pgm");
    auto write_bytes = [&](const std::string& bytes) {
        std::ofstream f(p, std::ios::binary);
        f.write(bytes.data(), std::streamsize(bytes.size()));
    };

    write_bytes("P4\n2 2\n255\n\0\0\0\0");
    CHECK_THROWS_AS(img::read_gray(p), DataError);

    write_bytes("P5\n2 2\n255\n\x01");  // truncated raster
    CHECK_THROWS_AS(img::read_gray(p), DataError);

    write_bytes("P5\n2 2\n0\n\0\0\0\0");  // maxval out of range
    CHECK_THROWS_AS(img::read_gray(p), DataError);

    write_bytes("P5\n-2 2\n255\n\0\0\0\0");
    CHECK_THROWS_AS(img::read_gray(p), DataError);

    CHECK_THROWS_AS(img::read_gray(temp_path("img_missing_xyz.pgm")), DataError);

    // comments and arbitrary whitespace in the header are fine
    write_bytes("P5 # magic\n# a comment line\n  2\t2 # extents\n255\nabcd");
    const GrayImage g = img::read_gray(p);
    CHECK(g.width == 2);
    CHECK(g.at(0, 0) == doctest::Approx(double('a') / 255.0));
}

TEST_CASE("manifest round-trip and error reporting") {
    const std::string p = temp_path("manifest.tsv");
    std::vector<img::ManifestEntry> entries = {
        {"low_0000.pgm", "high_0000.pgm", 0, "156us"},
        {"low_0001.pgm", "high_0001.pgm", 3, "1248us"},
    };
    img::write_manifest(p, entries);
    const auto back = img::read_manifest(p);
    REQUIRE(back.size() == 2);
    CHECK(back[0].low_path == "low_0000.pgm");
    CHECK(back[1].stratum == 3);
    CHECK(back[1].exposure == "1248us");

    std::ofstream f(p);
    f << "only\ttwo\n";
    f.close();
    CHECK_THROWS_AS(img::read_manifest(p), DataError);
}

TEST_CASE("tensor bridge round-trips and clamps") {
    Rng rng(11);
    const GrayImage g = random_gray(rng, 6, 3);
    const Tensor t = img::to_tensor(g);
    REQUIRE(t.shape() == std::vector<std::size_t>({1, 1, 3, 6}));
    const GrayImage back = img::gray_from_tensor(t);
    CHECK(back.values == g.values);

    Tensor wild = Tensor::from({1, 1, 1, 3}, {-0.5, 0.25, 1.5});
    const GrayImage clamped = img::gray_from_tensor(wild);
    CHECK(clamped.values == std::vector<double>({0.0, 0.25, 1.0}));
    const GrayImage raw = img::gray_from_tensor(wild, false);
    CHECK(raw.values == std::vector<double>({-0.5, 0.25, 1.5}));
}

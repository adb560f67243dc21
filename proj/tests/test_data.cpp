#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dsnet/data.hpp"
#include "dsnet/pgm.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("dsnet_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("pgm 8-bit round trip") {
    const fs::path dir = temp_dir("pgm8");
    std::vector<std::uint8_t> px(12 * 7);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 3);
    write_pgm8(dir / "a.pgm", 12, 7, px);
    const PgmImage img = read_pgm(dir / "a.pgm");
    REQUIRE(img.width == 12);
    REQUIRE(img.height == 7);
    REQUIRE(img.maxval == 255);
    for (std::size_t i = 0; i < px.size(); ++i) REQUIRE(img.pixels[i] == px[i]);
}

TEST_CASE("pgm reader handles comments and 16-bit payloads") {
    const fs::path dir = temp_dir("pgm16");
    {
        std::ofstream out(dir / "b.pgm", std::ios::binary);
        out << "P5\n# a comment\n2 2\n65535\n";
        const std::uint8_t payload[8] = {0x01, 0x00, 0x00, 0x02, 0xff, 0xff, 0x00, 0x00};
        out.write(reinterpret_cast<const char*>(payload), 8);
    }
    const PgmImage img = read_pgm(dir / "b.pgm");
    REQUIRE(img.maxval == 65535);
    REQUIRE(img.pixels == std::vector<std::uint16_t>{256, 2, 65535, 0});
}

TEST_CASE("pgm reader rejects color and truncated files") {
    const fs::path dir = temp_dir("pgmbad");
    {
        std::ofstream out(dir / "c.ppm", std::ios::binary);
        out << "P6\n2 2\n255\n";
    }
    REQUIRE_THROWS_AS(read_pgm(dir / "c.ppm"), FormatError);
    {
        std::ofstream out(dir / "d.pgm", std::ios::binary);
        out << "P5\n4 4\n255\nab";
    }
    REQUIRE_THROWS_AS(read_pgm(dir / "d.pgm"), FormatError);
}

TEST_CASE("load_dataset on an empty root is empty, missing masks are an error") {
    const fs::path dir = temp_dir("load");
    REQUIRE(load_dataset(dir).empty());

    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    REQUIRE(load_dataset(dir).empty());

    std::vector<std::uint8_t> px(16 * 16, 128);
    write_pgm8(dir / "images" / "p01_0.pgm", 16, 16, px);
    REQUIRE_THROWS_AS(load_dataset(dir), IoError);
}

TEST_CASE("load_dataset scales images and thresholds masks") {
    const fs::path dir = temp_dir("scale");
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    std::vector<std::uint8_t> img(16 * 16, 0);
    img[0] = 255;
    img[1] = 51;
    std::vector<std::uint8_t> msk(16 * 16, 0);
    msk[0] = 255;
    msk[1] = 7;  // any nonzero is foreground
    write_pgm8(dir / "images" / "p01_0.pgm", 16, 16, img);
    write_pgm8(dir / "masks" / "p01_0.pgm", 16, 16, msk);

    const Dataset ds = load_dataset(dir);
    REQUIRE(ds.size() == 1);
    REQUIRE(ds.samples[0].source_id == "p01");
    REQUIRE(ds.samples[0].image.data[0] == 1.0f);
    REQUIRE_THAT(ds.samples[0].image.data[1], Catch::Matchers::WithinAbs(0.2, 1e-6));
    REQUIRE(ds.samples[0].mask.data[0] == 1.0f);
    REQUIRE(ds.samples[0].mask.data[1] == 1.0f);
    REQUIRE(ds.samples[0].mask.data[2] == 0.0f);
}

TEST_CASE("write_dataset then load_dataset preserves masks exactly") {
    const Dataset ds = make_synthetic(4, 32, SyntheticSpec::easy(), 5);
    const fs::path dir = temp_dir("roundtrip");
    write_dataset(ds, dir);
    const Dataset back = load_dataset(dir);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        REQUIRE(back.samples[i].mask.data == ds.samples[i].mask.data);
        for (std::size_t j = 0; j < ds.samples[i].image.data.size(); ++j)
            REQUIRE_THAT(back.samples[i].image.data[j],
                         Catch::Matchers::WithinAbs(ds.samples[i].image.data[j], 0.5 / 255.0));
    }
}

TEST_CASE("augment with identity ranges is bit-exact") {
    const Dataset ds = make_synthetic(1, 32, SyntheticSpec::easy(), 6);
    AugmentSpec spec;  // all ranges zero
    Rng rng(1);
    const SamplePair out = augment(ds.samples[0], spec, rng);
    REQUIRE(out.image.data == ds.samples[0].image.data);
    REQUIRE(out.mask.data == ds.samples[0].mask.data);
}

TEST_CASE("pure translation moves a single-pixel foreground by the offset") {
    SamplePair s;
    s.image = Tensor(Shape{1, 1, 32, 32}, 0.0f);
    s.mask = Tensor(Shape{1, 1, 32, 32}, 0.0f);
    s.image.at(0, 0, 10, 10) = 1.0f;
    s.mask.at(0, 0, 10, 10) = 1.0f;

    // force tx = +2, ty = 0 by sampling from a degenerate range: draw_affine
    // samples uniforms, so use a spec with zero rotation/zoom and check the
    // translated position over draws that land on (+2, 0) via a fixed spec
    AugmentSpec spec;
    spec.max_translate_px = 2.0;
    // find a seed whose first two uniforms are (max, mid) is fragile; instead
    // apply the affine map directly
    detail::AffineDraw d;
    d.tx = 2.0;
    d.ty = 0.0;
    const double c = (32 - 1) / 2.0;
    Tensor moved(Shape{1, 1, 32, 32}, 0.0f);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            double xs, ys;
            detail::source_coords(d, c, c, x, y, xs, ys);
            moved.at(0, 0, y, x) = detail::nearest_at(s.mask, 0, ys, xs);
        }
    REQUIRE(moved.at(0, 0, 10, 12) == 1.0f);
    REQUIRE(moved.at(0, 0, 10, 10) == 0.0f);
    double total = 0.0;
    for (float v : moved.data) total += v;
    REQUIRE(total == 1.0);
}

TEST_CASE("full-turn rotation is the identity within interpolation error") {
    const Dataset ds = make_synthetic(1, 32, SyntheticSpec::easy(), 7);
    const Tensor& img = ds.samples[0].image;
    detail::AffineDraw d;
    d.theta = 2.0 * 3.14159265358979323846;
    const double c = (32 - 1) / 2.0;
    double abs_err = 0.0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            double xs, ys;
            detail::source_coords(d, c, c, x, y, xs, ys);
            abs_err += std::abs(detail::bilinear_at(img, 0, ys, xs) - img.at(0, 0, y, x));
        }
    REQUIRE(abs_err / (32.0 * 32.0) < 1e-3);
}

TEST_CASE("augmentation preserves shape and mask binarity") {
    const Dataset ds = make_synthetic(3, 32, SyntheticSpec::hard(), 8);
    AugmentSpec spec;
    spec.max_translate_px = 3.2;
    spec.max_rotate_deg = 15.0;
    spec.zoom_min = 0.9;
    spec.zoom_max = 1.1;
    Rng rng(9);
    for (const auto& s : ds.samples) {
        for (int rep = 0; rep < 5; ++rep) {
            const SamplePair out = augment(s, spec, rng);
            REQUIRE(out.image.shape == s.image.shape);
            REQUIRE(out.mask.shape == s.mask.shape);
            for (float v : out.mask.data) REQUIRE((v == 0.0f || v == 1.0f));
        }
    }
}

TEST_CASE("augment rejects non-positive zoom") {
    AugmentSpec spec;
    spec.zoom_min = 0.0;
    Rng rng(1);
    SamplePair s;
    s.image = Tensor(Shape{1, 1, 16, 16}, 0.0f);
    s.mask = Tensor(Shape{1, 1, 16, 16}, 0.0f);
    REQUIRE_THROWS_AS(augment(s, spec, rng), SpecError);
}

TEST_CASE("make_synthetic basics: count, determinism, size check") {
    REQUIRE(make_synthetic(0, 32, SyntheticSpec::easy(), 1).empty());
    REQUIRE_THROWS_AS(make_synthetic(1, 60, SyntheticSpec::easy(), 1), DimensionError);

    const Dataset a = make_synthetic(5, 32, SyntheticSpec::hard(), 42);
    const Dataset b = make_synthetic(5, 32, SyntheticSpec::hard(), 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a.samples[i].image.data == b.samples[i].image.data);
        REQUIRE(a.samples[i].mask.data == b.samples[i].mask.data);
        REQUIRE(a.samples[i].name == b.samples[i].name);
    }
    const Dataset c = make_synthetic(5, 32, SyntheticSpec::hard(), 43);
    REQUIRE(a.samples[0].image.data != c.samples[0].image.data);
}

TEST_CASE("synthetic masks are non-degenerate and pixel values stay in [0,1]") {
    for (const auto& spec : {SyntheticSpec::easy(), SyntheticSpec::hard()}) {
        const Dataset ds = make_synthetic(50, 32, spec, 11);
        for (const auto& s : ds.samples) {
            double fg = 0.0;
            for (float v : s.mask.data) {
                REQUIRE((v == 0.0f || v == 1.0f));
                fg += v;
            }
            const double fraction = fg / static_cast<double>(s.mask.numel());
            REQUIRE(fraction >= 0.005);
            REQUIRE(fraction <= 0.40);
            for (float v : s.image.data) {
                REQUIRE(v >= 0.0f);
                REQUIRE(v <= 1.0f);
            }
        }
    }
}

TEST_CASE("easy difficulty separates foreground and background intensities") {
    const Dataset ds = make_synthetic(100, 32, SyntheticSpec::easy(), 12);
    double gap_sum = 0.0;
    for (const auto& s : ds.samples) {
        double fg_sum = 0.0, bg_sum = 0.0, fg_n = 0.0, bg_n = 0.0;
        for (std::size_t i = 0; i < s.image.data.size(); ++i) {
            if (s.mask.data[i] > 0.0f) {
                fg_sum += s.image.data[i];
                fg_n += 1.0;
            } else {
                bg_sum += s.image.data[i];
                bg_n += 1.0;
            }
        }
        gap_sum += fg_sum / fg_n - bg_sum / bg_n;
    }
    REQUIRE(gap_sum / 100.0 > 0.3);
}

TEST_CASE("split files round-trip and patient-wise splits stay disjoint") {
    // dataset with several slices per source
    Dataset ds;
    for (int p = 0; p < 6; ++p)
        for (int k = 0; k < 3; ++k) {
            SamplePair s;
            s.name = "p" + std::to_string(p) + "_" + std::to_string(k);
            s.source_id = source_id_of(s.name);
            s.image = Tensor(Shape{1, 1, 16, 16}, 0.1f);
            s.mask = Tensor(Shape{1, 1, 16, 16}, 0.0f);
            ds.samples.push_back(std::move(s));
        }

    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
        const SplitSpec spec = split_by_fraction(ds, 0.3, seed);
        std::set<std::string> train(spec.train_ids.begin(), spec.train_ids.end());
        for (const auto& id : spec.test_ids) REQUIRE_FALSE(train.count(id));
        auto [tr, te] = apply_split(ds, spec);
        REQUIRE(tr.size() + te.size() == ds.size());
        std::set<std::string> test_ids(spec.test_ids.begin(), spec.test_ids.end());
        for (const auto& s : tr.samples) REQUIRE_FALSE(test_ids.count(s.source_id));
        for (const auto& s : te.samples) REQUIRE(test_ids.count(s.source_id));
    }

    const fs::path dir = temp_dir("split");
    const SplitSpec spec = split_by_fraction(ds, 0.3, 9);
    write_split_file(spec, dir / "split.txt");
    const SplitSpec back = read_split_file(dir / "split.txt");
    REQUIRE(back.train_ids == spec.train_ids);
    REQUIRE(back.test_ids == spec.test_ids);

    SplitSpec overlap;
    overlap.train_ids = {"p0", "p1"};
    overlap.test_ids = {"p1"};
    REQUIRE_THROWS_AS(apply_split(ds, overlap), ContractError);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dsnet/pgm.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// One image with its binary ground-truth mask. Images are (1,C,H,W) scaled to
// [0,1]; masks are strictly {0,1}. The source id groups slices that must not
// straddle a train/test split.
struct SamplePair {
    Tensor image;
    Tensor mask;
    std::string source_id;
    std::string name;
};

struct Dataset {
    std::vector<SamplePair> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    std::vector<std::string> source_ids() const {
        std::set<std::string> ids;
        for (const auto& s : samples) ids.insert(s.source_id);
        return {ids.begin(), ids.end()};
    }
};

inline std::string source_id_of(const std::string& stem) {
    const auto pos = stem.find('_');
    return pos == std::string::npos ? stem : stem.substr(0, pos);
}

// Loads <root>/images/*.pgm with matching <root>/masks/<same name>. Images
// scale by their maxval; masks threshold at > 0. A missing root or images/
// directory yields an empty dataset.
inline Dataset load_dataset(const std::filesystem::path& root) {
    Dataset ds;
    const auto img_dir = root / "images";
    const auto mask_dir = root / "masks";
    if (!std::filesystem::is_directory(img_dir)) return ds;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(img_dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const auto mask_path = mask_dir / f.filename();
        if (!std::filesystem::exists(mask_path))
            throw IoError("load_dataset: no mask for image " + f.string());
        const PgmImage img = read_pgm(f);
        const PgmImage msk = read_pgm(mask_path);
        if (img.width != msk.width || img.height != msk.height)
            throw FormatError("load_dataset: image/mask size mismatch for " + f.string());
        SamplePair s;
        s.name = f.stem().string();
        s.source_id = source_id_of(s.name);
        s.image = Tensor(Shape{1, 1, img.height, img.width});
        s.mask = Tensor(Shape{1, 1, img.height, img.width});
        const float scale = 1.0f / static_cast<float>(img.maxval);
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            s.image.data[i] = static_cast<float>(img.pixels[i]) * scale;
        for (std::size_t i = 0; i < msk.pixels.size(); ++i)
            s.mask.data[i] = msk.pixels[i] > 0 ? 1.0f : 0.0f;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// Writes a dataset in the on-disk layout load_dataset reads, quantizing to
// 8-bit. Masks use 255 for foreground.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& root) {
    std::error_code ec;
    std::filesystem::create_directories(root / "images", ec);
    std::filesystem::create_directories(root / "masks", ec);
    if (!std::filesystem::is_directory(root / "images") ||
        !std::filesystem::is_directory(root / "masks"))
        throw IoError("write_dataset: cannot create directories under " + root.string());
    for (const auto& s : ds.samples) {
        const int h = s.image.shape.h, w = s.image.shape.w;
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w);
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const float v = std::clamp(s.image.data[i], 0.0f, 1.0f);
            buf[i] = static_cast<std::uint8_t>(std::lround(255.0f * v));
        }
        write_pgm8(root / "images" / (s.name + ".pgm"), w, h, buf);
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = s.mask.data[i] > 0.0f ? 255 : 0;
        write_pgm8(root / "masks" / (s.name + ".pgm"), w, h, buf);
    }
}

// ---------------------------------------------------------------------------
// Train/test splitting by source id.

struct SplitSpec {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

// Plain-text split file: "[train]" / "[test]" section headers, one source id
// per line, '#' comments.
inline SplitSpec read_split_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("split file: cannot open " + path.string());
    SplitSpec spec;
    std::vector<std::string>* section = nullptr;
    std::string line;
    while (std::getline(in, line)) {
        const auto a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        const auto b = line.find_last_not_of(" \t\r");
        std::string tok = line.substr(a, b - a + 1);
        if (tok[0] == '#') continue;
        if (tok == "[train]") {
            section = &spec.train_ids;
        } else if (tok == "[test]") {
            section = &spec.test_ids;
        } else if (tok[0] == '[') {
            throw FormatError("split file: unknown section " + tok);
        } else {
            if (!section) throw FormatError("split file: id before any section: " + tok);
            section->push_back(tok);
        }
    }
    return spec;
}

inline void write_split_file(const SplitSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("split file: cannot write " + path.string());
    out << "[train]\n";
    for (const auto& id : spec.train_ids) out << id << "\n";
    out << "[test]\n";
    for (const auto& id : spec.test_ids) out << id << "\n";
}

inline std::pair<Dataset, Dataset> apply_split(const Dataset& ds, const SplitSpec& spec) {
    std::set<std::string> train(spec.train_ids.begin(), spec.train_ids.end());
    std::set<std::string> test(spec.test_ids.begin(), spec.test_ids.end());
    for (const auto& id : train)
        if (test.count(id))
            throw ContractError("split: source id '" + id + "' appears in both sections");
    Dataset tr, te;
    for (const auto& s : ds.samples) {
        if (train.count(s.source_id)) tr.samples.push_back(s);
        else if (test.count(s.source_id)) te.samples.push_back(s);
    }
    return {std::move(tr), std::move(te)};
}

// Patient-wise random split: shuffles the unique source ids and sends
// ceil(test_fraction * count) of them to the test side.
inline SplitSpec split_by_fraction(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw SpecError("split: test fraction must be in [0,1]");
    std::vector<std::string> ids = ds.source_ids();
    Rng rng = Rng::at(seed, 0x5911f7);
    rng.shuffle(ids.begin(), ids.end());
    const std::size_t n_test =
        static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(ids.size())));
    SplitSpec spec;
    for (std::size_t i = 0; i < ids.size(); ++i)
        (i < n_test ? spec.test_ids : spec.train_ids).push_back(ids[i]);
    std::sort(spec.train_ids.begin(), spec.train_ids.end());
    std::sort(spec.test_ids.begin(), spec.test_ids.end());
    return spec;
}

// ---------------------------------------------------------------------------
// Augmentation: one affine map (translate, rotate, zoom about the center)
// applied to image (bilinear) and mask (nearest + re-threshold).

struct AugmentSpec {
    double max_translate_px = 0.0;
    double max_rotate_deg = 0.0;
    double zoom_min = 1.0;
    double zoom_max = 1.0;

    void validate() const {
        if (max_translate_px < 0.0 || max_rotate_deg < 0.0)
            throw SpecError("augment: ranges must be >= 0");
        if (zoom_min <= 0.0 || zoom_max <= 0.0)
            throw SpecError("augment: zoom must be > 0");
        if (zoom_min > zoom_max) throw SpecError("augment: zoom_min > zoom_max");
    }

    bool is_identity() const {
        return max_translate_px == 0.0 && max_rotate_deg == 0.0 && zoom_min == 1.0 &&
               zoom_max == 1.0;
    }
};

namespace detail {

struct AffineDraw {
    double tx = 0.0, ty = 0.0, theta = 0.0, zoom = 1.0;
};

inline AffineDraw draw_affine(const AugmentSpec& spec, Rng& rng) {
    AffineDraw d;
    d.tx = rng.uniform(-spec.max_translate_px, spec.max_translate_px);
    d.ty = rng.uniform(-spec.max_translate_px, spec.max_translate_px);
    d.theta = rng.uniform(-spec.max_rotate_deg, spec.max_rotate_deg) * 3.14159265358979323846 /
              180.0;
    d.zoom = rng.uniform(spec.zoom_min, spec.zoom_max);
    return d;
}

// Source coordinates for an output pixel under the inverse map.
inline void source_coords(const AffineDraw& d, double cx, double cy, double x, double y,
                          double& xs, double& ys) {
    const double dx = x - cx - d.tx;
    const double dy = y - cy - d.ty;
    const double ct = std::cos(d.theta), st = std::sin(d.theta);
    xs = (ct * dx + st * dy) / d.zoom + cx;
    ys = (-st * dx + ct * dy) / d.zoom + cy;
}

inline float bilinear_at(const Tensor& t, int c, double ys, double xs) {
    const int H = t.shape.h, W = t.shape.w;
    const int x0 = static_cast<int>(std::floor(xs));
    const int y0 = static_cast<int>(std::floor(ys));
    const double fx = xs - x0, fy = ys - y0;
    auto px = [&](int y, int x) -> double {
        if (x < 0 || x >= W || y < 0 || y >= H) return 0.0;
        return static_cast<double>(t.at(0, c, y, x));
    };
    const double v = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                     fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
    return static_cast<float>(v);
}

inline float nearest_at(const Tensor& t, int c, double ys, double xs) {
    const int x = static_cast<int>(std::floor(xs + 0.5));
    const int y = static_cast<int>(std::floor(ys + 0.5));
    if (x < 0 || x >= t.shape.w || y < 0 || y >= t.shape.h) return 0.0f;
    return t.at(0, c, y, x);
}

}  // namespace detail

inline SamplePair augment(const SamplePair& sample, const AugmentSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.is_identity()) return sample;
    const detail::AffineDraw d = detail::draw_affine(spec, rng);
    const int H = sample.image.shape.h, W = sample.image.shape.w;
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
    SamplePair out;
    out.source_id = sample.source_id;
    out.name = sample.name;
    out.image = Tensor(sample.image.shape);
    out.mask = Tensor(sample.mask.shape);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double xs, ys;
            detail::source_coords(d, cx, cy, x, y, xs, ys);
            for (int c = 0; c < sample.image.shape.c; ++c)
                out.image.at(0, c, y, x) = detail::bilinear_at(sample.image, c, ys, xs);
            out.mask.at(0, 0, y, x) =
                detail::nearest_at(sample.mask, 0, ys, xs) > 0.5f ? 1.0f : 0.0f;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset generator: random smooth blobs thresholded into masks,
// rendered with controllable contrast, boundary blur, multiplicative bias
// field and additive noise.

struct SyntheticSpec {
    int min_blobs = 3;
    int max_blobs = 6;
    double contrast = 0.45;       // foreground-background intensity gap
    double boundary_blur = 0.0;   // gaussian sigma in pixels (weak-edge control)
    double bias_amplitude = 0.0;  // multiplicative low-frequency field strength
    double noise_std = 0.0;
    double min_fg_fraction = 0.005;
    double max_fg_fraction = 0.40;

    static SyntheticSpec easy() { return SyntheticSpec{}; }

    static SyntheticSpec hard() {
        SyntheticSpec s;
        s.contrast = 0.18;
        s.boundary_blur = 1.6;
        s.bias_amplitude = 0.20;
        s.noise_std = 0.04;
        return s;
    }

    static SyntheticSpec named(const std::string& name) {
        if (name == "easy") return easy();
        if (name == "hard") return hard();
        throw SpecError("synthetic: unknown difficulty '" + name + "' (easy|hard)");
    }
};

namespace detail {

inline void gaussian_blur_inplace(std::vector<double>& img, int size, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;
    std::vector<double> tmp(img.size());
    // horizontal
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, size - 1);
                acc += kernel[i + radius] * img[y * size + xx];
            }
            tmp[y * size + x] = acc;
        }
    }
    // vertical
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, size - 1);
                acc += kernel[i + radius] * tmp[yy * size + x];
            }
            img[y * size + x] = acc;
        }
    }
}

}  // namespace detail

// Deterministic per (seed, sample index). Masks come from thresholding the
// blob field before any rendering corruption, so they stay crisp while the
// image degrades with difficulty.
inline Dataset make_synthetic(int n, int size, const SyntheticSpec& spec, std::uint64_t seed) {
    if (size < 16 || size % 16 != 0)
        throw DimensionError("make_synthetic: size must be a positive multiple of 16");
    if (n < 0) throw ContractError("make_synthetic: negative sample count");
    Dataset ds;
    const std::size_t npx = static_cast<std::size_t>(size) * size;
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::at(seed, 0x100000 + static_cast<std::uint64_t>(i));
        std::vector<char> mask(npx);
        double fg_fraction = 0.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const int blobs =
                spec.min_blobs + static_cast<int>(rng.below(
                                     static_cast<std::uint64_t>(spec.max_blobs - spec.min_blobs + 1)));
            std::vector<double> field(npx, 0.0);
            double peak = 0.0;
            for (int b = 0; b < blobs; ++b) {
                const double px = rng.uniform(0.25, 0.75) * size;
                const double py = rng.uniform(0.25, 0.75) * size;
                const double sx = rng.uniform(0.06, 0.16) * size;
                const double sy = rng.uniform(0.06, 0.16) * size;
                const double amp = rng.uniform(0.6, 1.0);
                for (int y = 0; y < size; ++y) {
                    for (int x = 0; x < size; ++x) {
                        const double dx = (x - px) / sx, dy = (y - py) / sy;
                        field[y * size + x] += amp * std::exp(-0.5 * (dx * dx + dy * dy));
                    }
                }
            }
            for (double v : field) peak = std::max(peak, v);
            const double tau = 0.5 * peak;
            std::size_t fg = 0;
            for (std::size_t j = 0; j < npx; ++j) {
                mask[j] = field[j] >= tau ? 1 : 0;
                fg += mask[j];
            }
            fg_fraction = static_cast<double>(fg) / static_cast<double>(npx);
            if (fg_fraction >= spec.min_fg_fraction && fg_fraction <= spec.max_fg_fraction) break;
        }

        const double bg = rng.uniform(0.25, 0.40);
        const double fg = bg + spec.contrast * rng.uniform(0.9, 1.1);
        std::vector<double> img(npx);
        for (std::size_t j = 0; j < npx; ++j) img[j] = mask[j] ? fg : bg;
        detail::gaussian_blur_inplace(img, size, spec.boundary_blur);
        if (spec.bias_amplitude > 0.0) {
            const double ux = rng.uniform(0.5, 1.25), uy = rng.uniform(0.5, 1.25);
            const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const double s = std::cos(
                        2.0 * 3.14159265358979323846 * (ux * x + uy * y) / size + phase);
                    img[y * size + x] *= 1.0 + spec.bias_amplitude * s;
                }
        }
        if (spec.noise_std > 0.0)
            for (double& v : img) v += rng.normal(0.0, spec.noise_std);

        SamplePair s;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "s%03d_0", i);
        s.name = buf;
        s.source_id = source_id_of(s.name);
        s.image = Tensor(Shape{1, 1, size, size});
        s.mask = Tensor(Shape{1, 1, size, size});
        for (std::size_t j = 0; j < npx; ++j) {
            s.image.data[j] = static_cast<float>(std::clamp(img[j], 0.0, 1.0));
            s.mask.data[j] = mask[j] ? 1.0f : 0.0f;
        }
        ds.samples.push_back(std::move(s));
        (void)fg_fraction;
    }
    return ds;
}

}  // namespace dsnet

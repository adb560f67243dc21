#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dsnet/network.hpp"
#include "dsnet/optimizer.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// Checkpoint wire format: magic "DSNC", format version u32, entry count u32,
// then per entry: name length u32 + UTF-8 name, 4 dims as u32, little-endian
// f32 payload. All integers little-endian. Reserved entry names: "meta.arch"
// ([kind, in_ch, base_ch]), "meta.heads" (head site codes, +stage encoder /
// -stage decoder), "opt.step" and "opt.v.<param>" for optimizer state.

inline constexpr char kCheckpointMagic[4] = {'D', 'S', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError(path + ": truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, const float* p, std::size_t n) {
    static_assert(sizeof(float) == 4);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &p[i], 4);
        put_u32(out, bits);
    }
}

inline void get_f32(std::istream& in, float* p, std::size_t n, const std::string& path) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32(in, path);
        std::memcpy(&p[i], &bits, 4);
    }
}

}  // namespace detail

inline void write_checkpoint(const std::filesystem::path& path,
                             const std::vector<CheckpointEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + path.string());
    out.write(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::put_u32(out, static_cast<std::uint32_t>(e.shape.n));
        detail::put_u32(out, static_cast<std::uint32_t>(e.shape.c));
        detail::put_u32(out, static_cast<std::uint32_t>(e.shape.h));
        detail::put_u32(out, static_cast<std::uint32_t>(e.shape.w));
        detail::put_f32(out, e.data.data(), e.data.size());
    }
    if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

inline std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + name);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError(name + ": bad checkpoint magic, expected \"DSNC\"");
    const std::uint32_t version = detail::get_u32(in, name);
    if (version != kCheckpointVersion)
        throw FormatError(name + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = detail::get_u32(in, name);
    std::vector<CheckpointEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const std::uint32_t len = detail::get_u32(in, name);
        if (len > (1u << 16)) throw FormatError(name + ": implausible entry name length");
        e.name.resize(len);
        in.read(e.name.data(), len);
        if (!in) throw FormatError(name + ": truncated checkpoint");
        e.shape.n = static_cast<int>(detail::get_u32(in, name));
        e.shape.c = static_cast<int>(detail::get_u32(in, name));
        e.shape.h = static_cast<int>(detail::get_u32(in, name));
        e.shape.w = static_cast<int>(detail::get_u32(in, name));
        e.shape.validate("checkpoint entry");
        e.data.resize(static_cast<std::size_t>(e.shape.numel()));
        detail::get_f32(in, e.data.data(), e.data.size(), name);
        entries.push_back(std::move(e));
    }
    return entries;
}

// ---------------------------------------------------------------------------
// Model-level save / load.

inline void save_model(const std::filesystem::path& path, const NetworkGraph<float>& model,
                       const SgdState<float>* optim = nullptr) {
    std::vector<CheckpointEntry> entries;
    entries.push_back({"meta.arch",
                       Shape{1, 1, 1, 3},
                       {static_cast<float>(model.kind == ModelKind::dscnn ? 1 : 0),
                        static_cast<float>(model.in_ch), static_cast<float>(model.base_ch)}});
    if (!model.heads.empty()) {
        CheckpointEntry heads{"meta.heads", Shape{1, 1, 1, model.head_count()}, {}};
        for (const auto& h : model.heads)
            heads.data.push_back(h.site.path == HeadSite::encoder
                                     ? static_cast<float>(h.site.stage)
                                     : -static_cast<float>(h.site.stage));
        entries.push_back(std::move(heads));
    }
    model.for_each_param([&](const std::string& n, const Tensor& t) {
        entries.push_back({n, t.shape, t.data});
    });
    if (optim) {
        entries.push_back(
            {"opt.step", Shape{1, 1, 1, 1}, {static_cast<float>(optim->step_count)}});
        for (const auto& [n, v] : optim->velocity)
            entries.push_back({"opt.v." + n, v.shape, v.data});
    }
    write_checkpoint(path, entries);
}

// Rebuilds the architecture from the metadata entries and assigns every
// parameter by name. When `optim` is given the optimizer state is restored
// too; a checkpoint without optimizer entries is then rejected.
inline NetworkGraph<float> load_model(const std::filesystem::path& path,
                                      SgdState<float>* optim = nullptr) {
    const std::string fname = path.string();
    std::map<std::string, CheckpointEntry> by_name;
    for (auto& e : read_checkpoint(path)) {
        const std::string n = e.name;
        if (!by_name.emplace(n, std::move(e)).second)
            throw FormatError(fname + ": duplicate checkpoint entry '" + n + "'");
    }
    const auto arch = by_name.find("meta.arch");
    if (arch == by_name.end() || arch->second.data.size() != 3)
        throw FormatError(fname + ": missing meta.arch entry");
    const bool is_dscnn = arch->second.data[0] != 0.0f;
    const int in_ch = static_cast<int>(arch->second.data[1]);
    const int base_ch = static_cast<int>(arch->second.data[2]);

    NetworkGraph<float> model;
    if (is_dscnn) {
        std::vector<HeadSite> sites;
        const auto hs = by_name.find("meta.heads");
        if (hs != by_name.end()) {
            for (float code : hs->second.data) {
                HeadSite s;
                s.path = code > 0 ? HeadSite::encoder : HeadSite::decoder;
                s.stage = static_cast<int>(code > 0 ? code : -code);
                sites.push_back(s);
            }
        }
        model = build_dscnn<float>(in_ch, base_ch, 0, sites);
    } else {
        model = build_unet<float>(in_ch, base_ch, 0);
    }

    model.for_each_param([&](const std::string& n, Tensor& t) {
        const auto it = by_name.find(n);
        if (it == by_name.end())
            throw FormatError(fname + ": checkpoint does not match " +
                              std::string(model_kind_name(model.kind)) +
                              " architecture, missing parameter '" + n + "'");
        if (it->second.shape != t.shape)
            throw FormatError(fname + ": shape mismatch for parameter '" + n + "': " +
                              it->second.shape.str() + " vs " + t.shape.str());
        t.data = it->second.data;
    });

    if (optim) {
        const auto st = by_name.find("opt.step");
        if (st == by_name.end())
            throw FormatError(fname + ": checkpoint carries no optimizer state");
        optim->step_count = static_cast<long>(st->second.data[0]);
        optim->velocity.clear();
        model.for_each_param([&](const std::string& n, Tensor& t) {
            const auto it = by_name.find("opt.v." + n);
            if (it == by_name.end())
                throw FormatError(fname + ": missing optimizer velocity for '" + n + "'");
            if (it->second.shape != t.shape)
                throw FormatError(fname + ": velocity shape mismatch for '" + n + "'");
            optim->velocity.emplace_back(n, Tensor(it->second.shape, it->second.data));
        });
    }
    return model;
}

}  // namespace dsnet

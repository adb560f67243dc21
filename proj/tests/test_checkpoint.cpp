#include <catch2/catch_amalgamated.hpp>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dsnet/checkpoint.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/rng.hpp"

using namespace dsnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "dsnet_test_ckpt";
    fs::create_directories(dir);
    return dir / name;
}

void take_training_step(NetworkGraph<float>& model, SgdState<float>& optim, std::uint64_t seed) {
    Rng rng(seed);
    Tensor image(Shape{1, 1, 16, 16});
    for (float& v : image.data) v = static_cast<float>(rng.unit());
    Tensor mask(Shape{1, 1, 16, 16});
    for (float& v : mask.data) v = rng.below(2) ? 1.0f : 0.0f;
    model.zero_grads();
    Tape<float> tape;
    std::vector<Value> outs = model.forward(tape, tape.leaf(image));
    ObjectiveValues<float> obj =
        total_objective(tape, outs[0], {outs.begin() + 1, outs.end()}, mask,
                        SupervisionWeights<float>::uniform(model.head_count()));
    tape.backward(obj.total);
    sgd_step(model, optim);
}

}  // namespace

TEST_CASE("raw entries round-trip bit-exactly") {
    std::vector<CheckpointEntry> entries;
    Rng rng(51);
    CheckpointEntry e;
    e.name = "enc1.conv1.kernel";
    e.shape = Shape{4, 3, 3, 3};
    for (int i = 0; i < e.shape.numel(); ++i)
        e.data.push_back(static_cast<float>(rng.normal(0.0, 123.456)));
    e.data[0] = -0.0f;
    e.data[1] = 1e-42f;  // subnormal survives too
    entries.push_back(e);

    const fs::path p = temp_file("raw.dsnc");
    write_checkpoint(p, entries);
    const auto back = read_checkpoint(p);
    REQUIRE(back.size() == 1);
    REQUIRE(back[0].name == e.name);
    REQUIRE(back[0].shape == e.shape);
    REQUIRE(back[0].data.size() == e.data.size());
    for (std::size_t i = 0; i < e.data.size(); ++i) {
        std::uint32_t a, b;
        std::memcpy(&a, &e.data[i], 4);
        std::memcpy(&b, &back[0].data[i], 4);
        REQUIRE(a == b);
    }
}

TEST_CASE("model save/load restores every parameter bit-exactly") {
    NetworkGraph<float> model = build_dscnn<float>(1, 4, 9);
    const fs::path p = temp_file("model.dsnc");
    save_model(p, model);
    NetworkGraph<float> back = load_model(p);
    REQUIRE(back.kind == ModelKind::dscnn);
    REQUIRE(back.in_ch == 1);
    REQUIRE(back.base_ch == 4);
    REQUIRE(back.head_count() == model.head_count());

    std::vector<std::pair<std::string, std::vector<float>>> orig;
    model.for_each_param([&](const std::string& n, Tensor& t) { orig.emplace_back(n, t.data); });
    std::size_t i = 0;
    back.for_each_param([&](const std::string& n, Tensor& t) {
        REQUIRE(orig[i].first == n);
        REQUIRE(orig[i].second == t.data);
        ++i;
    });
    REQUIRE(i == orig.size());
}

TEST_CASE("optimizer state round-trips through the checkpoint") {
    NetworkGraph<float> model = build_dscnn<float>(1, 4, 10);
    SgdState<float> optim;
    take_training_step(model, optim, 1);
    take_training_step(model, optim, 2);
    REQUIRE(optim.step_count == 2);

    const fs::path p = temp_file("optim.dsnc");
    save_model(p, model, &optim);

    SgdState<float> restored;
    NetworkGraph<float> back = load_model(p, &restored);
    REQUIRE(restored.step_count == 2);
    REQUIRE(restored.velocity.size() == optim.velocity.size());
    for (const auto& [name, v] : optim.velocity) {
        bool found = false;
        for (const auto& [rname, rv] : restored.velocity)
            if (rname == name) {
                REQUIRE(rv.data == v.data);
                found = true;
            }
        REQUIRE(found);
    }

    // continuing from the restored state reproduces the original trajectory
    take_training_step(model, optim, 3);
    take_training_step(back, restored, 3);
    std::vector<float> a, b;
    model.for_each_param([&](const std::string&, Tensor& t) {
        a.insert(a.end(), t.data.begin(), t.data.end());
    });
    back.for_each_param([&](const std::string&, Tensor& t) {
        b.insert(b.end(), t.data.begin(), t.data.end());
    });
    REQUIRE(a == b);
}

TEST_CASE("corrupt magic is rejected naming DSNC") {
    const fs::path p = temp_file("badmagic.dsnc");
    {
        std::ofstream out(p, std::ios::binary);
        out << "NOPE" << std::string(64, '\0');
    }
    REQUIRE_THROWS_WITH(read_checkpoint(p), Catch::Matchers::ContainsSubstring("DSNC"));
}

TEST_CASE("truncated checkpoint is rejected") {
    NetworkGraph<float> model = build_unet<float>(1, 4, 0);
    const fs::path p = temp_file("full.dsnc");
    save_model(p, model);
    const auto size = fs::file_size(p);
    const fs::path cut = temp_file("cut.dsnc");
    {
        std::ifstream in(p, std::ios::binary);
        std::vector<char> buf(static_cast<std::size_t>(size / 2));
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::ofstream out(cut, std::ios::binary);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    REQUIRE_THROWS_AS(read_checkpoint(cut), FormatError);
}

TEST_CASE("architecture metadata is required and complete") {
    // a checkpoint whose meta.arch promises parameters that are not present
    std::vector<CheckpointEntry> entries;
    entries.push_back({"meta.arch", Shape{1, 1, 1, 3}, {0.0f, 1.0f, 4.0f}});
    const fs::path p = temp_file("incomplete.dsnc");
    write_checkpoint(p, entries);
    REQUIRE_THROWS_AS(load_model(p), FormatError);

    // resume from a weights-only checkpoint is rejected
    NetworkGraph<float> model = build_unet<float>(1, 4, 0);
    const fs::path q = temp_file("noopt.dsnc");
    save_model(q, model);
    SgdState<float> optim;
    REQUIRE_THROWS_AS(load_model(q, &optim), FormatError);
}

TEST_CASE("missing file raises an io error") {
    REQUIRE_THROWS_AS(read_checkpoint(temp_file("does_not_exist.dsnc")), IoError);
}

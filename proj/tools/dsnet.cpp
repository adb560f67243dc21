// Command-line entry points: synthetic data generation, training, evaluation,
// prediction with per-head dumps, and gradient checking.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsnet/dsnet.hpp"

namespace fs = std::filesystem;
using namespace dsnet;

namespace {

Tensor load_image_tensor(const fs::path& path) {
    const PgmImage img = read_pgm(path);
    Tensor t(Shape{1, 1, img.height, img.width});
    const float scale = 1.0f / static_cast<float>(img.maxval);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        t.data[i] = static_cast<float>(img.pixels[i]) * scale;
    return t;
}

void write_prob_pgm(const fs::path& path, const Tensor& prob) {
    std::vector<std::uint8_t> buf(prob.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const float v = std::clamp(prob.data[i], 0.0f, 1.0f);
        buf[i] = static_cast<std::uint8_t>(std::lround(255.0f * v));
    }
    write_pgm8(path, prob.shape.w, prob.shape.h, buf);
}

void write_mask_pgm(const fs::path& path, const Tensor& mask) {
    std::vector<std::uint8_t> buf(mask.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.data[i] > 0.0f ? 255 : 0;
    write_pgm8(path, mask.shape.w, mask.shape.h, buf);
}

struct SynthArgs {
    int n = 0;
    int size = 64;
    std::string difficulty = "easy";
    std::uint64_t seed = 0;
    std::string out;
    double split_fraction = 0.0;
};

int cmd_synth(const SynthArgs& a) {
    const Dataset ds = make_synthetic(a.n, a.size, SyntheticSpec::named(a.difficulty), a.seed);
    write_dataset(ds, a.out);
    if (a.split_fraction > 0.0) {
        const SplitSpec spec = split_by_fraction(ds, a.split_fraction, a.seed);
        write_split_file(spec, fs::path(a.out) / "split.txt");
    }
    std::cout << "wrote " << ds.size() << " samples to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string resume;
    bool paper_preset = false;
};

int cmd_train(const TrainArgs& a) {
    RunConfig cfg;
    if (!a.config_file.empty()) cfg = RunConfig::from_file(a.config_file);
    if (a.paper_preset) cfg.apply_paper_preset();
    for (const auto& [k, v] : a.overrides) cfg.set(k, v);
    cfg.validate();
    if (cfg.data_root.empty()) throw SpecError("train: data_root is required");

    Dataset all = load_dataset(cfg.data_root);
    Dataset train = std::move(all);
    if (!cfg.split_file.empty()) {
        const SplitSpec spec = read_split_file(cfg.split_file);
        auto [tr, te] = apply_split(train, spec);
        train = std::move(tr);
    }
    if (train.empty()) throw ContractError("train: no training samples under " + cfg.data_root);

    fs::create_directories(cfg.out_dir);
    {
        std::ofstream echo(fs::path(cfg.out_dir) / "config.txt");
        if (!echo) throw IoError("train: cannot write config echo in " + cfg.out_dir);
        echo << cfg.to_text();
    }

    Trainer trainer(cfg, std::move(train));
    if (!a.resume.empty()) trainer.restore(a.resume);

    const fs::path log_path = fs::path(cfg.out_dir) / "train_log.csv";
    std::ofstream log(log_path);
    if (!log) throw IoError("train: cannot write " + log_path.string());
    log << trainer.csv_header() << "\n";

    const long start = trainer.current_step();
    const long echo_every = std::max<long>(1, (cfg.steps - start) / 20);
    for (long t = start; t < cfg.steps; ++t) {
        const StepRecord rec = trainer.step();
        log << Trainer::csv_line(rec) << "\n";
        if ((t - start) % echo_every == 0 || t + 1 == cfg.steps)
            std::cout << "step " << rec.step << "/" << cfg.steps << "  lr " << rec.lr
                      << "  total " << rec.loss.total << "\n";
        if (cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 &&
            t + 1 < cfg.steps) {
            trainer.save((fs::path(cfg.out_dir) /
                          ("checkpoint_step" + std::to_string(t + 1) + ".dsnc"))
                             .string());
        }
    }
    const std::string final_path = (fs::path(cfg.out_dir) / "checkpoint.dsnc").string();
    trainer.save(final_path);
    std::cout << "checkpoint: " << final_path << "\n";
    return 0;
}

struct EvalArgs {
    std::vector<std::string> checkpoints;
    std::string data_root;
    std::string split_file;
    double threshold = 0.5;
    std::string report_file;
};

int cmd_eval(const EvalArgs& a) {
    Dataset test = load_dataset(a.data_root);
    if (!a.split_file.empty()) {
        const SplitSpec spec = read_split_file(a.split_file);
        auto [tr, te] = apply_split(test, spec);
        test = std::move(te);
    }
    std::vector<EvalSummary> summaries;
    for (const std::string& ckpt : a.checkpoints) {
        NetworkGraph<float> model = load_model(ckpt);
        summaries.push_back(evaluate(model, test, a.threshold, fs::path(ckpt).stem().string()));
    }
    const std::string report = compare_report(summaries);
    std::cout << report;
    if (!a.report_file.empty()) {
        std::ofstream out(a.report_file);
        if (!out) throw IoError("eval: cannot write " + a.report_file);
        out << report;
    }
    return 0;
}

struct PredictArgs {
    std::string checkpoint;
    std::vector<std::string> inputs;
    std::string out = ".";
    bool dump_heads = false;
    double threshold = 0.5;
};

int cmd_predict(const PredictArgs& a) {
    NetworkGraph<float> model = load_model(a.checkpoint);
    if (a.dump_heads && model.head_count() == 0)
        std::cerr << "warning: " << model_kind_name(model.kind)
                  << " has no supervision heads; writing main mask only\n";
    fs::create_directories(a.out);
    for (const std::string& input : a.inputs) {
        const Tensor image = load_image_tensor(input);
        const std::vector<Tensor> outputs = model.predict(image);
        const std::string stem = fs::path(input).stem().string();
        write_mask_pgm(fs::path(a.out) / (stem + "_mask.pgm"),
                       binarize(outputs[0], a.threshold));
        if (a.dump_heads)
            for (std::size_t i = 1; i < outputs.size(); ++i)
                write_prob_pgm(fs::path(a.out) / (stem + "_head" + std::to_string(i) + ".pgm"),
                               outputs[i]);
        std::cout << stem << ": wrote mask" << (a.dump_heads && model.head_count() > 0
                                                    ? " + " + std::to_string(model.head_count()) +
                                                          " head maps"
                                                    : "")
                  << "\n";
    }
    return 0;
}

struct GradcheckArgs {
    std::string model = "dscnn";
    int base_channels = 8;
    int size = 16;
    std::uint64_t seed = 0;
    double h = 1e-3;
    double tol = 1e-3;
    int samples = 100;
    std::string params;
    bool inject_corruption = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    if (a.size > 32) throw SpecError("gradcheck: size must be <= 32 (small inputs only)");
    NetworkGraph<float> model = a.model == "unet"
                                    ? build_unet<float>(1, a.base_channels, a.seed)
                                    : build_dscnn<float>(1, a.base_channels, a.seed);
    Rng rng = Rng::at(a.seed, 0x97ad);
    Tensor image(Shape{1, 1, a.size, a.size});
    for (float& v : image.data) v = static_cast<float>(rng.unit());
    Tensor mask(Shape{1, 1, a.size, a.size});
    for (float& v : mask.data) v = rng.unit() < 0.3 ? 1.0f : 0.0f;

    GradCheckOptions opts;
    opts.h = a.h;
    opts.tol = a.tol;
    opts.samples_per_param = a.samples;
    opts.seed = a.seed;
    opts.param_filter = a.params;
    if (a.inject_corruption) opts.corrupt_param = "kernel";

    const GradCheckReport report = finite_diff_check(model, image, mask, opts);
    std::cout << report.summary(8);
    return report.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deeply-supervised CNN for binary segmentation"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic dataset");
    s->add_option("--n", synth.n, "number of samples")->required();
    s->add_option("--size", synth.size, "image size (multiple of 16)");
    s->add_option("--difficulty", synth.difficulty, "easy|hard");
    s->add_option("--seed", synth.seed, "rng seed");
    s->add_option("--out", synth.out, "dataset directory")->required();
    s->add_option("--split-fraction", synth.split_fraction,
                  "also write split.txt with this test fraction");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train a model");
    t->add_option("--config", train.config_file, "key = value config file");
    t->add_option("--resume", train.resume, "checkpoint to resume from");
    t->add_flag("--preset-paper", train.paper_preset,
                "lr 0.001, momentum 0.9, batch size 1");
    const std::vector<std::string> train_keys = {
        "model",          "base_channels",    "in_channels",   "alpha",
        "main_weight",    "lr",               "momentum",      "weight_decay",
        "lr_schedule",    "lr_gamma",         "lr_period",     "steps",
        "batch_size",     "seed",             "data_root",     "split_file",
        "out_dir",        "checkpoint_every", "augment",       "aug_translate_frac",
        "aug_rotate_deg", "aug_zoom_min",     "aug_zoom_max",  "threshold"};
    auto key_values = std::make_shared<std::vector<std::string>>();
    for (const std::string& key : train_keys) {
        t->add_option_function<std::string>(
            "--" + key,
            [&train, key](const std::string& v) { train.overrides.emplace_back(key, v); },
            "config override");
    }
    (void)key_values;

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "evaluate checkpoints, Table-style report");
    e->add_option("--checkpoint", eval.checkpoints, "checkpoint file (repeatable)")->required();
    e->add_option("--data", eval.data_root, "dataset directory")->required();
    e->add_option("--split", eval.split_file, "split file (test section used)");
    e->add_option("--threshold", eval.threshold, "binarization threshold");
    e->add_option("--report", eval.report_file, "also write the table to this file");

    PredictArgs predict;
    auto* p = app.add_subcommand("predict", "write binarized masks for input images");
    p->add_option("--checkpoint", predict.checkpoint, "checkpoint file")->required();
    p->add_option("inputs", predict.inputs, "input PGM images")->required();
    p->add_option("--out", predict.out, "output directory");
    p->add_flag("--dump-heads", predict.dump_heads, "also write per-head probability maps");
    p->add_option("--threshold", predict.threshold, "binarization threshold");

    GradcheckArgs gradcheck;
    auto* g = app.add_subcommand("gradcheck", "finite-difference gradient check");
    g->add_option("--model", gradcheck.model, "unet|dscnn");
    g->add_option("--base-channels", gradcheck.base_channels, "base channel count");
    g->add_option("--size", gradcheck.size, "input size (<= 32)");
    g->add_option("--seed", gradcheck.seed, "rng seed");
    g->add_option("--h", gradcheck.h, "finite-difference step");
    g->add_option("--tol", gradcheck.tol, "relative tolerance");
    g->add_option("--samples", gradcheck.samples, "elements sampled per parameter");
    g->add_option("--params", gradcheck.params, "substring filter on parameter names");
    g->add_flag("--inject-corruption", gradcheck.inject_corruption,
                "negative control: corrupt one gradient before checking");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(s)) return cmd_synth(synth);
        if (app.got_subcommand(t)) return cmd_train(train);
        if (app.got_subcommand(e)) return cmd_eval(eval);
        if (app.got_subcommand(p)) return cmd_predict(predict);
        if (app.got_subcommand(g)) return cmd_gradcheck(gradcheck);
    } catch (const NumericError& err) {
        std::cerr << "numeric failure: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 1;
}

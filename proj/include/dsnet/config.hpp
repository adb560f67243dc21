#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsnet/data.hpp"
#include "dsnet/loss.hpp"
#include "dsnet/network.hpp"
#include "dsnet/optimizer.hpp"

namespace dsnet {

// Flat key = value run configuration. Unknown keys are rejected; '#' starts a
// comment. Command-line flags override file values, and the effective config
// is echoed into the run directory so a run can be reproduced from the echo.
struct RunConfig {
    std::string model = "dscnn";  // unet | dscnn
    int base_channels = 64;
    int in_channels = 1;
    std::string alpha = "1";  // comma list per head, or one value for all
    double main_weight = 1.0;
    double lr = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::string lr_schedule = "step";  // constant | step
    double lr_gamma = 0.5;
    long lr_period = 2000;
    long steps = 2000;
    int batch_size = 1;
    std::uint64_t seed = 0;
    std::string data_root;
    std::string split_file;
    std::string out_dir = "run";
    long checkpoint_every = 0;  // 0 = only at the end
    bool augment = true;
    double aug_translate_frac = 0.10;
    double aug_rotate_deg = 15.0;
    double aug_zoom_min = 0.9;
    double aug_zoom_max = 1.1;
    double threshold = 0.5;

    void set(const std::string& key, const std::string& value) {
        try {
            if (key == "model") model = value;
            else if (key == "base_channels") base_channels = std::stoi(value);
            else if (key == "in_channels") in_channels = std::stoi(value);
            else if (key == "alpha") alpha = value;
            else if (key == "main_weight") main_weight = std::stod(value);
            else if (key == "lr") lr = std::stod(value);
            else if (key == "momentum") momentum = std::stod(value);
            else if (key == "weight_decay") weight_decay = std::stod(value);
            else if (key == "lr_schedule") lr_schedule = value;
            else if (key == "lr_gamma") lr_gamma = std::stod(value);
            else if (key == "lr_period") lr_period = std::stol(value);
            else if (key == "steps") steps = std::stol(value);
            else if (key == "batch_size") batch_size = std::stoi(value);
            else if (key == "seed") seed = std::stoull(value);
            else if (key == "data_root") data_root = value;
            else if (key == "split_file") split_file = value;
            else if (key == "out_dir") out_dir = value;
            else if (key == "checkpoint_every") checkpoint_every = std::stol(value);
            else if (key == "augment") augment = parse_bool(value);
            else if (key == "aug_translate_frac") aug_translate_frac = std::stod(value);
            else if (key == "aug_rotate_deg") aug_rotate_deg = std::stod(value);
            else if (key == "aug_zoom_min") aug_zoom_min = std::stod(value);
            else if (key == "aug_zoom_max") aug_zoom_max = std::stod(value);
            else if (key == "threshold") threshold = std::stod(value);
            else throw SpecError("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw SpecError("config: bad value '" + value + "' for key '" + key + "'");
        } catch (const std::out_of_range&) {
            throw SpecError("config: value out of range for key '" + key + "'");
        }
    }

    static RunConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("config: cannot open " + path.string());
        RunConfig cfg;
        cfg.merge_file(in, path.string());
        return cfg;
    }

    void merge_file(std::istream& in, const std::string& name) {
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw FormatError(name + ":" + std::to_string(lineno) +
                                      ": expected key = value");
                continue;
            }
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    std::string to_text() const {
        std::ostringstream out;
        out << "model = " << model << "\n";
        out << "base_channels = " << base_channels << "\n";
        out << "in_channels = " << in_channels << "\n";
        out << "alpha = " << alpha << "\n";
        out << "main_weight = " << fmt(main_weight) << "\n";
        out << "lr = " << fmt(lr) << "\n";
        out << "momentum = " << fmt(momentum) << "\n";
        out << "weight_decay = " << fmt(weight_decay) << "\n";
        out << "lr_schedule = " << lr_schedule << "\n";
        out << "lr_gamma = " << fmt(lr_gamma) << "\n";
        out << "lr_period = " << lr_period << "\n";
        out << "steps = " << steps << "\n";
        out << "batch_size = " << batch_size << "\n";
        out << "seed = " << seed << "\n";
        out << "data_root = " << data_root << "\n";
        out << "split_file = " << split_file << "\n";
        out << "out_dir = " << out_dir << "\n";
        out << "checkpoint_every = " << checkpoint_every << "\n";
        out << "augment = " << (augment ? "true" : "false") << "\n";
        out << "aug_translate_frac = " << fmt(aug_translate_frac) << "\n";
        out << "aug_rotate_deg = " << fmt(aug_rotate_deg) << "\n";
        out << "aug_zoom_min = " << fmt(aug_zoom_min) << "\n";
        out << "aug_zoom_max = " << fmt(aug_zoom_max) << "\n";
        out << "threshold = " << fmt(threshold) << "\n";
        return out.str();
    }

    void validate() const {
        if (model != "unet" && model != "dscnn")
            throw SpecError("config: model must be unet or dscnn, got '" + model + "'");
        if (base_channels < 1) throw SpecError("config: base_channels must be >= 1");
        if (in_channels < 1) throw SpecError("config: in_channels must be >= 1");
        if (!(lr > 0.0)) throw SpecError("config: lr must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw SpecError("config: momentum must be in [0,1)");
        if (weight_decay < 0.0) throw SpecError("config: weight_decay must be >= 0");
        if (lr_schedule != "constant" && lr_schedule != "step")
            throw SpecError("config: lr_schedule must be constant or step");
        if (lr_period < 1) throw SpecError("config: lr_period must be >= 1");
        if (steps < 0) throw SpecError("config: steps must be >= 0");
        if (batch_size < 1) throw SpecError("config: batch_size must be >= 1");
        if (threshold < 0.0 || threshold > 1.0) throw SpecError("config: threshold must be in [0,1]");
        if (main_weight < 0.0) throw SpecError("config: main_weight must be >= 0");
        weights(model == "dscnn" ? 8 : 0);  // alpha parses and validates
    }

    ModelKind model_kind() const {
        return model == "unet" ? ModelKind::unet : ModelKind::dscnn;
    }

    LrSchedule schedule() const {
        LrSchedule s;
        s.kind = lr_schedule == "constant" ? ScheduleKind::constant : ScheduleKind::step_decay;
        s.gamma = lr_gamma;
        s.period = lr_period;
        return s;
    }

    SgdState<float> make_optimizer() const {
        SgdState<float> s;
        s.lr0 = lr;
        s.momentum = momentum;
        s.weight_decay = weight_decay;
        s.schedule = schedule();
        return s;
    }

    SupervisionWeights<float> weights(int head_count) const {
        SupervisionWeights<float> w;
        w.main_weight = static_cast<float>(main_weight);
        std::stringstream ss(alpha);
        std::string tok;
        std::vector<float> vals;
        while (std::getline(ss, tok, ',')) {
            try {
                vals.push_back(std::stof(trim(tok)));
            } catch (...) {
                throw SpecError("config: bad alpha value '" + tok + "'");
            }
        }
        if (vals.empty()) throw SpecError("config: empty alpha");
        if (vals.size() == 1) {
            w.alpha.assign(static_cast<std::size_t>(head_count), vals[0]);
        } else if (static_cast<int>(vals.size()) == head_count) {
            w.alpha = vals;
        } else {
            throw SpecError("config: " + std::to_string(vals.size()) + " alpha values for " +
                            std::to_string(head_count) + " heads");
        }
        return w;
    }

    AugmentSpec augment_spec(int width) const {
        AugmentSpec s;
        if (!augment) return s;
        s.max_translate_px = aug_translate_frac * width;
        s.max_rotate_deg = aug_rotate_deg;
        s.zoom_min = aug_zoom_min;
        s.zoom_max = aug_zoom_max;
        return s;
    }

    // Paper-stated training settings; the schedule fill-ins are ours.
    void apply_paper_preset() {
        lr = 1e-3;
        momentum = 0.9;
        batch_size = 1;
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static bool parse_bool(const std::string& v) {
        if (v == "true" || v == "1" || v == "on") return true;
        if (v == "false" || v == "0" || v == "off") return false;
        throw SpecError("config: bad boolean '" + v + "'");
    }

    static std::string fmt(double v) {
        std::ostringstream out;
        out.precision(17);
        out << v;
        return out.str();
    }
};

}  // namespace dsnet

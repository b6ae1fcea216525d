#include "vdst/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

using nlohmann::json;

namespace vdst {

std::string to_string(BackboneMode m) {
    switch (m) {
        case BackboneMode::frozen: return "frozen";
        case BackboneMode::refine_by_teacher: return "refine_by_teacher";
        case BackboneMode::refine_by_student: return "refine_by_student";
    }
    return "frozen";
}

BackboneMode backbone_mode_from_string(const std::string& s) {
    if (s == "frozen") return BackboneMode::frozen;
    if (s == "refine_by_teacher") return BackboneMode::refine_by_teacher;
    if (s == "refine_by_student") return BackboneMode::refine_by_student;
    throw std::invalid_argument("trainer.backbone_mode: unknown mode '" + s + "'");
}

namespace {

class Reader {
public:
    explicit Reader(const json& root) : root_(root) {}

    const json* block(const std::string& name, std::initializer_list<const char*> allowed) {
        if (!root_.contains(name)) return nullptr;
        const json& b = root_.at(name);
        if (!b.is_object()) {
            errors.push_back(name + ": expected an object");
            return nullptr;
        }
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!ok.count(it.key())) errors.push_back("unknown key '" + name + "." + it.key() + "'");
        return &b;
    }

    void check_top_level(std::initializer_list<const char*> allowed) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = root_.begin(); it != root_.end(); ++it)
            if (!ok.count(it.key())) errors.push_back("unknown key '" + it.key() + "'");
    }

    template <typename T>
    void get(const json* b, const std::string& block_name, const char* key, T& out) {
        if (!b || !b->contains(key)) return;
        try {
            out = b->at(key).get<T>();
        } catch (const json::exception&) {
            errors.push_back(block_name + "." + key + ": wrong type");
        }
    }

    void get_enum(const json* b, const std::string& block_name, const char* key,
                  const std::function<void(const std::string&)>& apply) {
        if (!b || !b->contains(key)) return;
        if (!b->at(key).is_string()) {
            errors.push_back(block_name + "." + key + ": expected a string");
            return;
        }
        try {
            apply(b->at(key).get<std::string>());
        } catch (const std::exception& e) {
            errors.push_back(e.what());
        }
    }

    std::vector<std::string> errors;

private:
    const json& root_;
};

void semantic_checks(const RunConfig& c, std::vector<std::string>& errors) {
    auto run = [&](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            errors.push_back(e.what());
        }
    };
    run([&] { c.pooling.validate(); });
    run([&] { c.distill.validate(); });
    run([&] { c.post.validate(); });
    run([&] { c.metrics.validate(); });
    run([&] { c.synth.validate(); });
    if (c.encoder.patch_size < 1) errors.push_back("encoder.patch_size must be >= 1");
    if (c.encoder.embed_dim < 1) errors.push_back("encoder.embed_dim must be >= 1");
    if (c.encoder.depth < 0) errors.push_back("encoder.depth must be >= 0");
    if (c.teacher.hidden_width < 1) errors.push_back("teacher.hidden_width must be >= 1");
    if (c.teacher.out_channels < 1) errors.push_back("teacher.out_channels must be >= 1");
    if (!(c.teacher.dropout >= 0.0 && c.teacher.dropout < 1.0))
        errors.push_back("teacher.dropout must be in [0,1)");
    if (!(c.teacher.downsample_prob >= 0.0 && c.teacher.downsample_prob <= 1.0))
        errors.push_back("teacher.downsample_prob must be in [0,1]");
    if (c.student.hidden_width < 1) errors.push_back("student.hidden_width must be >= 1");
    if (c.student.out_channels != c.teacher.out_channels)
        errors.push_back("student.out_channels must equal teacher.out_channels (CAMs must be comparable)");
    if (c.student.temporal_kernel < 3 || c.student.temporal_kernel % 2 == 0)
        errors.push_back("student.temporal_kernel must be odd and >= 3");
    if (!(c.student.dropout >= 0.0 && c.student.dropout < 1.0))
        errors.push_back("student.dropout must be in [0,1)");
    if (!(c.trainer.lr > 0.0)) errors.push_back("trainer.lr must be > 0");
    if (c.trainer.weight_decay < 0.0) errors.push_back("trainer.weight_decay must be >= 0");
    if (c.trainer.teacher_only_epochs < 0) errors.push_back("trainer.teacher_only_epochs must be >= 0");
    if (c.trainer.joint_epochs < 0) errors.push_back("trainer.joint_epochs must be >= 0");
    if (c.trainer.batch_size < 1) errors.push_back("trainer.batch_size must be >= 1");
}

} // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError({std::string("not valid JSON: ") + e.what()});
    }
    if (!root.is_object()) throw ConfigError({"top level must be an object"});

    RunConfig c;
    Reader r(root);
    r.check_top_level({"encoder", "teacher", "student", "pooling", "distill", "trainer", "post",
                       "metrics", "synth", "data"});

    if (const json* b = r.block("encoder", {"patch_size", "embed_dim", "depth", "seed"})) {
        r.get(b, "encoder", "patch_size", c.encoder.patch_size);
        r.get(b, "encoder", "embed_dim", c.encoder.embed_dim);
        r.get(b, "encoder", "depth", c.encoder.depth);
        r.get(b, "encoder", "seed", c.encoder.seed);
    }
    if (const json* b = r.block("teacher", {"hidden_width", "out_channels", "dropout", "downsample_prob"})) {
        r.get(b, "teacher", "hidden_width", c.teacher.hidden_width);
        r.get(b, "teacher", "out_channels", c.teacher.out_channels);
        r.get(b, "teacher", "dropout", c.teacher.dropout);
        r.get(b, "teacher", "downsample_prob", c.teacher.downsample_prob);
    }
    if (const json* b = r.block("student", {"hidden_width", "out_channels", "temporal_kernel", "dropout"})) {
        r.get(b, "student", "hidden_width", c.student.hidden_width);
        r.get(b, "student", "out_channels", c.student.out_channels);
        r.get(b, "student", "temporal_kernel", c.student.temporal_kernel);
        r.get(b, "student", "dropout", c.student.dropout);
    }
    if (const json* b = r.block("pooling", {"mode", "k1_fraction", "k2_fraction"})) {
        r.get_enum(b, "pooling", "mode",
                   [&](const std::string& s) { c.pooling.mode = pooling_mode_from_string(s); });
        r.get(b, "pooling", "k1_fraction", c.pooling.k1_fraction);
        r.get(b, "pooling", "k2_fraction", c.pooling.k2_fraction);
    }
    if (const json* b = r.block("distill", {"alpha", "gate_mode"})) {
        r.get(b, "distill", "alpha", c.distill.alpha);
        r.get_enum(b, "distill", "gate_mode",
                   [&](const std::string& s) { c.distill.gate_mode = gate_mode_from_string(s); });
    }
    if (const json* b = r.block("trainer", {"lr", "weight_decay", "teacher_only_epochs", "joint_epochs",
                                            "batch_size", "backbone_mode", "seed", "train_teacher",
                                            "train_student"})) {
        r.get(b, "trainer", "lr", c.trainer.lr);
        r.get(b, "trainer", "weight_decay", c.trainer.weight_decay);
        r.get(b, "trainer", "teacher_only_epochs", c.trainer.teacher_only_epochs);
        r.get(b, "trainer", "joint_epochs", c.trainer.joint_epochs);
        r.get(b, "trainer", "batch_size", c.trainer.batch_size);
        r.get_enum(b, "trainer", "backbone_mode",
                   [&](const std::string& s) { c.trainer.backbone_mode = backbone_mode_from_string(s); });
        r.get(b, "trainer", "seed", c.trainer.seed);
        r.get(b, "trainer", "train_teacher", c.trainer.train_teacher);
        r.get(b, "trainer", "train_student", c.trainer.train_student);
    }
    if (const json* b = r.block("post", {"threshold", "min_area"})) {
        r.get(b, "post", "threshold", c.post.threshold);
        r.get(b, "post", "min_area", c.post.min_area);
    }
    if (const json* b = r.block("metrics", {"frame_threshold", "hd_percentile"})) {
        r.get(b, "metrics", "frame_threshold", c.metrics.frame_threshold);
        r.get(b, "metrics", "hd_percentile", c.metrics.hd_percentile);
    }
    if (const json* b = r.block("synth", {"num_classes", "clip_length", "frame_width", "frame_height",
                                          "fpc_range", "objects_per_clip", "motion", "camera_jitter",
                                          "noise_std", "seed"})) {
        r.get(b, "synth", "num_classes", c.synth.num_classes);
        r.get(b, "synth", "clip_length", c.synth.clip_length);
        r.get(b, "synth", "frame_width", c.synth.frame_width);
        r.get(b, "synth", "frame_height", c.synth.frame_height);
        if (b->contains("fpc_range")) {
            try {
                auto v = b->at("fpc_range").get<std::vector<double>>();
                if (v.size() != 2) throw std::invalid_argument("");
                c.synth.fpc_lo = v[0];
                c.synth.fpc_hi = v[1];
            } catch (const std::exception&) {
                r.errors.push_back("synth.fpc_range: expected [lo, hi]");
            }
        }
        if (b->contains("objects_per_clip")) {
            try {
                auto v = b->at("objects_per_clip").get<std::vector<int>>();
                if (v.size() != 2) throw std::invalid_argument("");
                c.synth.objects_min = v[0];
                c.synth.objects_max = v[1];
            } catch (const std::exception&) {
                r.errors.push_back("synth.objects_per_clip: expected [min, max]");
            }
        }
        r.get_enum(b, "synth", "motion",
                   [&](const std::string& s) { c.synth.motion = motion_from_string(s); });
        r.get(b, "synth", "camera_jitter", c.synth.camera_jitter);
        r.get(b, "synth", "noise_std", c.synth.noise_std);
        r.get(b, "synth", "seed", c.synth.seed);
    }
    if (const json* b = r.block("data", {"train_dir", "eval_dir"})) {
        r.get(b, "data", "train_dir", c.data.train_dir);
        r.get(b, "data", "eval_dir", c.data.eval_dir);
    }

    semantic_checks(c, r.errors);
    if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string dump_run_config(const RunConfig& c) {
    json j;
    j["encoder"] = {{"patch_size", c.encoder.patch_size},
                    {"embed_dim", c.encoder.embed_dim},
                    {"depth", c.encoder.depth},
                    {"seed", c.encoder.seed}};
    j["teacher"] = {{"hidden_width", c.teacher.hidden_width},
                    {"out_channels", c.teacher.out_channels},
                    {"dropout", c.teacher.dropout},
                    {"downsample_prob", c.teacher.downsample_prob}};
    j["student"] = {{"hidden_width", c.student.hidden_width},
                    {"out_channels", c.student.out_channels},
                    {"temporal_kernel", c.student.temporal_kernel},
                    {"dropout", c.student.dropout}};
    j["pooling"] = {{"mode", to_string(c.pooling.mode)},
                    {"k1_fraction", c.pooling.k1_fraction},
                    {"k2_fraction", c.pooling.k2_fraction}};
    j["distill"] = {{"alpha", c.distill.alpha}, {"gate_mode", to_string(c.distill.gate_mode)}};
    j["trainer"] = {{"lr", c.trainer.lr},
                    {"weight_decay", c.trainer.weight_decay},
                    {"teacher_only_epochs", c.trainer.teacher_only_epochs},
                    {"joint_epochs", c.trainer.joint_epochs},
                    {"batch_size", c.trainer.batch_size},
                    {"backbone_mode", to_string(c.trainer.backbone_mode)},
                    {"seed", c.trainer.seed},
                    {"train_teacher", c.trainer.train_teacher},
                    {"train_student", c.trainer.train_student}};
    j["post"] = {{"threshold", c.post.threshold}, {"min_area", c.post.min_area}};
    j["metrics"] = {{"frame_threshold", c.metrics.frame_threshold},
                    {"hd_percentile", c.metrics.hd_percentile}};
    j["synth"] = {{"num_classes", c.synth.num_classes},
                  {"clip_length", c.synth.clip_length},
                  {"frame_width", c.synth.frame_width},
                  {"frame_height", c.synth.frame_height},
                  {"fpc_range", std::vector<double>{c.synth.fpc_lo, c.synth.fpc_hi}},
                  {"objects_per_clip", std::vector<int>{c.synth.objects_min, c.synth.objects_max}},
                  {"motion", to_string(c.synth.motion)},
                  {"camera_jitter", c.synth.camera_jitter},
                  {"noise_std", c.synth.noise_std},
                  {"seed", c.synth.seed}};
    j["data"] = {{"train_dir", c.data.train_dir}, {"eval_dir", c.data.eval_dir}};
    return j.dump(2);
}

} // namespace vdst

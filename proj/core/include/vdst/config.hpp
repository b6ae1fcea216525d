#pragma once

#include "vdst/dataio.hpp"
#include "vdst/distill.hpp"
#include "vdst/metrics.hpp"
#include "vdst/pooling.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace vdst {

struct ConfigError : std::runtime_error {
    std::vector<std::string> violations;
    explicit ConfigError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid config: ";
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "; " : "") + v[i];
        return s;
    }
};

struct EncoderConfig {
    int patch_size = 8;
    int embed_dim = 32;
    int depth = 1;
    uint64_t seed = 0;  // mixed with trainer.seed for parameter init
};

struct TeacherConfig {
    int hidden_width = 256;
    int out_channels = 256;
    double dropout = 0.5;
    double downsample_prob = 0.5;
};

struct StudentConfig {
    int hidden_width = 256;
    int out_channels = 256;
    int temporal_kernel = 3;
    double dropout = 0.5;
};

enum class BackboneMode { frozen, refine_by_teacher, refine_by_student };
std::string to_string(BackboneMode m);
BackboneMode backbone_mode_from_string(const std::string& s);

struct TrainerConfig {
    double lr = 1e-4;
    double weight_decay = 1e-4;
    int teacher_only_epochs = 9;
    int joint_epochs = 30;
    int batch_size = 8;
    BackboneMode backbone_mode = BackboneMode::refine_by_teacher;
    uint64_t seed = 0;
    // ablation switches: a standalone student sets train_teacher=false;
    // the routing check ablates the student loss with train_student=false
    bool train_teacher = true;
    bool train_student = true;
};

struct DataConfig {
    std::string train_dir;
    std::string eval_dir;
};

struct RunConfig {
    EncoderConfig encoder;
    TeacherConfig teacher;
    StudentConfig student;
    PoolingConfig pooling;
    DistillConfig distill;
    TrainerConfig trainer;
    PostConfig post;
    MetricsConfig metrics;
    SyntheticConfig synth;
    DataConfig data;
};

// Strict parse: unknown keys are rejected with their full path and all
// violations are reported together, not just the first.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// fully resolved echo (defaults included); parse(dump(c)) == c
std::string dump_run_config(const RunConfig& cfg);

} // namespace vdst

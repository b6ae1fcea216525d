#pragma once

#include "vdst/config.hpp"
#include "vdst/encoder.hpp"
#include "vdst/heads.hpp"

#include <string>
#include <vector>

namespace vdst {

struct ModelBundle {
    BackboneHandle backbone;
    TeacherHead teacher;
    StudentHead student;

    // fixed order: backbone, teacher, student
    std::vector<Var> all_params() const;
};

ModelBundle build_model(const RunConfig& cfg, int num_classes);

struct AdamState {
    std::vector<Tensor> m, v;  // aligned with one parameter group
    int64_t t = 0;
};

// Full training state; round-trips bit-exactly through save/load.
struct Checkpoint {
    RunConfig config;
    std::vector<std::string> class_names;
    int epoch = 0;  // completed epochs
    bool student_trained = false;
    std::vector<Tensor> params;  // values in ModelBundle::all_params() order
    AdamState adam_backbone, adam_teacher, adam_student;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// rebuilds the model from the checkpoint's config and copies parameters in
ModelBundle restore_model(const Checkpoint& ckpt);

} // namespace vdst

#pragma once

#include "vdst/autodiff.hpp"
#include "vdst/pooling.hpp"

#include <cstdint>
#include <vector>

namespace vdst {

// Per-forward stochastic controls. The trainer owns the phase schedule and
// passes the effective rates here; eval mode ignores all of them.
struct ForwardOptions {
    bool train = false;
    double dropout_rate = 0.0;
    double downsample_prob = 0.0;  // teacher only
    Pcg32* dropout_rng = nullptr;
    Pcg32* downsample_rng = nullptr;
};

struct HeadOutput {
    Var features;  // [w,h,D,C]
    Var logits;    // [N]
};

// MLP head: four per-position linear+ReLU layers. No parameter couples
// distinct (x,y,d) positions, which is what isolates the teacher in time.
struct TeacherHead {
    std::vector<Var> mlp_W, mlp_b;
    Var fc_W, fc_b;  // classifier, shared between logits and CAM
    int in_channels = 0, hidden = 0, out_channels = 0, num_classes = 0;

    std::vector<Var> parameters() const;
    int64_t param_count() const;
};

TeacherHead make_teacher_head(int in_channels, int hidden, int out_channels, int num_classes,
                              uint64_t seed);

HeadOutput teacher_forward(const Var& tokens, const TeacherHead& head, const ForwardOptions& opts,
                           const PoolingConfig& cfg);

// M_t[x,y,d,n] = relu(sum_c F_t[x,y,d,c] * fc_W[c,n]); classifier bias excluded
Var teacher_stcam(const Var& F_t, const TeacherHead& head);
Tensor teacher_stcam(const Tensor& F_t, const TeacherHead& head);

// Temporal-convolution head: four kt x 3 x 3 conv+ReLU layers with symmetric
// padding, same pooling/classifier pattern as the teacher.
struct StudentHead {
    std::vector<Var> conv_W, conv_b;
    Var fc_W, fc_b;
    int in_channels = 0, hidden = 0, out_channels = 0, num_classes = 0;
    int temporal_kernel = 3;

    std::vector<Var> parameters() const;
    int64_t param_count() const;
};

StudentHead make_student_head(int in_channels, int hidden, int out_channels, int num_classes,
                              int temporal_kernel, uint64_t seed);

HeadOutput student_forward(const Var& tokens, const StudentHead& head, const ForwardOptions& opts,
                           const PoolingConfig& cfg);

Var student_stcam(const Var& F_s, const StudentHead& head);
Tensor student_stcam(const Tensor& F_s, const StudentHead& head);

} // namespace vdst

#pragma once

#include "vdst/autodiff.hpp"

#include <string>
#include <vector>

namespace vdst {

// Semi-decoupled distillation: both heads are supervised by the same video
// labels; the CAM transfer is gated by the teacher's true-positive channels.
struct DistillConfig {
    enum class GateMode { soft, ones };
    double alpha = 1.0;
    GateMode gate_mode = GateMode::soft;

    void validate() const;
};

std::string to_string(DistillConfig::GateMode m);
DistillConfig::GateMode gate_mode_from_string(const std::string& s);

// per-(frame,class) spatial maximum of a post-ReLU CAM: [w,h,D,N] -> [1,1,D,N]
Tensor slice_prediction(const Tensor& M_t);

// K_tp = P_s ⊗ labels broadcast over frames; zero wherever the label is zero
Tensor tpc_kernel(const Tensor& P_s, const std::vector<uint8_t>& labels);

// gate per gate_mode: soft -> tpc_kernel, ones -> all-ones (TPC ablation)
Tensor make_gate(const Tensor& P_s, const std::vector<uint8_t>& labels, DistillConfig::GateMode mode);

// Eq-1 style loss: mean((gate*(M_s - M_t))^2). M_t and K_tp are plain
// tensors, so the gradient reaches the student CAM only.
Var gated_kd_loss(const Var& M_s, const Tensor& M_t, const Tensor& K_tp);

// Eq-2 style combined loss: L_ml(logits_s, labels) + alpha * kd
Var student_total_loss(const Var& logits_s, const std::vector<uint8_t>& labels, const Var& kd,
                       const DistillConfig& cfg);

} // namespace vdst

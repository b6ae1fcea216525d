#include "vdst/distill.hpp"

#include <cmath>
#include <stdexcept>

namespace vdst {

void DistillConfig::validate() const {
    // alpha = 0 is the KD-disabled ablation hook
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("distill.alpha must be finite and >= 0");
}

std::string to_string(DistillConfig::GateMode m) {
    return m == DistillConfig::GateMode::soft ? "soft" : "ones";
}

DistillConfig::GateMode gate_mode_from_string(const std::string& s) {
    if (s == "soft") return DistillConfig::GateMode::soft;
    if (s == "ones") return DistillConfig::GateMode::ones;
    throw std::invalid_argument("distill.gate_mode: unknown mode '" + s + "'");
}

Tensor slice_prediction(const Tensor& M_t) {
    if (M_t.ndim() != 4) throw DimensionError("slice_prediction: expected [w,h,D,N] CAM");
    int w = M_t.dim(0), h = M_t.dim(1), D = M_t.dim(2), N = M_t.dim(3);
    Tensor out({1, 1, D, N});
    for (int d = 0; d < D; ++d)
        for (int n = 0; n < N; ++n) {
            double m = M_t.at(0, 0, d, n);
            for (int x = 0; x < w; ++x)
                for (int y = 0; y < h; ++y) m = std::max(m, M_t.at(x, y, d, n));
            out.at(0, 0, d, n) = m;
        }
    return out;
}

Tensor tpc_kernel(const Tensor& P_s, const std::vector<uint8_t>& labels) {
    if (P_s.ndim() != 4 || P_s.dim(0) != 1 || P_s.dim(1) != 1)
        throw DimensionError("tpc_kernel: slice prediction must be [1,1,D,N]");
    int D = P_s.dim(2), N = P_s.dim(3);
    if (static_cast<int>(labels.size()) != N)
        throw DimensionError("tpc_kernel: label vector length does not match class count");
    Tensor gate({1, 1, D, N});
    for (int d = 0; d < D; ++d)
        for (int n = 0; n < N; ++n)
            gate.at(0, 0, d, n) = labels[static_cast<size_t>(n)] ? P_s.at(0, 0, d, n) : 0.0;
    return gate;
}

Tensor make_gate(const Tensor& P_s, const std::vector<uint8_t>& labels, DistillConfig::GateMode mode) {
    if (mode == DistillConfig::GateMode::soft) return tpc_kernel(P_s, labels);
    return Tensor::full({1, 1, P_s.dim(2), P_s.dim(3)}, 1.0);
}

Var gated_kd_loss(const Var& M_s, const Tensor& M_t, const Tensor& K_tp) {
    return gated_mse(M_s, M_t, K_tp);
}

Var student_total_loss(const Var& logits_s, const std::vector<uint8_t>& labels, const Var& kd,
                       const DistillConfig& cfg) {
    cfg.validate();
    if (kd->val[0] < 0.0) throw std::invalid_argument("student_total_loss: kd must be non-negative");
    return add_scaled(multilabel_soft_margin(logits_s, labels), kd, cfg.alpha);
}

} // namespace vdst

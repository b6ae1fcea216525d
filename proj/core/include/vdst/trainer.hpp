#pragma once

#include "vdst/checkpoint.hpp"
#include "vdst/metrics.hpp"

#include <stdexcept>
#include <string>

namespace vdst {

enum class EvalVariant { teacher_only, ts_fusion, full };
std::string to_string(EvalVariant v);
EvalVariant eval_variant_from_string(const std::string& s);

struct EpochLog {
    int epoch = 0;
    double l_ml_teacher = 0.0;
    double l_ml_student = 0.0;
    double l_kd = 0.0;
    double video_acc = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::string to_jsonl() const;
};

// Raised when a loss turns non-finite; `dump` carries the diagnostic state.
struct TrainDiverged : std::runtime_error {
    std::string dump;
    TrainDiverged(const std::string& msg, std::string d) : std::runtime_error(msg), dump(std::move(d)) {}
};

struct TrainResult {
    Checkpoint checkpoint;
    TrainLog log;
};

// Two-phase schedule: epochs [0, teacher_only_epochs) train the teacher (and
// the backbone when routed through it); the remaining joint epochs add the
// student with the gated KD loss. Backbone gradients flow only through the
// branch selected by trainer.backbone_mode. `stop_after_epochs` (>=0) ends
// the run early for checkpoint/resume; `resume` continues a saved run.
TrainResult train(const ClipDataset& ds, const RunConfig& cfg, const Checkpoint* resume = nullptr,
                  int stop_after_epochs = -1);

// Eval-mode forward over a labeled dataset. Metrics needing ground truth the
// dataset lacks are reported unavailable, not zero.
MetricsReport evaluate(const Checkpoint& ckpt, const ClipDataset& ds, EvalVariant variant);

} // namespace vdst

#pragma once

#include "vdst/campost.hpp"
#include "vdst/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vdst {

struct MetricsConfig {
    double frame_threshold = 0.5;  // tau for CAM-max frame presence
    double hd_percentile = 100.0;  // 100 -> classical symmetric Hausdorff

    void validate() const;
};

// mask overlap metrics over same-shape boolean tensors (any rank);
// both-empty pairs count as perfect agreement
double mask_iou(const BoolTensor& pred, const BoolTensor& gt);
double mask_dice(const BoolTensor& pred, const BoolTensor& gt);

// symmetric Hausdorff distance between 2-d [W,H] masks in pixels; undefined
// (excluded) when either mask is empty
std::optional<double> hausdorff(const BoolTensor& pred, const BoolTensor& gt,
                                double percentile = 100.0);

// one frame counts as localized when any predicted box overlaps any ground
// truth box with IoU strictly greater than 0.5
bool corloc_hit(const std::vector<Box>& pred_boxes, const std::vector<Box>& gt_boxes);

// video-level: per-class prediction sigmoid(logit) > 0.5, averaged over
// (clips x classes)
double video_accuracy(const std::vector<std::vector<double>>& logits,
                      const std::vector<std::vector<uint8_t>>& labels);

struct ClassReport {
    std::string class_name;
    int64_t frames_evaluated = 0;  // frames with the class present in ground truth
    int64_t hd_evaluated = 0;      // of those, frames where HD was defined
    double iou_percent = 0.0;
    double dice_percent = 0.0;
    double hd_pixels = 0.0;
    double corloc_percent = 0.0;
};

struct MetricsReport {
    int schema_version = 1;
    std::string variant;
    int64_t clips = 0;
    int64_t frames = 0;
    bool segmentation_available = false;
    bool frame_accuracy_available = false;
    std::vector<ClassReport> per_class;
    double mean_iou_percent = 0.0;
    double mean_dice_percent = 0.0;
    double mean_hd_pixels = 0.0;
    double mean_corloc_percent = 0.0;
    double video_accuracy_percent = 0.0;
    double frame_accuracy_percent = 0.0;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    // aligned text table with the usual V-AC / F-AC / IoU / Dice / HD / CorLoc columns
    std::string to_table() const;
};

} // namespace vdst

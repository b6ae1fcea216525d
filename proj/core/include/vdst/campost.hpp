#pragma once

#include "vdst/tensor.hpp"

#include <vector>

namespace vdst {

struct PostConfig {
    double threshold = 0.5;
    int min_area = 1;  // pixels; on patch-upsampled masks one cell is P*P pixels

    void validate() const;
};

// Half-open axis-aligned box: pixels with x0 <= x < x1, y0 <= y < y1.
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int64_t area() const { return static_cast<int64_t>(x1 - x0) * (y1 - y0); }
    bool operator==(const Box&) const = default;
};

double box_iou(const Box& a, const Box& b);

// ReLU then per-class division by the per-clip spatiotemporal max; all-zero
// channels stay zero. Output in [0,1], max exactly 1 where any entry was > 0.
Tensor normalize_cam(const Tensor& M);

// elementwise mean of two normalized CAMs, renormalized per class
Tensor fuse_cams(const Tensor& Mt, const Tensor& Ms);

// strict threshold: mask = cam > threshold; threshold must lie in (0,1)
BoolTensor binarize(const Tensor& cam, double threshold);

// nearest-neighbor block upsampling to pixel resolution; W,H must be
// multiples of the mask's spatial dims
BoolTensor upsample_mask(const BoolTensor& mask, int W, int H);

// connected components (8-connectivity) of a 2-d [W,H] mask -> tight boxes;
// components smaller than min_area pixels are dropped
std::vector<Box> extract_boxes(const BoolTensor& frame_mask, int min_area = 1);

} // namespace vdst

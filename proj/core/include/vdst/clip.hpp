#pragma once

#include "vdst/campost.hpp"
#include "vdst/tensor.hpp"

#include <string>
#include <vector>

namespace vdst {

// A fixed-length frame sequence with a video-level multi-label vector.
// Masks, boxes and per-frame labels are evaluation-only and may be absent.
struct VideoClip {
    Tensor frames;                                   // [W,H,D,ch], pixel values in [0,1]
    std::vector<uint8_t> label;                      // length N, entries 0/1
    std::string clip_id;
    BoolTensor masks;                                // [W,H,D,N] when present
    std::vector<std::vector<uint8_t>> frame_labels;  // D rows of N bits when present
    std::vector<std::vector<std::vector<Box>>> boxes;  // [D][N] boxes when present

    int width() const { return frames.dim(0); }
    int height() const { return frames.dim(1); }
    int num_frames() const { return frames.dim(2); }
    int channels() const { return frames.dim(3); }
    bool has_masks() const { return !masks.empty(); }
    bool has_frame_labels() const { return !frame_labels.empty(); }
};

struct ClassStats {
    int64_t clip_count = 0;
    int64_t frame_count = 0;
    double fpc_percent = 0.0;  // mean over clips containing the class of per-clip presence fraction
    double fpv_percent = 0.0;  // aggregate frames-with-class / frames-of-clips-with-class
};

struct ClipDataset {
    std::vector<VideoClip> clips;
    std::vector<std::string> class_names;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    bool empty() const { return clips.empty(); }
};

} // namespace vdst

#pragma once

#include "vdst/clip.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vdst {

// Synthetic transient-object-presence benchmark: colored shapes enter and
// leave the field of view on contiguous frame intervals.
struct SyntheticConfig {
    int num_classes = 3;
    int clip_length = 8;
    int frame_width = 64;
    int frame_height = 64;
    double fpc_lo = 1.0;  // fraction of frames each object is present
    double fpc_hi = 1.0;
    int objects_min = 1;
    int objects_max = 2;
    enum class Motion { static_pos, random_walk };
    Motion motion = Motion::random_walk;
    bool camera_jitter = false;  // textured background with slow drift
    double noise_std = 0.0;
    uint64_t seed = 0;

    void validate() const;
};

std::string to_string(SyntheticConfig::Motion m);
SyntheticConfig::Motion motion_from_string(const std::string& s);

// Every clip carries per-frame masks and presence labels for evaluation;
// training consumers read only the merged video-level label.
ClipDataset generate_synthetic(const SyntheticConfig& cfg, int count);

// Non-overlapping consecutive windows over a long frame sequence; the
// trailing remainder is dropped, clip labels are the OR over their frames,
// and clips whose merged label is all-zero are excluded.
ClipDataset split_clips(const Tensor& frames, const std::vector<std::vector<uint8_t>>& frame_labels,
                        int clip_len, const std::vector<std::string>& class_names);

struct PresenceStats {
    std::vector<ClassStats> per_class;
    int64_t total_clips = 0;
    int64_t total_frames = 0;

    std::string to_table(const std::vector<std::string>& class_names) const;
};

// requires per-frame labels on every clip
PresenceStats compute_presence_stats(const ClipDataset& ds);

// Directory layout: manifest.json + clips/<id>/{frames/<k>.png, label.txt,
// frame_labels.csv, masks/<k>_<class>.png}. Lossless for 8-bit-quantized
// frames, labels, masks, class names.
void save_dataset(const ClipDataset& ds, const std::string& dir);
ClipDataset load_dataset(const std::string& dir);

} // namespace vdst

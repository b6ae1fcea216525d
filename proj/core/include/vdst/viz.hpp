#pragma once

#include "vdst/clip.hpp"

#include <string>

namespace vdst {

// Writes one PNG per frame: the frame with a red activation overlay from the
// normalized CAM (bilinearly upsampled to pixels) and a green contour of the
// thresholded mask. Returns the number of files written.
int write_overlays(const VideoClip& clip, const Tensor& normalized_cam, int class_index,
                   double threshold, const std::string& out_dir);

} // namespace vdst

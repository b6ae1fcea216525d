#include "vdst/viz.hpp"

#include "vdst/autodiff.hpp"
#include "vdst/campost.hpp"
#include "vdst/image.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;

namespace vdst {

int write_overlays(const VideoClip& clip, const Tensor& normalized_cam, int class_index,
                   double threshold, const std::string& out_dir) {
    if (normalized_cam.ndim() != 4) throw DimensionError("write_overlays: expected [w,h,D,N] CAM");
    int N = normalized_cam.dim(3);
    if (class_index < 0 || class_index >= N)
        throw std::out_of_range("write_overlays: class index out of range");
    int W = clip.width(), H = clip.height(), D = clip.num_frames();
    if (normalized_cam.dim(2) != D) throw DimensionError("write_overlays: CAM frame count mismatch");

    int w = normalized_cam.dim(0), h = normalized_cam.dim(1);
    Tensor cls_cam({w, h, D, 1});
    for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y)
            for (int d = 0; d < D; ++d) cls_cam.at(x, y, d, 0) = normalized_cam.at(x, y, d, class_index);
    Tensor heat = upsample_bilinear(constant(cls_cam), W, H)->val;

    BoolTensor grid_mask = binarize(cls_cam, threshold);
    BoolTensor pix_mask = upsample_mask(grid_mask, W, H);

    fs::create_directories(out_dir);
    int written = 0;
    for (int d = 0; d < D; ++d) {
        ImageU8 img;
        img.width = W;
        img.height = H;
        img.channels = 3;
        img.pixels.resize(static_cast<size_t>(W) * H * 3);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double a = 0.55 * std::clamp(heat.at(x, y, d, 0), 0.0, 1.0);
                double r = clip.frames.at(x, y, d, 0);
                double g = clip.frames.at(x, y, d, clip.channels() == 3 ? 1 : 0);
                double b = clip.frames.at(x, y, d, clip.channels() == 3 ? 2 : 0);
                r = (1 - a) * r + a * 1.0;
                g = (1 - a) * g;
                b = (1 - a) * b;
                bool on = pix_mask.at(x, y, d, 0);
                bool boundary = false;
                if (on) {
                    for (int dx = -1; dx <= 1 && !boundary; ++dx)
                        for (int dy = -1; dy <= 1 && !boundary; ++dy) {
                            int nx = x + dx, ny = y + dy;
                            if (nx < 0 || nx >= W || ny < 0 || ny >= H || !pix_mask.at(nx, ny, d, 0))
                                boundary = true;
                        }
                }
                if (boundary) {
                    r = 0.0;
                    g = 1.0;
                    b = 0.0;
                }
                img.at(x, y, 0) = static_cast<uint8_t>(std::lround(std::clamp(r, 0.0, 1.0) * 255));
                img.at(x, y, 1) = static_cast<uint8_t>(std::lround(std::clamp(g, 0.0, 1.0) * 255));
                img.at(x, y, 2) = static_cast<uint8_t>(std::lround(std::clamp(b, 0.0, 1.0) * 255));
            }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s_class%d_f%04d.png", clip.clip_id.c_str(), class_index, d);
        write_png((fs::path(out_dir) / buf).string(), img);
        ++written;
    }
    return written;
}

} // namespace vdst

#include "vdst/campost.hpp"

#include <algorithm>
#include <stdexcept>

namespace vdst {

void PostConfig::validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::out_of_range("post.threshold must be in (0,1)");
    if (min_area < 1) throw std::out_of_range("post.min_area must be >= 1");
}

double box_iou(const Box& a, const Box& b) {
    int64_t ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    int64_t iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    int64_t inter = ix * iy;
    int64_t uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

Tensor normalize_cam(const Tensor& M) {
    if (M.ndim() != 4) throw DimensionError("normalize_cam: expected [w,h,D,N] CAM");
    int w = M.dim(0), h = M.dim(1), D = M.dim(2), N = M.dim(3);
    Tensor out = M;
    for (double& v : out.v)
        if (v < 0.0) v = 0.0;
    for (int n = 0; n < N; ++n) {
        double mx = 0.0;
        for (int x = 0; x < w; ++x)
            for (int y = 0; y < h; ++y)
                for (int d = 0; d < D; ++d) mx = std::max(mx, out.at(x, y, d, n));
        if (mx > 0.0) {
            for (int x = 0; x < w; ++x)
                for (int y = 0; y < h; ++y)
                    for (int d = 0; d < D; ++d) out.at(x, y, d, n) /= mx;
        }
    }
    return out;
}

Tensor fuse_cams(const Tensor& Mt, const Tensor& Ms) {
    if (!Mt.same_shape(Ms)) throw DimensionError("fuse_cams: CAM shape mismatch");
    Tensor mean = Mt;
    for (int64_t i = 0; i < mean.size(); ++i) mean[i] = 0.5 * (Mt[i] + Ms[i]);
    return normalize_cam(mean);
}

BoolTensor binarize(const Tensor& cam, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::out_of_range("binarize: threshold must be in (0,1)");
    BoolTensor mask(cam.shape);
    for (int64_t i = 0; i < cam.size(); ++i) mask.v[static_cast<size_t>(i)] = cam[i] > threshold ? 1 : 0;
    return mask;
}

BoolTensor upsample_mask(const BoolTensor& mask, int W, int H) {
    if (mask.shape.size() != 4) throw DimensionError("upsample_mask: expected [w,h,D,N] mask");
    int w = mask.dim(0), h = mask.dim(1), D = mask.dim(2), N = mask.dim(3);
    if (W % w != 0 || H % h != 0)
        throw DimensionError("upsample_mask: target " + std::to_string(W) + "x" + std::to_string(H) +
                             " is not a multiple of the mask grid");
    int fx = W / w, fy = H / h;
    BoolTensor out({W, H, D, N});
    for (int X = 0; X < W; ++X)
        for (int Y = 0; Y < H; ++Y) {
            int sx = X / fx, sy = Y / fy;
            for (int d = 0; d < D; ++d)
                for (int n = 0; n < N; ++n) out.at(X, Y, d, n) = mask.at(sx, sy, d, n);
        }
    return out;
}

std::vector<Box> extract_boxes(const BoolTensor& frame_mask, int min_area) {
    if (frame_mask.shape.size() != 2) throw DimensionError("extract_boxes: expected a 2-d [W,H] mask");
    int W = frame_mask.dim(0), H = frame_mask.dim(1);
    std::vector<uint8_t> seen(static_cast<size_t>(W) * H, 0);
    std::vector<Box> boxes;
    std::vector<int> stack;
    for (int x = 0; x < W; ++x)
        for (int y = 0; y < H; ++y) {
            size_t start = static_cast<size_t>(x) * H + y;
            if (!frame_mask.v[start] || seen[start]) continue;
            // flood fill one component
            int minx = x, maxx = x, miny = y, maxy = y;
            int64_t area = 0;
            stack.clear();
            stack.push_back(static_cast<int>(start));
            seen[start] = 1;
            while (!stack.empty()) {
                int idx = stack.back();
                stack.pop_back();
                int cx = idx / H, cy = idx % H;
                ++area;
                minx = std::min(minx, cx);
                maxx = std::max(maxx, cx);
                miny = std::min(miny, cy);
                maxy = std::max(maxy, cy);
                for (int dx = -1; dx <= 1; ++dx)
                    for (int dy = -1; dy <= 1; ++dy) {
                        if (dx == 0 && dy == 0) continue;
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || nx >= W || ny < 0 || ny >= H) continue;
                        size_t ni = static_cast<size_t>(nx) * H + ny;
                        if (frame_mask.v[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            stack.push_back(static_cast<int>(ni));
                        }
                    }
            }
            if (area >= min_area) boxes.push_back(Box{minx, miny, maxx + 1, maxy + 1});
        }
    return boxes;
}

} // namespace vdst

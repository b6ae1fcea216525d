#include "vdst/encoder.hpp"

#include "vdst/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace vdst {

namespace {

// Patch rows are ordered like the token grid flattening ((px*h + py)*D + d);
// grayscale input is replicated to three channels so one projection matrix
// serves both input kinds.
Tensor patchify(const Tensor& frames, int P) {
    int W = frames.dim(0), H = frames.dim(1), D = frames.dim(2), ch = frames.dim(3);
    int w = W / P, h = H / P;
    Tensor col({w * h * D, P * P * 3});
    for (int px = 0; px < w; ++px)
        for (int py = 0; py < h; ++py)
            for (int d = 0; d < D; ++d) {
                double* row = col.data() + static_cast<int64_t>((px * h + py) * D + d) * (P * P * 3);
                for (int dx = 0; dx < P; ++dx)
                    for (int dy = 0; dy < P; ++dy)
                        for (int c = 0; c < 3; ++c)
                            *row++ = frames.at(px * P + dx, py * P + dy, d, ch == 1 ? 0 : c);
            }
    return col;
}

class ToyBackbone final : public Backbone {
public:
    ToyBackbone(int patch_size, int embed_dim, int depth, uint64_t seed)
        : patch_size_(patch_size), embed_dim_(embed_dim), depth_(depth) {
        if (patch_size < 1) throw std::invalid_argument("make_toy_backbone: patch_size must be >= 1");
        if (embed_dim < 1) throw std::invalid_argument("make_toy_backbone: embed_dim must be >= 1");
        if (depth < 0) throw std::invalid_argument("make_toy_backbone: depth must be >= 0");
        Pcg32 rng = make_stream(seed, RngStream::backbone_init);
        int pin = patch_size * patch_size * 3;
        proj_W_ = make_param(xavier_uniform(pin, embed_dim, {pin, embed_dim}, rng));
        proj_b_ = make_param(Tensor({embed_dim}));
        for (int l = 0; l < depth; ++l) {
            mix_W1_.push_back(make_param(xavier_uniform(embed_dim, embed_dim, {embed_dim, embed_dim}, rng)));
            mix_W2_.push_back(make_param(xavier_uniform(embed_dim, embed_dim, {embed_dim, embed_dim}, rng)));
            mix_b_.push_back(make_param(Tensor({embed_dim})));
        }
    }

    int patch_size() const override { return patch_size_; }
    int embed_dim() const override { return embed_dim_; }

    Var encode_var(const Tensor& frames) const override {
        if (frames.ndim() != 4) throw DimensionError("encode: frames must be [W,H,D,ch]");
        int W = frames.dim(0), H = frames.dim(1), D = frames.dim(2), ch = frames.dim(3);
        if (W % patch_size_ != 0 || H % patch_size_ != 0)
            throw DimensionError("encode: frame size " + std::to_string(W) + "x" + std::to_string(H) +
                                 " not divisible by patch size " + std::to_string(patch_size_));
        if (D < 1) throw DimensionError("encode: clip must contain at least one frame");
        if (ch != 1 && ch != 3) throw DimensionError("encode: expected 1 or 3 channels");
        int w = W / patch_size_, h = H / patch_size_;

        Var x = linear(constant(patchify(frames, patch_size_)), proj_W_, proj_b_);
        x = reshape(x, {w, h, D, embed_dim_});
        for (int l = 0; l < depth_; ++l) {
            // mix each patch with the mean of its own frame's patches
            Var ctx = broadcast_spatial(linear(spatial_mean(x), mix_W2_[l], mix_b_[l]), w, h);
            x = add(x, relu(add(linear(x, mix_W1_[l], nullptr), ctx)));
        }
        return x;
    }

    std::vector<Var> parameters() const override {
        std::vector<Var> ps{proj_W_, proj_b_};
        for (int l = 0; l < depth_; ++l) {
            ps.push_back(mix_W1_[l]);
            ps.push_back(mix_W2_[l]);
            ps.push_back(mix_b_[l]);
        }
        return ps;
    }

private:
    int patch_size_, embed_dim_, depth_;
    Var proj_W_, proj_b_;
    std::vector<Var> mix_W1_, mix_W2_, mix_b_;
};

} // namespace

BackboneHandle make_toy_backbone(int patch_size, int embed_dim, int depth, uint64_t seed) {
    return std::make_shared<ToyBackbone>(patch_size, embed_dim, depth, seed);
}

TokenGrid encode(const VideoClip& clip, const Backbone& backbone) {
    try {
        Var tokens = backbone.encode_var(clip.frames);
        if (!tokens->val.all_finite())
            throw std::runtime_error("backbone produced non-finite token embeddings");
        return TokenGrid{tokens->val, backbone.patch_size()};
    } catch (const DimensionError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("encode(clip '" + clip.clip_id + "'): " + e.what());
    }
}

} // namespace vdst

#pragma once

#include "vdst/autodiff.hpp"
#include "vdst/clip.hpp"

#include <memory>

namespace vdst {

// Per-frame patch embeddings with strict temporal correspondence.
struct TokenGrid {
    Tensor tokens;  // [w,h,D,C_e]
    int patch_size = 0;

    int grid_w() const { return tokens.dim(0); }
    int grid_h() const { return tokens.dim(1); }
    int num_frames() const { return tokens.dim(2); }
    int embed_dim() const { return tokens.dim(3); }
};

// Pluggable per-frame patch embedder. Implementations must process frames
// independently: no parameter may couple values across distinct frames.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual int patch_size() const = 0;
    virtual int embed_dim() const = 0;
    // Builds the autodiff graph from raw frames [W,H,D,ch].
    virtual Var encode_var(const Tensor& frames) const = 0;
    virtual std::vector<Var> parameters() const = 0;
};

using BackboneHandle = std::shared_ptr<Backbone>;

// Small trainable stand-in for a pretrained ViT: patchify + linear projection
// + `depth` nonlinear mixing layers over the patches of one frame.
// Deterministically initialized from seed.
BackboneHandle make_toy_backbone(int patch_size, int embed_dim, int depth, uint64_t seed);

// Eval-path encode with invariant checks; frames are processed independently.
TokenGrid encode(const VideoClip& clip, const Backbone& backbone);

} // namespace vdst

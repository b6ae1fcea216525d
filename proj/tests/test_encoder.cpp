#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vdst/encoder.hpp"
#include "vdst/rng.hpp"

#include "test_util.hpp"

using namespace vdst;
using vdst::testutil::random_tensor;

namespace {

VideoClip make_clip(int W, int H, int D, int ch, Pcg32& rng) {
    VideoClip clip;
    clip.frames = random_tensor({W, H, D, ch}, rng, 0.0, 1.0);
    clip.label = {1};
    clip.clip_id = "test";
    return clip;
}

} // namespace

TEST_CASE("token grid shape follows W/P, H/P, D") {
    Pcg32 rng(1, 0);
    {
        auto bb = make_toy_backbone(16, 8, 1, 0);
        VideoClip clip = make_clip(256, 256, 8, 3, rng);
        TokenGrid grid = encode(clip, *bb);
        CHECK(grid.tokens.shape == std::vector<int>{16, 16, 8, 8});
        CHECK(grid.patch_size == 16);
    }
    {
        auto bb = make_toy_backbone(8, 64, 2, 0);
        VideoClip clip = make_clip(64, 64, 16, 3, rng);
        TokenGrid grid = encode(clip, *bb);
        CHECK(grid.tokens.shape == std::vector<int>{8, 8, 16, 64});
    }
    {
        // output shape for 64x64x4 input with P=8, C_e=64
        auto bb = make_toy_backbone(8, 64, 2, 7);
        VideoClip clip = make_clip(64, 64, 4, 3, rng);
        CHECK(encode(clip, *bb).tokens.shape == std::vector<int>{8, 8, 4, 64});
    }
}

TEST_CASE("same seed twice gives byte-identical parameters") {
    auto a = make_toy_backbone(8, 32, 2, 42);
    auto b = make_toy_backbone(8, 32, 2, 42);
    auto pa = a->parameters(), pb = b->parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->val.size() == pb[i]->val.size());
        for (int64_t j = 0; j < pa[i]->val.size(); ++j) CHECK(pa[i]->val[j] == pb[i]->val[j]);
    }
    auto c = make_toy_backbone(8, 32, 2, 43);
    bool any_diff = false;
    auto pc = c->parameters();
    for (int64_t j = 0; j < pa[0]->val.size(); ++j) any_diff = any_diff || pa[0]->val[j] != pc[0]->val[j];
    CHECK(any_diff);
}

TEST_CASE("depth=0 is a pure (affine) patch projection") {
    Pcg32 rng(2, 0);
    auto bb = make_toy_backbone(4, 16, 0, 5);
    Tensor a = random_tensor({8, 8, 2, 3}, rng, 0.0, 1.0);
    Tensor b = random_tensor({8, 8, 2, 3}, rng, 0.0, 1.0);
    Tensor zero({8, 8, 2, 3});
    Tensor sum = a;
    for (int64_t i = 0; i < sum.size(); ++i) sum[i] += b[i];
    Tensor ta = bb->encode_var(a)->val, tb = bb->encode_var(b)->val;
    Tensor t0 = bb->encode_var(zero)->val, tsum = bb->encode_var(sum)->val;
    for (int64_t i = 0; i < ta.size(); ++i)
        CHECK(tsum[i] == doctest::Approx(ta[i] + tb[i] - t0[i]).epsilon(1e-12));
}

TEST_CASE("frame permutation permutes the token grid identically") {
    Pcg32 rng(3, 0);
    auto bb = make_toy_backbone(8, 24, 1, 9);
    VideoClip clip = make_clip(32, 32, 5, 3, rng);
    std::vector<int> perm{4, 2, 0, 3, 1};
    VideoClip permuted = clip;
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y)
            for (int d = 0; d < 5; ++d)
                for (int c = 0; c < 3; ++c)
                    permuted.frames.at(x, y, d, c) = clip.frames.at(x, y, perm[static_cast<size_t>(d)], c);
    Tensor base = encode(clip, *bb).tokens;
    Tensor got = encode(permuted, *bb).tokens;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int d = 0; d < 5; ++d)
                for (int c = 0; c < 24; ++c)
                    CHECK(got.at(x, y, d, c) == base.at(x, y, perm[static_cast<size_t>(d)], c));
}

TEST_CASE("per-frame isolation: replacing frame i changes only tokens[:,:,i,:]") {
    Pcg32 rng(4, 0);
    auto bb = make_toy_backbone(8, 16, 2, 1);
    VideoClip clip = make_clip(32, 32, 4, 3, rng);
    VideoClip mod = clip;
    int target = 2;
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y)
            for (int c = 0; c < 3; ++c) mod.frames.at(x, y, target, c) = rng.uniform(0.0, 1.0);
    Tensor base = encode(clip, *bb).tokens;
    Tensor got = encode(mod, *bb).tokens;
    bool changed_target = false;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int d = 0; d < 4; ++d)
                for (int c = 0; c < 16; ++c) {
                    if (d == target) {
                        changed_target = changed_target || got.at(x, y, d, c) != base.at(x, y, d, c);
                    } else {
                        CHECK(got.at(x, y, d, c) == base.at(x, y, d, c));
                    }
                }
    CHECK(changed_target);
}

TEST_CASE("encode is bit-deterministic and accepts grayscale") {
    Pcg32 rng(5, 0);
    auto bb = make_toy_backbone(8, 16, 1, 3);
    VideoClip clip = make_clip(32, 32, 3, 1, rng);
    Tensor a = encode(clip, *bb).tokens;
    Tensor b = encode(clip, *bb).tokens;
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    // grayscale equals RGB with replicated channels
    VideoClip rgb;
    rgb.frames = Tensor({32, 32, 3, 3});
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y)
            for (int d = 0; d < 3; ++d)
                for (int c = 0; c < 3; ++c) rgb.frames.at(x, y, d, c) = clip.frames.at(x, y, d, 0);
    rgb.label = {1};
    rgb.clip_id = "rgb";
    Tensor c = encode(rgb, *bb).tokens;
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("dimension errors carry context") {
    Pcg32 rng(6, 0);
    auto bb = make_toy_backbone(16, 8, 0, 0);
    VideoClip clip = make_clip(40, 64, 2, 3, rng);  // 40 not divisible by 16
    CHECK_THROWS_AS(encode(clip, *bb), DimensionError);
    CHECK_THROWS_AS(make_toy_backbone(0, 8, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_toy_backbone(8, 0, 0, 0), std::invalid_argument);
}

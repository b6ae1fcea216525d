#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vdst/heads.hpp"

#include "test_util.hpp"

using namespace vdst;
using vdst::testutil::random_tensor;

namespace {
PoolingConfig topk_cfg(double k1 = 0.25, double k2 = 0.5) {
    PoolingConfig cfg;
    cfg.k1_fraction = k1;
    cfg.k2_fraction = k2;
    return cfg;
}
} // namespace

TEST_CASE("eval forward is bit-deterministic") {
    Pcg32 rng(10, 0);
    TeacherHead head = make_teacher_head(12, 16, 8, 3, 1);
    Var tokens = constant(random_tensor({4, 4, 5, 12}, rng));
    ForwardOptions opts;
    HeadOutput a = teacher_forward(tokens, head, opts, topk_cfg());
    HeadOutput b = teacher_forward(tokens, head, opts, topk_cfg());
    for (int64_t i = 0; i < a.features->val.size(); ++i)
        CHECK(a.features->val[i] == b.features->val[i]);
    for (int64_t i = 0; i < a.logits->val.size(); ++i) CHECK(a.logits->val[i] == b.logits->val[i]);
}

TEST_CASE("downsample_prob=0 in train mode leaves eval values intact") {
    Pcg32 rng(11, 0);
    TeacherHead head = make_teacher_head(12, 16, 8, 3, 2);
    Var tokens = constant(random_tensor({8, 8, 4, 12}, rng));
    ForwardOptions train_opts;
    train_opts.train = true;
    train_opts.dropout_rate = 0.0;
    train_opts.downsample_prob = 0.0;
    Pcg32 r1(1, 1), r2(2, 2);
    train_opts.dropout_rng = &r1;
    train_opts.downsample_rng = &r2;
    HeadOutput tr = teacher_forward(tokens, head, train_opts, topk_cfg());
    HeadOutput ev = teacher_forward(tokens, head, ForwardOptions{}, topk_cfg());
    CHECK(tr.features->val.shape == std::vector<int>{8, 8, 4, 8});
    for (int64_t i = 0; i < tr.features->val.size(); ++i)
        CHECK(tr.features->val[i] == ev.features->val[i]);
}

TEST_CASE("downsampling halves and interpolates back to the token grid") {
    Pcg32 rng(12, 0);
    TeacherHead head = make_teacher_head(6, 8, 8, 2, 3);
    Var tokens = constant(random_tensor({8, 8, 3, 6}, rng));
    ForwardOptions opts;
    opts.train = true;
    opts.downsample_prob = 1.0;  // forced on every layer until the size guard
    Pcg32 r1(1, 1), r2(2, 2);
    opts.dropout_rng = &r1;
    opts.downsample_rng = &r2;
    HeadOutput out = teacher_forward(tokens, head, opts, topk_cfg());
    // shape contract holds regardless of internal halving
    CHECK(out.features->val.shape == std::vector<int>{8, 8, 3, 8});
    HeadOutput ev = teacher_forward(tokens, head, ForwardOptions{}, topk_cfg());
    bool differs = false;
    for (int64_t i = 0; i < out.features->val.size(); ++i)
        differs = differs || out.features->val[i] != ev.features->val[i];
    CHECK(differs);
}

TEST_CASE("constant tokens propagate to a constant feature volume") {
    TeacherHead head = make_teacher_head(5, 7, 6, 2, 4);
    Tensor tokens({3, 4, 2, 5});
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 4; ++y)
            for (int d = 0; d < 2; ++d)
                for (int c = 0; c < 5; ++c) tokens.at(x, y, d, c) = 0.1 * (c + 1);
    for (double k : {0.25, 0.5, 1.0}) {
        HeadOutput out = teacher_forward(constant(tokens), head, ForwardOptions{}, topk_cfg(k, k));
        const Tensor& F = out.features->val;
        for (int c = 0; c < 6; ++c) {
            double ref = F.at(0, 0, 0, c);
            for (int x = 0; x < 3; ++x)
                for (int y = 0; y < 4; ++y)
                    for (int d = 0; d < 2; ++d) CHECK(F.at(x, y, d, c) == doctest::Approx(ref));
            // pooled feature equals the per-channel constant for any k
            Tensor pooled = pool(F, topk_cfg(k, k));
            CHECK(pooled.at(0, 0, 0, c) == doctest::Approx(ref));
        }
    }
}

TEST_CASE("stcam: zero features, identity projection, dense-loop oracle") {
    TeacherHead head = make_teacher_head(4, 6, 3, 1, 5);
    Tensor zeroF({2, 2, 2, 3});
    Tensor cam = teacher_stcam(zeroF, head);
    for (double v : cam.v) CHECK(v == 0.0);

    // N=1 with a unit weight on channel 0
    head.fc_W->val = Tensor({3, 1});
    head.fc_W->val.at2(0, 0) = 1.0;
    Pcg32 rng(13, 0);
    Tensor F = random_tensor({2, 2, 2, 3}, rng);
    cam = teacher_stcam(F, head);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int d = 0; d < 2; ++d)
                CHECK(cam.at(x, y, d, 0) == doctest::Approx(std::max(0.0, F.at(x, y, d, 0))));

    // random projection vs dense loop oracle
    TeacherHead head2 = make_teacher_head(4, 6, 3, 2, 6);
    Tensor F2 = random_tensor({2, 2, 2, 3}, rng);
    Tensor cam2 = teacher_stcam(F2, head2);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int d = 0; d < 2; ++d)
                for (int n = 0; n < 2; ++n) {
                    double s = 0.0;
                    for (int c = 0; c < 3; ++c) s += F2.at(x, y, d, c) * head2.fc_W->val.at2(c, n);
                    CHECK(cam2.at(x, y, d, n) == doctest::Approx(std::max(0.0, s)).epsilon(1e-6));
                }
}

TEST_CASE("temporal isolation: frame permutation permutes CAM and fixes logits") {
    Pcg32 rng(14, 0);
    TeacherHead head = make_teacher_head(8, 12, 10, 3, 7);
    Tensor tokens = random_tensor({4, 4, 6, 8}, rng);
    std::vector<int> perm{5, 3, 1, 0, 4, 2};
    Tensor permuted({4, 4, 6, 8});
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int d = 0; d < 6; ++d)
                for (int c = 0; c < 8; ++c)
                    permuted.at(x, y, d, c) = tokens.at(x, y, perm[static_cast<size_t>(d)], c);

    HeadOutput base = teacher_forward(constant(tokens), head, ForwardOptions{}, topk_cfg());
    HeadOutput got = teacher_forward(constant(permuted), head, ForwardOptions{}, topk_cfg());
    Tensor cam_base = teacher_stcam(base.features->val, head);
    Tensor cam_got = teacher_stcam(got.features->val, head);
    for (int n = 0; n < 3; ++n) CHECK(got.logits->val[n] == base.logits->val[n]);  // exact
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int d = 0; d < 6; ++d)
                for (int n = 0; n < 3; ++n)
                    CHECK(cam_got.at(x, y, d, n) == cam_base.at(x, y, perm[static_cast<size_t>(d)], n));
}

TEST_CASE("frame locality: modifying frame i moves the CAM only at index i") {
    Pcg32 rng(15, 0);
    TeacherHead head = make_teacher_head(8, 12, 10, 2, 8);
    Tensor tokens = random_tensor({4, 4, 5, 8}, rng);
    Tensor mod = tokens;
    int target = 3;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int c = 0; c < 8; ++c) mod.at(x, y, target, c) = rng.uniform(-1.0, 1.0);
    Tensor cam_base = teacher_stcam(
        teacher_forward(constant(tokens), head, ForwardOptions{}, topk_cfg()).features->val, head);
    Tensor cam_mod = teacher_stcam(
        teacher_forward(constant(mod), head, ForwardOptions{}, topk_cfg()).features->val, head);
    bool changed = false;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int d = 0; d < 5; ++d)
                for (int n = 0; n < 2; ++n) {
                    if (d == target)
                        changed = changed || cam_mod.at(x, y, d, n) != cam_base.at(x, y, d, n);
                    else
                        CHECK(cam_mod.at(x, y, d, n) == cam_base.at(x, y, d, n));
                }
    CHECK(changed);
}

TEST_CASE("clip logits are reproducible by pooling then projecting the features") {
    Pcg32 rng(16, 0);
    TeacherHead head = make_teacher_head(8, 12, 10, 3, 9);
    Tensor tokens = random_tensor({4, 4, 6, 8}, rng);
    PoolingConfig cfg = topk_cfg(0.3, 0.4);
    HeadOutput out = teacher_forward(constant(tokens), head, ForwardOptions{}, cfg);
    Tensor pooled = pool(out.features->val, cfg);
    for (int n = 0; n < 3; ++n) {
        double s = head.fc_b->val[n];
        for (int c = 0; c < 10; ++c) s += pooled.at(0, 0, 0, c) * head.fc_W->val.at2(c, n);
        CHECK(out.logits->val[n] == doctest::Approx(s).epsilon(1e-12));
    }
}

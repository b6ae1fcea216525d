// Micro-benchmarks for the hot paths: GEMM kernels, ranked pooling, the
// student's 3-d convolution, and a full train step on one synthetic clip.

#include "vdst/checkpoint.hpp"
#include "vdst/dataio.hpp"
#include "vdst/distill.hpp"
#include "vdst/heads.hpp"
#include "vdst/pooling.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace vdst;

namespace {

struct Bench {
    std::string name;
    std::function<void()> fn;
    double flops_per_iter = 0.0;
};

std::vector<Bench>& registry() {
    static std::vector<Bench> r;
    return r;
}

void run_all(const std::string& filter) {
    std::printf("%-32s %12s %12s %10s\n", "benchmark", "iters", "ms/iter", "GFLOP/s");
    for (Bench& b : registry()) {
        if (!filter.empty() && b.name.find(filter) == std::string::npos) continue;
        b.fn();  // warm up
        int iters = 1;
        double elapsed = 0.0;
        while (true) {
            auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < iters; ++i) b.fn();
            elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (elapsed > 0.5 || iters > (1 << 20)) break;
            iters *= 2;
        }
        double ms = 1e3 * elapsed / iters;
        if (b.flops_per_iter > 0.0)
            std::printf("%-32s %12d %12.3f %10.2f\n", b.name.c_str(), iters, ms,
                        b.flops_per_iter * iters / elapsed / 1e9);
        else
            std::printf("%-32s %12d %12.3f %10s\n", b.name.c_str(), iters, ms, "-");
    }
}

Tensor random_tensor(std::vector<int> shape, Pcg32& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
    return t;
}

} // namespace

int main(int argc, char** argv) {
    std::string filter = argc > 1 ? argv[1] : "";
    Pcg32 rng(1234, 0);

    // GEMM shapes that dominate a student conv layer at desk scale
    {
        int M = 512, K = 1296, N = 48;
        auto A = std::make_shared<Tensor>(random_tensor({M, K}, rng));
        auto B = std::make_shared<Tensor>(random_tensor({K, N}, rng));
        auto C = std::make_shared<Tensor>(Tensor({M, N}));
        registry().push_back({"gemm_nn 512x1296x48",
                              [=] { gemm_nn(M, N, K, A->data(), B->data(), C->data(), false); },
                              2.0 * M * N * K});
        auto Bt = std::make_shared<Tensor>(random_tensor({N, K}, rng));
        registry().push_back({"gemm_nt 512x1296x48",
                              [=] { gemm_nt(M, K, N, C->data(), B->data(), A->data(), false); },
                              2.0 * M * N * K});
    }

    // ranked top-k pooling on a paper-scale token volume
    {
        auto F = std::make_shared<Tensor>(random_tensor({16, 16, 30, 256}, rng));
        PoolingConfig cfg;
        registry().push_back({"ranked_topk_pool 16x16x30x256", [=] { Tensor out = pool(*F, cfg); }});
    }

    // one student conv layer, forward + backward
    {
        auto head = std::make_shared<StudentHead>(make_student_head(24, 48, 48, 3, 3, 7));
        auto tokens = std::make_shared<Tensor>(random_tensor({8, 8, 8, 24}, rng));
        registry().push_back({"student conv stack fwd 8x8x8",
                              [=] {
                                  Var x = constant(*tokens);
                                  for (size_t l = 0; l < head->conv_W.size(); ++l)
                                      x = relu(conv3d(x, head->conv_W[l], head->conv_b[l], 3, 3));
                              }});
    }

    // full train step (teacher + student + KD) on one clip
    {
        SyntheticConfig scfg;
        scfg.num_classes = 3;
        scfg.clip_length = 8;
        scfg.frame_width = 64;
        scfg.frame_height = 64;
        scfg.noise_std = 0.1;
        scfg.seed = 3;
        auto ds = std::make_shared<ClipDataset>(generate_synthetic(scfg, 1));
        RunConfig cfg = parse_run_config(R"({
            "encoder": {"patch_size": 8, "embed_dim": 24, "depth": 1},
            "teacher": {"hidden_width": 48, "out_channels": 48},
            "student": {"hidden_width": 48, "out_channels": 48}})");
        auto model = std::make_shared<ModelBundle>(build_model(cfg, 3));
        auto pool_cfg = cfg.pooling;
        auto distill_cfg = cfg.distill;
        registry().push_back({"train step 64x64x8 clip", [=] {
            const VideoClip& clip = ds->clips[0];
            Pcg32 rng_ds(1, 1), rng_do(2, 2), rng_sdo(3, 3);
            Var tokens = model->backbone->encode_var(clip.frames);
            ForwardOptions topts;
            topts.train = true;
            topts.downsample_prob = 0.5;
            topts.dropout_rng = &rng_do;
            topts.downsample_rng = &rng_ds;
            HeadOutput t = teacher_forward(tokens, model->teacher, topts, pool_cfg);
            ForwardOptions sopts;
            sopts.train = true;
            sopts.dropout_rate = 0.5;
            sopts.dropout_rng = &rng_sdo;
            HeadOutput s = student_forward(detach(tokens), model->student, sopts, pool_cfg);
            Tensor Mt = teacher_stcam(t.features->val, model->teacher);
            Tensor gate = make_gate(slice_prediction(Mt), clip.label, distill_cfg.gate_mode);
            Var kd = gated_kd_loss(student_stcam(s.features, model->student), Mt, gate);
            Var total = add(multilabel_soft_margin(t.logits, clip.label),
                            student_total_loss(s.logits, clip.label, kd, distill_cfg));
            for (const Var& p : model->all_params()) p->zero_grad();
            backward(total);
        }});
    }

    run_all(filter);
    return 0;
}

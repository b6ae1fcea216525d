#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vdst/dataio.hpp"
#include "vdst/trainer.hpp"

#include <cmath>
#include <filesystem>

namespace fs = std::filesystem;
using namespace vdst;

namespace {

RunConfig tiny_config() {
    RunConfig cfg = parse_run_config(R"({
        "encoder": {"patch_size": 8, "embed_dim": 6, "depth": 1},
        "teacher": {"hidden_width": 6, "out_channels": 6},
        "student": {"hidden_width": 6, "out_channels": 6},
        "pooling": {"k1_fraction": 0.5, "k2_fraction": 0.5},
        "trainer": {"lr": 0.003, "teacher_only_epochs": 2, "joint_epochs": 3,
                     "batch_size": 3, "seed": 17}
    })");
    return cfg;
}

ClipDataset tiny_dataset(uint64_t seed = 2, int count = 6) {
    SyntheticConfig scfg;
    scfg.num_classes = 2;
    scfg.clip_length = 4;
    scfg.frame_width = 16;
    scfg.frame_height = 16;
    scfg.fpc_lo = 0.5;
    scfg.fpc_hi = 1.0;
    scfg.objects_min = 1;
    scfg.objects_max = 1;
    scfg.noise_std = 0.01;
    scfg.seed = seed;
    return generate_synthetic(scfg, count);
}

bool params_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].shape != b[i].shape) return false;
        for (int64_t j = 0; j < a[i].size(); ++j)
            if (a[i][j] != b[i][j]) return false;
    }
    return true;
}

std::vector<Tensor> backbone_params(const Checkpoint& ckpt) {
    ModelBundle fresh = build_model(ckpt.config, static_cast<int>(ckpt.class_names.size()));
    size_t n_backbone = fresh.backbone->parameters().size();
    return {ckpt.params.begin(), ckpt.params.begin() + static_cast<long>(n_backbone)};
}

std::vector<Tensor> student_params(const Checkpoint& ckpt) {
    ModelBundle fresh = build_model(ckpt.config, static_cast<int>(ckpt.class_names.size()));
    size_t n_backbone = fresh.backbone->parameters().size();
    size_t n_teacher = fresh.teacher.parameters().size();
    return {ckpt.params.begin() + static_cast<long>(n_backbone + n_teacher), ckpt.params.end()};
}

} // namespace

TEST_CASE("joint_epochs=0 leaves the student at its initialization") {
    RunConfig cfg = tiny_config();
    cfg.trainer.teacher_only_epochs = 3;
    cfg.trainer.joint_epochs = 0;
    ClipDataset ds = tiny_dataset();
    TrainResult res = train(ds, cfg);
    CHECK_FALSE(res.checkpoint.student_trained);

    ModelBundle fresh = build_model(cfg, ds.num_classes());
    std::vector<Tensor> init_student;
    for (const Var& p : fresh.student.parameters()) init_student.push_back(p->val);
    CHECK(params_equal(student_params(res.checkpoint), init_student));
}

TEST_CASE("frozen backbone is bit-identical after training") {
    RunConfig cfg = tiny_config();
    cfg.trainer.backbone_mode = BackboneMode::frozen;
    ClipDataset ds = tiny_dataset();
    TrainResult res = train(ds, cfg);
    ModelBundle fresh = build_model(cfg, ds.num_classes());
    std::vector<Tensor> init_backbone;
    for (const Var& p : fresh.backbone->parameters()) init_backbone.push_back(p->val);
    CHECK(params_equal(backbone_params(res.checkpoint), init_backbone));
    // while the teacher did move
    ModelBundle restored = restore_model(res.checkpoint);
    bool teacher_moved = false;
    auto fresh_t = fresh.teacher.parameters();
    auto rest_t = restored.teacher.parameters();
    for (size_t i = 0; i < fresh_t.size() && !teacher_moved; ++i)
        for (int64_t j = 0; j < fresh_t[i]->val.size() && !teacher_moved; ++j)
            teacher_moved = fresh_t[i]->val[j] != rest_t[i]->val[j];
    CHECK(teacher_moved);
}

TEST_CASE("same seed and config reproduce identical logs and parameters") {
    RunConfig cfg = tiny_config();
    ClipDataset ds = tiny_dataset();
    TrainResult a = train(ds, cfg);
    TrainResult b = train(ds, cfg);
    CHECK(a.log.to_jsonl() == b.log.to_jsonl());
    CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));

    RunConfig other = cfg;
    other.trainer.seed = 18;
    TrainResult c = train(ds, other);
    CHECK_FALSE(params_equal(a.checkpoint.params, c.checkpoint.params));
}

TEST_CASE("checkpoint save/load/resume reproduces an uninterrupted run bit-exactly") {
    RunConfig cfg = tiny_config();
    ClipDataset ds = tiny_dataset();

    TrainResult full = train(ds, cfg);  // 5 epochs

    TrainResult part = train(ds, cfg, nullptr, 3);
    CHECK(part.checkpoint.epoch == 3);
    fs::path path = fs::temp_directory_path() / "vdst_test_resume.ckpt";
    save_checkpoint(part.checkpoint, path.string());
    Checkpoint loaded = load_checkpoint(path.string());
    CHECK(params_equal(loaded.params, part.checkpoint.params));
    CHECK(loaded.epoch == 3);

    TrainResult resumed = train(ds, cfg, &loaded);
    CHECK(resumed.checkpoint.epoch == 5);
    CHECK(params_equal(resumed.checkpoint.params, full.checkpoint.params));
    fs::remove(path);
}

TEST_CASE("phase-2 backbone trajectory matches a run with the student loss removed") {
    RunConfig cfg = tiny_config();
    cfg.trainer.backbone_mode = BackboneMode::refine_by_teacher;
    ClipDataset ds = tiny_dataset();

    RunConfig ablated = cfg;
    ablated.trainer.train_student = false;

    for (int stop : {3, 5}) {
        TrainResult with_student = train(ds, cfg, nullptr, stop);
        TrainResult without_student = train(ds, ablated, nullptr, stop);
        CHECK(params_equal(backbone_params(with_student.checkpoint),
                           backbone_params(without_student.checkpoint)));
    }
    // and the student itself differs between the two runs after phase 2
    TrainResult ws = train(ds, cfg);
    TrainResult wos = train(ds, ablated);
    CHECK_FALSE(params_equal(student_params(ws.checkpoint), student_params(wos.checkpoint)));
}

TEST_CASE("training rejects invalid datasets and configs") {
    RunConfig cfg = tiny_config();
    ClipDataset empty;
    empty.class_names = {"a", "b"};
    CHECK_THROWS_AS(train(empty, cfg), std::invalid_argument);

    ClipDataset ds = tiny_dataset();
    ClipDataset bad = ds;
    bad.clips[0].label = {0, 0};
    CHECK_THROWS_AS(train(bad, cfg), std::invalid_argument);

    RunConfig inconsistent = cfg;
    inconsistent.trainer.train_teacher = false;  // teacher_only_epochs still > 0
    CHECK_THROWS_AS(train(ds, inconsistent), std::invalid_argument);
}

TEST_CASE("a non-finite loss aborts with a diagnostic dump") {
    RunConfig cfg = tiny_config();
    ClipDataset ds = tiny_dataset();
    ds.clips[2].frames[0] = std::nan("");
    try {
        train(ds, cfg);
        FAIL("expected TrainDiverged");
    } catch (const TrainDiverged& e) {
        CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
        CHECK(e.dump.find("clip=") != std::string::npos);
        CHECK(e.dump.find("|teacher|=") != std::string::npos);
    }
}

TEST_CASE("evaluate: empty dataset errors, missing ground truth is unavailable") {
    RunConfig cfg = tiny_config();
    cfg.trainer.teacher_only_epochs = 1;
    cfg.trainer.joint_epochs = 1;
    ClipDataset ds = tiny_dataset();
    TrainResult res = train(ds, cfg);

    ClipDataset empty;
    empty.class_names = ds.class_names;
    CHECK_THROWS_AS(evaluate(res.checkpoint, empty, EvalVariant::full), std::invalid_argument);

    ClipDataset no_gt = ds;
    for (VideoClip& clip : no_gt.clips) {
        clip.masks = BoolTensor{};
        clip.frame_labels.clear();
    }
    MetricsReport rep = evaluate(res.checkpoint, no_gt, EvalVariant::full);
    CHECK_FALSE(rep.segmentation_available);
    CHECK_FALSE(rep.frame_accuracy_available);
    CHECK(rep.video_accuracy_percent >= 0.0);
    CHECK(rep.to_json().find("\"per_class\": null") != std::string::npos);
}

TEST_CASE("ground truth equal to the prediction scores perfectly") {
    RunConfig cfg = tiny_config();
    cfg.trainer.teacher_only_epochs = 1;
    cfg.trainer.joint_epochs = 1;
    ClipDataset ds = tiny_dataset(3, 4);
    TrainResult res = train(ds, cfg);

    // rebuild the model and adopt its own thresholded CAM as ground truth
    ModelBundle model = restore_model(res.checkpoint);
    ClipDataset self = ds;
    bool any_nonempty = false;
    for (VideoClip& clip : self.clips) {
        TokenGrid grid = encode(clip, *model.backbone);
        HeadOutput s = student_forward(constant(grid.tokens), model.student, ForwardOptions{},
                                       res.checkpoint.config.pooling);
        Tensor cam = normalize_cam(student_stcam(s.features->val, model.student));
        BoolTensor pix = upsample_mask(binarize(cam, res.checkpoint.config.post.threshold),
                                       clip.width(), clip.height());
        clip.masks = pix;
        clip.frame_labels.clear();
        for (uint8_t b : pix.v) any_nonempty = any_nonempty || b;
    }
    REQUIRE(any_nonempty);
    MetricsReport rep = evaluate(res.checkpoint, self, EvalVariant::full);
    CHECK(rep.segmentation_available);
    CHECK(rep.mean_iou_percent == doctest::Approx(100.0));
    CHECK(rep.mean_dice_percent == doctest::Approx(100.0));
    CHECK(rep.mean_hd_pixels == doctest::Approx(0.0));
    CHECK(rep.mean_corloc_percent == doctest::Approx(100.0));
}

TEST_CASE("fusion of identical teacher/student outputs matches teacher_only") {
    RunConfig cfg = tiny_config();
    ClipDataset ds = tiny_dataset(4, 3);
    // zero every parameter, then give both classifiers the same bias so the
    // two heads emit identical (zero) CAMs and identical logits
    ModelBundle model = build_model(cfg, ds.num_classes());
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.class_names = ds.class_names;
    ckpt.student_trained = true;
    for (const Var& p : model.all_params()) {
        Tensor z(p->val.shape);
        ckpt.params.push_back(z);
    }
    ModelBundle probe = build_model(cfg, ds.num_classes());
    size_t n_backbone = probe.backbone->parameters().size();
    size_t n_teacher = probe.teacher.parameters().size();
    // teacher fc_b is the last tensor of the teacher group; student fc_b last overall
    ckpt.params[n_backbone + n_teacher - 1][0] = 1.5;
    ckpt.params[n_backbone + n_teacher - 1][1] = -2.0;
    ckpt.params.back()[0] = 1.5;
    ckpt.params.back()[1] = -2.0;

    MetricsReport t = evaluate(ckpt, ds, EvalVariant::teacher_only);
    MetricsReport f = evaluate(ckpt, ds, EvalVariant::ts_fusion);
    CHECK(t.video_accuracy_percent == f.video_accuracy_percent);
    CHECK(t.frame_accuracy_percent == f.frame_accuracy_percent);
    CHECK(t.mean_iou_percent == f.mean_iou_percent);
    CHECK(t.mean_dice_percent == f.mean_dice_percent);
}

TEST_CASE("train log has one record per epoch with the expected fields") {
    RunConfig cfg = tiny_config();
    ClipDataset ds = tiny_dataset();
    TrainResult res = train(ds, cfg);
    REQUIRE(res.log.epochs.size() == 5);
    std::string jsonl = res.log.to_jsonl();
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 5);
    CHECK(jsonl.find("\"l_ml_teacher\"") != std::string::npos);
    CHECK(jsonl.find("\"l_ml_student\"") != std::string::npos);
    CHECK(jsonl.find("\"l_kd\"") != std::string::npos);
    CHECK(jsonl.find("\"video_acc\"") != std::string::npos);
    // student loss appears only after the phase switch
    CHECK(res.log.epochs[0].l_ml_student == 0.0);
    CHECK(res.log.epochs[4].l_ml_student > 0.0);
    CHECK(res.log.epochs[4].l_kd >= 0.0);
}

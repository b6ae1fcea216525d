#include "vdst/trainer.hpp"

#include "vdst/distill.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using nlohmann::json;

namespace vdst {

std::string to_string(EvalVariant v) {
    switch (v) {
        case EvalVariant::teacher_only: return "teacher_only";
        case EvalVariant::ts_fusion: return "ts_fusion";
        case EvalVariant::full: return "full";
    }
    return "full";
}

EvalVariant eval_variant_from_string(const std::string& s) {
    if (s == "t" || s == "teacher" || s == "teacher_only") return EvalVariant::teacher_only;
    if (s == "fusion" || s == "ts_fusion") return EvalVariant::ts_fusion;
    if (s == "full" || s == "student") return EvalVariant::full;
    throw std::invalid_argument("unknown eval variant '" + s + "' (expected t|fusion|full)");
}

std::string TrainLog::to_jsonl() const {
    std::ostringstream os;
    for (const EpochLog& e : epochs) {
        json j;
        j["epoch"] = e.epoch;
        j["l_ml_teacher"] = e.l_ml_teacher;
        j["l_ml_student"] = e.l_ml_student;
        j["l_kd"] = e.l_kd;
        j["video_acc"] = e.video_acc;
        os << j.dump() << "\n";
    }
    return os.str();
}

namespace {

// Adam with L2-style weight decay folded into the gradient; each parameter
// group keeps its own step counter so inactive groups stay untouched.
class AdamGroup {
public:
    AdamGroup(std::vector<Var> params, AdamState* state, double lr, double wd)
        : params_(std::move(params)), state_(state), lr_(lr), wd_(wd) {
        if (state_->m.empty()) {
            for (const Var& p : params_) {
                state_->m.emplace_back(p->val.shape);
                state_->v.emplace_back(p->val.shape);
            }
        }
        if (state_->m.size() != params_.size())
            throw std::runtime_error("optimizer state does not match parameter group");
    }

    void zero_grads() {
        for (const Var& p : params_) p->zero_grad();
    }

    void step() {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        state_->t += 1;
        double bc1 = 1.0 - std::pow(b1, static_cast<double>(state_->t));
        double bc2 = 1.0 - std::pow(b2, static_cast<double>(state_->t));
        for (size_t i = 0; i < params_.size(); ++i) {
            Var& p = params_[i];
            p->ensure_grad();
            Tensor& m = state_->m[i];
            Tensor& v = state_->v[i];
            for (int64_t j = 0; j < p->val.size(); ++j) {
                double g = p->grad[j] + wd_ * p->val[j];
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                p->val[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
            }
        }
    }

    bool empty() const { return params_.empty(); }

private:
    std::vector<Var> params_;
    AdamState* state_;
    double lr_, wd_;
};

double param_l2(const std::vector<Var>& ps) {
    double s = 0.0;
    for (const Var& p : ps)
        for (double v : p->val.v) s += v * v;
    return std::sqrt(s);
}

void validate_train_inputs(const ClipDataset& ds, const RunConfig& cfg) {
    if (ds.empty()) throw std::invalid_argument("train: dataset is empty");
    const TrainerConfig& t = cfg.trainer;
    if (!(t.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
    if (!t.train_teacher && !t.train_student)
        throw std::invalid_argument("train: at least one of teacher/student must be trainable");
    if (!t.train_teacher && t.teacher_only_epochs > 0)
        throw std::invalid_argument("train: train_teacher=false requires teacher_only_epochs=0");
    if (t.backbone_mode == BackboneMode::refine_by_teacher && !t.train_teacher)
        throw std::invalid_argument("train: refine_by_teacher requires an active teacher");
    if (t.backbone_mode == BackboneMode::refine_by_student && !t.train_student)
        throw std::invalid_argument("train: refine_by_student requires an active student");
    int N = ds.num_classes();
    for (const VideoClip& clip : ds.clips) {
        if (static_cast<int>(clip.label.size()) != N)
            throw std::invalid_argument("train: clip '" + clip.clip_id + "' label width mismatch");
        bool any = false;
        for (uint8_t b : clip.label) {
            if (b != 0 && b != 1)
                throw std::invalid_argument("train: clip '" + clip.clip_id + "' has non-binary label");
            any = any || b;
        }
        // a clip with no labeled object contributes nothing through the TPC
        // gate and is rejected at training-set construction
        if (!any)
            throw std::invalid_argument("train: clip '" + clip.clip_id + "' has an all-zero label");
    }
}

} // namespace

TrainResult train(const ClipDataset& ds, const RunConfig& cfg_in, const Checkpoint* resume,
                  int stop_after_epochs) {
    const RunConfig cfg = resume ? resume->config : cfg_in;
    validate_train_inputs(ds, cfg);
    cfg.pooling.validate();
    cfg.distill.validate();

    ModelBundle model = resume ? restore_model(*resume) : build_model(cfg, ds.num_classes());
    const TrainerConfig& tc = cfg.trainer;

    AdamState st_backbone = resume ? resume->adam_backbone : AdamState{};
    AdamState st_teacher = resume ? resume->adam_teacher : AdamState{};
    AdamState st_student = resume ? resume->adam_student : AdamState{};

    bool track_backbone = tc.backbone_mode != BackboneMode::frozen;
    AdamGroup backbone_group(track_backbone ? model.backbone->parameters() : std::vector<Var>{},
                             &st_backbone, tc.lr, tc.weight_decay);
    AdamGroup teacher_group(tc.train_teacher ? model.teacher.parameters() : std::vector<Var>{},
                            &st_teacher, tc.lr, tc.weight_decay);
    AdamGroup student_group(tc.train_student ? model.student.parameters() : std::vector<Var>{},
                            &st_student, tc.lr, tc.weight_decay);

    int total_epochs = tc.teacher_only_epochs + tc.joint_epochs;
    int start_epoch = resume ? resume->epoch : 0;
    int stop_epoch = stop_after_epochs >= 0 ? std::min(stop_after_epochs, total_epochs) : total_epochs;
    bool student_trained = resume ? resume->student_trained : false;

    TrainLog log;
    for (int epoch = start_epoch; epoch < stop_epoch; ++epoch) {
        bool phase2 = epoch >= tc.teacher_only_epochs;
        double teacher_dropout = phase2 ? 0.0 : cfg.teacher.dropout;
        bool run_teacher = tc.train_teacher;
        bool run_student = phase2 && tc.train_student;

        std::vector<int> order(ds.clips.size());
        std::iota(order.begin(), order.end(), 0);
        Pcg32 shuffle_rng = make_stream(tc.seed, RngStream::shuffle, static_cast<uint64_t>(epoch));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);

        double sum_lt = 0.0, sum_ls = 0.0, sum_kd = 0.0;
        int64_t nt = 0, ns = 0, acc_correct = 0, acc_total = 0;

        size_t pos = 0;
        while (pos < order.size()) {
            size_t bend = std::min(pos + static_cast<size_t>(tc.batch_size), order.size());
            double inv_batch = 1.0 / static_cast<double>(bend - pos);
            backbone_group.zero_grads();
            teacher_group.zero_grads();
            student_group.zero_grads();

            for (size_t i = pos; i < bend; ++i) {
                const VideoClip& clip = ds.clips[static_cast<size_t>(order[i])];
                uint64_t step_id = static_cast<uint64_t>(i);
                Var tokens = model.backbone->encode_var(clip.frames);
                Var tokens_t =
                    tc.backbone_mode == BackboneMode::refine_by_teacher ? tokens : detach(tokens);
                Var tokens_s =
                    tc.backbone_mode == BackboneMode::refine_by_student ? tokens : detach(tokens);

                Var total;
                Var teacher_features;
                double lt_val = 0.0, ls_val = 0.0, kd_val = 0.0;
                if (run_teacher) {
                    Pcg32 rng_ds = make_stream(tc.seed, RngStream::teacher_downsample,
                                               static_cast<uint64_t>(epoch), step_id);
                    Pcg32 rng_do = make_stream(tc.seed, RngStream::teacher_dropout,
                                               static_cast<uint64_t>(epoch), step_id);
                    ForwardOptions opts;
                    opts.train = true;
                    opts.dropout_rate = teacher_dropout;
                    opts.downsample_prob = cfg.teacher.downsample_prob;
                    opts.dropout_rng = &rng_do;
                    opts.downsample_rng = &rng_ds;
                    HeadOutput out = teacher_forward(tokens_t, model.teacher, opts, cfg.pooling);
                    teacher_features = out.features;
                    Var lt = multilabel_soft_margin(out.logits, clip.label);
                    lt_val = lt->val[0];
                    sum_lt += lt_val;
                    ++nt;
                    for (int n = 0; n < ds.num_classes(); ++n) {
                        bool pred = sigmoid(out.logits->val[n]) > 0.5;
                        acc_correct += (pred == (clip.label[static_cast<size_t>(n)] != 0)) ? 1 : 0;
                        ++acc_total;
                    }
                    total = lt;
                }
                if (run_student) {
                    Pcg32 rng_do = make_stream(tc.seed, RngStream::student_dropout,
                                               static_cast<uint64_t>(epoch), step_id);
                    ForwardOptions opts;
                    opts.train = true;
                    opts.dropout_rate = cfg.student.dropout;
                    opts.dropout_rng = &rng_do;
                    HeadOutput out = student_forward(tokens_s, model.student, opts, cfg.pooling);
                    Var ml_s = multilabel_soft_margin(out.logits, clip.label);
                    Var ls = ml_s;
                    if (run_teacher) {
                        // teacher CAM and TPC gate enter the student loss as
                        // constants; KD gradients never reach the teacher
                        Tensor Mt = teacher_stcam(teacher_features->val, model.teacher);
                        Tensor Ps = slice_prediction(Mt);
                        Tensor gate = make_gate(Ps, clip.label, cfg.distill.gate_mode);
                        Var Ms = student_stcam(out.features, model.student);
                        Var kd = gated_kd_loss(Ms, Mt, gate);
                        kd_val = kd->val[0];
                        sum_kd += kd_val;
                        ls = add_scaled(ml_s, kd, cfg.distill.alpha);
                    }
                    ls_val = ml_s->val[0];
                    sum_ls += ls_val;
                    ++ns;
                    if (!run_teacher) {
                        for (int n = 0; n < ds.num_classes(); ++n) {
                            bool pred = sigmoid(out.logits->val[n]) > 0.5;
                            acc_correct += (pred == (clip.label[static_cast<size_t>(n)] != 0)) ? 1 : 0;
                            ++acc_total;
                        }
                    }
                    total = total ? add(total, ls) : ls;
                }
                if (!total) continue;
                if (!std::isfinite(total->val[0])) {
                    std::ostringstream dump;
                    dump << "epoch=" << epoch << " step=" << i << " clip=" << clip.clip_id
                         << " l_teacher=" << lt_val << " l_student=" << ls_val << " l_kd=" << kd_val
                         << " |backbone|=" << param_l2(model.backbone->parameters())
                         << " |teacher|=" << param_l2(model.teacher.parameters())
                         << " |student|=" << param_l2(model.student.parameters());
                    throw TrainDiverged("train: non-finite loss at epoch " + std::to_string(epoch),
                                        dump.str());
                }
                backward(total, inv_batch);
            }

            if (run_teacher) teacher_group.step();
            if (run_student) student_group.step();
            bool backbone_active =
                (tc.backbone_mode == BackboneMode::refine_by_teacher && run_teacher) ||
                (tc.backbone_mode == BackboneMode::refine_by_student && run_student);
            if (track_backbone && backbone_active) backbone_group.step();
            pos = bend;
        }
        if (run_student && ns > 0) student_trained = true;

        EpochLog el;
        el.epoch = epoch;
        el.l_ml_teacher = nt ? sum_lt / static_cast<double>(nt) : 0.0;
        el.l_ml_student = ns ? sum_ls / static_cast<double>(ns) : 0.0;
        el.l_kd = ns ? sum_kd / static_cast<double>(ns) : 0.0;
        el.video_acc = acc_total ? 100.0 * static_cast<double>(acc_correct) /
                                       static_cast<double>(acc_total)
                                 : 0.0;
        log.epochs.push_back(el);
    }

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.class_names = ds.class_names;
    ckpt.epoch = stop_epoch;
    ckpt.student_trained = student_trained;
    for (const Var& p : model.all_params()) ckpt.params.push_back(p->val);
    ckpt.adam_backbone = st_backbone;
    ckpt.adam_teacher = st_teacher;
    ckpt.adam_student = st_student;
    return TrainResult{std::move(ckpt), std::move(log)};
}

MetricsReport evaluate(const Checkpoint& ckpt, const ClipDataset& ds, EvalVariant variant) {
    if (ds.empty()) throw std::invalid_argument("evaluate: dataset is empty");
    int N = static_cast<int>(ckpt.class_names.size());
    if (ds.num_classes() != N)
        throw std::invalid_argument("evaluate: dataset class count does not match checkpoint");
    ModelBundle model = restore_model(ckpt);
    const RunConfig& cfg = ckpt.config;

    std::vector<double> iou_sum(static_cast<size_t>(N), 0.0), dice_sum(static_cast<size_t>(N), 0.0),
        hd_sum(static_cast<size_t>(N), 0.0);
    std::vector<int64_t> frames_eval(static_cast<size_t>(N), 0), hd_eval(static_cast<size_t>(N), 0),
        corloc_hits(static_cast<size_t>(N), 0);
    std::vector<std::vector<double>> all_logits;
    std::vector<std::vector<uint8_t>> all_labels;
    int64_t frame_correct = 0, frame_total = 0, total_frames = 0;
    bool any_masks = false, any_frame_labels = false;

    ForwardOptions eval_opts;
    for (const VideoClip& clip : ds.clips) {
        TokenGrid grid = encode(clip, *model.backbone);
        Var tokens = constant(grid.tokens);
        HeadOutput t = teacher_forward(tokens, model.teacher, eval_opts, cfg.pooling);
        HeadOutput s = student_forward(tokens, model.student, eval_opts, cfg.pooling);
        Tensor Nt = normalize_cam(teacher_stcam(t.features->val, model.teacher));
        Tensor Ns = normalize_cam(student_stcam(s.features->val, model.student));

        Tensor cam;
        std::vector<double> logits(static_cast<size_t>(N), 0.0);
        switch (variant) {
            case EvalVariant::teacher_only:
                cam = Nt;
                for (int n = 0; n < N; ++n) logits[static_cast<size_t>(n)] = t.logits->val[n];
                break;
            case EvalVariant::full:
                cam = Ns;
                for (int n = 0; n < N; ++n) logits[static_cast<size_t>(n)] = s.logits->val[n];
                break;
            case EvalVariant::ts_fusion: {
                cam = fuse_cams(Nt, Ns);
                for (int n = 0; n < N; ++n) {
                    // mean class probability, mapped back to a logit so the
                    // strict > 0.5 decision rule is shared across variants
                    double p = 0.5 * (sigmoid(t.logits->val[n]) + sigmoid(s.logits->val[n]));
                    p = std::min(1.0 - 1e-12, std::max(1e-12, p));
                    logits[static_cast<size_t>(n)] = std::log(p / (1.0 - p));
                }
                break;
            }
        }
        all_logits.push_back(logits);
        all_labels.push_back(clip.label);

        int W = clip.width(), H = clip.height(), D = clip.num_frames();
        total_frames += D;
        BoolTensor mask = binarize(cam, cfg.post.threshold);
        BoolTensor pix = upsample_mask(mask, W, H);

        if (clip.has_masks()) {
            any_masks = true;
            for (int d = 0; d < D; ++d)
                for (int n = 0; n < N; ++n) {
                    BoolTensor gt2d({W, H});
                    bool present = false;
                    for (int x = 0; x < W; ++x)
                        for (int y = 0; y < H; ++y) {
                            uint8_t b = clip.masks.at(x, y, d, n);
                            gt2d.at2(x, y) = b;
                            present = present || b;
                        }
                    if (!present) continue;
                    BoolTensor pred2d({W, H});
                    for (int x = 0; x < W; ++x)
                        for (int y = 0; y < H; ++y) pred2d.at2(x, y) = pix.at(x, y, d, n);
                    frames_eval[static_cast<size_t>(n)] += 1;
                    iou_sum[static_cast<size_t>(n)] += mask_iou(pred2d, gt2d);
                    dice_sum[static_cast<size_t>(n)] += mask_dice(pred2d, gt2d);
                    if (auto hd = hausdorff(pred2d, gt2d, cfg.metrics.hd_percentile)) {
                        hd_sum[static_cast<size_t>(n)] += *hd;
                        hd_eval[static_cast<size_t>(n)] += 1;
                    }
                    std::vector<Box> pred_boxes = extract_boxes(pred2d, cfg.post.min_area);
                    std::vector<Box> gt_boxes =
                        clip.boxes.empty() ? extract_boxes(gt2d, 1)
                                           : clip.boxes[static_cast<size_t>(d)][static_cast<size_t>(n)];
                    if (corloc_hit(pred_boxes, gt_boxes)) corloc_hits[static_cast<size_t>(n)] += 1;
                }
        }
        if (clip.has_frame_labels()) {
            any_frame_labels = true;
            int w = cam.dim(0), h = cam.dim(1);
            for (int d = 0; d < D; ++d)
                for (int n = 0; n < N; ++n) {
                    double mx = 0.0;
                    for (int x = 0; x < w; ++x)
                        for (int y = 0; y < h; ++y) mx = std::max(mx, cam.at(x, y, d, n));
                    bool pred = mx > cfg.metrics.frame_threshold;
                    bool want = clip.frame_labels[static_cast<size_t>(d)][static_cast<size_t>(n)] != 0;
                    frame_correct += (pred == want) ? 1 : 0;
                    ++frame_total;
                }
        }
    }

    MetricsReport rep;
    rep.variant = to_string(variant);
    rep.clips = static_cast<int64_t>(ds.clips.size());
    rep.frames = total_frames;
    rep.video_accuracy_percent = video_accuracy(all_logits, all_labels);
    rep.frame_accuracy_available = any_frame_labels;
    if (any_frame_labels)
        rep.frame_accuracy_percent =
            frame_total ? 100.0 * static_cast<double>(frame_correct) / static_cast<double>(frame_total)
                        : 0.0;
    rep.segmentation_available = any_masks;
    if (any_masks) {
        double miou = 0, mdice = 0, mhd = 0, mcl = 0;
        int n_cls = 0, n_cls_hd = 0;
        for (int n = 0; n < N; ++n) {
            ClassReport c;
            c.class_name = ckpt.class_names[static_cast<size_t>(n)];
            c.frames_evaluated = frames_eval[static_cast<size_t>(n)];
            c.hd_evaluated = hd_eval[static_cast<size_t>(n)];
            if (c.frames_evaluated > 0) {
                double inv = 1.0 / static_cast<double>(c.frames_evaluated);
                c.iou_percent = 100.0 * iou_sum[static_cast<size_t>(n)] * inv;
                c.dice_percent = 100.0 * dice_sum[static_cast<size_t>(n)] * inv;
                c.corloc_percent = 100.0 * static_cast<double>(corloc_hits[static_cast<size_t>(n)]) * inv;
                miou += c.iou_percent;
                mdice += c.dice_percent;
                mcl += c.corloc_percent;
                ++n_cls;
            }
            if (c.hd_evaluated > 0) {
                c.hd_pixels = hd_sum[static_cast<size_t>(n)] / static_cast<double>(c.hd_evaluated);
                mhd += c.hd_pixels;
                ++n_cls_hd;
            }
            rep.per_class.push_back(c);
        }
        if (n_cls > 0) {
            rep.mean_iou_percent = miou / n_cls;
            rep.mean_dice_percent = mdice / n_cls;
            rep.mean_corloc_percent = mcl / n_cls;
        }
        if (n_cls_hd > 0) rep.mean_hd_pixels = mhd / n_cls_hd;
    }
    return rep;
}

} // namespace vdst

// vdstnet: weakly supervised video object detection/segmentation toolkit.
// Subcommands wire config files to the synthetic-data, training, evaluation
// and visualization pipelines.

#include "vdst/config.hpp"
#include "vdst/dataio.hpp"
#include "vdst/distill.hpp"
#include "vdst/image.hpp"
#include "vdst/trainer.hpp"
#include "vdst/viz.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace vdst;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
}

ClipDataset load_data_dir(const std::string& dir, const char* what) {
    if (dir.empty())
        throw std::runtime_error(std::string(what) + ": no dataset directory given (flag or config)");
    return load_dataset(dir);
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& data_override, const std::string& resume_path, int stop_after) {
    RunConfig cfg = load_run_config(config_path);
    std::string data_dir = data_override.empty() ? cfg.data.train_dir : data_override;
    ClipDataset ds = load_data_dir(data_dir, "train");
    fs::create_directories(out_dir);

    Checkpoint resume;
    bool has_resume = !resume_path.empty();
    if (has_resume) resume = load_checkpoint(resume_path);

    TrainResult result;
    try {
        result = train(ds, cfg, has_resume ? &resume : nullptr, stop_after);
    } catch (const TrainDiverged& e) {
        write_text(fs::path(out_dir) / "diverged.txt", e.dump + "\n");
        throw std::runtime_error(std::string(e.what()) + " (state dump in " +
                                 (fs::path(out_dir) / "diverged.txt").string() + ")");
    }
    write_text(fs::path(out_dir) / "config.resolved.json", dump_run_config(result.checkpoint.config) + "\n");
    write_text(fs::path(out_dir) / "train_log.jsonl", result.log.to_jsonl());
    save_checkpoint(result.checkpoint, (fs::path(out_dir) / "checkpoint.bin").string());
    std::cout << "trained " << result.checkpoint.epoch << " epochs over " << ds.clips.size()
              << " clips; checkpoint: " << (fs::path(out_dir) / "checkpoint.bin").string() << "\n";
    return 0;
}

// predicted masks as per-frame per-class bit planes plus a class manifest
void export_masks(const Checkpoint& ckpt, const ClipDataset& ds, EvalVariant variant,
                  const std::string& dir) {
    ModelBundle model = restore_model(ckpt);
    const RunConfig& cfg = ckpt.config;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    nlohmann::json classes = nlohmann::json::array();
    for (size_t n = 0; n < ckpt.class_names.size(); ++n)
        classes.push_back({{"index", n}, {"name", ckpt.class_names[n]}});
    manifest["classes"] = classes;
    manifest["variant"] = to_string(variant);
    write_text(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");

    ForwardOptions eval_opts;
    for (const VideoClip& clip : ds.clips) {
        TokenGrid grid = encode(clip, *model.backbone);
        Var tokens = constant(grid.tokens);
        HeadOutput t = teacher_forward(tokens, model.teacher, eval_opts, cfg.pooling);
        HeadOutput s = student_forward(tokens, model.student, eval_opts, cfg.pooling);
        Tensor Nt = normalize_cam(teacher_stcam(t.features->val, model.teacher));
        Tensor Ns = normalize_cam(student_stcam(s.features->val, model.student));
        Tensor cam = variant == EvalVariant::teacher_only
                         ? Nt
                         : (variant == EvalVariant::full ? Ns : fuse_cams(Nt, Ns));
        BoolTensor pix = upsample_mask(binarize(cam, cfg.post.threshold), clip.width(), clip.height());
        fs::path cdir = fs::path(dir) / clip.clip_id;
        fs::create_directories(cdir);
        for (int d = 0; d < clip.num_frames(); ++d)
            for (int n = 0; n < static_cast<int>(ckpt.class_names.size()); ++n) {
                ImageU8 img;
                img.width = clip.width();
                img.height = clip.height();
                img.channels = 1;
                img.pixels.resize(static_cast<size_t>(img.width) * img.height);
                for (int y = 0; y < img.height; ++y)
                    for (int x = 0; x < img.width; ++x)
                        img.at(x, y, 0) = pix.at(x, y, d, n) ? 255 : 0;
                char buf[48];
                std::snprintf(buf, sizeof(buf), "%04d_%d.png", d, n);
                write_png((cdir / buf).string(), img);
            }
    }
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& variant_str,
             const std::string& report_path, const std::string& masks_out) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    EvalVariant variant = eval_variant_from_string(variant_str);
    if (variant != EvalVariant::teacher_only && !ckpt.student_trained)
        std::cerr << "warning: the student in this checkpoint is untrained (no joint epochs); "
                     "variant '" << variant_str << "' uses student outputs\n";
    ClipDataset ds = load_data_dir(data_dir.empty() ? ckpt.config.data.eval_dir : data_dir, "eval");
    MetricsReport report = evaluate(ckpt, ds, variant);
    std::cout << report.to_table();
    if (!report_path.empty()) {
        write_text(report_path, report.to_json() + "\n");
        write_text(report_path + ".config.json", dump_run_config(ckpt.config) + "\n");
    }
    if (!masks_out.empty()) export_masks(ckpt, ds, variant, masks_out);
    return 0;
}

int cmd_synth(const std::string& config_path, int count, const std::string& out_dir) {
    RunConfig cfg = load_run_config(config_path);
    ClipDataset ds = generate_synthetic(cfg.synth, count);
    save_dataset(ds, out_dir);
    write_text(fs::path(out_dir) / "config.resolved.json", dump_run_config(cfg) + "\n");
    std::cout << "wrote " << ds.clips.size() << " clips to " << out_dir << "\n";
    return 0;
}

int cmd_split(const std::string& frames_dir, const std::string& labels_csv, int clip_len,
              const std::string& out_dir, const std::string& class_names_arg) {
    // frame sequence, lexicographic order
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(frames_dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("split: no .png frames in '" + frames_dir + "'");

    std::ifstream lf(labels_csv);
    if (!lf) throw std::runtime_error("split: cannot open labels file '" + labels_csv + "'");
    std::string line;
    std::vector<std::string> class_names;
    std::vector<std::vector<uint8_t>> frame_labels;
    bool first = true;
    while (std::getline(lf, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cells;
        while (std::getline(ss, tok, ',')) cells.push_back(tok);
        if (first) {
            first = false;
            if (!cells.empty() && cells[0] == "frame") {
                for (size_t i = 1; i < cells.size(); ++i) class_names.push_back(cells[i]);
                continue;
            }
        }
        std::vector<uint8_t> row;
        for (size_t i = 1; i < cells.size(); ++i) row.push_back(cells[i] == "1" ? 1 : 0);
        frame_labels.push_back(std::move(row));
    }
    if (!class_names_arg.empty()) {
        class_names.clear();
        std::stringstream ss(class_names_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) class_names.push_back(tok);
    }
    if (class_names.empty() && !frame_labels.empty())
        for (size_t n = 0; n < frame_labels[0].size(); ++n)
            class_names.push_back("class_" + std::to_string(n));
    if (frame_labels.size() != files.size())
        throw std::runtime_error("split: " + std::to_string(files.size()) + " frames but " +
                                 std::to_string(frame_labels.size()) + " label rows");

    ImageU8 first_img = read_png(files[0].string());
    int W = first_img.width, H = first_img.height, ch = first_img.channels;
    Tensor frames({W, H, static_cast<int>(files.size()), ch});
    for (size_t k = 0; k < files.size(); ++k) {
        ImageU8 img = k == 0 ? first_img : read_png(files[k].string());
        if (img.width != W || img.height != H || img.channels != ch)
            throw std::runtime_error("split: frame size mismatch at '" + files[k].string() + "'");
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < ch; ++c)
                    frames.at(x, y, static_cast<int>(k), c) = img.at(x, y, c) / 255.0;
    }
    ClipDataset ds = split_clips(frames, frame_labels, clip_len, class_names);
    save_dataset(ds, out_dir);
    std::cout << "split " << files.size() << " frames into " << ds.clips.size() << " clips ("
              << files.size() % static_cast<size_t>(clip_len) << " trailing frames dropped)\n";
    return 0;
}

int cmd_stats(const std::string& data_dir) {
    ClipDataset ds = load_data_dir(data_dir, "stats");
    PresenceStats st = compute_presence_stats(ds);
    std::cout << st.to_table(ds.class_names);
    return 0;
}

int cmd_viz(const std::string& ckpt_path, const std::string& data_dir, const std::string& clip_id,
            int class_index, const std::string& variant_str, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    EvalVariant variant = eval_variant_from_string(variant_str);
    ClipDataset ds = load_data_dir(data_dir, "viz");
    const VideoClip* clip = nullptr;
    for (const VideoClip& c : ds.clips)
        if (c.clip_id == clip_id) clip = &c;
    if (!clip) throw std::runtime_error("viz: clip '" + clip_id + "' not found in dataset");

    ModelBundle model = restore_model(ckpt);
    ForwardOptions eval_opts;
    TokenGrid grid = encode(*clip, *model.backbone);
    Var tokens = constant(grid.tokens);
    HeadOutput t = teacher_forward(tokens, model.teacher, eval_opts, ckpt.config.pooling);
    HeadOutput s = student_forward(tokens, model.student, eval_opts, ckpt.config.pooling);
    Tensor Nt = normalize_cam(teacher_stcam(t.features->val, model.teacher));
    Tensor Ns = normalize_cam(student_stcam(s.features->val, model.student));
    Tensor cam = variant == EvalVariant::teacher_only
                     ? Nt
                     : (variant == EvalVariant::full ? Ns : fuse_cams(Nt, Ns));
    int n = write_overlays(*clip, cam, class_index, ckpt.config.post.threshold, out_dir);
    std::cout << "wrote " << n << " overlay frames to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"VDST-Net: weakly supervised video object detection/segmentation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, resume_path;
    int stop_after = -1;
    auto* train_cmd = app.add_subcommand("train", "train teacher/student on a clip dataset");
    train_cmd->add_option("--config", config_path, "run config (json)")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--data", data_dir, "training dataset directory (overrides config)");
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");
    train_cmd->add_option("--stop-after", stop_after, "stop after this many epochs (for resume)");

    std::string ckpt_path, variant_str = "full", report_path, masks_out;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against ground truth");
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_dir, "evaluation dataset directory");
    eval_cmd->add_option("--variant", variant_str, "t | fusion | full");
    eval_cmd->add_option("--report", report_path, "metrics report output (json)");
    eval_cmd->add_option("--masks-out", masks_out, "export predicted masks to this directory");

    int count = 0;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic clip dataset");
    synth_cmd->add_option("--config", config_path, "run config (json)")->required();
    synth_cmd->add_option("--count", count, "number of clips")->required();
    synth_cmd->add_option("--out", out_dir, "dataset output directory")->required();

    std::string frames_dir, labels_csv, class_names_arg;
    int clip_len = 30;
    auto* split_cmd = app.add_subcommand("split", "split a long frame sequence into labeled clips");
    split_cmd->add_option("--frames", frames_dir, "directory of .png frames")->required();
    split_cmd->add_option("--labels", labels_csv, "per-frame label csv")->required();
    split_cmd->add_option("--clip-len", clip_len, "frames per clip");
    split_cmd->add_option("--out", out_dir, "dataset output directory")->required();
    split_cmd->add_option("--class-names", class_names_arg, "comma-separated class names");

    auto* stats_cmd = app.add_subcommand("stats", "presence statistics of a dataset");
    stats_cmd->add_option("--data", data_dir, "dataset directory")->required();

    std::string clip_id;
    int class_index = 0;
    auto* viz_cmd = app.add_subcommand("viz", "render CAM overlays for one clip");
    viz_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    viz_cmd->add_option("--data", data_dir, "dataset directory")->required();
    viz_cmd->add_option("--clip", clip_id, "clip id")->required();
    viz_cmd->add_option("--class", class_index, "class index")->required();
    viz_cmd->add_option("--variant", variant_str, "t | fusion | full");
    viz_cmd->add_option("--out", out_dir, "overlay output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed())
            return cmd_train(config_path, out_dir, data_dir, resume_path, stop_after);
        if (eval_cmd->parsed())
            return cmd_eval(ckpt_path, data_dir, variant_str, report_path, masks_out);
        if (synth_cmd->parsed()) return cmd_synth(config_path, count, out_dir);
        if (split_cmd->parsed())
            return cmd_split(frames_dir, labels_csv, clip_len, out_dir, class_names_arg);
        if (stats_cmd->parsed()) return cmd_stats(data_dir);
        if (viz_cmd->parsed())
            return cmd_viz(ckpt_path, data_dir, clip_id, class_index, variant_str, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vdst/dataio.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace vdst;

namespace {

SyntheticConfig base_cfg() {
    SyntheticConfig cfg;
    cfg.num_classes = 2;
    cfg.clip_length = 6;
    cfg.frame_width = 32;
    cfg.frame_height = 32;
    cfg.objects_min = 1;
    cfg.objects_max = 2;
    cfg.noise_std = 0.02;
    cfg.seed = 5;
    return cfg;
}

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("vdst_test_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("generation is byte-identical for a fixed seed") {
    SyntheticConfig cfg = base_cfg();
    ClipDataset a = generate_synthetic(cfg, 6);
    ClipDataset b = generate_synthetic(cfg, 6);
    REQUIRE(a.clips.size() == b.clips.size());
    for (size_t i = 0; i < a.clips.size(); ++i) {
        CHECK(a.clips[i].frames.v == b.clips[i].frames.v);
        CHECK(a.clips[i].masks.v == b.clips[i].masks.v);
        CHECK(a.clips[i].label == b.clips[i].label);
    }
    cfg.seed = 6;
    ClipDataset c = generate_synthetic(cfg, 6);
    CHECK(a.clips[0].frames.v != c.clips[0].frames.v);
}

TEST_CASE("fpc_range=(1,1) with static motion keeps masks constant over frames") {
    SyntheticConfig cfg = base_cfg();
    cfg.fpc_lo = cfg.fpc_hi = 1.0;
    cfg.motion = SyntheticConfig::Motion::static_pos;
    ClipDataset ds = generate_synthetic(cfg, 5);
    for (const VideoClip& clip : ds.clips)
        for (int n = 0; n < 2; ++n) {
            if (!clip.label[static_cast<size_t>(n)]) continue;
            for (int d = 0; d < clip.num_frames(); ++d) {
                CHECK(clip.frame_labels[static_cast<size_t>(d)][static_cast<size_t>(n)] == 1);
                for (int x = 0; x < 32; ++x)
                    for (int y = 0; y < 32; ++y)
                        CHECK(clip.masks.at(x, y, d, n) == clip.masks.at(x, y, 0, n));
            }
        }
}

TEST_CASE("label soundness: clip label is set iff some frame mask is nonempty") {
    SyntheticConfig cfg = base_cfg();
    cfg.fpc_lo = 0.3;
    cfg.fpc_hi = 0.7;
    ClipDataset ds = generate_synthetic(cfg, 12);
    for (const VideoClip& clip : ds.clips) {
        bool any_label = false;
        for (int n = 0; n < 2; ++n) {
            bool mask_nonempty = false;
            for (int d = 0; d < clip.num_frames() && !mask_nonempty; ++d)
                for (int x = 0; x < 32 && !mask_nonempty; ++x)
                    for (int y = 0; y < 32 && !mask_nonempty; ++y)
                        mask_nonempty = clip.masks.at(x, y, d, n);
            CHECK(mask_nonempty == (clip.label[static_cast<size_t>(n)] != 0));
            any_label = any_label || clip.label[static_cast<size_t>(n)];
        }
        CHECK(any_label);  // every generated clip has at least one class
    }
}

TEST_CASE("empirical FPC of the uniform-interval sampler lands near the midpoint") {
    SyntheticConfig cfg = base_cfg();
    cfg.clip_length = 10;
    cfg.fpc_lo = 0.4;
    cfg.fpc_hi = 0.6;
    cfg.objects_min = cfg.objects_max = 1;
    ClipDataset ds = generate_synthetic(cfg, 200);
    PresenceStats st = compute_presence_stats(ds);
    double weighted = 0.0;
    int64_t clips = 0;
    for (const ClassStats& cs : st.per_class) {
        weighted += cs.fpc_percent * static_cast<double>(cs.clip_count);
        clips += cs.clip_count;
    }
    double mean_fpc = weighted / static_cast<double>(clips);
    CHECK(mean_fpc >= 45.0);
    CHECK(mean_fpc <= 55.0);
}

TEST_CASE("split produces non-overlapping windows, drops the remainder, merges labels") {
    int Dt = 95, N = 3;
    Tensor frames({4, 4, Dt, 1});
    for (int d = 0; d < Dt; ++d) frames.at(0, 0, d, 0) = d / 100.0;
    std::vector<std::vector<uint8_t>> labels(static_cast<size_t>(Dt),
                                             std::vector<uint8_t>(static_cast<size_t>(N), 0));
    for (int d = 0; d < Dt; ++d) labels[static_cast<size_t>(d)][0] = 1;  // class 0 everywhere
    for (int d = 31; d <= 33; ++d) labels[static_cast<size_t>(d)][2] = 1;

    ClipDataset ds = split_clips(frames, labels, 30, {"a", "b", "c"});
    REQUIRE(ds.clips.size() == 3);  // 95/30 -> 3 windows, 5 frames dropped
    CHECK(ds.clips[0].label == std::vector<uint8_t>{1, 0, 0});
    CHECK(ds.clips[1].label == std::vector<uint8_t>{1, 0, 1});  // frames 31..33 live here
    CHECK(ds.clips[2].label == std::vector<uint8_t>{1, 0, 0});
    for (const VideoClip& clip : ds.clips) CHECK(clip.num_frames() == 30);
    CHECK(ds.clips[1].frames.at(0, 0, 0, 0) == doctest::Approx(0.30));

    // 90 frames -> exactly 3 clips
    Tensor frames90({4, 4, 90, 1});
    std::vector<std::vector<uint8_t>> labels90(90, std::vector<uint8_t>(1, 1));
    CHECK(split_clips(frames90, labels90, 30, {"a"}).clips.size() == 3);
}

TEST_CASE("split excludes all-zero windows and keeps the label OR consistent") {
    int Dt = 60;
    Tensor frames({4, 4, Dt, 1});
    std::vector<std::vector<uint8_t>> labels(static_cast<size_t>(Dt), std::vector<uint8_t>(2, 0));
    for (int d = 0; d < 30; ++d) labels[static_cast<size_t>(d)][1] = 1;  // only window 0 labeled
    ClipDataset ds = split_clips(frames, labels, 30, {"a", "b"});
    REQUIRE(ds.clips.size() == 1);
    CHECK(ds.clips[0].label == std::vector<uint8_t>{0, 1});

    // OR of clip labels equals OR of frame labels over retained frames
    std::vector<uint8_t> clip_or(2, 0), frame_or(2, 0);
    for (const VideoClip& clip : ds.clips)
        for (int n = 0; n < 2; ++n) clip_or[static_cast<size_t>(n)] |= clip.label[static_cast<size_t>(n)];
    for (int d = 0; d < 30; ++d)
        for (int n = 0; n < 2; ++n) frame_or[static_cast<size_t>(n)] |= labels[static_cast<size_t>(d)][static_cast<size_t>(n)];
    CHECK(clip_or == frame_or);
}

TEST_CASE("presence stats: degenerate and aggregate cases") {
    // class present in all frames of all its clips -> FPC 100
    Tensor frames({4, 4, 20, 1});
    std::vector<std::vector<uint8_t>> labels(20, std::vector<uint8_t>(2, 0));
    for (int d = 0; d < 20; ++d) labels[static_cast<size_t>(d)][0] = 1;
    for (int d = 0; d < 20; d += 2) labels[static_cast<size_t>(d)][1] = 1;  // half the frames
    ClipDataset ds = split_clips(frames, labels, 10, {"full", "half"});
    PresenceStats st = compute_presence_stats(ds);
    CHECK(st.per_class[0].fpc_percent == doctest::Approx(100.0));
    CHECK(st.per_class[1].fpc_percent == doctest::Approx(50.0));
    CHECK(st.per_class[1].fpv_percent == doctest::Approx(50.0));
}

TEST_CASE("mock label file reproduces a table-style FPV of 80.8%") {
    // 1000 frames in clips that all carry the class, 808 frames present
    int Dt = 1000;
    Tensor frames({4, 4, Dt, 1});
    std::vector<std::vector<uint8_t>> labels(static_cast<size_t>(Dt), std::vector<uint8_t>(1, 0));
    int present = 0;
    for (int d = 0; d < Dt && present < 808; ++d) {
        // spread presence across every 50-frame clip so each window is labeled
        if (d % 50 < 41 && present < 808) {
            labels[static_cast<size_t>(d)][0] = 1;
            ++present;
        }
    }
    REQUIRE(present == 808);
    ClipDataset ds = split_clips(frames, labels, 50, {"hook"});
    REQUIRE(ds.clips.size() == 20);
    PresenceStats st = compute_presence_stats(ds);
    CHECK(st.per_class[0].fpv_percent == doctest::Approx(80.8).epsilon(1e-9));
}

TEST_CASE("save/load round trip is lossless") {
    SyntheticConfig cfg = base_cfg();
    cfg.fpc_lo = 0.4;
    cfg.fpc_hi = 0.8;
    ClipDataset ds = generate_synthetic(cfg, 4);
    fs::path dir = temp_dir("roundtrip");
    save_dataset(ds, dir.string());
    ClipDataset back = load_dataset(dir.string());
    CHECK(back.class_names == ds.class_names);
    REQUIRE(back.clips.size() == ds.clips.size());
    for (size_t i = 0; i < ds.clips.size(); ++i) {
        CHECK(back.clips[i].clip_id == ds.clips[i].clip_id);
        CHECK(back.clips[i].label == ds.clips[i].label);
        CHECK(back.clips[i].frame_labels == ds.clips[i].frame_labels);
        REQUIRE(back.clips[i].frames.shape == ds.clips[i].frames.shape);
        for (int64_t j = 0; j < ds.clips[i].frames.size(); ++j)
            CHECK(back.clips[i].frames[j] == ds.clips[i].frames[j]);
        CHECK(back.clips[i].masks.v == ds.clips[i].masks.v);
    }
    fs::remove_all(dir);
}

TEST_CASE("load errors are descriptive") {
    fs::path dir = temp_dir("empty");
    fs::create_directories(dir);
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("manifest.json"),
                         std::runtime_error);

    // unknown schema version names the version
    std::ofstream mf(dir / "manifest.json");
    mf << R"({"schema_version": 999, "class_names": [], "clips": []})";
    mf.close();
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("999"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("config validation") {
    SyntheticConfig cfg = base_cfg();
    cfg.fpc_lo = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_cfg();
    cfg.fpc_lo = 0.8;
    cfg.fpc_hi = 0.4;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_cfg();
    cfg.objects_min = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

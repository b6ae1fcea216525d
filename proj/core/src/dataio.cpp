#include "vdst/dataio.hpp"

#include "vdst/image.hpp"
#include "vdst/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace vdst {

void SyntheticConfig::validate() const {
    if (num_classes < 1) throw std::invalid_argument("synth.num_classes must be >= 1");
    if (clip_length < 1) throw std::invalid_argument("synth.clip_length must be >= 1");
    if (frame_width < 16 || frame_height < 16)
        throw std::invalid_argument("synth.frame size must be at least 16x16");
    if (!(fpc_lo > 0.0 && fpc_lo <= fpc_hi && fpc_hi <= 1.0))
        throw std::invalid_argument("synth.fpc_range must satisfy 0 < lo <= hi <= 1");
    if (objects_min < 1 || objects_max < objects_min)
        throw std::invalid_argument("synth.objects_per_clip range is invalid");
    if (noise_std < 0.0) throw std::invalid_argument("synth.noise_std must be >= 0");
}

std::string to_string(SyntheticConfig::Motion m) {
    return m == SyntheticConfig::Motion::static_pos ? "static" : "random_walk";
}

SyntheticConfig::Motion motion_from_string(const std::string& s) {
    if (s == "static") return SyntheticConfig::Motion::static_pos;
    if (s == "random_walk") return SyntheticConfig::Motion::random_walk;
    throw std::invalid_argument("synth.motion: unknown mode '" + s + "'");
}

namespace {

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    double i = std::floor(h * 6.0);
    double f = h * 6.0 - i;
    double p = v * (1.0 - s);
    double q = v * (1.0 - f * s);
    double t = v * (1.0 - (1.0 - f) * s);
    switch (static_cast<int>(i) % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

// fixed per-class appearance: hue from the golden-angle sequence, shape cycles
// circle / square / triangle
Rgb class_color(int n) {
    double hue = std::fmod(0.02 + n * 0.61803398875, 1.0);
    return hsv_to_rgb(hue, 0.85, 0.9);
}

bool inside_shape(int shape, double px, double py, double cx, double cy, double r) {
    double dx = px - cx, dy = py - cy;
    switch (shape) {
        case 0: return dx * dx + dy * dy <= r * r;
        case 1: return std::abs(dx) <= r * 0.88 && std::abs(dy) <= r * 0.88;
        default: {
            // upward triangle with vertices on a circle of radius r
            double ax = 0.0, ay = -r;
            double bx = -0.93 * r, by = 0.62 * r;
            double cx2 = 0.93 * r, cy2 = 0.62 * r;
            auto side = [&](double x1, double y1, double x2, double y2) {
                return (x2 - x1) * (dy - y1) - (y2 - y1) * (dx - x1);
            };
            double s1 = side(ax, ay, bx, by);
            double s2 = side(bx, by, cx2, cy2);
            double s3 = side(cx2, cy2, ax, ay);
            bool neg = s1 < 0 || s2 < 0 || s3 < 0;
            bool pos = s1 > 0 || s2 > 0 || s3 > 0;
            return !(neg && pos);
        }
    }
}

double quantize8(double v) {
    v = std::min(1.0, std::max(0.0, v));
    return std::round(v * 255.0) / 255.0;
}

struct ObjectTrack {
    int cls = 0;
    double radius = 0.0;
    int start = 0, len = 0;              // presence interval
    std::vector<double> cx, cy;          // per-frame centers
    std::vector<double> contrast;        // per-frame blend toward the class color
};

// per-frame visibility varies like a tool drifting in and out of focus;
// single-frame evidence is weak on low-contrast frames, neighboring frames
// carry the object clearly
constexpr double kContrastLo = 0.35;
constexpr double kContrastHi = 1.0;

VideoClip render_clip(const SyntheticConfig& cfg, uint64_t clip_index) {
    Pcg32 rng = make_stream(cfg.seed, RngStream::synth, clip_index);
    int W = cfg.frame_width, H = cfg.frame_height, D = cfg.clip_length, N = cfg.num_classes;

    // choose classes
    int max_objs = std::min(cfg.objects_max, N);
    int min_objs = std::min(cfg.objects_min, max_objs);
    int n_objs = rng.uniform_int(min_objs, max_objs);
    std::vector<int> classes(static_cast<size_t>(N));
    for (int n = 0; n < N; ++n) classes[static_cast<size_t>(n)] = n;
    for (int i = N - 1; i > 0; --i) std::swap(classes[static_cast<size_t>(i)],
                                              classes[static_cast<size_t>(rng.uniform_int(0, i))]);
    classes.resize(static_cast<size_t>(n_objs));

    double rmin = 0.10 * std::min(W, H), rmax = 0.17 * std::min(W, H);
    std::vector<ObjectTrack> objs;
    for (int cls : classes) {
        ObjectTrack o;
        o.cls = cls;
        o.radius = rng.uniform(rmin, rmax);
        double frac = rng.uniform(cfg.fpc_lo, cfg.fpc_hi);
        o.len = std::max(1, std::min(D, static_cast<int>(std::lround(frac * D))));
        o.start = rng.uniform_int(0, D - o.len);
        double margin = o.radius + 1.0;
        double x = rng.uniform(margin, W - margin);
        double y = rng.uniform(margin, H - margin);
        for (int d = 0; d < D; ++d) {
            o.cx.push_back(x);
            o.cy.push_back(y);
            o.contrast.push_back(rng.uniform(kContrastLo, kContrastHi));
            if (cfg.motion == SyntheticConfig::Motion::random_walk) {
                x += rng.uniform(-2.5, 2.5);
                y += rng.uniform(-2.5, 2.5);
                x = std::min(W - margin, std::max(margin, x));
                y = std::min(H - margin, std::max(margin, y));
            }
        }
        objs.push_back(std::move(o));
    }

    // background: flat gray, or a drifting value-noise texture under jitter
    const int TG = 9;  // texture grid
    std::vector<double> tex(TG * TG, 0.0);
    double drift_x = 0.0, drift_y = 0.0, drift_vx = 0.0, drift_vy = 0.0;
    if (cfg.camera_jitter) {
        for (double& t : tex) t = rng.uniform(0.15, 0.55);
        drift_vx = rng.uniform(-1.5, 1.5);
        drift_vy = rng.uniform(-1.5, 1.5);
    }
    auto tex_at = [&](double fx, double fy) {
        double gx = fx * (TG - 1), gy = fy * (TG - 1);
        int x0 = static_cast<int>(std::floor(gx)) % TG, y0 = static_cast<int>(std::floor(gy)) % TG;
        if (x0 < 0) x0 += TG;
        if (y0 < 0) y0 += TG;
        int x1 = (x0 + 1) % TG, y1 = (y0 + 1) % TG;
        double fx2 = gx - std::floor(gx), fy2 = gy - std::floor(gy);
        return (1 - fx2) * (1 - fy2) * tex[x0 * TG + y0] + fx2 * (1 - fy2) * tex[x1 * TG + y0] +
               (1 - fx2) * fy2 * tex[x0 * TG + y1] + fx2 * fy2 * tex[x1 * TG + y1];
    };

    VideoClip clip;
    clip.frames = Tensor({W, H, D, 3});
    clip.masks = BoolTensor({W, H, D, N});
    clip.frame_labels.assign(static_cast<size_t>(D), std::vector<uint8_t>(static_cast<size_t>(N), 0));
    clip.label.assign(static_cast<size_t>(N), 0);

    for (int d = 0; d < D; ++d) {
        if (cfg.camera_jitter) {
            drift_x += drift_vx + rng.uniform(-0.4, 0.4);
            drift_y += drift_vy + rng.uniform(-0.4, 0.4);
        }
        for (int x = 0; x < W; ++x)
            for (int y = 0; y < H; ++y) {
                double base = cfg.camera_jitter
                                  ? tex_at(std::fmod((x + drift_x) / W + 8.0, 1.0),
                                           std::fmod((y + drift_y) / H + 8.0, 1.0))
                                  : 0.35;
                clip.frames.at(x, y, d, 0) = base;
                clip.frames.at(x, y, d, 1) = base;
                clip.frames.at(x, y, d, 2) = base;
            }
        for (const ObjectTrack& o : objs) {
            if (d < o.start || d >= o.start + o.len) continue;
            clip.frame_labels[static_cast<size_t>(d)][static_cast<size_t>(o.cls)] = 1;
            clip.label[static_cast<size_t>(o.cls)] = 1;
            Rgb col = class_color(o.cls);
            int shape = o.cls % 3;
            int x0 = std::max(0, static_cast<int>(o.cx[d] - o.radius - 1));
            int x1 = std::min(W - 1, static_cast<int>(o.cx[d] + o.radius + 1));
            int y0 = std::max(0, static_cast<int>(o.cy[d] - o.radius - 1));
            int y1 = std::min(H - 1, static_cast<int>(o.cy[d] + o.radius + 1));
            double c = o.contrast[d];
            for (int x = x0; x <= x1; ++x)
                for (int y = y0; y <= y1; ++y)
                    if (inside_shape(shape, x + 0.5, y + 0.5, o.cx[d], o.cy[d], o.radius)) {
                        clip.frames.at(x, y, d, 0) = (1 - c) * clip.frames.at(x, y, d, 0) + c * col.r;
                        clip.frames.at(x, y, d, 1) = (1 - c) * clip.frames.at(x, y, d, 1) + c * col.g;
                        clip.frames.at(x, y, d, 2) = (1 - c) * clip.frames.at(x, y, d, 2) + c * col.b;
                        clip.masks.at(x, y, d, o.cls) = 1;
                    }
        }
        // pixel noise then 8-bit quantization, so saved datasets round-trip
        for (int x = 0; x < W; ++x)
            for (int y = 0; y < H; ++y)
                for (int c = 0; c < 3; ++c) {
                    double v = clip.frames.at(x, y, d, c);
                    if (cfg.noise_std > 0.0) v += cfg.noise_std * rng.normal();
                    clip.frames.at(x, y, d, c) = quantize8(v);
                }
    }
    return clip;
}

} // namespace

ClipDataset generate_synthetic(const SyntheticConfig& cfg, int count) {
    cfg.validate();
    if (count < 1) throw std::invalid_argument("generate_synthetic: count must be >= 1");
    ClipDataset ds;
    for (int n = 0; n < cfg.num_classes; ++n) {
        const char* shapes[3] = {"circle", "square", "triangle"};
        ds.class_names.push_back(std::string(shapes[n % 3]) + "_" + std::to_string(n));
    }
    ds.clips.resize(static_cast<size_t>(count));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        VideoClip clip = render_clip(cfg, static_cast<uint64_t>(i));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth_%05d", i);
        clip.clip_id = buf;
        ds.clips[static_cast<size_t>(i)] = std::move(clip);
    }
    return ds;
}

ClipDataset split_clips(const Tensor& frames, const std::vector<std::vector<uint8_t>>& frame_labels,
                        int clip_len, const std::vector<std::string>& class_names) {
    if (clip_len < 1) throw std::invalid_argument("split_clips: clip_len must be >= 1");
    if (frames.ndim() != 4) throw DimensionError("split_clips: frames must be [W,H,D,ch]");
    int W = frames.dim(0), H = frames.dim(1), Dt = frames.dim(2), ch = frames.dim(3);
    if (static_cast<int>(frame_labels.size()) != Dt)
        throw DimensionError("split_clips: one label row per frame required");
    int N = static_cast<int>(class_names.size());
    for (const auto& row : frame_labels)
        if (static_cast<int>(row.size()) != N)
            throw DimensionError("split_clips: label row width does not match class names");

    ClipDataset ds;
    ds.class_names = class_names;
    int n_windows = Dt / clip_len;
    for (int wdx = 0; wdx < n_windows; ++wdx) {
        VideoClip clip;
        clip.frames = Tensor({W, H, clip_len, ch});
        clip.label.assign(static_cast<size_t>(N), 0);
        for (int d = 0; d < clip_len; ++d) {
            int src = wdx * clip_len + d;
            for (int x = 0; x < W; ++x)
                for (int y = 0; y < H; ++y)
                    for (int c = 0; c < ch; ++c) clip.frames.at(x, y, d, c) = frames.at(x, y, src, c);
            clip.frame_labels.push_back(frame_labels[static_cast<size_t>(src)]);
            for (int n = 0; n < N; ++n)
                if (frame_labels[static_cast<size_t>(src)][static_cast<size_t>(n)])
                    clip.label[static_cast<size_t>(n)] = 1;
        }
        bool any = false;
        for (uint8_t b : clip.label) any = any || b;
        if (!any) continue;  // clips without any labeled object are excluded
        char buf[32];
        std::snprintf(buf, sizeof(buf), "win_%05d", wdx);
        clip.clip_id = buf;
        ds.clips.push_back(std::move(clip));
    }
    return ds;
}

PresenceStats compute_presence_stats(const ClipDataset& ds) {
    int N = ds.num_classes();
    PresenceStats st;
    st.per_class.assign(static_cast<size_t>(N), ClassStats{});
    std::vector<double> fpc_sum(static_cast<size_t>(N), 0.0);
    std::vector<int64_t> frames_of_clips_with(static_cast<size_t>(N), 0);
    for (const VideoClip& clip : ds.clips) {
        if (!clip.has_frame_labels())
            throw std::invalid_argument("compute_presence_stats: clip '" + clip.clip_id +
                                        "' has no per-frame labels");
        int D = clip.num_frames();
        st.total_clips += 1;
        st.total_frames += D;
        for (int n = 0; n < N; ++n) {
            int64_t present = 0;
            for (int d = 0; d < D; ++d)
                if (clip.frame_labels[static_cast<size_t>(d)][static_cast<size_t>(n)]) ++present;
            if (present > 0) {
                ClassStats& cs = st.per_class[static_cast<size_t>(n)];
                cs.clip_count += 1;
                cs.frame_count += present;
                fpc_sum[static_cast<size_t>(n)] += static_cast<double>(present) / D;
                frames_of_clips_with[static_cast<size_t>(n)] += D;
            }
        }
    }
    for (int n = 0; n < N; ++n) {
        ClassStats& cs = st.per_class[static_cast<size_t>(n)];
        if (cs.clip_count > 0) {
            cs.fpc_percent = 100.0 * fpc_sum[static_cast<size_t>(n)] / static_cast<double>(cs.clip_count);
            cs.fpv_percent = 100.0 * static_cast<double>(cs.frame_count) /
                             static_cast<double>(frames_of_clips_with[static_cast<size_t>(n)]);
        }
    }
    return st;
}

std::string PresenceStats::to_table(const std::vector<std::string>& class_names) const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %8s %8s\n", "Category", "Frames", "Clips",
                  "FPC[%]", "FPV[%]");
    os << line;
    for (size_t n = 0; n < per_class.size(); ++n) {
        const ClassStats& cs = per_class[n];
        std::snprintf(line, sizeof(line), "%-16s %10lld %10lld %8.1f %8.1f\n", class_names[n].c_str(),
                      static_cast<long long>(cs.frame_count), static_cast<long long>(cs.clip_count),
                      cs.fpc_percent, cs.fpv_percent);
        os << line;
    }
    std::snprintf(line, sizeof(line), "total: %lld clips, %lld frames\n",
                  static_cast<long long>(total_clips), static_cast<long long>(total_frames));
    os << line;
    return os.str();
}

namespace {

constexpr int kDatasetSchemaVersion = 1;

ImageU8 frame_to_image(const Tensor& frames, int d) {
    int W = frames.dim(0), H = frames.dim(1), ch = frames.dim(3);
    ImageU8 img;
    img.width = W;
    img.height = H;
    img.channels = ch;
    img.pixels.resize(static_cast<size_t>(W) * H * ch);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < ch; ++c)
                img.at(x, y, c) = static_cast<uint8_t>(
                    std::lround(std::min(1.0, std::max(0.0, frames.at(x, y, d, c))) * 255.0));
    return img;
}

std::string frame_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d.png", k);
    return buf;
}

} // namespace

void save_dataset(const ClipDataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "clips");
    json manifest;
    manifest["schema_version"] = kDatasetSchemaVersion;
    manifest["class_names"] = ds.class_names;
    json clip_index = json::array();
    for (const VideoClip& clip : ds.clips) {
        fs::path cdir = fs::path(dir) / "clips" / clip.clip_id;
        fs::create_directories(cdir / "frames");
        int D = clip.num_frames();
        for (int d = 0; d < D; ++d)
            write_png((cdir / "frames" / frame_name(d)).string(), frame_to_image(clip.frames, d));
        {
            std::ofstream lf(cdir / "label.txt");
            for (uint8_t b : clip.label) lf << (b ? '1' : '0');
            lf << "\n";
        }
        if (clip.has_frame_labels()) {
            std::ofstream ff(cdir / "frame_labels.csv");
            ff << "frame";
            for (const std::string& name : ds.class_names) ff << "," << name;
            ff << "\n";
            for (int d = 0; d < D; ++d) {
                ff << d;
                for (uint8_t b : clip.frame_labels[static_cast<size_t>(d)]) ff << "," << (b ? 1 : 0);
                ff << "\n";
            }
        }
        if (clip.has_masks()) {
            fs::create_directories(cdir / "masks");
            int N = clip.masks.dim(3);
            for (int d = 0; d < D; ++d)
                for (int n = 0; n < N; ++n) {
                    bool any = false;
                    for (int x = 0; x < clip.width() && !any; ++x)
                        for (int y = 0; y < clip.height() && !any; ++y)
                            if (clip.masks.at(x, y, d, n)) any = true;
                    if (!any) continue;
                    ImageU8 img;
                    img.width = clip.width();
                    img.height = clip.height();
                    img.channels = 1;
                    img.pixels.resize(static_cast<size_t>(img.width) * img.height);
                    for (int y = 0; y < img.height; ++y)
                        for (int x = 0; x < img.width; ++x)
                            img.at(x, y, 0) = clip.masks.at(x, y, d, n) ? 255 : 0;
                    char buf[48];
                    std::snprintf(buf, sizeof(buf), "%04d_%d.png", d, n);
                    write_png((cdir / "masks" / buf).string(), img);
                }
        }
        json e;
        e["id"] = clip.clip_id;
        e["frames"] = D;
        e["width"] = clip.width();
        e["height"] = clip.height();
        e["channels"] = clip.channels();
        e["has_masks"] = clip.has_masks();
        e["has_frame_labels"] = clip.has_frame_labels();
        clip_index.push_back(e);
    }
    manifest["clips"] = clip_index;
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

ClipDataset load_dataset(const std::string& dir) {
    fs::path mpath = fs::path(dir) / "manifest.json";
    if (!fs::exists(mpath))
        throw std::runtime_error("load_dataset: missing manifest.json in '" + dir + "'");
    json manifest;
    {
        std::ifstream mf(mpath);
        try {
            mf >> manifest;
        } catch (const json::exception& e) {
            throw std::runtime_error("load_dataset: corrupt manifest.json: " + std::string(e.what()));
        }
    }
    int version = manifest.value("schema_version", -1);
    if (version != kDatasetSchemaVersion)
        throw std::runtime_error("load_dataset: unsupported schema version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kDatasetSchemaVersion) + ")");
    ClipDataset ds;
    ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    int N = ds.num_classes();
    for (const auto& e : manifest.at("clips")) {
        VideoClip clip;
        clip.clip_id = e.at("id").get<std::string>();
        int D = e.at("frames").get<int>();
        int W = e.at("width").get<int>(), H = e.at("height").get<int>();
        int ch = e.at("channels").get<int>();
        fs::path cdir = fs::path(dir) / "clips" / clip.clip_id;
        clip.frames = Tensor({W, H, D, ch});
        for (int d = 0; d < D; ++d) {
            ImageU8 img = read_png((cdir / "frames" / frame_name(d)).string());
            if (img.width != W || img.height != H || img.channels != ch)
                throw std::runtime_error("load_dataset: frame size mismatch in clip '" +
                                         clip.clip_id + "'");
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    for (int c = 0; c < ch; ++c)
                        clip.frames.at(x, y, d, c) = static_cast<double>(img.at(x, y, c)) / 255.0;
        }
        {
            std::ifstream lf(cdir / "label.txt");
            std::string bits;
            lf >> bits;
            if (static_cast<int>(bits.size()) != N)
                throw std::runtime_error("load_dataset: label width mismatch in clip '" +
                                         clip.clip_id + "'");
            for (char b : bits) {
                if (b != '0' && b != '1')
                    throw std::runtime_error("load_dataset: label entries must be 0/1 in clip '" +
                                             clip.clip_id + "'");
                clip.label.push_back(b == '1' ? 1 : 0);
            }
        }
        if (e.value("has_frame_labels", false)) {
            std::ifstream ff(cdir / "frame_labels.csv");
            std::string line;
            std::getline(ff, line);  // header
            while (std::getline(ff, line)) {
                if (line.empty()) continue;
                std::vector<uint8_t> row;
                std::stringstream ss(line);
                std::string tok;
                std::getline(ss, tok, ',');  // frame index
                while (std::getline(ss, tok, ',')) row.push_back(tok == "1" ? 1 : 0);
                if (static_cast<int>(row.size()) != N)
                    throw std::runtime_error("load_dataset: frame_labels width mismatch in clip '" +
                                             clip.clip_id + "'");
                clip.frame_labels.push_back(std::move(row));
            }
            if (static_cast<int>(clip.frame_labels.size()) != D)
                throw std::runtime_error("load_dataset: frame_labels row count mismatch in clip '" +
                                         clip.clip_id + "'");
        }
        if (e.value("has_masks", false)) {
            clip.masks = BoolTensor({W, H, D, N});
            fs::path mdir = cdir / "masks";
            if (fs::exists(mdir))
                for (const auto& entry : fs::directory_iterator(mdir)) {
                    std::string name = entry.path().stem().string();
                    size_t us = name.find('_');
                    if (us == std::string::npos) continue;
                    int d = std::stoi(name.substr(0, us));
                    int n = std::stoi(name.substr(us + 1));
                    if (d < 0 || d >= D || n < 0 || n >= N)
                        throw std::runtime_error("load_dataset: mask index out of range: " + name);
                    ImageU8 img = read_png(entry.path().string());
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x)
                            clip.masks.at(x, y, d, n) = img.at(x, y, 0) >= 128 ? 1 : 0;
                }
        }
        ds.clips.push_back(std::move(clip));
    }
    return ds;
}

} // namespace vdst

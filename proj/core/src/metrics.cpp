#include "vdst/metrics.hpp"

#include "vdst/autodiff.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

using nlohmann::json;

namespace vdst {

void MetricsConfig::validate() const {
    if (!(frame_threshold > 0.0 && frame_threshold < 1.0))
        throw std::out_of_range("metrics.frame_threshold must be in (0,1)");
    if (!(hd_percentile > 0.0 && hd_percentile <= 100.0))
        throw std::out_of_range("metrics.hd_percentile must be in (0,100]");
}

namespace {
void check_same_shape(const BoolTensor& a, const BoolTensor& b, const char* op) {
    if (a.shape != b.shape) throw DimensionError(std::string(op) + ": mask shape mismatch");
}
} // namespace

double mask_iou(const BoolTensor& pred, const BoolTensor& gt) {
    check_same_shape(pred, gt, "iou");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) return 1.0;  // both empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_dice(const BoolTensor& pred, const BoolTensor& gt) {
    check_same_shape(pred, gt, "dice");
    int64_t inter = 0, np = 0, ng = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        inter += (p && g) ? 1 : 0;
        np += p ? 1 : 0;
        ng += g ? 1 : 0;
    }
    if (np + ng == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

namespace {
std::vector<std::pair<int, int>> foreground(const BoolTensor& m) {
    std::vector<std::pair<int, int>> pts;
    int W = m.dim(0), H = m.dim(1);
    for (int x = 0; x < W; ++x)
        for (int y = 0; y < H; ++y)
            if (m.at2(x, y)) pts.emplace_back(x, y);
    return pts;
}

// directed distances from each point of `a` to the nearest point of `b`
std::vector<double> directed_min_dists(const std::vector<std::pair<int, int>>& a,
                                       const std::vector<std::pair<int, int>>& b) {
    std::vector<double> out;
    out.reserve(a.size());
    for (const auto& [ax, ay] : a) {
        int64_t best = INT64_MAX;
        for (const auto& [bx, by] : b) {
            int64_t dx = ax - bx, dy = ay - by;
            best = std::min(best, dx * dx + dy * dy);
        }
        out.push_back(std::sqrt(static_cast<double>(best)));
    }
    return out;
}

double rank_percentile(std::vector<double> vals, double p) {
    std::sort(vals.begin(), vals.end());
    if (p >= 100.0) return vals.back();
    size_t idx = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(vals.size())));
    if (idx == 0) idx = 1;
    return vals[std::min(idx - 1, vals.size() - 1)];
}
} // namespace

std::optional<double> hausdorff(const BoolTensor& pred, const BoolTensor& gt, double percentile) {
    if (pred.shape.size() != 2 || gt.shape.size() != 2)
        throw DimensionError("hausdorff: expected 2-d [W,H] masks");
    check_same_shape(pred, gt, "hausdorff");
    auto pf = foreground(pred);
    auto gf = foreground(gt);
    if (pf.empty() || gf.empty()) return std::nullopt;
    double fwd = rank_percentile(directed_min_dists(pf, gf), percentile);
    double bwd = rank_percentile(directed_min_dists(gf, pf), percentile);
    return std::max(fwd, bwd);
}

bool corloc_hit(const std::vector<Box>& pred_boxes, const std::vector<Box>& gt_boxes) {
    for (const Box& p : pred_boxes)
        for (const Box& g : gt_boxes)
            if (box_iou(p, g) > 0.5) return true;
    return false;
}

double video_accuracy(const std::vector<std::vector<double>>& logits,
                      const std::vector<std::vector<uint8_t>>& labels) {
    if (logits.size() != labels.size()) throw DimensionError("video_accuracy: clip count mismatch");
    int64_t correct = 0, total = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (logits[i].size() != labels[i].size())
            throw DimensionError("video_accuracy: class count mismatch");
        for (size_t n = 0; n < logits[i].size(); ++n) {
            bool pred = sigmoid(logits[i][n]) > 0.5;
            bool want = labels[i][n] != 0;
            correct += (pred == want) ? 1 : 0;
            ++total;
        }
    }
    return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::string MetricsReport::to_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["variant"] = variant;
    j["counts"] = {{"clips", clips}, {"frames", frames}};
    j["video_accuracy_percent"] = video_accuracy_percent;
    if (frame_accuracy_available)
        j["frame_accuracy_percent"] = frame_accuracy_percent;
    else
        j["frame_accuracy_percent"] = nullptr;
    if (segmentation_available) {
        json pc = json::array();
        for (const ClassReport& c : per_class) {
            json e;
            e["class"] = c.class_name;
            e["frames_evaluated"] = c.frames_evaluated;
            e["hd_evaluated"] = c.hd_evaluated;
            if (c.frames_evaluated > 0) {
                e["iou_percent"] = c.iou_percent;
                e["dice_percent"] = c.dice_percent;
                e["corloc_percent"] = c.corloc_percent;
            } else {
                e["iou_percent"] = nullptr;
                e["dice_percent"] = nullptr;
                e["corloc_percent"] = nullptr;
            }
            if (c.hd_evaluated > 0)
                e["hd_pixels"] = c.hd_pixels;
            else
                e["hd_pixels"] = nullptr;
            pc.push_back(e);
        }
        j["per_class"] = pc;
        j["mean"] = {{"iou_percent", mean_iou_percent},
                     {"dice_percent", mean_dice_percent},
                     {"hd_pixels", mean_hd_pixels},
                     {"corloc_percent", mean_corloc_percent}};
    } else {
        j["per_class"] = nullptr;
        j["mean"] = nullptr;
    }
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    json j = json::parse(text);
    MetricsReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.variant = j.at("variant").get<std::string>();
    r.clips = j.at("counts").at("clips").get<int64_t>();
    r.frames = j.at("counts").at("frames").get<int64_t>();
    r.video_accuracy_percent = j.at("video_accuracy_percent").get<double>();
    if (!j.at("frame_accuracy_percent").is_null()) {
        r.frame_accuracy_available = true;
        r.frame_accuracy_percent = j.at("frame_accuracy_percent").get<double>();
    }
    if (!j.at("per_class").is_null()) {
        r.segmentation_available = true;
        for (const auto& e : j.at("per_class")) {
            ClassReport c;
            c.class_name = e.at("class").get<std::string>();
            c.frames_evaluated = e.at("frames_evaluated").get<int64_t>();
            c.hd_evaluated = e.at("hd_evaluated").get<int64_t>();
            if (!e.at("iou_percent").is_null()) {
                c.iou_percent = e.at("iou_percent").get<double>();
                c.dice_percent = e.at("dice_percent").get<double>();
                c.corloc_percent = e.at("corloc_percent").get<double>();
            }
            if (!e.at("hd_pixels").is_null()) c.hd_pixels = e.at("hd_pixels").get<double>();
            r.per_class.push_back(c);
        }
        r.mean_iou_percent = j.at("mean").at("iou_percent").get<double>();
        r.mean_dice_percent = j.at("mean").at("dice_percent").get<double>();
        r.mean_hd_pixels = j.at("mean").at("hd_pixels").get<double>();
        r.mean_corloc_percent = j.at("mean").at("corloc_percent").get<double>();
    }
    return r;
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %8s %10s %10s\n", "Class", "V-AC[%]",
                  "F-AC[%]", "IoU[%]", "Dice[%]", "HD[pixel]", "CorLoc[%]");
    os << line;
    auto fmt = [&](const std::string& name, double vac, double fac, const ClassReport* c) {
        std::string iou = "-", dice = "-", hd = "-", cl = "-";
        char buf[32];
        if (c && c->frames_evaluated > 0) {
            std::snprintf(buf, sizeof(buf), "%.2f", c->iou_percent);
            iou = buf;
            std::snprintf(buf, sizeof(buf), "%.2f", c->dice_percent);
            dice = buf;
            std::snprintf(buf, sizeof(buf), "%.2f", c->corloc_percent);
            cl = buf;
        }
        if (c && c->hd_evaluated > 0) {
            std::snprintf(buf, sizeof(buf), "%.2f", c->hd_pixels);
            hd = buf;
        }
        std::string vacs = "-", facs = "-";
        if (vac >= 0) {
            std::snprintf(buf, sizeof(buf), "%.2f", vac);
            vacs = buf;
        }
        if (fac >= 0) {
            std::snprintf(buf, sizeof(buf), "%.2f", fac);
            facs = buf;
        }
        std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %8s %10s %10s\n", name.c_str(),
                      vacs.c_str(), facs.c_str(), iou.c_str(), dice.c_str(), hd.c_str(), cl.c_str());
        os << line;
    };
    if (segmentation_available)
        for (const ClassReport& c : per_class) fmt(c.class_name, -1, -1, &c);
    ClassReport mean;
    mean.frames_evaluated = segmentation_available ? 1 : 0;
    mean.hd_evaluated = segmentation_available ? 1 : 0;
    mean.iou_percent = mean_iou_percent;
    mean.dice_percent = mean_dice_percent;
    mean.hd_pixels = mean_hd_pixels;
    mean.corloc_percent = mean_corloc_percent;
    fmt("mean (" + variant + ")", video_accuracy_percent,
        frame_accuracy_available ? frame_accuracy_percent : -1.0,
        segmentation_available ? &mean : nullptr);
    return os.str();
}

} // namespace vdst

#include "vdst/pooling.hpp"

#include <cmath>
#include <stdexcept>

namespace vdst {

int PoolingConfig::k1_for(int w, int h) const {
    int wh = w * h;
    int k = static_cast<int>(std::ceil(k1_fraction * wh));
    return std::max(1, std::min(k, wh));
}

int PoolingConfig::k2_for(int frames) const {
    int k = static_cast<int>(std::ceil(k2_fraction * frames));
    return std::max(1, std::min(k, frames));
}

void PoolingConfig::validate() const {
    if (!(k1_fraction > 0.0 && k1_fraction <= 1.0))
        throw std::invalid_argument("pooling.k1_fraction must be in (0,1]");
    if (!(k2_fraction > 0.0 && k2_fraction <= 1.0))
        throw std::invalid_argument("pooling.k2_fraction must be in (0,1]");
}

std::string to_string(PoolingConfig::Mode m) {
    switch (m) {
        case PoolingConfig::Mode::ranked_topk: return "ranked_topk";
        case PoolingConfig::Mode::average: return "average";
        case PoolingConfig::Mode::max: return "max";
    }
    return "ranked_topk";
}

PoolingConfig::Mode pooling_mode_from_string(const std::string& s) {
    if (s == "ranked_topk") return PoolingConfig::Mode::ranked_topk;
    if (s == "average") return PoolingConfig::Mode::average;
    if (s == "max") return PoolingConfig::Mode::max;
    throw std::invalid_argument("pooling.mode: unknown mode '" + s + "'");
}

Tensor ranked_topk_spatial(const Tensor& F, int k1) {
    return topk_spatial(constant(F), k1)->val;
}

Tensor ranked_topk_temporal(const Tensor& S, int k2) {
    return topk_temporal(constant(S), k2)->val;
}

namespace {
void resolve_k(const Tensor& shape_src, const PoolingConfig& cfg, int& k1, int& k2) {
    int w = shape_src.dim(0), h = shape_src.dim(1), D = shape_src.dim(2);
    switch (cfg.mode) {
        case PoolingConfig::Mode::ranked_topk:
            k1 = cfg.k1_for(w, h);
            k2 = cfg.k2_for(D);
            break;
        case PoolingConfig::Mode::average:
            k1 = w * h;
            k2 = D;
            break;
        case PoolingConfig::Mode::max:
            k1 = 1;
            k2 = 1;
            break;
    }
}
} // namespace

Tensor pool(const Tensor& F, const PoolingConfig& cfg) {
    return pool(constant(F), cfg)->val;
}

Var pool(const Var& F, const PoolingConfig& cfg) {
    if (F->val.ndim() != 4) throw DimensionError("pool: expected [w,h,D,C] input");
    int k1 = 1, k2 = 1;
    resolve_k(F->val, cfg, k1, k2);
    return topk_temporal(topk_spatial(F, k1), k2);
}

} // namespace vdst

#pragma once

#include "vdst/autodiff.hpp"
#include "vdst/tensor.hpp"

#include <string>

namespace vdst {

// Ranked top-k spatial/temporal pooling. average and max are exact special
// cases (k = all and k = 1); ties at the k-th rank are broken by stable
// flattened-index order, and the selected values are summed in rank order so
// the result is invariant to spatial/frame permutations bit for bit.
struct PoolingConfig {
    enum class Mode { ranked_topk, average, max };
    Mode mode = Mode::ranked_topk;
    double k1_fraction = 0.10;
    double k2_fraction = 0.40;

    int k1_for(int w, int h) const;
    int k2_for(int frames) const;
    void validate() const;
};

std::string to_string(PoolingConfig::Mode m);
PoolingConfig::Mode pooling_mode_from_string(const std::string& s);

// [w,h,D,C] -> [1,1,D,C]: per (frame, channel) mean of the k1 largest values
Tensor ranked_topk_spatial(const Tensor& F, int k1);
// [1,1,D,C] -> [1,1,1,C]: per channel mean of the k2 largest values
Tensor ranked_topk_temporal(const Tensor& S, int k2);
// spatial then temporal pooling under cfg's mode
Tensor pool(const Tensor& F, const PoolingConfig& cfg);

// autodiff path used by the teacher/student heads
Var pool(const Var& F, const PoolingConfig& cfg);

} // namespace vdst

#pragma once

#include "vdst/rng.hpp"
#include "vdst/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace vdst {

// Reverse-mode autodiff over Tensor. Graphs are built per forward pass and
// freed when the root Var goes out of scope; parameters are long-lived leaf
// nodes whose grads accumulate across backward calls until zeroed.
struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backfn;

    void ensure_grad() {
        if (grad.shape != val.shape) grad = Tensor(val.shape);
    }
    void zero_grad() {
        if (grad.shape != val.shape) grad = Tensor(val.shape);
        else std::fill(grad.v.begin(), grad.v.end(), 0.0);
    }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor t);
Var make_param(Tensor t);

// Reverse pass from a scalar root. `seed` is the incoming gradient, used by
// the trainer to average per-clip losses over a batch.
void backward(const Var& root, double seed = 1.0);

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
inline double softplus(double x) {
    // max(x,0) + log1p(exp(-|x|)), no overflow for |x| up to 1e4 and beyond
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Tensor xavier_uniform(int fan_in, int fan_out, std::vector<int> shape, Pcg32& rng);

Var detach(const Var& x);
Var add(const Var& a, const Var& b);
Var add_scaled(const Var& a, const Var& b, double alpha);
Var relu(const Var& x);
Var dropout(const Var& x, double rate, Pcg32& rng);
Var reshape(const Var& x, std::vector<int> shape);

// x viewed as [M, Cin] with M = product of leading dims; W [Cin, Cout];
// optional bias [Cout] (pass nullptr to skip).
Var linear(const Var& x, const Var& W, const Var& b);

// frame-local ops on [w,h,D,C]
Var spatial_mean(const Var& x);                     // -> [1,1,D,C]
Var broadcast_spatial(const Var& s, int w, int h);  // [1,1,D,C] -> [w,h,D,C]
Var avgpool_spatial2(const Var& x);                 // 2x2/stride-2 average, floor
Var upsample_bilinear(const Var& x, int w, int h);  // spatial only, per frame

// W [kt*ks*ks*Cin, Cout], symmetric zero padding, stride 1
Var conv3d(const Var& x, const Var& W, const Var& b, int kt, int ks);

// ranked top-k average pooling; subgradient 1/k on selected entries
Var topk_spatial(const Var& x, int k1);   // [w,h,D,C] -> [1,1,D,C]
Var topk_temporal(const Var& x, int k2);  // [1,1,D,C] -> [1,1,1,C]

// mean over classes of y*softplus(-x) + (1-y)*softplus(x)
Var multilabel_soft_margin(const Var& logits, const std::vector<uint8_t>& labels);

// mean((gate*(ms-mt))^2) over all elements; gate [1,1,D,N] broadcast over
// (w,h); mt and gate are plain tensors, so no gradient reaches the teacher
Var gated_mse(const Var& ms, const Tensor& mt, const Tensor& gate);

} // namespace vdst

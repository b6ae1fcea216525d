#include "vdst/heads.hpp"

#include <stdexcept>

namespace vdst {

TeacherHead make_teacher_head(int in_channels, int hidden, int out_channels, int num_classes,
                              uint64_t seed) {
    if (in_channels < 1 || hidden < 1 || out_channels < 1 || num_classes < 1)
        throw std::invalid_argument("make_teacher_head: channel/class counts must be >= 1");
    TeacherHead head;
    head.in_channels = in_channels;
    head.hidden = hidden;
    head.out_channels = out_channels;
    head.num_classes = num_classes;
    Pcg32 rng = make_stream(seed, RngStream::teacher_init);
    int widths[5] = {in_channels, hidden, hidden, hidden, out_channels};
    for (int l = 0; l < 4; ++l) {
        head.mlp_W.push_back(make_param(xavier_uniform(widths[l], widths[l + 1],
                                                       {widths[l], widths[l + 1]}, rng)));
        head.mlp_b.push_back(make_param(Tensor({widths[l + 1]})));
    }
    head.fc_W = make_param(xavier_uniform(out_channels, num_classes, {out_channels, num_classes}, rng));
    head.fc_b = make_param(Tensor({num_classes}));
    return head;
}

std::vector<Var> TeacherHead::parameters() const {
    std::vector<Var> ps;
    for (size_t l = 0; l < mlp_W.size(); ++l) {
        ps.push_back(mlp_W[l]);
        ps.push_back(mlp_b[l]);
    }
    ps.push_back(fc_W);
    ps.push_back(fc_b);
    return ps;
}

int64_t TeacherHead::param_count() const {
    int64_t n = 0;
    for (const Var& p : parameters()) n += p->val.size();
    return n;
}

HeadOutput teacher_forward(const Var& tokens, const TeacherHead& head, const ForwardOptions& opts,
                           const PoolingConfig& cfg) {
    if (tokens->val.ndim() != 4) throw DimensionError("teacher_forward: tokens must be [w,h,D,C_e]");
    if (tokens->val.dim(3) != head.in_channels)
        throw DimensionError("teacher_forward: token embed dim does not match head input");
    if (opts.downsample_prob < 0.0 || opts.downsample_prob > 1.0)
        throw std::invalid_argument("teacher_forward: downsample_prob must be in [0,1]");
    int w = tokens->val.dim(0), h = tokens->val.dim(1);

    Var x = tokens;
    for (size_t l = 0; l < head.mlp_W.size(); ++l) {
        x = relu(linear(x, head.mlp_W[l], head.mlp_b[l]));
        if (opts.train && opts.downsample_prob > 0.0) {
            bool draw = opts.downsample_rng->bernoulli(opts.downsample_prob);
            // halving is skipped once a spatial dim would drop below 2
            if (draw && x->val.dim(0) / 2 >= 2 && x->val.dim(1) / 2 >= 2) x = avgpool_spatial2(x);
        }
    }
    if (x->val.dim(0) != w || x->val.dim(1) != h) x = upsample_bilinear(x, w, h);
    if (opts.train && opts.dropout_rate > 0.0) x = dropout(x, opts.dropout_rate, *opts.dropout_rng);

    Var pooled = reshape(pool(x, cfg), {1, head.out_channels});
    Var logits = reshape(linear(pooled, head.fc_W, head.fc_b), {head.num_classes});
    return HeadOutput{x, logits};
}

Var teacher_stcam(const Var& F_t, const TeacherHead& head) {
    if (F_t->val.ndim() != 4 || F_t->val.dim(3) != head.out_channels)
        throw DimensionError("teacher_stcam: feature volume does not match classifier");
    return relu(linear(F_t, head.fc_W, nullptr));
}

Tensor teacher_stcam(const Tensor& F_t, const TeacherHead& head) {
    return teacher_stcam(constant(F_t), head)->val;
}

} // namespace vdst

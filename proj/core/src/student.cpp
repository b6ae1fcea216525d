#include "vdst/heads.hpp"

#include <stdexcept>

namespace vdst {

StudentHead make_student_head(int in_channels, int hidden, int out_channels, int num_classes,
                              int temporal_kernel, uint64_t seed) {
    if (in_channels < 1 || hidden < 1 || out_channels < 1 || num_classes < 1)
        throw std::invalid_argument("make_student_head: channel/class counts must be >= 1");
    if (temporal_kernel < 3 || temporal_kernel % 2 == 0)
        throw std::invalid_argument(
            "make_student_head: temporal_kernel must be odd and >= 3 (the head must mix frames)");
    StudentHead head;
    head.in_channels = in_channels;
    head.hidden = hidden;
    head.out_channels = out_channels;
    head.num_classes = num_classes;
    head.temporal_kernel = temporal_kernel;
    Pcg32 rng = make_stream(seed, RngStream::student_init);
    int widths[5] = {in_channels, hidden, hidden, hidden, out_channels};
    int kvol = temporal_kernel * 3 * 3;
    for (int l = 0; l < 4; ++l) {
        int fan_in = kvol * widths[l];
        int fan_out = kvol * widths[l + 1];
        head.conv_W.push_back(
            make_param(xavier_uniform(fan_in, fan_out, {kvol * widths[l], widths[l + 1]}, rng)));
        head.conv_b.push_back(make_param(Tensor({widths[l + 1]})));
    }
    head.fc_W = make_param(xavier_uniform(out_channels, num_classes, {out_channels, num_classes}, rng));
    head.fc_b = make_param(Tensor({num_classes}));
    return head;
}

std::vector<Var> StudentHead::parameters() const {
    std::vector<Var> ps;
    for (size_t l = 0; l < conv_W.size(); ++l) {
        ps.push_back(conv_W[l]);
        ps.push_back(conv_b[l]);
    }
    ps.push_back(fc_W);
    ps.push_back(fc_b);
    return ps;
}

int64_t StudentHead::param_count() const {
    int64_t n = 0;
    for (const Var& p : parameters()) n += p->val.size();
    return n;
}

HeadOutput student_forward(const Var& tokens, const StudentHead& head, const ForwardOptions& opts,
                           const PoolingConfig& cfg) {
    if (tokens->val.ndim() != 4) throw DimensionError("student_forward: tokens must be [w,h,D,C_e]");
    if (tokens->val.dim(3) != head.in_channels)
        throw DimensionError("student_forward: token embed dim does not match head input");

    Var x = tokens;
    for (size_t l = 0; l < head.conv_W.size(); ++l)
        x = relu(conv3d(x, head.conv_W[l], head.conv_b[l], head.temporal_kernel, 3));
    if (opts.train && opts.dropout_rate > 0.0) x = dropout(x, opts.dropout_rate, *opts.dropout_rng);

    Var pooled = reshape(pool(x, cfg), {1, head.out_channels});
    Var logits = reshape(linear(pooled, head.fc_W, head.fc_b), {head.num_classes});
    return HeadOutput{x, logits};
}

Var student_stcam(const Var& F_s, const StudentHead& head) {
    if (F_s->val.ndim() != 4 || F_s->val.dim(3) != head.out_channels)
        throw DimensionError("student_stcam: feature volume does not match classifier");
    return relu(linear(F_s, head.fc_W, nullptr));
}

Tensor student_stcam(const Tensor& F_s, const StudentHead& head) {
    return student_stcam(constant(F_s), head)->val;
}

} // namespace vdst

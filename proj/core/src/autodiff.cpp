#include "vdst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace vdst {

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    return n;
}

Var make_param(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    return n;
}

static Var make(Tensor val, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    parents.erase(std::remove(parents.begin(), parents.end(), nullptr), parents.end());
    bool rg = false;
    for (const auto& p : parents)
        if (p->requires_grad) rg = true;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->backfn = std::move(fn);
    }
    return n;
}

void backward(const Var& root, double seed) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->val.size() != 1) throw DimensionError("backward: root must be scalar");
    if (!root->requires_grad) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad.v[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backfn) (*it)->backfn(**it);
}

Tensor xavier_uniform(int fan_in, int fan_out, std::vector<int> shape, Pcg32& rng) {
    Tensor t(std::move(shape));
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.v) v = rng.uniform(-limit, limit);
    return t;
}

Var detach(const Var& x) { return constant(x->val); }

Var add(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw DimensionError("add: shape mismatch");
    Tensor out = a->val;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b->val[i];
    return make(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i) b->grad[i] += n.grad[i];
        }
    });
}

Var add_scaled(const Var& a, const Var& b, double alpha) {
    if (!a->val.same_shape(b->val)) throw DimensionError("add_scaled: shape mismatch");
    Tensor out = a->val;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += alpha * b->val[i];
    return make(std::move(out), {a, b}, [a, b, alpha](Node& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int64_t i = 0; i < n.grad.size(); ++i) b->grad[i] += alpha * n.grad[i];
        }
    });
}

Var relu(const Var& x) {
    Tensor out = x->val;
    for (double& v : out.v)
        if (v < 0.0) v = 0.0;
    return make(std::move(out), {x}, [x](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int64_t i = 0; i < n.grad.size(); ++i)
            if (x->val[i] > 0.0) x->grad[i] += n.grad[i];
    });
}

Var dropout(const Var& x, double rate, Pcg32& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (rate == 0.0) return x;
    double scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(x->val.size()));
    Tensor out = x->val;
    for (int64_t i = 0; i < out.size(); ++i) {
        double m = rng.uniform() >= rate ? scale : 0.0;
        (*mask)[static_cast<size_t>(i)] = m;
        out[i] *= m;
    }
    return make(std::move(out), {x}, [x, mask](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int64_t i = 0; i < n.grad.size(); ++i)
            x->grad[i] += n.grad[i] * (*mask)[static_cast<size_t>(i)];
    });
}

Var reshape(const Var& x, std::vector<int> shape) {
    Tensor out = x->val.reshaped(std::move(shape));
    return make(std::move(out), {x}, [x](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int64_t i = 0; i < n.grad.size(); ++i) x->grad[i] += n.grad[i];
    });
}

Var linear(const Var& x, const Var& W, const Var& b) {
    if (W->val.ndim() != 2) throw DimensionError("linear: W must be 2-d");
    int cin = W->val.dim(0), cout = W->val.dim(1);
    if (x->val.ndim() < 1 || x->val.shape.back() != cin)
        throw DimensionError("linear: input channels " + x->val.shape_str() + " do not match W " +
                             W->val.shape_str());
    int64_t m64 = x->val.size() / cin;
    int M = static_cast<int>(m64);
    std::vector<int> out_shape = x->val.shape;
    out_shape.back() = cout;
    Tensor out(out_shape);
    gemm_nn(M, cout, cin, x->val.data(), W->val.data(), out.data(), false);
    if (b) {
        if (b->val.size() != cout) throw DimensionError("linear: bias size mismatch");
        for (int i = 0; i < M; ++i) {
            double* row = out.data() + static_cast<int64_t>(i) * cout;
            for (int j = 0; j < cout; ++j) row[j] += b->val[j];
        }
    }
    return make(std::move(out), {x, W, b}, [x, W, b, M, cin, cout](Node& n) {
        if (x->requires_grad) {
            x->ensure_grad();
            gemm_nt(M, cin, cout, n.grad.data(), W->val.data(), x->grad.data(), true);
        }
        if (W->requires_grad) {
            W->ensure_grad();
            gemm_tn(cin, cout, M, x->val.data(), n.grad.data(), W->grad.data(), true);
        }
        if (b && b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < M; ++i) {
                const double* row = n.grad.data() + static_cast<int64_t>(i) * cout;
                for (int j = 0; j < cout; ++j) b->grad[j] += row[j];
            }
        }
    });
}

static void check4(const Var& x, const char* op) {
    if (x->val.ndim() != 4) throw DimensionError(std::string(op) + ": expected 4-d tensor");
}

Var spatial_mean(const Var& x) {
    check4(x, "spatial_mean");
    int w = x->val.dim(0), h = x->val.dim(1), D = x->val.dim(2), C = x->val.dim(3);
    Tensor out({1, 1, D, C});
    double inv = 1.0 / (static_cast<double>(w) * h);
    for (int sx = 0; sx < w; ++sx)
        for (int sy = 0; sy < h; ++sy)
            for (int d = 0; d < D; ++d)
                for (int c = 0; c < C; ++c) out.at(0, 0, d, c) += x->val.at(sx, sy, d, c);
    for (double& v : out.v) v *= inv;
    return make(std::move(out), {x}, [x, w, h, D, C, inv](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int sx = 0; sx < w; ++sx)
            for (int sy = 0; sy < h; ++sy)
                for (int d = 0; d < D; ++d)
                    for (int c = 0; c < C; ++c)
                        x->grad.at(sx, sy, d, c) += n.grad.at(0, 0, d, c) * inv;
    });
}

Var broadcast_spatial(const Var& s, int w, int h) {
    check4(s, "broadcast_spatial");
    if (s->val.dim(0) != 1 || s->val.dim(1) != 1)
        throw DimensionError("broadcast_spatial: source must be [1,1,D,C]");
    int D = s->val.dim(2), C = s->val.dim(3);
    Tensor out({w, h, D, C});
    for (int sx = 0; sx < w; ++sx)
        for (int sy = 0; sy < h; ++sy)
            for (int d = 0; d < D; ++d)
                for (int c = 0; c < C; ++c) out.at(sx, sy, d, c) = s->val.at(0, 0, d, c);
    return make(std::move(out), {s}, [s, w, h, D, C](Node& n) {
        if (!s->requires_grad) return;
        s->ensure_grad();
        for (int sx = 0; sx < w; ++sx)
            for (int sy = 0; sy < h; ++sy)
                for (int d = 0; d < D; ++d)
                    for (int c = 0; c < C; ++c) s->grad.at(0, 0, d, c) += n.grad.at(sx, sy, d, c);
    });
}

Var avgpool_spatial2(const Var& x) {
    check4(x, "avgpool_spatial2");
    int w = x->val.dim(0), h = x->val.dim(1), D = x->val.dim(2), C = x->val.dim(3);
    int w2 = w / 2, h2 = h / 2;
    if (w2 < 1 || h2 < 1) throw DimensionError("avgpool_spatial2: spatial dims too small");
    Tensor out({w2, h2, D, C});
    for (int ox = 0; ox < w2; ++ox)
        for (int oy = 0; oy < h2; ++oy)
            for (int d = 0; d < D; ++d)
                for (int c = 0; c < C; ++c)
                    out.at(ox, oy, d, c) =
                        0.25 * (x->val.at(2 * ox, 2 * oy, d, c) + x->val.at(2 * ox + 1, 2 * oy, d, c) +
                                x->val.at(2 * ox, 2 * oy + 1, d, c) + x->val.at(2 * ox + 1, 2 * oy + 1, d, c));
    return make(std::move(out), {x}, [x, w2, h2, D, C](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int ox = 0; ox < w2; ++ox)
            for (int oy = 0; oy < h2; ++oy)
                for (int d = 0; d < D; ++d)
                    for (int c = 0; c < C; ++c) {
                        double g = 0.25 * n.grad.at(ox, oy, d, c);
                        x->grad.at(2 * ox, 2 * oy, d, c) += g;
                        x->grad.at(2 * ox + 1, 2 * oy, d, c) += g;
                        x->grad.at(2 * ox, 2 * oy + 1, d, c) += g;
                        x->grad.at(2 * ox + 1, 2 * oy + 1, d, c) += g;
                    }
    });
}

namespace {
struct LerpAxis {
    int i0, i1;
    double f;
};
// align_corners=false source coordinate
LerpAxis lerp_axis(int o, int out_n, int in_n) {
    double s = (o + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
    if (s < 0.0) s = 0.0;
    if (s > in_n - 1) s = in_n - 1;
    int i0 = static_cast<int>(std::floor(s));
    if (i0 > in_n - 1) i0 = in_n - 1;
    int i1 = std::min(i0 + 1, in_n - 1);
    return {i0, i1, s - i0};
}
} // namespace

Var upsample_bilinear(const Var& x, int w, int h) {
    check4(x, "upsample_bilinear");
    int wi = x->val.dim(0), hi = x->val.dim(1), D = x->val.dim(2), C = x->val.dim(3);
    Tensor out({w, h, D, C});
    for (int ox = 0; ox < w; ++ox) {
        LerpAxis ax = lerp_axis(ox, w, wi);
        for (int oy = 0; oy < h; ++oy) {
            LerpAxis ay = lerp_axis(oy, h, hi);
            for (int d = 0; d < D; ++d)
                for (int c = 0; c < C; ++c)
                    out.at(ox, oy, d, c) =
                        (1 - ax.f) * (1 - ay.f) * x->val.at(ax.i0, ay.i0, d, c) +
                        ax.f * (1 - ay.f) * x->val.at(ax.i1, ay.i0, d, c) +
                        (1 - ax.f) * ay.f * x->val.at(ax.i0, ay.i1, d, c) +
                        ax.f * ay.f * x->val.at(ax.i1, ay.i1, d, c);
        }
    }
    return make(std::move(out), {x}, [x, w, h, wi, hi, D, C](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int ox = 0; ox < w; ++ox) {
            LerpAxis ax = lerp_axis(ox, w, wi);
            for (int oy = 0; oy < h; ++oy) {
                LerpAxis ay = lerp_axis(oy, h, hi);
                for (int d = 0; d < D; ++d)
                    for (int c = 0; c < C; ++c) {
                        double g = n.grad.at(ox, oy, d, c);
                        x->grad.at(ax.i0, ay.i0, d, c) += (1 - ax.f) * (1 - ay.f) * g;
                        x->grad.at(ax.i1, ay.i0, d, c) += ax.f * (1 - ay.f) * g;
                        x->grad.at(ax.i0, ay.i1, d, c) += (1 - ax.f) * ay.f * g;
                        x->grad.at(ax.i1, ay.i1, d, c) += ax.f * ay.f * g;
                    }
            }
        }
    });
}

Var conv3d(const Var& x, const Var& W, const Var& b, int kt, int ks) {
    check4(x, "conv3d");
    if (kt < 1 || kt % 2 == 0 || ks < 1 || ks % 2 == 0)
        throw std::invalid_argument("conv3d: kernel extents must be odd and >= 1");
    int w = x->val.dim(0), h = x->val.dim(1), D = x->val.dim(2), cin = x->val.dim(3);
    int K = kt * ks * ks * cin;
    if (W->val.ndim() != 2 || W->val.dim(0) != K)
        throw DimensionError("conv3d: weight rows must equal kt*ks*ks*Cin");
    int cout = W->val.dim(1);
    int pt = (kt - 1) / 2, psp = (ks - 1) / 2;
    int M = w * h * D;

    auto col = std::make_shared<Tensor>(std::vector<int>{M, K});
    {
        double* cp = col->data();
        for (int sx = 0; sx < w; ++sx)
            for (int sy = 0; sy < h; ++sy)
                for (int d = 0; d < D; ++d) {
                    for (int dt = 0; dt < kt; ++dt) {
                        int dd = d + dt - pt;
                        for (int dx = 0; dx < ks; ++dx) {
                            int xx = sx + dx - psp;
                            for (int dy = 0; dy < ks; ++dy) {
                                int yy = sy + dy - psp;
                                if (dd >= 0 && dd < D && xx >= 0 && xx < w && yy >= 0 && yy < h) {
                                    const double* src = x->val.data() + x->val.idx4(xx, yy, dd, 0);
                                    for (int c = 0; c < cin; ++c) cp[c] = src[c];
                                } else {
                                    for (int c = 0; c < cin; ++c) cp[c] = 0.0;
                                }
                                cp += cin;
                            }
                        }
                    }
                }
    }
    Tensor out({w, h, D, cout});
    gemm_nn(M, cout, K, col->data(), W->val.data(), out.data(), false);
    if (b) {
        if (b->val.size() != cout) throw DimensionError("conv3d: bias size mismatch");
        for (int i = 0; i < M; ++i) {
            double* row = out.data() + static_cast<int64_t>(i) * cout;
            for (int j = 0; j < cout; ++j) row[j] += b->val[j];
        }
    }
    return make(std::move(out), {x, W, b},
                [x, W, b, col, M, K, kt, ks, pt, psp, w, h, D, cin, cout](Node& n) {
        if (W->requires_grad) {
            W->ensure_grad();
            gemm_tn(K, cout, M, col->data(), n.grad.data(), W->grad.data(), true);
        }
        if (b && b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < M; ++i) {
                const double* row = n.grad.data() + static_cast<int64_t>(i) * cout;
                for (int j = 0; j < cout; ++j) b->grad[j] += row[j];
            }
        }
        if (x->requires_grad) {
            x->ensure_grad();
            Tensor dcol({M, K});
            gemm_nt(M, K, cout, n.grad.data(), W->val.data(), dcol.data(), false);
            const double* cp = dcol.data();
            for (int sx = 0; sx < w; ++sx)
                for (int sy = 0; sy < h; ++sy)
                    for (int d = 0; d < D; ++d) {
                        for (int dt = 0; dt < kt; ++dt) {
                            int dd = d + dt - pt;
                            for (int dx = 0; dx < ks; ++dx) {
                                int xx = sx + dx - psp;
                                for (int dy = 0; dy < ks; ++dy) {
                                    int yy = sy + dy - psp;
                                    if (dd >= 0 && dd < D && xx >= 0 && xx < w && yy >= 0 && yy < h) {
                                        double* dst = x->grad.data() + x->grad.idx4(xx, yy, dd, 0);
                                        for (int c = 0; c < cin; ++c) dst[c] += cp[c];
                                    }
                                    cp += cin;
                                }
                            }
                        }
                    }
        }
    });
}

namespace {
// indices of the k largest values among `cnt` strided entries, ordered by
// (value desc, index asc); returns selected source offsets in that order
void select_topk(const double* base, int64_t stride, int cnt, int k, std::vector<int>& scratch,
                 int64_t* out_offsets) {
    scratch.resize(static_cast<size_t>(cnt));
    std::iota(scratch.begin(), scratch.end(), 0);
    std::stable_sort(scratch.begin(), scratch.end(),
                     [&](int a, int bidx) { return base[a * stride] > base[bidx * stride]; });
    for (int r = 0; r < k; ++r) out_offsets[r] = scratch[static_cast<size_t>(r)] * stride;
}
} // namespace

Var topk_spatial(const Var& x, int k1) {
    check4(x, "topk_spatial");
    int w = x->val.dim(0), h = x->val.dim(1), D = x->val.dim(2), C = x->val.dim(3);
    int wh = w * h;
    if (k1 < 1 || k1 > wh) throw std::out_of_range("topk_spatial: k1 out of range [1," + std::to_string(wh) + "]");
    Tensor out({1, 1, D, C});
    auto sel = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(D) * C * k1);
    std::vector<int> scratch;
    int64_t spatial_stride = static_cast<int64_t>(D) * C;
    for (int d = 0; d < D; ++d)
        for (int c = 0; c < C; ++c) {
            const double* base = x->val.data() + static_cast<int64_t>(d) * C + c;
            int64_t* offs = sel->data() + (static_cast<int64_t>(d) * C + c) * k1;
            select_topk(base, spatial_stride, wh, k1, scratch, offs);
            double s = 0.0;
            for (int r = 0; r < k1; ++r) s += base[offs[r]];
            out.at(0, 0, d, c) = s / k1;
        }
    return make(std::move(out), {x}, [x, sel, D, C, k1](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        double invk = 1.0 / k1;
        for (int d = 0; d < D; ++d)
            for (int c = 0; c < C; ++c) {
                double g = n.grad.at(0, 0, d, c) * invk;
                int64_t base = static_cast<int64_t>(d) * C + c;
                const int64_t* offs = sel->data() + base * k1;
                for (int r = 0; r < k1; ++r) x->grad[base + offs[r]] += g;
            }
    });
}

Var topk_temporal(const Var& x, int k2) {
    check4(x, "topk_temporal");
    if (x->val.dim(0) != 1 || x->val.dim(1) != 1)
        throw DimensionError("topk_temporal: expected [1,1,D,C] input");
    int D = x->val.dim(2), C = x->val.dim(3);
    if (k2 < 1 || k2 > D) throw std::out_of_range("topk_temporal: k2 out of range [1," + std::to_string(D) + "]");
    Tensor out({1, 1, 1, C});
    auto sel = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(C) * k2);
    std::vector<int> scratch;
    for (int c = 0; c < C; ++c) {
        const double* base = x->val.data() + c;
        int64_t* offs = sel->data() + static_cast<int64_t>(c) * k2;
        select_topk(base, C, D, k2, scratch, offs);
        double s = 0.0;
        for (int r = 0; r < k2; ++r) s += base[offs[r]];
        out.at(0, 0, 0, c) = s / k2;
    }
    return make(std::move(out), {x}, [x, sel, C, k2](Node& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        double invk = 1.0 / k2;
        for (int c = 0; c < C; ++c) {
            double g = n.grad.at(0, 0, 0, c) * invk;
            const int64_t* offs = sel->data() + static_cast<int64_t>(c) * k2;
            for (int r = 0; r < k2; ++r) x->grad[c + offs[r]] += g;
        }
    });
}

Var multilabel_soft_margin(const Var& logits, const std::vector<uint8_t>& labels) {
    int64_t N = logits->val.size();
    if (N != static_cast<int64_t>(labels.size()))
        throw DimensionError("multilabel_soft_margin: label count mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < N; ++i) {
        double x = logits->val[i];
        s += labels[static_cast<size_t>(i)] ? softplus(-x) : softplus(x);
    }
    Tensor out({1});
    out[0] = s / static_cast<double>(N);
    auto lab = std::make_shared<std::vector<uint8_t>>(labels);
    return make(std::move(out), {logits}, [logits, lab, N](Node& n) {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        double g = n.grad[0] / static_cast<double>(N);
        for (int64_t i = 0; i < N; ++i) {
            double y = (*lab)[static_cast<size_t>(i)] ? 1.0 : 0.0;
            logits->grad[i] += g * (sigmoid(logits->val[i]) - y);
        }
    });
}

Var gated_mse(const Var& ms, const Tensor& mt, const Tensor& gate) {
    if (!ms->val.same_shape(mt)) throw DimensionError("gated_mse: CAM shape mismatch");
    if (ms->val.ndim() != 4) throw DimensionError("gated_mse: expected 4-d CAMs");
    int w = ms->val.dim(0), h = ms->val.dim(1), D = ms->val.dim(2), N = ms->val.dim(3);
    if (gate.ndim() != 4 || gate.dim(0) != 1 || gate.dim(1) != 1 || gate.dim(2) != D || gate.dim(3) != N)
        throw DimensionError("gated_mse: gate must be [1,1,D,N]");
    int64_t count = ms->val.size();
    double s = 0.0;
    for (int sx = 0; sx < w; ++sx)
        for (int sy = 0; sy < h; ++sy)
            for (int d = 0; d < D; ++d)
                for (int c = 0; c < N; ++c) {
                    double g = gate.at(0, 0, d, c);
                    double diff = g * (ms->val.at(sx, sy, d, c) - mt.at(sx, sy, d, c));
                    s += diff * diff;
                }
    Tensor out({1});
    out[0] = s / static_cast<double>(count);
    auto mtc = std::make_shared<Tensor>(mt);
    auto gc = std::make_shared<Tensor>(gate);
    return make(std::move(out), {ms}, [ms, mtc, gc, w, h, D, N, count](Node& n) {
        if (!ms->requires_grad) return;
        ms->ensure_grad();
        double scale = 2.0 * n.grad[0] / static_cast<double>(count);
        for (int sx = 0; sx < w; ++sx)
            for (int sy = 0; sy < h; ++sy)
                for (int d = 0; d < D; ++d)
                    for (int c = 0; c < N; ++c) {
                        double g = gc->at(0, 0, d, c);
                        ms->grad.at(sx, sy, d, c) += scale * g * g *
                                                     (ms->val.at(sx, sy, d, c) - mtc->at(sx, sy, d, c));
                    }
    });
}

} // namespace vdst

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vdst/autodiff.hpp"
#include "vdst/rng.hpp"

#include "test_util.hpp"

#include <cmath>
#include <functional>

using namespace vdst;
using vdst::testutil::random_tensor;
using vdst::testutil::weighted_sum;

namespace {

// central finite differences of a scalar-valued rebuild function against the
// analytic gradient produced by one backward pass
void check_grad(const std::function<Var(const Var&)>& f, Tensor x0, double tol = 1e-6) {
    Var x = make_param(x0);
    Var y = f(x);
    REQUIRE(y->val.size() == 1);
    x->zero_grad();
    backward(y);
    const double h = 1e-5;
    for (int64_t i = 0; i < x0.size(); ++i) {
        Tensor xp = x0, xm = x0;
        xp[i] += h;
        xm[i] -= h;
        double fp = f(constant(xp))->val[0];
        double fm = f(constant(xm))->val[0];
        double fd = (fp - fm) / (2 * h);
        CHECK(x->grad[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
}

} // namespace

TEST_CASE("linear matches finite differences") {
    Pcg32 rng(7, 1);
    Tensor W0 = random_tensor({3, 4}, rng);
    Tensor b0 = random_tensor({4}, rng);
    Tensor wts = random_tensor({5, 4}, rng);
    Tensor x0 = random_tensor({5, 3}, rng);

    check_grad([&](const Var& x) { return weighted_sum(linear(x, constant(W0), constant(b0)), wts); }, x0);

    // and for the weight/bias sides
    Var W = make_param(W0);
    Var b = make_param(b0);
    Var y = weighted_sum(linear(constant(x0), W, b), wts);
    W->zero_grad();
    b->zero_grad();
    backward(y);
    const double h = 1e-5;
    for (int64_t i = 0; i < W0.size(); ++i) {
        Tensor wp = W0, wm = W0;
        wp[i] += h;
        wm[i] -= h;
        double fp = weighted_sum(linear(constant(x0), constant(wp), constant(b0)), wts)->val[0];
        double fm = weighted_sum(linear(constant(x0), constant(wm), constant(b0)), wts)->val[0];
        CHECK(W->grad[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
    for (int64_t i = 0; i < b0.size(); ++i) {
        Tensor bp = b0, bm = b0;
        bp[i] += h;
        bm[i] -= h;
        double fp = weighted_sum(linear(constant(x0), constant(W0), constant(bp)), wts)->val[0];
        double fm = weighted_sum(linear(constant(x0), constant(W0), constant(bm)), wts)->val[0];
        CHECK(b->grad[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("conv3d matches finite differences") {
    Pcg32 rng(11, 2);
    int kt = 3, ks = 3, cin = 2, cout = 3;
    Tensor W0 = random_tensor({kt * ks * ks * cin, cout}, rng);
    Tensor b0 = random_tensor({cout}, rng);
    Tensor x0 = random_tensor({4, 3, 5, cin}, rng);
    Tensor wts = random_tensor({4, 3, 5, cout}, rng);

    check_grad([&](const Var& x) { return weighted_sum(conv3d(x, constant(W0), constant(b0), kt, ks), wts); },
               x0);

    Var W = make_param(W0);
    Var y = weighted_sum(conv3d(constant(x0), W, constant(b0), kt, ks), wts);
    W->zero_grad();
    backward(y);
    const double h = 1e-5;
    for (int64_t i = 0; i < W0.size(); i += 7) {
        Tensor wp = W0, wm = W0;
        wp[i] += h;
        wm[i] -= h;
        double fp = weighted_sum(conv3d(constant(x0), constant(wp), constant(b0), kt, ks), wts)->val[0];
        double fm = weighted_sum(conv3d(constant(x0), constant(wm), constant(b0), kt, ks), wts)->val[0];
        CHECK(W->grad[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("spatial ops match finite differences") {
    Pcg32 rng(13, 3);
    Tensor wts_ds = random_tensor({2, 2, 3, 2}, rng);
    check_grad([&](const Var& x) { return weighted_sum(avgpool_spatial2(x), wts_ds); },
               random_tensor({4, 5, 3, 2}, rng));

    Tensor wts_up = random_tensor({6, 4, 2, 2}, rng);
    check_grad([&](const Var& x) { return weighted_sum(upsample_bilinear(x, 6, 4), wts_up); },
               random_tensor({3, 2, 2, 2}, rng));

    Tensor wts_mean = random_tensor({1, 1, 3, 2}, rng);
    check_grad([&](const Var& x) { return weighted_sum(spatial_mean(x), wts_mean); },
               random_tensor({3, 4, 3, 2}, rng));

    Tensor wts_bc = random_tensor({3, 4, 2, 2}, rng);
    check_grad([&](const Var& x) { return weighted_sum(broadcast_spatial(x, 3, 4), wts_bc); },
               random_tensor({1, 1, 2, 2}, rng));
}

TEST_CASE("relu and losses match finite differences") {
    Pcg32 rng(17, 4);
    // keep entries away from the relu kink
    Tensor x0 = random_tensor({3, 3, 2, 2}, rng);
    for (double& v : x0.v)
        if (std::abs(v) < 0.05) v += 0.1;
    Tensor wts = random_tensor({3, 3, 2, 2}, rng);
    check_grad([&](const Var& x) { return weighted_sum(relu(x), wts); }, x0);

    std::vector<uint8_t> labels{1, 0, 1, 1, 0};
    check_grad([&](const Var& x) { return multilabel_soft_margin(x, labels); },
               random_tensor({5}, rng, -2.0, 2.0));

    Tensor mt = random_tensor({3, 3, 2, 2}, rng, 0.0, 1.0);
    Tensor gate = random_tensor({1, 1, 2, 2}, rng, 0.0, 2.0);
    check_grad([&](const Var& x) { return gated_mse(x, mt, gate); },
               random_tensor({3, 3, 2, 2}, rng, 0.0, 1.0));
}

TEST_CASE("topk pooling gradient is 1/k on the selected entries") {
    Tensor x({2, 2, 1, 1});
    x.at(0, 0, 0, 0) = 4.0;
    x.at(0, 1, 0, 0) = 2.0;
    x.at(1, 0, 0, 0) = 1.0;
    x.at(1, 1, 0, 0) = 3.0;
    Var xv = make_param(x);
    Var y = topk_spatial(xv, 2);
    CHECK(y->val[0] == doctest::Approx(3.5));
    xv->zero_grad();
    backward(y);
    CHECK(xv->grad.at(0, 0, 0, 0) == doctest::Approx(0.5));
    CHECK(xv->grad.at(1, 1, 0, 0) == doctest::Approx(0.5));
    CHECK(xv->grad.at(0, 1, 0, 0) == 0.0);
    CHECK(xv->grad.at(1, 0, 0, 0) == 0.0);
}

TEST_CASE("dropout scales kept entries and zeroes dropped ones") {
    Pcg32 rng(23, 5);
    Tensor x = Tensor::full({10, 10, 2, 2}, 1.0);
    Pcg32 droprng(99, 6);
    Var y = dropout(constant(x), 0.5, droprng);
    int kept = 0;
    for (double v : y->val.v) {
        CHECK((v == 0.0 || v == doctest::Approx(2.0)));
        if (v != 0.0) ++kept;
    }
    CHECK(kept > 100);
    CHECK(kept < 300);

    CHECK_THROWS_AS(dropout(constant(x), 1.0, droprng), std::invalid_argument);
}

TEST_CASE("detach blocks gradient flow") {
    Tensor x0 = Tensor::full({2, 2}, 1.5);
    Var x = make_param(x0);
    Var d = detach(x);
    CHECK_FALSE(d->requires_grad);
    Tensor wts = Tensor::full({2, 2}, 1.0);
    Var y = weighted_sum(d, wts);
    CHECK_FALSE(y->requires_grad);
}

TEST_CASE("backward accumulates across calls until zeroed") {
    Tensor x0 = Tensor::full({3}, 2.0);
    Var x = make_param(x0);
    Tensor wts = Tensor::full({3}, 1.0);
    x->zero_grad();
    backward(weighted_sum(x, wts));
    backward(weighted_sum(x, wts), 0.5);
    for (int i = 0; i < 3; ++i) CHECK(x->grad[i] == doctest::Approx(1.5));
}

#include <cmath>
#include <random>

#include "glu/autodiff.hpp"
#include "glu/kernels.hpp"
#include "support.hpp"

using namespace glu;
using test::numeric_grad;
using test::random_mat;

namespace {

// Checks d sum(w * op(x)) / dx against central differences for a unary op.
void check_unary(const std::function<ad::Var(ad::Var)>& op, Mat x, const Mat& w, double tol = 1e-7) {
    ad::Tape t;
    ad::Var xv = t.make(x, true, nullptr);
    ad::Var y = ad::sum(ad::mul(op(xv), t.constant(w)));
    t.backward(y);
    const Mat analytic = xv.grad();
    auto f = [&](const Mat& xx) {
        ad::Tape t2(false);
        return ad::sum(ad::mul(op(t2.constant(xx)), t2.constant(w))).item();
    };
    const Mat num = numeric_grad(f, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(test::rel_err(analytic[i], num[i], 1e-6) < tol);
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
    std::mt19937_64 rng(1);
    const Mat x = random_mat(3, 4, rng), w = random_mat(3, 4, rng);
    check_unary([](ad::Var a) { return ad::gelu(a); }, x, w);
    check_unary([](ad::Var a) { return ad::tanh(a); }, x, w);
    check_unary([](ad::Var a) { return ad::exp(a); }, x, w);
    check_unary([](ad::Var a) { return ad::square(a); }, x, w);
    check_unary([](ad::Var a) { return ad::scale(a, -2.5); }, x, w);
    check_unary([](ad::Var a) { return ad::softmax_rows(a); }, x, w);
    check_unary([](ad::Var a) { return ad::mean_rows(a); }, x, Mat(1, 4, 1.0));
    check_unary([](ad::Var a) { return ad::slice_cols(a, 1, 3); }, x, Mat(3, 2, 0.5));
}

TEST_CASE("clamp passes gradient inside the interval only") {
    ad::Tape t;
    ad::Var x = t.make(Mat(1, 3, std::vector<double>{-5.0, 0.5, 5.0}), true, nullptr);
    t.backward(ad::sum(ad::clamp(x, -1.0, 1.0)));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
    CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("matmul family and layer norm match finite differences") {
    std::mt19937_64 rng(2);
    const Mat a = random_mat(4, 3, rng), b = random_mat(3, 5, rng), bt = random_mat(5, 3, rng);
    const Mat w = random_mat(4, 5, rng);
    check_unary([&](ad::Var x) { return ad::matmul(x, x.tape()->constant(b)); }, a, w);
    check_unary([&](ad::Var x) { return ad::matmul(x.tape()->constant(a), x); }, b, w);
    check_unary([&](ad::Var x) { return ad::matmul_nt(x, x.tape()->constant(bt)); }, a, w);
    check_unary([&](ad::Var x) { return ad::matmul_nt(x.tape()->constant(a), x); }, bt, w);
    const Mat g = random_mat(1, 3, rng), bb = random_mat(1, 3, rng), w3 = random_mat(4, 3, rng);
    check_unary([&](ad::Var x) { return ad::layer_norm(x, x.tape()->constant(g), x.tape()->constant(bb), 1e-5); }, a,
                w3, 1e-6);
    check_unary([&](ad::Var x) { return ad::layer_norm(x.tape()->constant(a), x, x.tape()->constant(bb), 1e-5); }, g,
                Mat(4, 3, 1.0), 1e-6);
}

TEST_CASE("layer norm output has zero mean and unit variance per row") {
    std::mt19937_64 rng(3);
    ad::Tape t(false);
    const Mat y = ad::layer_norm(t.constant(random_mat(5, 8, rng)), t.constant(Mat(1, 8, 1.0)),
                                 t.constant(Mat(1, 8, 0.0)), 1e-12)
                      .value();
    for (std::size_t r = 0; r < 5; ++r) {
        double m = 0, v = 0;
        for (double e : y.row(r)) m += e;
        m /= 8;
        for (double e : y.row(r)) v += (e - m) * (e - m);
        CHECK(std::abs(m) < 1e-12);
        CHECK(v / 8 == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("softmax rows are a shift-invariant distribution and respect masks") {
    ad::Tape t(false);
    Mat a(2, 3, std::vector<double>{1, 2, 3, 1000, 1001, 1002});
    const Mat s = ad::softmax_rows(t.constant(a)).value();
    for (std::size_t c = 0; c < 3; ++c) CHECK(s(0, c) == doctest::Approx(s(1, c)).epsilon(1e-12));
    std::vector<std::uint8_t> mask{1, 1, 0, 1, 0, 0};
    const Mat m = ad::softmax_rows(t.constant(a), &mask).value();
    CHECK(m(0, 2) == 0.0);
    CHECK(m(1, 0) == 1.0);
    CHECK(m(0, 0) + m(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("structural ops route gradients to the right entries") {
    std::mt19937_64 rng(4);
    const Mat x = random_mat(4, 2, rng);
    std::vector<std::size_t> idx{3, 0, 3};
    check_unary([&](ad::Var v) { return ad::gather_rows(v, idx); }, x, random_mat(3, 2, rng));
    check_unary([&](ad::Var v) { return ad::slice_rows(v, 1, 3); }, x, random_mat(2, 2, rng));
    check_unary([&](ad::Var v) { return ad::broadcast_rows(ad::slice_rows(v, 0, 1), 3); }, x, random_mat(3, 2, rng));
    check_unary([&](ad::Var v) { return ad::concat_cols(v, ad::scale(v, 2.0)); }, x, random_mat(4, 4, rng));
    check_unary([&](ad::Var v) { return ad::concat_rows(std::vector<ad::Var>{v, v}); }, x, random_mat(8, 2, rng));
    check_unary([&](ad::Var v) { return ad::add_rowvec(v, ad::slice_rows(v, 2, 3)); }, x, random_mat(4, 2, rng));
    check_unary([&](ad::Var v) { return ad::mul_colvec(v, ad::slice_cols(v, 0, 1)); }, x, random_mat(4, 2, rng));
}

TEST_CASE("fourier features are differentiable in the frequency matrix") {
    std::mt19937_64 rng(5);
    const Mat xs = random_mat(6, 2, rng), w = random_mat(6, 8, rng);
    check_unary([&](ad::Var b) { return ad::fourier_features(xs, b); }, random_mat(4, 2, rng, -0.5, 0.5), w, 1e-6);
}

TEST_CASE("weighted sum and mse reductions") {
    ad::Tape t;
    ad::Var a = t.make(Mat(1, 1, 2.0), true, nullptr), b = t.make(Mat(1, 1, 3.0), true, nullptr);
    std::vector<ad::Var> terms{a, b};
    std::vector<double> w{0.5, -2.0};
    ad::Var s = ad::weighted_sum(terms, w);
    CHECK(s.item() == doctest::Approx(-5.0));
    t.backward(s);
    CHECK(a.grad()[0] == 0.5);
    CHECK(b.grad()[0] == -2.0);
    ad::Tape t2(false);
    CHECK(ad::mse(t2.constant(Mat(1, 2, std::vector<double>{1, 2})), t2.constant(Mat(1, 2, std::vector<double>{0, 0})))
              .item() == doctest::Approx(2.5));
}

TEST_CASE("frozen params receive no gradient") {
    Param p("p", Mat(2, 2, 1.0));
    p.zero_grad();
    p.frozen = true;
    ad::Tape t;
    ad::Var v = t.param(p);
    CHECK_FALSE(v.requires_grad());
    p.frozen = false;
    ad::Tape t2;
    ad::Var v2 = t2.param(p);
    t2.backward(ad::sum(v2));
    CHECK(p.grad[0] == 1.0);
}

TEST_CASE("autodiff results are identical under scalar and avx2 dispatch up to rounding") {
    if (!kernels::avx2_available()) return;
    std::mt19937_64 rng(6);
    const Mat a = random_mat(7, 13, rng), b = random_mat(13, 5, rng);
    Mat r[2];
    int i = 0;
    for (auto isa : {kernels::Isa::scalar, kernels::Isa::avx2}) {
        kernels::ScopedIsa s(isa);
        ad::Tape t(false);
        r[i++] = ad::matmul(t.constant(a), t.constant(b)).value();
    }
    CHECK(test::max_abs_diff(r[0], r[1]) < 1e-13);
}

#include <catch2/catch_amalgamated.hpp>

#include "xmodal/gradcheck.hpp"
#include "xmodal/layers.hpp"
#include "xmodal/optimizer.hpp"

using namespace xmodal;

namespace {

LayerStack random_stack(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts,
                        std::uint64_t seed) {
    LayerStack stack;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k)
        stack.add_layer(FcLayer(dims[k + 1], dims[k], acts[k]));
    Rng rng(seed);
    stack.init_uniform(rng);
    return stack;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
    Matrix m(r, c);
    Rng rng(seed);
    std::uniform_real_distribution<double> d(-scale, scale);
    for (double& v : m.data) v = d(rng);
    return m;
}

}  // namespace

TEST_CASE("identity layer passes input through") {
    LayerStack stack;
    FcLayer l(2, 2, Activation::none);
    l.weight = Matrix::identity(2);
    stack.add_layer(l);
    Matrix in(2, 1);
    in(0, 0) = 2.0;
    in(1, 0) = -3.0;
    const Matrix& out = stack.forward(in);
    CHECK(out(0, 0) == 2.0);
    CHECK(out(1, 0) == -3.0);
}

TEST_CASE("sigmoid of zero pre-activation is one half") {
    LayerStack stack;
    stack.add_layer(FcLayer(3, 2, Activation::sigmoid));  // zero weights and bias
    const Matrix out = stack.infer(random_matrix(2, 4, 5));
    for (double v : out.data) CHECK(v == 0.5);
}

TEST_CASE("softmax of constant pre-activation is uniform") {
    Matrix m(3, 1, 1.0);
    softmax_cols_inplace(m);
    for (std::size_t i = 0; i < 3; ++i) CHECK(m(i, 0) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax columns sum to one and sigmoid stays in (0,1)") {
    LayerStack sig = random_stack({5, 7, 4}, {Activation::sigmoid, Activation::sigmoid}, 42);
    const Matrix out = sig.infer(random_matrix(5, 6, 43, 3.0));
    for (double v : out.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    LayerStack soft = random_stack({5, 7, 4}, {Activation::sigmoid, Activation::softmax}, 44);
    const Matrix sout = soft.infer(random_matrix(5, 6, 45, 3.0));
    for (std::size_t j = 0; j < sout.cols; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < sout.rows; ++i) sum += sout(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax must be terminal") {
    LayerStack stack;
    stack.add_layer(FcLayer(3, 2, Activation::softmax));
    CHECK_THROWS_AS(stack.add_layer(FcLayer(2, 3, Activation::none)), ConfigError);
}

TEST_CASE("adjacent layer dimensions must chain") {
    LayerStack stack;
    stack.add_layer(FcLayer(3, 2, Activation::none));
    CHECK_THROWS_AS(stack.add_layer(FcLayer(2, 4, Activation::none)), ConfigError);
}

TEST_CASE("linear layer weight gradient is g x^T") {
    LayerStack stack;
    stack.add_layer(FcLayer(2, 3, Activation::none));
    stack.layer(0).weight = random_matrix(2, 3, 7);
    const Matrix x = random_matrix(3, 4, 8);
    stack.forward(x);
    const Matrix g = random_matrix(2, 4, 9);
    StackGrads grads;
    stack.backward(g, grads);
    const Matrix expect = matmul_bt(g, x);
    for (std::size_t k = 0; k < expect.data.size(); ++k)
        CHECK(grads[0].weight.data[k] == Catch::Approx(expect.data[k]).margin(1e-14));
}

TEST_CASE("zero grad_output yields zero parameter gradients") {
    LayerStack stack = random_stack({3, 5, 2}, {Activation::sigmoid, Activation::none}, 10);
    stack.forward(random_matrix(3, 2, 11));
    StackGrads grads;
    stack.backward(Matrix(2, 2, 0.0), grads);
    for (const auto& lg : grads) {
        for (double v : lg.weight.data) CHECK(v == 0.0);
        for (double v : lg.bias) CHECK(v == 0.0);
    }
}

TEST_CASE("backward without forward is a state error") {
    LayerStack stack = random_stack({3, 2}, {Activation::none}, 12);
    StackGrads grads;
    CHECK_THROWS_AS(stack.backward(Matrix(2, 1, 1.0), grads), StateError);
}

TEST_CASE("analytic gradients match finite differences on random stacks") {
    // Squared-error head over a random 3-layer stack, dims <= 16, batch <= 8.
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        LayerStack stack =
            random_stack({6, 16, 9, 4}, {Activation::sigmoid, Activation::sigmoid, Activation::none}, seed);
        const Matrix x = random_matrix(6, 5, seed + 100);
        const Matrix target = random_matrix(4, 5, seed + 200);

        auto loss_fn = [&] {
            const Matrix out = stack.infer(x);
            double v = 0.0;
            for (std::size_t k = 0; k < out.data.size(); ++k) {
                const double d = out.data[k] - target.data[k];
                v += 0.5 * d * d;
            }
            return v;
        };
        std::vector<double*> params;
        stack.collect_params(params);
        const std::vector<double> numeric = finite_diff_grad(loss_fn, params, 1e-5);

        const Matrix& out = stack.forward(x);
        Matrix g = out;
        for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] -= target.data[k];
        StackGrads grads;
        stack.backward(g, grads);
        const std::vector<double> analytic = flatten_grads(grads);
        CHECK(max_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("softmax-terminal gradients match finite differences") {
    // Linear functional of the softmax output exercises the full Jacobian.
    LayerStack stack = random_stack({5, 8, 3}, {Activation::sigmoid, Activation::softmax}, 33);
    const Matrix x = random_matrix(5, 4, 34);
    const Matrix coeff = random_matrix(3, 4, 35);
    auto loss_fn = [&] {
        const Matrix out = stack.infer(x);
        double v = 0.0;
        for (std::size_t k = 0; k < out.data.size(); ++k) v += coeff.data[k] * out.data[k];
        return v;
    };
    std::vector<double*> params;
    stack.collect_params(params);
    const std::vector<double> numeric = finite_diff_grad(loss_fn, params, 1e-5);
    stack.forward(x);
    StackGrads grads;
    stack.backward(coeff, grads);
    CHECK(max_relative_error(flatten_grads(grads), numeric) < 1e-4);
}

TEST_CASE("forward is deterministic") {
    LayerStack stack = random_stack({4, 6, 3}, {Activation::sigmoid, Activation::none}, 50);
    const Matrix x = random_matrix(4, 3, 51);
    const Matrix a = stack.infer(x);
    const Matrix b = stack.infer(x);
    REQUIRE(a.data.size() == b.data.size());
    for (std::size_t k = 0; k < a.data.size(); ++k) CHECK(a.data[k] == b.data[k]);
}

TEST_CASE("sgd step definition") {
    LayerStack stack;
    stack.add_layer(FcLayer(1, 1, Activation::none));
    stack.layer(0).weight(0, 0) = 1.0;
    StackGrads grads(1);
    grads[0].weight = Matrix(1, 1, 2.0);
    grads[0].bias = {0.0};
    SgdOptimizer opt(0.1);
    opt.step(stack, grads);
    CHECK(stack.layer(0).weight(0, 0) == Catch::Approx(0.8).margin(1e-15));

    grads[0].weight(0, 0) = 0.0;
    opt.step(stack, grads);
    CHECK(stack.layer(0).weight(0, 0) == Catch::Approx(0.8).margin(1e-15));
}

TEST_CASE("sgd rejects shape mismatch and bad learning rate") {
    CHECK_THROWS_AS(SgdOptimizer(0.0), ConfigError);
    LayerStack stack;
    stack.add_layer(FcLayer(2, 2, Activation::none));
    StackGrads grads(1);
    grads[0].weight = Matrix(1, 2, 0.0);
    grads[0].bias = {0.0, 0.0};
    SgdOptimizer opt(0.1);
    CHECK_THROWS_AS(opt.step(stack, grads), ConfigError);
}

TEST_CASE("sgd descends a quadratic") {
    // f(t) = (t-3)^2 from t=0 with lr 0.05: two steps strictly decrease f.
    double theta = 0.0;
    auto f = [&] { return (theta - 3.0) * (theta - 3.0); };
    const double f0 = f();
    theta -= 0.05 * 2.0 * (theta - 3.0);
    const double f1 = f();
    theta -= 0.05 * 2.0 * (theta - 3.0);
    const double f2 = f();
    CHECK(theta == Catch::Approx(0.57).margin(1e-12));
    CHECK(f1 < f0);
    CHECK(f2 < f1);
}

TEST_CASE("finite_diff_grad basics") {
    double theta = 3.0;
    auto square = [&] { return theta * theta; };
    const std::vector<double*> params = {&theta};
    const auto g = finite_diff_grad(square, params, 1e-5);
    CHECK(std::abs(g[0] - 6.0) < 1e-6);

    auto constant = [] { return 4.2; };
    const auto gz = finite_diff_grad(constant, params, 1e-5);
    CHECK(gz[0] == 0.0);

    double x = 0.7;
    auto sigmoid = [&] { return 1.0 / (1.0 + std::exp(-x)); };
    const std::vector<double*> px = {&x};
    const auto gs = finite_diff_grad(sigmoid, px, 1e-5);
    const double s = 1.0 / (1.0 + std::exp(-0.7));
    CHECK(std::abs(gs[0] - s * (1.0 - s)) < 1e-8);
}

TEST_CASE("finite_diff_grad rejects non-finite losses") {
    double theta = 1.0;
    auto bad = [&] { return std::numeric_limits<double>::quiet_NaN(); };
    const std::vector<double*> params = {&theta};
    CHECK_THROWS_AS(finite_diff_grad(bad, params, 1e-5), NumericError);
}

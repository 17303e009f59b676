#include <catch2/catch_amalgamated.hpp>

#include "xmodal/gradcheck.hpp"
#include "xmodal/losses.hpp"

using namespace xmodal;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo, double hi) {
    Rng rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& e : v) e = d(rng);
    return v;
}

}  // namespace

TEST_CASE("wbce worked examples") {
    PositiveWeights w1 = PositiveWeights::ones(2);
    const std::vector<double> target = {1.0, 0.0};
    const std::vector<double> perfect = {1.0 - kLogEps, kLogEps};
    CHECK(wbce_loss(target, perfect, w1).value < 1e-6);

    PositiveWeights w = PositiveWeights::ones(1);
    const std::vector<double> t0 = {0.0}, half = {0.5};
    CHECK(wbce_loss(t0, half, w).value == Catch::Approx(std::log(2.0)).epsilon(1e-12));

    const std::vector<double> t1 = {1.0};
    PositiveWeights w3{std::vector<double>{3.0}};
    CHECK(wbce_loss(t1, half, w3).value == Catch::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(wbce_loss(t1, half, w).value == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    // the weight multiplies only the positive term
    CHECK(wbce_loss(t0, half, w3).value == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("wbce with unit weights equals plain bce") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const auto pred = random_vec(8, seed, 0.05, 0.95);
        auto target = random_vec(8, seed + 50, 0.0, 1.0);
        for (double& t : target) t = t > 0.5 ? 1.0 : 0.0;
        const double wbce = wbce_loss(target, pred, PositiveWeights::ones(8)).value;
        double bce = 0.0;
        for (std::size_t j = 0; j < 8; ++j)
            bce -= target[j] * std::log(pred[j]) + (1.0 - target[j]) * std::log(1.0 - pred[j]);
        CHECK(std::abs(wbce - bce) < 1e-12);
    }
}

TEST_CASE("wbce gradient matches finite differences") {
    auto pred = random_vec(6, 77, 0.1, 0.9);
    auto target = random_vec(6, 78, 0.0, 1.0);
    for (double& t : target) t = t > 0.5 ? 1.0 : 0.0;
    PositiveWeights w{std::vector<double>{1.0, 2.0, 1.5, 4.0, 1.0, 3.0}};
    std::vector<double*> params;
    for (double& p : pred) params.push_back(&p);
    auto loss_fn = [&] { return wbce_loss(target, pred, w).value; };
    const auto numeric = finite_diff_grad(loss_fn, params, 1e-5);
    const auto analytic = wbce_loss(target, pred, w).grad;
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("wbce validates lengths and weight bounds") {
    const std::vector<double> t = {1.0}, p = {0.5, 0.5};
    CHECK_THROWS_AS(wbce_loss(t, p, PositiveWeights::ones(1)), ConfigError);
    PositiveWeights bad{std::vector<double>{0.5}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("positive weights from label statistics") {
    // 4 columns: dimension 0 has one positive, dimension 1 all positives.
    Matrix labels(2, 4, 0.0);
    labels(0, 0) = 1.0;
    for (std::size_t j = 0; j < 4; ++j) labels(1, j) = 1.0;
    const PositiveWeights w = PositiveWeights::from_labels(labels);
    CHECK(w.w[0] == Catch::Approx(2.0));  // (3+1)/(1+1)
    CHECK(w.w[1] == 1.0);                 // clamped up to 1
    // cap applies
    Matrix sparse(1, 200, 0.0);
    sparse(0, 0) = 1.0;
    CHECK(PositiveWeights::from_labels(sparse).w[0] == 20.0);
}

TEST_CASE("ce worked examples") {
    const std::vector<double> onehot = {0.0, 1.0, 0.0};
    CHECK(ce_loss(onehot, onehot).value < 1e-6);

    std::vector<double> target(10, 0.0);
    target[3] = 1.0;
    const std::vector<double> uniform(10, 0.1);
    CHECK(ce_loss(target, uniform).value == Catch::Approx(std::log(10.0)).epsilon(1e-9));

    const std::vector<double> not_onehot = {0.5, 0.5, 0.0};
    CHECK_THROWS_AS(ce_loss(not_onehot, uniform), ValidationError);
}

TEST_CASE("ce composed with softmax has logit gradient prediction minus target") {
    // 6-class random instance, finite differences w.r.t. the logits.
    std::vector<double> logits = random_vec(6, 91, -1.5, 1.5);
    std::vector<double> target(6, 0.0);
    target[2] = 1.0;
    auto softmax = [&] {
        std::vector<double> p(6);
        double mx = logits[0];
        for (double z : logits) mx = std::max(mx, z);
        double sum = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            p[i] = std::exp(logits[i] - mx);
            sum += p[i];
        }
        for (double& v : p) v /= sum;
        return p;
    };
    auto loss_fn = [&] { return ce_loss(target, softmax()).value; };
    std::vector<double*> params;
    for (double& z : logits) params.push_back(&z);
    const auto numeric = finite_diff_grad(loss_fn, params, 1e-5);
    const auto p = softmax();
    std::vector<double> analytic(6);
    for (std::size_t i = 0; i < 6; ++i) analytic[i] = p[i] - target[i];
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("l1 cross reconstruction worked examples") {
    Matrix a(1, 2), b(1, 2);
    a(0, 0) = 1; a(0, 1) = 2;
    b(0, 0) = 0; b(0, 1) = 4;
    CHECK(l1_cross_recon_loss(a, a).value == 0.0);
    const auto lv = l1_cross_recon_loss(a, b);
    CHECK(lv.value == 3.0);
    CHECK(lv.grad(0, 0) == -1.0);
    CHECK(lv.grad(0, 1) == 1.0);
    // |c|-homogeneity
    Matrix ac = a, bc = b;
    for (double& v : ac.data) v *= -2.5;
    for (double& v : bc.data) v *= -2.5;
    CHECK(l1_cross_recon_loss(ac, bc).value == Catch::Approx(2.5 * 3.0).epsilon(1e-12));
    // sign(0) := 0
    CHECK(l1_cross_recon_loss(a, a).grad(0, 0) == 0.0);
    Matrix wrong(2, 1);
    CHECK_THROWS_AS(l1_cross_recon_loss(a, wrong), ConfigError);
}

TEST_CASE("l1 gradient matches finite differences away from kinks") {
    Matrix orig(2, 3), recon(2, 3);
    Rng rng(5);
    std::uniform_real_distribution<double> d(-1, 1);
    for (double& v : orig.data) v = d(rng);
    for (std::size_t k = 0; k < recon.data.size(); ++k) {
        double delta = d(rng);
        while (std::abs(delta) < 1e-3) delta = d(rng);  // keep away from the kink
        recon.data[k] = orig.data[k] + delta;
    }
    std::vector<double*> params;
    for (double& v : recon.data) params.push_back(&v);
    auto loss_fn = [&] { return l1_cross_recon_loss(orig, recon).value; };
    const auto numeric = finite_diff_grad(loss_fn, params, 1e-5);
    const auto analytic = l1_cross_recon_loss(orig, recon).grad.data;
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("sim loss worked examples") {
    const std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
    CHECK(sim_loss(a, a).value == 0.0);
    CHECK(sim_loss(a, b).value == 2.0);
    CHECK(sim_loss(a, b).value == sim_loss(b, a).value);
    const auto lv = sim_loss(a, b);
    CHECK(lv.grad_x[0] == 2.0);
    CHECK(lv.grad_y[0] == -2.0);
}

TEST_CASE("sim gradient matches finite differences") {
    auto x = random_vec(5, 13, -1, 1);
    auto y = random_vec(5, 14, -1, 1);
    std::vector<double*> params;
    for (double& v : x) params.push_back(&v);
    for (double& v : y) params.push_back(&v);
    auto loss_fn = [&] { return sim_loss(x, y).value; };
    const auto numeric = finite_diff_grad(loss_fn, params, 1e-5);
    const auto lv = sim_loss(x, y);
    std::vector<double> analytic = lv.grad_x;
    analytic.insert(analytic.end(), lv.grad_y.begin(), lv.grad_y.end());
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("dsim loss worked examples") {
    const std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
    CHECK(dsim_loss(a, a, 1.0).value == 1.0);
    CHECK(dsim_loss(a, b, 1.0).value == 0.0);
    const auto flat = dsim_loss(a, b, 1.0);
    for (double g : flat.grad_x) CHECK(g == 0.0);
    for (double g : flat.grad_y) CHECK(g == 0.0);
    CHECK_THROWS_AS(dsim_loss(a, b, 0.0), ConfigError);
}

TEST_CASE("dsim gradient matches finite differences inside the margin") {
    auto x = random_vec(4, 23, -0.2, 0.2);
    auto y = random_vec(4, 24, -0.2, 0.2);
    // squared distance of these vectors is well below the margin of 2
    std::vector<double*> params;
    for (double& v : x) params.push_back(&v);
    for (double& v : y) params.push_back(&v);
    auto loss_fn = [&] { return dsim_loss(x, y, 2.0).value; };
    const auto numeric = finite_diff_grad(loss_fn, params, 1e-5);
    const auto lv = dsim_loss(x, y, 2.0);
    std::vector<double> analytic = lv.grad_x;
    analytic.insert(analytic.end(), lv.grad_y.begin(), lv.grad_y.end());
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("loss values are non-negative") {
    Rng rng(99);
    std::uniform_real_distribution<double> d(0.05, 0.95);
    for (int it = 0; it < 20; ++it) {
        std::vector<double> pred(4), target(4);
        for (double& p : pred) p = d(rng);
        for (double& t : target) t = d(rng) > 0.5 ? 1.0 : 0.0;
        CHECK(wbce_loss(target, pred, PositiveWeights::ones(4)).value >= 0.0);
    }
}

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "xmodal/checkpoint.hpp"

using namespace xmodal;

namespace {

LayerStack random_stack(std::uint64_t seed) {
    LayerStack stack;
    stack.add_layer(FcLayer(5, 3, Activation::sigmoid));
    stack.add_layer(FcLayer(2, 5, Activation::softmax));
    Rng rng(seed);
    stack.init_uniform(rng);
    // bias values exercise the full double range a bit harder
    std::uniform_real_distribution<double> d(-1e3, 1e3);
    for (std::size_t k = 0; k < stack.size(); ++k)
        for (double& b : stack.layer(k).bias) b = d(rng) * 1e-7;
    return stack;
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-exact") {
    const LayerStack original = random_stack(321);
    std::stringstream ss;
    save_stacks(ss, {&original});
    const auto loaded = load_stacks(ss);
    REQUIRE(loaded.size() == 1);
    const LayerStack& copy = loaded.front();
    REQUIRE(copy.size() == original.size());
    for (std::size_t k = 0; k < original.size(); ++k) {
        const FcLayer& a = original.layer(k);
        const FcLayer& b = copy.layer(k);
        REQUIRE(a.activation == b.activation);
        REQUIRE(a.weight.rows == b.weight.rows);
        REQUIRE(a.weight.cols == b.weight.cols);
        for (std::size_t i = 0; i < a.weight.data.size(); ++i) CHECK(a.weight.data[i] == b.weight.data[i]);
        for (std::size_t i = 0; i < a.bias.size(); ++i) CHECK(a.bias[i] == b.bias[i]);
    }
}

TEST_CASE("multi-stack container preserves order") {
    const LayerStack a = random_stack(1);
    const LayerStack b = random_stack(2);
    std::stringstream ss;
    save_stacks(ss, {&a, &b});
    const auto loaded = load_stacks(ss);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].layer(0).weight(0, 0) == a.layer(0).weight(0, 0));
    CHECK(loaded[1].layer(0).weight(0, 0) == b.layer(0).weight(0, 0));
}

TEST_CASE("checkpoint rejects bad version and truncation") {
    std::stringstream bad("xmodal-checkpoint 9\nstacks 1\n");
    CHECK_THROWS_AS(load_stacks(bad), LoadError);

    const LayerStack s = random_stack(3);
    std::stringstream ss;
    save_stacks(ss, {&s});
    std::string text = ss.str();
    text.resize(text.size() / 2);
    std::stringstream truncated(text);
    CHECK_THROWS_AS(load_stacks(truncated), LoadError);

    std::stringstream garbage("hello world");
    CHECK_THROWS_AS(load_stacks(garbage), LoadError);
}

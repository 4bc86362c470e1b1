#include "dix/graph.hpp"
#include "dix/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace dix;
using graph::NodeRef;
using graph::Tape;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Central-difference check of d(scalar)/d(input) against the tape gradient.
// `build` must reduce the leaf to a rank-1 tensor; component 0 is seeded.
double max_rel_error(const Tensor& input,
                     const std::function<NodeRef(Tape&, const NodeRef&)>& build) {
    Tape tape;
    auto leaf = tape.leaf(input, true);
    auto out = build(tape, leaf);
    tape.backward(out, 0);
    const Tensor grad = leaf->ensure_grad();

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        Tensor plus = input, minus = input;
        plus[i] += h;
        minus[i] -= h;
        Tape tp, tm;
        const double fp = build(tp, tp.leaf(plus, false))->value[0];
        const double fm = build(tm, tm.leaf(minus, false))->value[0];
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    return worst;
}

// collapse anything to a rank-1 scalar by a fixed weighted sum, so every
// output element influences the seed component
NodeRef weighted_sum(Tape& t, const NodeRef& x) {
    const std::size_t n = x->value.size();
    Tensor w({1, n});
    for (std::size_t i = 0; i < n; ++i) w.at(0, i) = 0.1 * static_cast<double>(i + 1);
    auto flat = graph::reshape(t, x, {n});
    return graph::affine_vec(t, flat, t.leaf(w, false), t.leaf(Tensor({1}), false));
}

} // namespace

TEST_CASE("gradients match finite differences for every op") {
    Rng rng(99);

    SUBCASE("affine") {
        Tensor x = random_tensor({3, 4}, rng);
        Tensor w = random_tensor({2, 4}, rng);
        Tensor b = random_tensor({2}, rng);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  return weighted_sum(t, graph::affine(t, leaf, t.leaf(w, false), t.leaf(b, false)));
              }) < 1e-6);
        // weight gradient through the same scalar
        Tape tape;
        auto wleaf = tape.leaf(w, true);
        auto out = weighted_sum(tape, graph::affine(tape, tape.leaf(x, false), wleaf,
                                                    tape.leaf(b, false)));
        tape.backward(out, 0);
        const Tensor gw = wleaf->ensure_grad();
        const double h = 1e-5;
        Tensor wp = w, wm = w;
        wp.at(1, 2) += h;
        wm.at(1, 2) -= h;
        Tape t1, t2;
        const double fp = weighted_sum(t1, graph::affine(t1, t1.leaf(x, false), t1.leaf(wp, false),
                                                         t1.leaf(b, false)))->value[0];
        const double fm = weighted_sum(t2, graph::affine(t2, t2.leaf(x, false), t2.leaf(wm, false),
                                                         t2.leaf(b, false)))->value[0];
        CHECK(gw.at(1, 2) == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
    }

    SUBCASE("conv2d stride 1 and 2") {
        Tensor x = random_tensor({2, 5, 5}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        for (std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
            CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                      return weighted_sum(t, graph::conv2d(t, leaf, t.leaf(w, false),
                                                           t.leaf(b, false), stride, 1));
                  }) < 1e-6);
        }
    }

    SUBCASE("gelu") {
        Tensor x = random_tensor({7}, rng, -2.0, 2.0);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  return weighted_sum(t, graph::gelu(t, leaf));
              }) < 1e-6);
    }

    SUBCASE("layer norm") {
        Tensor x = random_tensor({3, 6}, rng);
        Tensor g = random_tensor({6}, rng, 0.5, 1.5);
        Tensor b = random_tensor({6}, rng);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  return weighted_sum(t, graph::layer_norm(t, leaf, t.leaf(g, false),
                                                           t.leaf(b, false)));
              }) < 1e-5);
    }

    SUBCASE("softmax attention stack") {
        Tensor x = random_tensor({2, 3, 3}, rng);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  return weighted_sum(t, graph::softmax_lastdim(t, leaf));
              }) < 1e-6);
    }

    SUBCASE("attention pipeline qk/apply/heads") {
        Tensor x = random_tensor({4, 6}, rng);
        Tensor v = random_tensor({2, 4, 3}, rng);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  auto heads = graph::split_heads(t, leaf, 2);
                  auto scores = graph::scaled_qk(t, heads, heads);
                  auto att = graph::softmax_lastdim(t, scores);
                  auto mixed = graph::attn_apply(t, att, t.leaf(v, false));
                  return weighted_sum(t, graph::merge_heads(t, mixed));
              }) < 1e-5);
    }

    SUBCASE("pool, slice, concat") {
        Tensor x = random_tensor({2, 3, 3}, rng);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  return weighted_sum(t, graph::global_avg_pool(t, leaf));
              }) < 1e-6);
        Tensor rows = random_tensor({3, 4}, rng);
        Tensor extra = random_tensor({1, 4}, rng);
        CHECK(max_rel_error(rows, [&](Tape& t, const NodeRef& leaf) {
                  auto cat = graph::concat_rows(t, t.leaf(extra, false), leaf);
                  return weighted_sum(t, graph::slice_row(t, cat, 2));
              }) < 1e-6);
    }

    SUBCASE("cross entropy") {
        Tensor x = random_tensor({5}, rng);
        CHECK(max_rel_error(x, [&](Tape& t, const NodeRef& leaf) {
                  return graph::cross_entropy(t, leaf, 3);
              }) < 1e-6);
    }
}

TEST_CASE("softmax rows are stochastic") {
    Rng rng(5);
    Tensor x = random_tensor({2, 4, 4}, rng, -3.0, 3.0);
    Tape t;
    auto y = graph::softmax_lastdim(t, t.leaf(x, false));
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < 4; ++c) {
                const double v = y->value.at(h, r, c);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("gradient accumulates across fan-out") {
    // y = x*x + x  ->  dy/dx = 2x + 1
    Tape t;
    Tensor x({1}, {3.0});
    auto leaf = t.leaf(x, true);
    auto sq = graph::mul(t, leaf, leaf);
    auto y = graph::add(t, sq, leaf);
    t.backward(y, 0);
    CHECK(leaf->ensure_grad()[0] == doctest::Approx(7.0));
}

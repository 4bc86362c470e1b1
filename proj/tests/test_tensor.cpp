#include "dix/errors.hpp"
#include "dix/tensor.hpp"

#include <doctest.h>

using namespace dix;

TEST_CASE("tensor construction and indexing") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    t.at(1, 2) = 5.0;
    CHECK(t.at(1, 2) == 5.0);
    CHECK(t[5] == 5.0);
    CHECK_THROWS_AS(t.at(0), addressing_error);
    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), addressing_error);
}

TEST_CASE("elementwise ops require matching shapes") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {3.0, 4.0});
    CHECK(add(a, b)[1] == 6.0);
    CHECK(sub(b, a)[0] == 2.0);
    CHECK(hadamard(a, b)[1] == 8.0);
    CHECK_THROWS_AS(add(a, Tensor({3})), addressing_error);
}

TEST_CASE("channel mean reduces (C,H,W) to (H,W)") {
    Tensor t({2, 1, 2}, {1.0, 3.0, 5.0, 7.0});
    Tensor m = channel_mean(t);
    CHECK(m.shape() == std::vector<std::size_t>{1, 2});
    CHECK(m.at(0, 0) == 3.0);
    CHECK(m.at(0, 1) == 5.0);
}

TEST_CASE("bilinear resize is corner aligned") {
    Tensor g({2, 2}, {0.0, 1.0, 2.0, 3.0});
    Tensor r = resize_bilinear(g, 3, 3);
    // corners are preserved exactly
    CHECK(r.at(0, 0) == 0.0);
    CHECK(r.at(0, 2) == 1.0);
    CHECK(r.at(2, 0) == 2.0);
    CHECK(r.at(2, 2) == 3.0);
    CHECK(r.at(1, 1) == doctest::Approx(1.5));
    // identity when sizes match
    CHECK(bitwise_equal(resize_bilinear(g, 2, 2), g));
}

TEST_CASE("resize to a single row or column stays finite") {
    Tensor g({2, 2}, {0.0, 1.0, 2.0, 3.0});
    Tensor r = resize_bilinear(g, 1, 1);
    CHECK(r.size() == 1);
    CHECK(r[0] == 0.0); // corner-aligned maps the lone sample to the origin
}

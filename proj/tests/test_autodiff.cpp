#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "transfact/error.hpp"

using namespace transfact;
using namespace transfact::ad;
using gradcheck::max_error;
using gradcheck::random_contraction;
using gradcheck::random_matrix;

namespace {

constexpr double kTol = 1e-6;

Matrix positive(Rng& rng, int r, int c) {
    Matrix m = random_matrix(rng, r, c).array().abs() + 0.2;
    return m;
}

} // namespace

TEST_CASE("linear ops") {
    Rng rng(1);
    auto A = random_matrix(rng, 3, 4);
    auto B = random_matrix(rng, 4, 2);
    auto C = random_matrix(rng, 5, 4);
    auto R = random_matrix(rng, 1, 4);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(matmul(v[0], v[1]), 1); },
                    {A, B}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(matmul_nt(v[0], v[1]), 2); },
                    {A, C}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(add(v[0], v[0]), 3); }, {A}) <
          kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(add_row(v[0], v[1]), 4); },
                    {A, R}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(scale(v[0], -2.5), 5); }, {A}) <
          kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(transpose(v[0]), 6); }, {A}) <
          kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(mean_rows(v[0]), 7); }, {A}) <
          kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(concat_cols(v[0], v[1]), 8); },
                    {A, random_matrix(rng, 3, 2)}) < kTol);
}

TEST_CASE("pointwise and normalization ops") {
    Rng rng(2);
    auto A = random_matrix(rng, 4, 5, 2.0);
    auto gamma = random_matrix(rng, 1, 5);
    auto beta = random_matrix(rng, 1, 5);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(gelu(v[0]), 1); }, {A}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(layer_norm(v[0], v[1], v[2]), 2); },
                    {A, gamma, beta}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(softmax_rows(v[0]), 3); }, {A}) <
          kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(log_softmax_rows(v[0]), 4); },
                    {A}) < kTol);
    auto P = positive(rng, 4, 5);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(log_clamped(v[0], 1e-12), 5); },
                    {P}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(normalize_rows(v[0]), 6); },
                    {P}) < kTol);
}

TEST_CASE("gelu is the exact erf form") {
    Graph g;
    Matrix x(1, 3);
    x << -1.0, 0.0, 2.0;
    const auto y = gelu(g.constant(x)).value();
    for (int i = 0; i < 3; ++i) {
        CHECK(y(0, i) == doctest::Approx(0.5 * x(0, i) * (1 + std::erf(x(0, i) / std::sqrt(2.0)))).epsilon(1e-14));
    }
}

TEST_CASE("temporal and attention ops") {
    Rng rng(3);
    auto X = random_matrix(rng, 7, 3);
    for (int d : {1, 2, 4, 8}) {
        CHECK(max_error([d](Graph&, const std::vector<Var>& v) { return random_contraction(im2col_dilated(v[0], d), 1); },
                        {X}) < kTol);
    }
    auto Q = random_matrix(rng, 5, 4);
    auto K = random_matrix(rng, 6, 4);
    auto V = random_matrix(rng, 6, 4);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return random_contraction(attention_probs(v[0], v[1], 2), 2); },
                    {Q, K}) < kTol);
    CHECK(max_error(
              [](Graph&, const std::vector<Var>& v) {
                  return random_contraction(attention_mix(attention_probs(v[0], v[1], 2), v[2], 2), 3);
              },
              {Q, K, V}) < kTol);
    CHECK(max_error(
              [](Graph&, const std::vector<Var>& v) {
                  return random_contraction(head_mean(attention_probs(v[0], v[1], 2), 2), 4);
              },
              {Q, K}) < kTol);
    CHECK(max_error([](Graph&, const std::vector<Var>& v) { return truncated_tmse(v[0], 0.8); }, {X}) < kTol);
}

TEST_CASE("im2col layout and padding") {
    Graph g;
    Matrix x(4, 1);
    x << 1, 2, 3, 4;
    const auto cols = im2col_dilated(g.constant(x), 2).value();
    Matrix expect(4, 3);
    expect << 0, 1, 3, 0, 2, 4, 1, 3, 0, 2, 4, 0;
    CHECK(cols == expect);
}

TEST_CASE("truncated tmse clamps large jumps") {
    Graph g;
    Matrix a(3, 1);
    a << 0.0, 1.0, 11.0;
    // (1^2 + 4^2) / 2
    CHECK(scalar(truncated_tmse(g.constant(a), 4.0)) == doctest::Approx(8.5));
}

TEST_CASE("weighted sum and pick sum") {
    Rng rng(4);
    auto A = random_matrix(rng, 2, 2);
    CHECK(max_error(
              [](Graph&, const std::vector<Var>& v) {
                  const auto s1 = pick_sum(v[0], {{0, 0, 1.0}, {1, 1, -2.0}});
                  const auto s2 = pick_sum(v[0], {{0, 1, 3.0}});
                  const std::pair<Var, double> terms[] = {{s1, 0.5}, {s2, 2.0}};
                  return weighted_sum(terms);
              },
              {A}) < kTol);
}

TEST_CASE("shape errors and non-scalar backward") {
    Graph g;
    auto a = g.constant(Matrix::Ones(2, 3));
    auto b = g.constant(Matrix::Ones(2, 3));
    CHECK_THROWS_AS(matmul(a, b), Error);
    CHECK_THROWS_AS(g.backward(a), Error);
}

TEST_CASE("gradients accumulate across reuse") {
    Graph g;
    Matrix x = Matrix::Constant(1, 1, 3.0);
    auto v = g.parameter(x, 0);
    auto y = matmul(v, v); // x^2
    g.backward(y);
    CHECK(g.grad(v)(0, 0) == doctest::Approx(6.0));
}

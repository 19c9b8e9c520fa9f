#include <doctest.h>

#include "srt/autograd.hpp"
#include "srt/layers.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace srt;

namespace {

using Fn = std::function<ag::Var(ag::Graph&, std::vector<ag::Var>&)>;

Matrix rand_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

double evaluate(const Fn& f, const std::vector<Matrix>& inputs) {
    ag::Graph g(false);
    std::vector<ag::Var> vars;
    for (const auto& m : inputs) vars.push_back(g.input(m));
    return f(g, vars).value()(0, 0);
}

// Largest relative difference between analytic and central-difference gradients.
double grad_error(const Fn& f, std::vector<Matrix> inputs) {
    ag::Graph g;
    std::vector<ag::Var> vars;
    for (const auto& m : inputs) vars.push_back(g.leaf(m));
    ag::Var out = f(g, vars);
    g.backward(out);
    const double h = 1e-6;
    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        const Matrix analytic = g.grad(vars[k]);
        for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
            const double keep = inputs[k].data()[i];
            inputs[k].data()[i] = keep + h;
            const double up = evaluate(f, inputs);
            inputs[k].data()[i] = keep - h;
            const double down = evaluate(f, inputs);
            inputs[k].data()[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.data()[i];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric)));
        }
    }
    return worst;
}

// Reduces a matrix to a scalar with fixed random weights so every entry matters.
ag::Var weigh(ag::Graph& g, ag::Var x, uint64_t seed = 99) {
    std::mt19937_64 rng(seed);
    return ag::sum(ag::mul_const(x, rand_matrix(x.rows(), x.cols(), rng)));
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("elementwise and matrix ops") {
    std::mt19937_64 rng(1);
    const Matrix a = rand_matrix(3, 4, rng), b = rand_matrix(4, 5, rng), c = rand_matrix(5, 4, rng);
    const Matrix r = rand_matrix(1, 4, rng);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::matmul(v[0], v[1])); }, {a, b}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::matmul_nt(v[0], v[1])); }, {a, c}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::add_row(v[0], v[1])); }, {a, r}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::scale(ag::add(v[0], v[0]), -0.3)); }, {a}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::gelu(v[0])); }, {a}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::relu(v[0])); }, {a}) < 1e-6);
}

TEST_CASE("normalisation and softmax") {
    std::mt19937_64 rng(2);
    const Matrix x = rand_matrix(4, 6, rng), gamma = rand_matrix(1, 6, rng), beta = rand_matrix(1, 6, rng);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::layer_norm(v[0], v[1], v[2])); },
                     {x, gamma, beta}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::softmax_rows(v[0])); }, {x}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::softmax_rows(v[0], true, 1)); }, {x}) < 1e-6);
}

TEST_CASE("causal softmax masks the future") {
    ag::Graph g(false);
    const Matrix s = Matrix::Zero(3, 4);
    const Matrix p = ag::softmax_rows(g.input(s), true, 1).value();
    CHECK(p(0, 2) == 0.0);
    CHECK(p(0, 3) == 0.0);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(2, 3) == doctest::Approx(0.25));
}

TEST_CASE("structural ops") {
    std::mt19937_64 rng(3);
    const Matrix a = rand_matrix(3, 4, rng), b = rand_matrix(2, 4, rng), t = rand_matrix(6, 4, rng);
    CHECK(grad_error([](ag::Graph& g, auto& v) {
              const ag::Var parts[] = {v[0], v[1], v[0]};
              return weigh(g, ag::concat_rows(parts));
          }, {a, b}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) {
              const ag::Var parts[] = {v[0], ag::slice_cols(v[0], 1, 2)};
              return weigh(g, ag::concat_cols(parts));
          }, {a}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) { return weigh(g, ag::slice_rows(v[0], 1, 2)); }, {a}) < 1e-6);
    CHECK(grad_error([](ag::Graph& g, auto& v) {
              const int ids[] = {5, 0, 5, 2};
              return weigh(g, ag::gather_rows(v[0], ids));
          }, {t}) < 1e-6);
}

TEST_CASE("cross entropy and attention") {
    std::mt19937_64 rng(4);
    const Matrix logits = rand_matrix(5, 7, rng);
    CHECK(grad_error([](ag::Graph&, auto& v) {
              const int targets[] = {3, -1, 0, 6, 2};
              return ag::cross_entropy(v[0], targets);
          }, {logits}) < 1e-6);
    const Matrix q = rand_matrix(3, 8, rng), k = rand_matrix(5, 8, rng), val = rand_matrix(5, 8, rng);
    for (bool causal : {false, true}) {
        CHECK(grad_error([causal](ag::Graph& g, auto& v) {
                  return weigh(g, ag::multi_head_attention(v[0], v[1], v[2], 2, causal));
              }, {q, k, val}) < 1e-6);
    }
}

TEST_CASE("cross entropy value") {
    ag::Graph g(false);
    Matrix logits(2, 3);
    logits << 0.0, 0.0, 0.0, 1.0, 2.0, 3.0;
    const int targets[] = {1, 2};
    const double expect = 0.5 * (std::log(3.0) + (std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0));
    CHECK(ag::cross_entropy(g.input(logits), targets).value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("parameters collect gradients only when trainable") {
    Parameter frozen{"w", Matrix::Ones(2, 2), Matrix::Zero(2, 2), false};
    Parameter live{"v", Matrix::Ones(2, 2), Matrix::Zero(2, 2), true};
    ag::Graph g;
    ag::Var x = g.input(Matrix::Ones(1, 2));
    ag::Var y = ag::sum(ag::add(ag::matmul(x, g.param(frozen)), ag::matmul(x, g.param(live))));
    CHECK_FALSE(g.needs_grad(ag::matmul(x, g.param(frozen))));
    g.backward(y);
    CHECK(frozen.grad.cwiseAbs().maxCoeff() == 0.0);
    CHECK(live.grad.minCoeff() == 1.0);
    // a second pass accumulates
    ag::Graph g2;
    ag::Var y2 = ag::sum(ag::matmul(g2.input(Matrix::Ones(1, 2)), g2.param(live)));
    g2.backward(y2);
    CHECK(live.grad.minCoeff() == 2.0);
}

TEST_CASE("dense rows are independent of batch composition") {
    std::mt19937_64 rng(5);
    const Matrix w = rand_matrix(37, 29, rng), b = rand_matrix(1, 29, rng), x = rand_matrix(11, 37, rng);
    Matrix all;
    dense_rows(x, w, &b, all);
    CHECK((all - ((x * w).rowwise() + b.row(0))).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Matrix one;
        dense_rows(x.row(r), w, &b, one);
        CHECK((one.row(0) - all.row(r)).cwiseAbs().maxCoeff() == 0.0);
    }
}

}

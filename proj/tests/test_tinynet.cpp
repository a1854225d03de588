#include "otshift/errors.hpp"
#include "otshift/tinynet.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace otshift;

namespace {

// Scalar loss <r, net(x)> for a fixed random readout r.
double readout(const DenseNet& net, const Matrix& x, const Matrix& r)
{
    return net.forward(x).output().cwiseProduct(r).sum();
}

bool close(double analytic, double fd, double rel)
{
    return std::abs(analytic - fd) <= rel * std::max(std::abs(analytic), std::abs(fd)) + 1e-8;
}

DenseNet random_net(std::mt19937_64& rng, int& input_dim)
{
    static const Activation hidden_kinds[] = {Activation::relu, Activation::leaky_relu, Activation::linear};
    input_dim = 1 + static_cast<int>(rng() % 5);
    std::vector<LayerSpec> layers;
    const int depth = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < depth; ++k)
        layers.push_back({1 + static_cast<int>(rng() % 6), hidden_kinds[rng() % 3]});
    layers.push_back({2 + static_cast<int>(rng() % 3), rng() % 2 ? Activation::softmax : Activation::linear});
    DenseNet net(input_dim, layers, rng());
    // Non-zero biases so that every parameter is exercised.
    Vector p = net.parameters();
    std::normal_distribution<double> z(0.0, 0.3);
    for (auto& v : p)
        v += z(rng);
    net.set_parameters(p);
    return net;
}

}  // namespace

TEST_CASE("forward examples")
{
    DenseLayer zero{Matrix::Zero(4, 3), Vector::Zero(4), Activation::softmax};
    const DenseNet uniform({zero});
    const Vector out = uniform.predict(Vector(Vector::Ones(3)));
    for (int k = 0; k < 4; ++k)
        CHECK(out[k] == doctest::Approx(0.25));

    DenseLayer id{Matrix::Identity(3, 3), Vector::Zero(3), Activation::linear};
    const DenseNet identity({id});
    Vector x(3);
    x << 1.5, -2, 0.25;
    CHECK(identity.predict(x) == x);

    std::mt19937_64 rng(1);
    int d = 0;
    const DenseNet net = random_net(rng, d);
    const Vector probe = Vector::LinSpaced(d, -1, 1);
    CHECK(net.predict(probe) == net.predict(probe));
}

TEST_CASE("shape and cache errors")
{
    DenseLayer a{Matrix::Zero(4, 3), Vector::Zero(4), Activation::relu};
    DenseLayer b{Matrix::Zero(2, 5), Vector::Zero(2), Activation::linear};
    CHECK_THROWS_AS(DenseNet({a, b}), DimensionError);
    DenseLayer s{Matrix::Zero(4, 3), Vector::Zero(4), Activation::softmax};
    DenseLayer c{Matrix::Zero(2, 4), Vector::Zero(2), Activation::linear};
    CHECK_THROWS_AS(DenseNet({s, c}), DomainError);

    DenseNet net(3, {{4, Activation::relu}, {2, Activation::linear}}, 5);
    DenseNet other(3, {{4, Activation::relu}, {2, Activation::linear}}, 6);
    const ForwardCache cache = net.forward(Matrix::Ones(3, 2));
    CHECK_THROWS_AS(other.backward(cache, Matrix::Ones(2, 2)), CacheError);
    net.set_parameters(net.parameters());
    CHECK_THROWS_AS(net.backward(cache, Matrix::Ones(2, 2)), CacheError);
    CHECK_THROWS_AS(net.forward(Matrix::Ones(2, 2)), DimensionError);
}

TEST_CASE("softmax cross-entropy gradient vanishes at the target")
{
    DenseLayer out{Matrix::Zero(3, 2), Vector::Zero(3), Activation::softmax};
    out.bias << 60, 0, 0;
    const DenseNet net({out});
    const Matrix x = Matrix::Ones(2, 1);
    const ForwardCache cache = net.forward(x);
    const Vector p = cache.output().col(0);
    // d(-log p_0)/dp = (-1/p_0, 0, 0)
    Matrix dout = Matrix::Zero(3, 1);
    dout(0, 0) = -1.0 / p[0];
    const NetGradient g = net.backward(cache, dout);
    CHECK(g.params.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradients match central differences on 50 random nets")
{
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(0.0, 1.0);
    const double h = 1e-5;
    int checked = 0;
    for (int t = 0; t < 50; ++t) {
        int d = 0;
        DenseNet net = random_net(rng, d);
        const int batch = 1 + static_cast<int>(rng() % 4);
        Matrix x(d, batch), r(net.output_dim(), batch);
        for (auto& v : x.reshaped()) v = z(rng);
        for (auto& v : r.reshaped()) v = z(rng);

        const NetGradient g = net.backward(net.forward(x), r);
        const Vector p0 = net.parameters();
        REQUIRE(g.params.size() == p0.size());
        for (Eigen::Index k = 0; k < p0.size(); ++k) {
            Vector p = p0;
            p[k] += h;
            net.set_parameters(p);
            const double up = readout(net, x, r);
            p[k] -= 2 * h;
            net.set_parameters(p);
            const double down = readout(net, x, r);
            CHECK(close(g.params[k], (up - down) / (2 * h), 1e-4));
            ++checked;
        }
        net.set_parameters(p0);
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            Matrix xp = x, xm = x;
            xp.reshaped()[k] += h;
            xm.reshaped()[k] -= h;
            CHECK(close(g.input.reshaped()[k], (readout(net, xp, r) - readout(net, xm, r)) / (2 * h), 1e-4));
        }
    }
    CHECK(checked > 200);
}

TEST_CASE("json round trip")
{
    DenseNet net(3, {{5, Activation::leaky_relu}, {2, Activation::softmax}}, 9);
    const DenseNet back = DenseNet::from_json(net.to_json());
    CHECK(back.parameters() == net.parameters());
    CHECK(back.layers().back().activation == Activation::softmax);
}

TEST_CASE("adam")
{
    AdamState s(2, AdamOptions{0.1, 0.5, 0.999, 1e-8});
    Vector w = Vector::Constant(2, 1.0);
    adam_step(s, w, Vector::Zero(2));
    CHECK(w == Vector::Constant(2, 1.0));
    CHECK(s.polyak == w);

    AdamState q(1, AdamOptions{0.1, 0.5, 0.999, 1e-8});
    Vector x = Vector::Constant(1, 1.0);
    adam_step(q, x, Vector(2.0 * x));
    // Bias-corrected first step moves by lr * g / |g|.
    CHECK(x[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(std::abs(x[0]) < 1.0);

    auto run = [] {
        DenseNet net(2, {{3, Activation::relu}, {1, Activation::linear}}, 42);
        AdamState st(net.parameter_count(), AdamOptions{});
        std::mt19937_64 rng(1);
        std::normal_distribution<double> z;
        for (int k = 0; k < 20; ++k) {
            Matrix x(2, 4);
            for (auto& v : x.reshaped()) v = z(rng);
            const ForwardCache c = net.forward(x);
            adam_step(st, net, net.backward(c, c.output()).params);
        }
        return net.parameters();
    };
    CHECK(run() == run());
}

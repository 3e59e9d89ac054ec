#include "doctest.h"

#include <cmath>
#include <random>

#include "glocad/kernel.hpp"
#include "glocad/odesim.hpp"

using namespace glocad;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

double fd(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("kernel values") {
    const Kernel g = Kernel::gaussian(1.0);
    CHECK(kernel_eval(g, v1(0), v1(0)) == 1.0);
    CHECK(std::abs(kernel_eval(g, v1(0), v1(1)) - 0.606531) < 1e-6);
    const Kernel q = Kernel::imq(1.0, -0.5);
    CHECK(kernel_eval(q, v1(0), v1(0)) == 1.0);
}

TEST_CASE("kernel gradient in x") {
    const Kernel g = Kernel::gaussian(1.0);
    CHECK(kernel_grad_x(g, v1(0.3), v1(0.3)).norm() == 0.0);
    CHECK(std::abs(kernel_grad_x(g, v1(1), v1(0))(0) + std::exp(-0.5)) < 1e-6);
    const Kernel q = Kernel::imq(1.0, -0.5);
    CHECK(std::abs(kernel_grad_x(q, v1(1), v1(0))(0) + std::pow(2.0, -1.5)) < 1e-6);
}

TEST_CASE("kernel gradient in the bandwidth") {
    CHECK(kernel_grad_bandwidth(Kernel::gaussian(1.7), v1(0.4), v1(0.4)) == 0.0);
    CHECK(std::abs(kernel_grad_bandwidth(Kernel::gaussian(1.0), v1(0), v1(1)) - 0.303265) < 1e-6);
    CHECK(std::abs(kernel_grad_bandwidth(Kernel::gaussian(2.0), v1(0), v1(2)) - 0.183940) < 1e-6);
    CHECK_THROWS_AS(kernel_grad_bandwidth(Kernel::imq(1.0, -0.5), v1(0), v1(1)), UnsupportedError);
}

TEST_CASE("invalid kernels are rejected") {
    CHECK_THROWS_AS(Kernel::gaussian(0.0), InputError);
    CHECK_THROWS_AS(Kernel::gaussian(-1.0), InputError);
    CHECK_THROWS_AS(Kernel::imq(0.0, -0.5), InputError);
    CHECK_THROWS_AS(Kernel::imq(1.0, 0.5), InputError);
    CHECK_THROWS_AS(kernel_eval(Kernel::gaussian(1.0), v1(0), Eigen::VectorXd::Zero(2)), InputError);
}

TEST_CASE("symmetry and positive definiteness") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N;
    for (const Kernel& k : {Kernel::gaussian(0.7), Kernel::imq(1.0, -0.5)}) {
        for (int t = 0; t < 50; ++t) {
            const int n = 2 + t % 7;
            Eigen::MatrixXd P(n, 2);
            for (int i = 0; i < P.size(); ++i) P(i) = N(rng);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    CHECK(kernel_eval(k, P.row(i), P.row(j)) == kernel_eval(k, P.row(j), P.row(i)));
            const Eigen::VectorXd eig = jacobi_eigenvalues(gram(k, P, P));
            CHECK(eig.minCoeff() >= -1e-10);
        }
    }
}

TEST_CASE("kernel gradients agree with central differences") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> U(0.3, 3.0);
    for (int t = 0; t < 100; ++t) {
        const Kernel g = Kernel::gaussian(U(rng));
        const Kernel q = Kernel::imq(U(rng), -U(rng));
        Eigen::VectorXd x(2), y(2);
        x << N(rng), N(rng);
        y << N(rng), N(rng);
        for (const Kernel& k : {g, q}) {
            const Eigen::VectorXd an = kernel_grad_x(k, x, y);
            for (int c = 0; c < 2; ++c) {
                auto f = [&](double s) {
                    Eigen::VectorXd xs = x;
                    xs(c) = s;
                    return kernel_eval(k, xs, y);
                };
                CHECK(rel(an(c), fd(f, x(c))) < 1e-5);
            }
        }
        auto fb = [&](double s2) { return kernel_eval(Kernel::gaussian(s2), x, y); };
        CHECK(rel(kernel_grad_bandwidth(g, x, y), fd(fb, g.bandwidth_sq)) < 1e-5);
    }
}

TEST_CASE("gram matrix entries") {
    Eigen::MatrixXd X(2, 1), Y(3, 1);
    X << 0, 1;
    Y << 0, 1, 2;
    const Eigen::MatrixXd K = gram(Kernel::gaussian(1.0), X, Y);
    CHECK(K.rows() == 2);
    CHECK(K.cols() == 3);
    CHECK(K(0, 0) == 1.0);
    CHECK(K(1, 2) == std::exp(-0.5));
}

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "shared_checks.hpp"
#include "vdo/nn.hpp"

using namespace vdo;
using namespace vdo::nn;
using doctest::Approx;
using checks::check_gradients;
using checks::kGradTol;
using checks::random_matrix;

TEST_CASE("gradient check: every head type, with and without normalisation") {
  const Head linear{HeadKind::kLinear};
  const Head squashed{HeadKind::kSquashed, -2.0, 3.0};
  const Head gaussian{HeadKind::kGaussian};
  for (const bool ln : {true, false}) {
    for (const auto& head : {linear, squashed, gaussian}) {
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto r = check_gradients(head, ln, seed);
        INFO("head " << static_cast<int>(head.kind) << " ln " << ln << " seed " << seed);
        CHECK(r.max_param_error <= kGradTol);
        CHECK(r.max_input_error <= kGradTol);
      }
    }
  }
}

TEST_CASE("input-only backward matches the full backward") {
  Rng rng(4);
  Mlp net({5, 12, 12, 1}, Head{}, true);
  net.init(rng);
  const Matrix x = random_matrix(5, 7, rng);
  Cache cache;
  net.forward(x, cache);
  const Matrix d = random_matrix(1, 7, rng);
  Vector grad;
  Matrix full, only;
  net.backward(cache, d, grad, &full);
  net.backward_input(cache, d, only);
  CHECK((full - only).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward examples") {
  Rng rng(5);
  Mlp zero({4, 8, 8, 2}, Head{}, true);
  zero.init(rng);
  zero.set_params(Vector::Zero(zero.n_params()));
  CHECK(zero.forward(random_matrix(4, 3, rng)).cwiseAbs().maxCoeff() == 0.0);

  Mlp identity({3, 3}, Head{}, false);
  identity.set_params(Vector::Zero(identity.n_params()));
  identity.weight(0) = Matrix::Identity(3, 3);
  const Matrix x = random_matrix(3, 5, rng);
  CHECK((identity.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);

  Rng a(77), b(77);
  Mlp n1({6, 16, 16, 3}, Head{}, true), n2({6, 16, 16, 3}, Head{}, true);
  n1.init(a);
  n2.init(b);
  const Matrix in = random_matrix(6, 9, rng);
  CHECK((n1.forward(in) - n2.forward(in)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(n1.forward(random_matrix(5, 2, rng)), std::invalid_argument);
}

TEST_CASE("backward examples") {
  Rng rng(6);
  Mlp net({4, 8, 8, 2}, Head{}, false);
  net.init(rng);
  const Matrix x = random_matrix(4, 3, rng);
  Cache cache;
  net.forward(x, cache);
  Vector grad;
  net.backward(cache, Matrix::Zero(2, 3), grad);
  CHECK(grad.cwiseAbs().maxCoeff() == 0.0);

  // A hidden unit held below zero contributes nothing.
  net.bias(0)[0] = -1e3;
  net.forward(x, cache);
  net.backward(cache, random_matrix(2, 3, rng), grad);
  Mlp view = net;
  view.set_params(grad);
  CHECK(view.weight(0).row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(view.bias(0)[0] == 0.0);
  CHECK(view.weight(1).col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(view.weight(1).cwiseAbs().maxCoeff() > 0.0);

  net.mutable_params()[0] += 1.0;
  CHECK_THROWS_AS(net.backward(cache, Matrix::Zero(2, 3), grad), std::logic_error);
}

TEST_CASE("squashed outputs stay in range under parameter blow-up") {
  Rng rng(7);
  Mlp net({4, 8, 2}, Head{HeadKind::kSquashed, 0.25, 0.75}, true);
  net.init(rng);
  net.set_params(net.params() * 1e6);
  const Matrix out = net.forward(random_matrix(4, 100, rng, 10.0));
  CHECK(out.minCoeff() >= 0.25);
  CHECK(out.maxCoeff() <= 0.75);

  Mlp g({4, 8, 4}, Head{HeadKind::kGaussian}, true);
  g.init(rng);
  g.set_params(g.params() * 1e6);
  const auto s = squashed_sample(g.forward(random_matrix(4, 100, rng, 10.0)), g.head(), rng);
  CHECK(s.action.minCoeff() >= 0.0);
  CHECK(s.action.maxCoeff() <= 1.0);
  CHECK(s.log_std.maxCoeff() <= 2.0);
  CHECK(s.log_std.minCoeff() >= -20.0);
}

TEST_CASE("squashed log-probability matches the change-of-variables formula") {
  Rng rng(8);
  Matrix head_out(2, 50);
  for (Eigen::Index j = 0; j < 50; ++j) {
    head_out(0, j) = uniform(rng, -2.0, 2.0);
    head_out(1, j) = uniform(rng, -3.0, 1.0);
  }
  const auto s = squashed_sample(head_out, Head{HeadKind::kGaussian}, rng);
  for (Eigen::Index j = 0; j < 50; ++j) {
    const double mu = head_out(0, j);
    const double sigma = std::exp(head_out(1, j));
    const double u = s.u(0, j);
    const double gauss = -0.5 * std::pow((u - mu) / sigma, 2) - std::log(sigma) - 0.5 * std::log(2 * std::numbers::pi);
    const double jac = std::log(0.5 * (1.0 - std::tanh(u) * std::tanh(u)));
    CHECK(s.log_prob[j] == Approx(gauss - jac).epsilon(1e-9));
    CHECK(s.action(0, j) == Approx(0.5 * (std::tanh(u) + 1.0)).epsilon(1e-15));
  }
}

TEST_CASE("adam examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Vector p = Vector::LinSpaced(5, -1.0, 1.0);
    const Vector before = p;
    AdamState s(5, 0.1);
    const auto r = adam_step(p, Vector::Zero(5), s, 1.0);
    CHECK(r.applied);
    CHECK(s.step == 1);
    CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("first step moves by the learning rate") {
    Vector p = Vector::Constant(1, 2.0);
    AdamState s(1, 0.1);
    adam_step(p, Vector::Constant(1, 1.0), s, 0.0);
    CHECK(p[0] - 2.0 == Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("global-norm clipping") {
    Vector p = Vector::Zero(2);
    AdamState s(2, 0.1);
    Vector g(2);
    g << 6.0, 8.0;
    const auto r = adam_step(p, g, s, 1.0);
    CHECK(r.grad_norm == Approx(10.0).epsilon(1e-15));
    // m holds (1 - beta1) times the applied gradient.
    CHECK((s.m / (1.0 - s.beta1)).norm() == Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient is rejected") {
    Vector p = Vector::Ones(3);
    AdamState s(3, 0.1);
    Vector g = Vector::Ones(3);
    g[1] = std::nan("");
    const auto r = adam_step(p, g, s, 1.0);
    CHECK_FALSE(r.applied);
    CHECK(s.step == 0);
    CHECK(p == Vector::Ones(3));
  }
}

TEST_CASE("soft update examples") {
  Rng rng(9);
  Mlp online({3, 4, 2}, Head{}, true), target({3, 4, 2}, Head{}, true);
  online.init(rng);
  target.init(rng);
  const Vector before = target.params();
  soft_update(target, online, 0.0);
  CHECK(target.params() == before);
  soft_update(target, online, 1.0);
  CHECK(target.params() == online.params());

  online.set_params(Vector::Ones(online.n_params()));
  target.set_params(Vector::Zero(target.n_params()));
  soft_update(target, online, 0.005);
  CHECK((target.params().array() - 0.005).abs().maxCoeff() < 1e-18);

  Mlp other({3, 5, 2}, Head{}, true);
  CHECK_THROWS(soft_update(other, online, 0.5));
}

TEST_CASE("row-major parameter serialisation round-trips") {
  Rng rng(10);
  Mlp net({3, 5, 2}, Head{}, true);
  net.init(rng);
  const auto values = net.params_row_major();
  CHECK(values.size() == static_cast<std::size_t>(net.n_params()));
  // First entries are W0 in row-major order.
  CHECK(values[1] == net.weight(0)(0, 1));
  Mlp copy({3, 5, 2}, Head{}, true);
  copy.set_params_row_major(values);
  CHECK(copy.params() == net.params());
}

TEST_CASE("checkpoint round trip and mismatch detection") {
  const auto dir = std::filesystem::temp_directory_path() / "vdo_nn_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "net.bin").string();
  Rng rng(11);
  Mlp a({4, 8, 2}, Head{HeadKind::kSquashed, 0.0, 1.0}, true);
  a.init(rng);
  AdamState sa(a.n_params(), 3e-4);
  adam_step(a, Vector::Ones(a.n_params()), sa, 1.0);
  double scalar = 0.125;
  save_checkpoint(path, {{"actor", &a, &sa}}, {{"epsilon", &scalar}});

  Mlp b({4, 8, 2}, Head{HeadKind::kSquashed, 0.0, 1.0}, true);
  b.init(rng);
  AdamState sb(b.n_params(), 1e-3);
  double restored = 0.0;
  load_checkpoint(path, {{"actor", &b, &sb}}, {{"epsilon", &restored}});
  CHECK(b.params() == a.params());
  CHECK(sb.m == sa.m);
  CHECK(sb.v == sa.v);
  CHECK(sb.step == sa.step);
  CHECK(sb.lr == sa.lr);
  CHECK(restored == 0.125);

  Mlp wrong({4, 9, 2}, Head{HeadKind::kSquashed, 0.0, 1.0}, true);
  CHECK_THROWS_AS(load_checkpoint(path, {{"actor", &wrong, nullptr}}), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(path, {{"critic", &b, nullptr}}), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(path, {{"actor", &b, nullptr}}, {{"missing", &restored}}), std::runtime_error);
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path, {{"actor", &b, nullptr}}), std::runtime_error);
  std::filesystem::remove_all(dir);
}

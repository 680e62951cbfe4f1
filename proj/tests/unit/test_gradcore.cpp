#include <filesystem>

#include "helpers.hpp"

using namespace sra;
using doctest::Approx;
using sra::test::kind_of;

TEST_CASE("masked softmax zeroes masked entries and normalizes the rest") {
  const std::vector<double> z{1.0, 2.0, 3.0, 1000.0};
  const std::vector<char> mask{1, 0, 1, 0};
  const auto p = masked_softmax(z, mask);
  CHECK(p[1] == 0.0);
  CHECK(p[3] == 0.0);
  CHECK(p[0] + p[2] == Approx(1.0));
  CHECK(p[2] / p[0] == Approx(std::exp(2.0)));
  CHECK(kind_of([&] { masked_softmax(z, std::vector<char>(4, 0)); }) == ErrorKind::InvalidInput);
  const auto all = masked_softmax(z, {});
  CHECK(all[3] == Approx(1.0));
}

TEST_CASE("entropy of a uniform distribution is log n") {
  const std::vector<double> u(7, 1.0 / 7);
  CHECK(entropy(u) == Approx(std::log(7.0)));
  CHECK(entropy(std::vector<double>{0.0, 1.0}) == 0.0);
}

TEST_CASE("dense stack backward matches central differences") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> dims{1 + rng.index(5)};
    const std::size_t depth = 1 + rng.index(4);
    for (std::size_t l = 0; l < depth; ++l) dims.push_back(1 + rng.index(6));
    DenseStack net = DenseStack::make(dims, Activation::Relu, rng);
    // nonzero biases keep pre-activations off the ReLU kink
    for (auto& L : net.mutable_layers()) {
      for (auto& b : L.bias) b = 0.5 * rng.normal();
    }
    std::vector<double> x(dims.front());
    for (auto& v : x) v = rng.normal();
    std::vector<double> w(dims.back());
    for (auto& v : w) v = rng.normal();
    auto loss = [&] {
      const auto y = net.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i] + 0.5 * y[i] * y[i];
      return s;
    };
    DenseStack::Cache cache;
    const auto y = net.forward(x, &cache);
    std::vector<double> gy(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) gy[i] = w[i] + y[i];
    auto grads = net.zero_grads();
    const auto gx = net.backward(cache, gy, grads);
    const auto params = net.parameters();
    const auto spans = grads.spans();
    for (std::size_t b = 0; b < params.size(); ++b) {
      CHECK(test::max_fd_error(loss, params[b], spans[b]) < 1e-4);
    }
    CHECK(test::max_fd_error(loss, x, gx) < 1e-4);
  }
}

TEST_CASE("stale caches are rejected after a parameter change") {
  Rng rng(1);
  DenseStack net = DenseStack::make({2, 3, 1}, Activation::Relu, rng);
  DenseStack::Cache cache;
  net.forward(std::vector<double>{0.5, -0.2}, &cache);
  net.mutable_layers()[0].bias[0] += 0.1;
  auto grads = net.zero_grads();
  CHECK(kind_of([&] { net.backward(cache, std::vector<double>{1.0}, grads); }) ==
        ErrorKind::InvalidState);
}

TEST_CASE("Adam's first step moves each coordinate by about lr against the gradient sign") {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 0.0};
  Adam opt(AdamConfig{0.01});
  opt.step({p}, {g});
  CHECK(p[0] == Approx(1.0 - 0.01));
  CHECK(p[1] == Approx(-2.0 + 0.01));
  CHECK(p[2] == 0.5);
  CHECK(opt.steps() == 1);
  const std::vector<double> bad{std::nan(""), 0.0, 0.0};
  CHECK(kind_of([&] { opt.step({p}, {bad}); }) == ErrorKind::TrainingDivergence);
}

TEST_CASE("archives round-trip stacks in binary and JSON layouts") {
  Rng rng(8);
  const DenseStack net = DenseStack::make({4, 5, 3}, Activation::Relu, rng);
  TensorArchive ar;
  store_stack(ar, "actor", net);
  const auto dir = std::filesystem::temp_directory_path() / "sra_unit_archive";
  std::filesystem::create_directories(dir);
  for (const char* name : {"a.bin", "a.json"}) {
    ar.save(dir / name);
    const DenseStack back = load_stack(TensorArchive::load(dir / name), "actor");
    const std::vector<double> x{0.1, -0.3, 0.7, 1.1};
    CHECK(back.forward(x) == net.forward(x));
  }
  std::filesystem::remove_all(dir);
}

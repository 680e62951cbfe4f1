#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sra {

/// xoshiro256** generator with portable derived distributions. Standard
/// library distributions are implementation-defined, so everything that
/// must be reproducible draws through this type.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);
  double normal();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Sample an index from an unnormalized non-negative weight vector.
  std::size_t categorical(std::span<const double> weights);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t hash_name(std::string_view name);

/// Named, splittable seed source: child streams depend only on the parent
/// seed and the name path, never on draw order elsewhere.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  SeedStream child(std::string_view name) const;
  SeedStream child(std::uint64_t index) const;
  Rng rng() const { return Rng(seed_); }

 private:
  std::uint64_t seed_;
};

}  // namespace sra

#include "sra/rng.hpp"

#include <cmath>
#include <numbers>

#include "sra/error.hpp"

namespace sra {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::InvalidState: return "invalid-state";
    case ErrorKind::TrainingDivergence: return "training-divergence";
    case ErrorKind::UnsupportedMode: return "unsupported-mode";
    case ErrorKind::BudgetViolation: return "budget-violation";
    case ErrorKind::ConstraintInfeasible: return "constraint-infeasible";
    case ErrorKind::InvalidAction: return "invalid-action";
    case ErrorKind::EpisodeFinished: return "episode-finished";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& s : s_) s = splitmix64(st);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::index(std::uint64_t n) {
  // Lemire's nearly-divisionless bounded draw.
  __uint128_t m = static_cast<__uint128_t>(next()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      m = static_cast<__uint128_t>(next()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  require(total > 0.0 && std::isfinite(total), ErrorKind::InvalidInput,
          "categorical: weights must have positive finite mass");
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

SeedStream SeedStream::child(std::string_view name) const {
  std::uint64_t st = seed_ ^ hash_name(name);
  splitmix64(st);
  return SeedStream(splitmix64(st));
}

SeedStream SeedStream::child(std::uint64_t index) const {
  std::uint64_t st = seed_ + 0x632be59bd9b4e019ULL * (index + 1);
  splitmix64(st);
  return SeedStream(splitmix64(st));
}

}  // namespace sra

#pragma once

#include <cstdint>

#include "sra/data.hpp"

namespace sra {

/// Planted-community generator for social recommendation data. Users belong
/// to communities; friendships are mostly intra-community with heavy-tailed
/// degrees; item tastes follow a community genre plus global Zipf popularity.
/// Output counts are exact.
struct SynthConfig {
  std::size_t users = 1892;
  std::size_t items = 17632;
  std::size_t interactions = 92834;
  std::size_t social_pairs = 12717;
  std::size_t communities = 24;
  double community_size_skew = 0.8;
  double intra_social = 0.85;
  double degree_sigma = 0.9;
  double home_taste = 0.55;
  double global_taste = 0.30;  // remainder goes to a per-user secondary genre
  double zipf_exponent = 1.0;
  double zipf_offset = 3.0;
};

/// Matches the LastFM row of the dataset statistics table: 1892 users,
/// 17632 items, 92834 interactions, 25434 directed social relations.
SynthConfig lastfm_analog();

Dataset synthesize(const SynthConfig& config, std::uint64_t seed);

}  // namespace sra

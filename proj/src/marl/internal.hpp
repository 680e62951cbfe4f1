#pragma once

#include <optional>
#include <vector>

#include "sra/marl.hpp"

namespace sra::detail {

std::vector<double> with_one_hot(std::span<const double> features, std::size_t n,
                                 std::optional<CommunityId> hot);

std::vector<char> community_mask(const ActionSpace& space, std::optional<CommunityId> forbidden,
                                 std::optional<UserId> avoid);
std::vector<char> roster_mask(const ActionSpace& space, CommunityId community,
                              std::optional<UserId> avoid);

/// Flat agent: [user pool, item pool, t/T].
std::vector<double> flat_features(const FlatActor& actor, const AttackState& state);
/// Users in any roster; the second mask also drops `first`'s community (when
/// cross-community) and `first` itself.
std::vector<char> flat_user_mask(const ActionSpace& space, std::size_t users,
                                 std::optional<UserId> first);

/// The social observation shared by both picks of the Double layout.
inline constexpr AgentRole kDoubleRole = AgentRole::Social1;

}  // namespace sra::detail

#pragma once

#include <cstdint>
#include <string_view>

namespace egd {

/// Counter-based seed derivation.
///
/// Every random stream in the tools is keyed by (master seed, purpose, index):
///
///   derive_seed(m, p, i) = splitmix64(splitmix64(m ^ fnv1a(p)) + i)
///
/// so a stream depends only on its own key. Adding trials or purposes never
/// shifts the streams of existing ones.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index = 0);

}  // namespace egd

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace iabsim {

/// Independent generator for a named consumer of a run's seed. Keys let a
/// consumer split further (e.g. one stream per link) without perturbing others.
std::mt19937_64 make_substream(std::uint64_t seed, std::string_view name,
                               std::initializer_list<std::uint64_t> keys = {});

}  // namespace iabsim

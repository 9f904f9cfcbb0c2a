#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/sampling.hpp"

namespace wsseg::train {

/// Seeded shuffle followed by a prefix split; |train| = floor(ratio * N).
template <typename Id>
std::pair<std::vector<Id>, std::vector<Id>> split_dataset(const std::vector<Id>& ids, double ratio,
                                                          std::uint64_t seed) {
  if (ids.size() < 2) throw TooFewItemsError("need at least 2 items to split");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0,1)");
  std::vector<Id> order = ids;
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  // Guard against 0.9 * 10 evaluating to 8.999...
  const auto n_train = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(ids.size()) + 1e-9));
  if (n_train == 0 || n_train == ids.size())
    throw TooFewItemsError("split of " + std::to_string(ids.size()) + " items at ratio " +
                           std::to_string(ratio) + " leaves an empty side");
  std::vector<Id> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Id> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {std::move(train), std::move(val)};
}

}  // namespace wsseg::train

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

#include "semimt/corpus.hpp"
#include "semimt/neighbor.hpp"

namespace semimt {

/// Copy-with-substitution task. Sources are random token strings; targets
/// apply a fixed global bijection to every regular token plus a
/// domain-specific permutation to the ambiguous tokens. The corpus mixes
/// domains whose permutations disagree, so the ambiguous mapping is only
/// recoverable from retrieved neighbors of the right domain.
struct SyntheticTaskConfig {
  std::uint64_t seed = 1;
  int regular_types = 40;
  int ambiguous_types = 10;
  int groups_per_domain = 84;  // sibling groups (shared ambiguous content)
  int siblings_per_group = 3;  // train sentences per group
  int dev_groups_per_domain = 25;
  int len_min = 4;
  int len_max = 8;
  double ambiguous_fraction = 0.45;
  /// Probability a regular template position is resampled per sibling.
  double regular_resample = 0.35;
  /// Distinct ambiguous types per group (inclusive bounds).
  int amb_types_min = 1;
  int amb_types_max = 3;
  std::vector<int> domains = {0, 1};
};

struct SyntheticTask {
  Corpus train;
  Corpus dev;
  /// Oracle neighbors: for each pair id, the train ids of its sibling group.
  std::vector<std::vector<std::uint64_t>> train_oracle;
  std::vector<std::vector<std::uint64_t>> dev_oracle;
};

SyntheticTask make_copy_substitution_task(const SyntheticTaskConfig& cfg);

/// Oracle neighbor lists as dumpable sets (score = 1/rank placeholder).
std::vector<NeighborSet> oracle_neighbor_sets(const std::vector<std::vector<std::uint64_t>>& oracle);

/// Mismatched evaluation sets: rotates the neighbor lists across queries so
/// every query sees another query's neighbors.
std::vector<std::vector<std::uint64_t>> rotate_neighbors(
    const std::vector<std::vector<std::uint64_t>>& oracle);

/// Noisy sets: each neighbor is replaced by a random train pair with
/// probability noise, seeded.
std::vector<std::vector<std::uint64_t>> corrupt_neighbors(
    const std::vector<std::vector<std::uint64_t>>& oracle, std::size_t corpus_size, double noise,
    std::uint64_t seed);

/// Same-domain noise: replacements are drawn among train pairs sharing the
/// query's domain, so the corruption is topical rather than random.
std::vector<std::vector<std::uint64_t>> corrupt_neighbors_same_domain(
    const std::vector<std::vector<std::uint64_t>>& oracle, const Corpus& train,
    const std::vector<std::string>& query_domains, double noise, std::uint64_t seed);

}  // namespace semimt

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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace semimt {

struct Neighbor {
  std::uint64_t pair_id = 0;
  double score = 0.0;
};

/// Where an n-gram neighbor match came from; dumped as optional metadata.
struct NeighborMatch {
  std::uint32_t width = 0;
  std::uint32_t query_start = 0;  // 1-based start in the query sentence
  std::uint64_t match_pair = 0;
  std::uint32_t match_start = 0;  // 1-based start in the matched sentence
};

/// Ordered retrieved pairs for one query: sorted by score descending,
/// ties by ascending pair id, no duplicate ids.
struct NeighborSet {
  std::optional<std::uint64_t> query_id;
  std::vector<Neighbor> neighbors;
  /// Parallel to `neighbors` for the n-gram strategies; empty otherwise.
  std::vector<NeighborMatch> matches;

  bool contains(std::uint64_t pair_id) const;
  /// Sorts by (score desc, pair_id asc), carrying `matches` along.
  void canonicalize();
  /// Keeps the top n after canonicalize().
  void truncate(std::size_t n);
};

/// One JSONL row per set: {"query_id": int|null, "neighbors": [[id, score],
/// ...]}. Scores are printed with 12 significant digits. When match metadata
/// is present a parallel "matches" array is emitted.
void dump_neighbor_sets(const std::vector<NeighborSet>& sets, std::ostream& os);
void dump_neighbor_sets(const std::vector<NeighborSet>& sets, const std::string& path);

std::vector<NeighborSet> load_neighbor_sets(std::istream& is);
std::vector<NeighborSet> load_neighbor_sets(const std::string& path);

}  // namespace semimt

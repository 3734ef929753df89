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

#include "semimt/neighbor.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semimt {

bool NeighborSet::contains(std::uint64_t pair_id) const {
  return std::any_of(neighbors.begin(), neighbors.end(),
                     [&](const Neighbor& n) { return n.pair_id == pair_id; });
}

void NeighborSet::canonicalize() {
  std::vector<std::size_t> order(neighbors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (neighbors[a].score != neighbors[b].score) return neighbors[a].score > neighbors[b].score;
    return neighbors[a].pair_id < neighbors[b].pair_id;
  });
  std::vector<Neighbor> nn;
  nn.reserve(neighbors.size());
  std::vector<NeighborMatch> mm;
  mm.reserve(matches.size());
  for (std::size_t i : order) {
    nn.push_back(neighbors[i]);
    if (!matches.empty()) mm.push_back(matches[i]);
  }
  neighbors = std::move(nn);
  matches = std::move(mm);
}

void NeighborSet::truncate(std::size_t n) {
  if (neighbors.size() > n) neighbors.resize(n);
  if (matches.size() > n) matches.resize(n);
}

namespace {

std::string fmt_score(double s) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", s);
  return buf;
}

}  // namespace

void dump_neighbor_sets(const std::vector<NeighborSet>& sets, std::ostream& os) {
  for (const auto& set : sets) {
    os << "{\"query_id\": ";
    if (set.query_id)
      os << *set.query_id;
    else
      os << "null";
    os << ", \"neighbors\": [";
    for (std::size_t i = 0; i < set.neighbors.size(); ++i) {
      if (i) os << ", ";
      os << '[' << set.neighbors[i].pair_id << ", " << fmt_score(set.neighbors[i].score) << ']';
    }
    os << ']';
    if (!set.matches.empty()) {
      os << ", \"matches\": [";
      for (std::size_t i = 0; i < set.matches.size(); ++i) {
        const auto& m = set.matches[i];
        if (i) os << ", ";
        os << "{\"width\": " << m.width << ", \"query_start\": " << m.query_start
           << ", \"match_pair\": " << m.match_pair << ", \"match_start\": " << m.match_start << '}';
      }
      os << ']';
    }
    os << "}\n";
  }
}

void dump_neighbor_sets(const std::vector<NeighborSet>& sets, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write neighbor dump: " + path);
  dump_neighbor_sets(sets, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<NeighborSet> load_neighbor_sets(std::istream& is) {
  std::vector<NeighborSet> sets;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("neighbors"))
      throw std::runtime_error("neighbor dump line " + std::to_string(lineno) + ": malformed row");
    NeighborSet set;
    if (row.contains("query_id") && !row["query_id"].is_null())
      set.query_id = row["query_id"].get<std::uint64_t>();
    for (const auto& nb : row["neighbors"]) {
      Neighbor n;
      n.pair_id = nb.at(0).get<std::uint64_t>();
      n.score = nb.at(1).get<double>();
      set.neighbors.push_back(n);
    }
    if (row.contains("matches")) {
      for (const auto& m : row["matches"]) {
        NeighborMatch nm;
        nm.width = m.at("width").get<std::uint32_t>();
        nm.query_start = m.at("query_start").get<std::uint32_t>();
        nm.match_pair = m.at("match_pair").get<std::uint64_t>();
        nm.match_start = m.at("match_start").get<std::uint32_t>();
        set.matches.push_back(nm);
      }
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<NeighborSet> load_neighbor_sets(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open neighbor dump: " + path);
  return load_neighbor_sets(is);
}

}  // namespace semimt

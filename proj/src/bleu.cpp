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

#include "semimt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace semimt {

namespace {

using CountMap = std::unordered_map<std::string, std::size_t>;

CountMap ngram_counts(const TokenSeq& toks, std::size_t n) {
  CountMap counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      key += toks[i + k];
      key += '\x01';
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references) {
  if (hypotheses.empty()) throw std::runtime_error("corpus_bleu: empty corpus");
  if (hypotheses.size() != references.size())
    throw std::runtime_error("corpus_bleu: hypothesis/reference count mismatch");

  std::size_t matched[4] = {0, 0, 0, 0};
  std::size_t total[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const TokenSeq& hyp = hypotheses[s];
    const TokenSeq& ref = references[s];
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      CountMap hc = ngram_counts(hyp, n);
      CountMap rc = ngram_counts(ref, n);
      for (const auto& [key, count] : hc) {
        total[n - 1] += count;
        auto it = rc.find(key);
        if (it != rc.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total[n] == 0 || matched[n] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  double bp = 1.0;
  if (hyp_len < ref_len && hyp_len > 0)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  if (hyp_len == 0) return 0.0;
  return 100.0 * bp * std::exp(log_precision / 4.0);
}

}  // namespace semimt

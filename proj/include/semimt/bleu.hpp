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

#include <vector>

#include "semimt/corpus.hpp"

namespace semimt {

/// Corpus-level BLEU-4 in [0, 100]: clipped n-gram precisions for n = 1..4
/// aggregated over the corpus, geometric mean, brevity penalty
/// exp(1 - ref_len / hyp_len) when the hypothesis is shorter. No smoothing;
/// any zero precision yields 0. Inputs are pre-tokenized and must have
/// equal lengths.
double corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references);

}  // namespace semimt

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

#include "semimt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "semimt/common.hpp"

namespace semimt {
namespace {

// Decodes one UTF-8 code point starting at s[i]; advances i past it.
// Invalid bytes are treated as single-byte code points.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  std::uint32_t cp = c;
  if ((c & 0x80u) == 0x00u) {
    len = 1;
  } else if ((c & 0xe0u) == 0xc0u) {
    len = 2;
    cp = c & 0x1fu;
  } else if ((c & 0xf0u) == 0xe0u) {
    len = 3;
    cp = c & 0x0fu;
  } else if ((c & 0xf8u) == 0xf0u) {
    len = 4;
    cp = c & 0x07u;
  }
  if (i + len > s.size()) len = 1, cp = c;
  for (std::size_t k = 1; k < len; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xc0u) != 0x80u) {  // truncated sequence
      len = 1;
      cp = c;
      break;
    }
    cp = (cp << 6) | (cc & 0x3fu);
  }
  i += len;
  return cp;
}

bool is_space_cp(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
    case 0x85: case 0xa0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202f: case 0x205f: case 0x3000:
      return true;
    default:
      return (cp >= 0x2000 && cp <= 0x200a);
  }
}

void append_cp_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80u) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800u) {
    out.push_back(static_cast<char>(0xc0u | (cp >> 6)));
    out.push_back(static_cast<char>(0x80u | (cp & 0x3fu)));
  } else if (cp < 0x10000u) {
    out.push_back(static_cast<char>(0xe0u | (cp >> 12)));
    out.push_back(static_cast<char>(0x80u | ((cp >> 6) & 0x3fu)));
    out.push_back(static_cast<char>(0x80u | (cp & 0x3fu)));
  } else {
    out.push_back(static_cast<char>(0xf0u | (cp >> 18)));
    out.push_back(static_cast<char>(0x80u | ((cp >> 12) & 0x3fu)));
    out.push_back(static_cast<char>(0x80u | ((cp >> 6) & 0x3fu)));
    out.push_back(static_cast<char>(0x80u | (cp & 0x3fu)));
  }
}

std::string maybe_lower(std::string tok, bool lowercase) {
  if (!lowercase) return tok;
  // ASCII lowering only; full Unicode case folding is out of scope.
  std::transform(tok.begin(), tok.end(), tok.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return tok;
}

}  // namespace

TokenSeq tokenize(std::string_view text, const TokenizerConfig& cfg) {
  TokenSeq out;
  std::size_t i = 0;
  std::string cur;
  while (i < text.size()) {
    std::size_t start = i;
    std::uint32_t cp = next_codepoint(text, i);
    if (is_space_cp(cp)) {
      if (!cur.empty()) {
        out.push_back(maybe_lower(std::move(cur), cfg.lowercase));
        cur.clear();
      }
      continue;
    }
    if (cfg.mode == TokenizerMode::kCharacter) {
      std::string one;
      one.assign(text.substr(start, i - start));
      out.push_back(maybe_lower(std::move(one), cfg.lowercase));
    } else {
      cur.append(text.substr(start, i - start));
    }
  }
  if (!cur.empty()) out.push_back(maybe_lower(std::move(cur), cfg.lowercase));
  return out;
}

Vocab::Vocab() {
  add("<pad>");
  add("<bos>");
  add("<eos>");
  add("<unk>");
}

std::int32_t Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  std::int32_t id = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::int32_t Vocab::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::int32_t> Vocab::encode(const TokenSeq& toks) const {
  std::vector<std::int32_t> ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) ids.push_back(lookup(t));
  return ids;
}

namespace {

void ingest_lines(Corpus& c, const std::string& path, const LoadOptions& opts, LoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);

  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++st.rows_read;
    std::string src_text, tgt_text;
    bool ok = true;
    if (opts.format == CorpusFormat::kTsv) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        ok = false;
      } else {
        src_text = line.substr(0, tab);
        tgt_text = line.substr(tab + 1);
        if (tgt_text.find('\t') != std::string::npos) ok = false;
      }
    } else {
      nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object() || !row.contains("source") || !row.contains("target") ||
          !row["source"].is_string() || !row["target"].is_string()) {
        ok = false;
      } else {
        src_text = row["source"].get<std::string>();
        tgt_text = row["target"].get<std::string>();
      }
    }
    if (!ok) {
      if (!opts.skip_bad)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
      ++st.rows_skipped_bad;
      continue;
    }
    SentencePair p;
    p.source = tokenize(src_text, opts.tokenizer);
    p.target = tokenize(tgt_text, opts.tokenizer);
    if (p.source.empty() || p.target.empty()) {
      ++st.rows_skipped_empty;
      continue;
    }
    p.id = static_cast<std::uint64_t>(c.pairs.size());
    p.domain = opts.domain;
    for (const auto& t : p.source) c.vocab.add(t);
    for (const auto& t : p.target) c.vocab.add(t);
    c.pairs.push_back(std::move(p));
  }
}

}  // namespace

Corpus load_corpus(const std::string& path, const LoadOptions& opts, LoadStats* stats) {
  Corpus c;
  c.split = opts.split;
  ingest_lines(c, path, opts, stats);
  return c;
}

void append_corpus(Corpus& c, const std::string& path, const LoadOptions& opts, LoadStats* stats) {
  ingest_lines(c, path, opts, stats);
}

Corpus dedupe(const Corpus& c) {
  Corpus out;
  out.split = c.split;
  out.vocab = c.vocab;
  std::unordered_set<std::uint64_t> seen;
  out.pairs.reserve(c.pairs.size());
  for (const auto& p : c.pairs) {
    std::uint64_t h = kFnvOffset;
    for (const auto& t : p.source) h = fnv1a(t, fnv1a("\x01", h));
    h = fnv1a("\x02", h);
    for (const auto& t : p.target) h = fnv1a(t, fnv1a("\x01", h));
    // Hash collisions would merge distinct pairs; at workbench scale the
    // 64-bit space makes that a non-issue.
    if (!seen.insert(h).second) continue;
    SentencePair q = p;
    q.id = static_cast<std::uint64_t>(out.pairs.size());
    out.pairs.push_back(std::move(q));
  }
  return out;
}

namespace {
constexpr char kCorpusMagic[] = "SMTCORP1";
}

void save_corpus(const Corpus& c, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write corpus snapshot: " + path);
  os.write(kCorpusMagic, 8);
  put_le<std::uint32_t>(os, 1);  // version
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(c.split));
  put_le<std::uint64_t>(os, c.pairs.size());
  for (const auto& p : c.pairs) {
    put_le<std::uint64_t>(os, p.id);
    put_str(os, p.domain);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.source.size()));
    for (const auto& t : p.source) put_str(os, t);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.target.size()));
    for (const auto& t : p.target) put_str(os, t);
  }
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(c.vocab.size()));
  for (const auto& t : c.vocab.tokens()) put_str(os, t);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Corpus load_corpus_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open corpus snapshot: " + path);
  expect_magic(is, std::string_view(kCorpusMagic, 8));
  std::uint32_t version = get_le<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported corpus snapshot version");
  Corpus c;
  c.split = static_cast<Split>(get_le<std::uint8_t>(is));
  std::uint64_t n = get_le<std::uint64_t>(is);
  c.pairs.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    SentencePair p;
    p.id = get_le<std::uint64_t>(is);
    p.domain = get_str(is);
    std::uint32_t ns = get_le<std::uint32_t>(is);
    p.source.reserve(ns);
    for (std::uint32_t k = 0; k < ns; ++k) p.source.push_back(get_str(is));
    std::uint32_t nt = get_le<std::uint32_t>(is);
    p.target.reserve(nt);
    for (std::uint32_t k = 0; k < nt; ++k) p.target.push_back(get_str(is));
    c.pairs.push_back(std::move(p));
  }
  std::uint64_t vs = get_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < vs; ++i) {
    std::string tok = get_str(is);
    if (i < 4) continue;  // reserved tokens are installed by the Vocab ctor
    c.vocab.add(tok);
  }
  return c;
}

void save_vocab_text(const Vocab& v, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write vocab: " + path);
  for (const auto& t : v.tokens()) os << t << '\n';
}

Vocab load_vocab_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open vocab: " + path);
  Vocab v;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n >= 4) v.add(line);
    ++n;
  }
  return v;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw std::runtime_error("unknown split: " + name);
}

}  // namespace semimt

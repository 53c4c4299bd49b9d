#include "dvpg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dvpg/common.hpp"
#include "dvpg/rng.hpp"

namespace dvpg {

namespace {

using nlohmann::json;

bool parse_label(const std::string& field, int* label) {
  std::string t = trim(field);
  if (t == "0") {
    *label = 0;
    return true;
  }
  if (t == "1") {
    *label = 1;
    return true;
  }
  return false;
}

}  // namespace

LoadResult load_quora_tsv(const std::string& path) {
  LoadResult out;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, '\t');
    int label = 0;
    if (f.size() != 6 || !parse_label(f[5], &label) || trim(f[3]).empty() ||
        trim(f[4]).empty()) {
      ++out.skipped;
      continue;
    }
    out.pairs.push_back({f[3], f[4], label});
  }
  return out;
}

LoadResult load_msrp_tsv(const std::string& path) {
  LoadResult out;
  std::vector<std::string> lines = read_lines(path);
  for (size_t i = 1; i < lines.size(); ++i) {  // row 0 is the header
    const std::string& line = lines[i];
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, '\t');
    int label = 0;
    if (f.size() != 5 || !parse_label(f[0], &label) || trim(f[3]).empty() ||
        trim(f[4]).empty()) {
      ++out.skipped;
      continue;
    }
    out.pairs.push_back({f[3], f[4], label});
  }
  return out;
}

Tokenizer::Tokenizer(TokenizerConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.subword_vocab_path.empty()) {
    for (const std::string& line : read_lines(cfg_.subword_vocab_path)) {
      std::string piece = trim(line);
      if (!piece.empty()) pieces_.insert(piece);
    }
    if (pieces_.empty())
      throw ConfigError("subword vocabulary is empty: " + cfg_.subword_vocab_path);
  }
}

Tokens Tokenizer::tokenize(const std::string& text) const {
  std::string t = trim(text);
  if (t.empty()) throw DataError("tokenize: empty text");
  if (cfg_.lowercase) t = dvpg::lowercase(t);

  // Whitespace split with punctuation characters broken out one by one.
  Tokens words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : t) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.push_back(std::string(1, static_cast<char>(c)));
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  flush();

  if (pieces_.empty()) return words;

  // Greedy longest-match-first subword segmentation; continuation pieces
  // carry a ## prefix. A word with no matching prefix becomes <unk>.
  Tokens out;
  for (const std::string& w : words) {
    size_t pos = 0;
    std::vector<std::string> segs;
    bool failed = false;
    while (pos < w.size()) {
      size_t best = 0;
      for (size_t len = w.size() - pos; len >= 1; --len) {
        std::string piece = w.substr(pos, len);
        if (pos > 0) piece = "##" + piece;
        if (pieces_.count(piece)) {
          best = len;
          segs.push_back(piece);
          break;
        }
      }
      if (best == 0) {
        failed = true;
        break;
      }
      pos += best;
    }
    if (failed) {
      out.push_back("<unk>");
    } else {
      out.insert(out.end(), segs.begin(), segs.end());
    }
  }
  return out;
}

std::vector<ParaphrasePair> filter_by_length(
    const std::vector<ParaphrasePair>& pairs, int max_source_length) {
  std::vector<ParaphrasePair> out;
  for (const auto& p : pairs) {
    if (static_cast<int>(p.original.size()) < max_source_length &&
        static_cast<int>(p.paraphrase.size()) < max_source_length)
      out.push_back(p);
  }
  return out;
}

std::vector<ParaphrasePair> deduplicate(const std::vector<ParaphrasePair>& pairs) {
  std::set<std::string> seen;
  std::vector<ParaphrasePair> out;
  for (const auto& p : pairs) {
    std::string key = join(p.original, " ") + "\t" + join(p.paraphrase, " ") +
                      "\t" + std::to_string(p.label);
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

void Vocabulary::index() {
  token_to_id_.clear();
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_[id_to_token_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const std::vector<ParaphrasePair>& pairs,
                             int prune_limit) {
  if (prune_limit < 1) throw ConfigError("vocab prune limit must be >= 1");
  std::map<std::string, long long> counts;
  for (const auto& p : pairs) {
    for (const auto& t : p.original) ++counts[t];
    for (const auto& t : p.paraphrase) ++counts[t];
  }
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(),
                                                        counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& [tok, cnt] : ranked) {
    if (static_cast<int>(v.id_to_token_.size()) >= prune_limit + 4) break;
    v.id_to_token_.push_back(tok);
  }
  v.index();
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::runtime_error("vocab id out of range");
  return id_to_token_[id];
}

void Vocabulary::save(const std::string& path) const {
  json j;
  j["tokens"] = id_to_token_;
  write_text_file(path, j.dump());
}

Vocabulary Vocabulary::load(const std::string& path) {
  json j = json::parse(read_text_file(path));
  Vocabulary v;
  v.id_to_token_ = j.at("tokens").get<std::vector<std::string>>();
  if (v.id_to_token_.size() < 4) throw DataError("vocabulary file too small");
  v.index();
  return v;
}

EncodedPair encode_pair(const ParaphrasePair& pair, const Vocabulary& vocab) {
  EncodedPair e;
  e.source_tokens = pair.original;
  e.target_tokens = pair.paraphrase;
  e.label = pair.label;

  int base = vocab.size();
  std::unordered_map<std::string, int> first_pos;
  for (size_t i = 0; i < pair.original.size(); ++i) {
    const std::string& tok = pair.original[i];
    if (!first_pos.count(tok)) first_pos[tok] = static_cast<int>(i);
    if (vocab.contains(tok)) {
      int id = vocab.id(tok);
      e.source_ids.push_back(id);
      e.copy_targets.push_back(id);
    } else {
      e.source_ids.push_back(Vocabulary::kUnk);
      e.copy_targets.push_back(base + first_pos[tok]);
    }
  }
  e.ext_size = base + static_cast<int>(pair.original.size());

  e.target_input.push_back(Vocabulary::kBos);
  for (const std::string& tok : pair.paraphrase)
    e.target_input.push_back(vocab.contains(tok) ? vocab.id(tok)
                                                 : Vocabulary::kUnk);
  e.target_input.push_back(Vocabulary::kEos);

  for (size_t k = 1; k < e.target_input.size(); ++k) {
    if (k == e.target_input.size() - 1) {
      e.target_gold.push_back(Vocabulary::kEos);
      break;
    }
    const std::string& tok = pair.paraphrase[k - 1];
    if (vocab.contains(tok)) {
      e.target_gold.push_back(vocab.id(tok));
    } else if (first_pos.count(tok)) {
      e.target_gold.push_back(base + first_pos[tok]);
    } else {
      e.target_gold.push_back(Vocabulary::kUnk);
    }
  }
  return e;
}

CorpusSplit split_corpus(const std::vector<ParaphrasePair>& pairs, uint64_t seed,
                         double train_ratio, double dev_ratio) {
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed, "corpus-split");
  rng.shuffle(order);

  size_t n = pairs.size();
  size_t n_train = static_cast<size_t>(std::llround(train_ratio * n));
  size_t n_dev = static_cast<size_t>(std::llround(dev_ratio * n));
  if (n_train + n_dev > n) n_dev = n - n_train;

  CorpusSplit s;
  for (size_t i = 0; i < n; ++i) {
    const ParaphrasePair& p = pairs[order[i]];
    if (i < n_train)
      s.train.push_back(p);
    else if (i < n_train + n_dev)
      s.dev.push_back(p);
    else
      s.test.push_back(p);
  }
  return s;
}

void write_encoded_jsonl(const std::string& path,
                         const std::vector<EncodedPair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path);
  for (const auto& e : pairs) {
    json j;
    j["original_ids"] = e.source_ids;
    j["paraphrase_ids"] = e.target_input;
    j["copy_map"] = e.copy_targets;
    j["label"] = e.label;
    j["original_tokens"] = e.source_tokens;
    j["paraphrase_tokens"] = e.target_tokens;
    j["gold_ids"] = e.target_gold;
    j["ext_size"] = e.ext_size;
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<EncodedPair> read_encoded_jsonl(const std::string& path) {
  std::vector<EncodedPair> out;
  for (const std::string& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    EncodedPair e;
    e.source_ids = j.at("original_ids").get<std::vector<int>>();
    e.target_input = j.at("paraphrase_ids").get<std::vector<int>>();
    e.copy_targets = j.at("copy_map").get<std::vector<int>>();
    e.label = j.at("label").get<int>();
    e.source_tokens = j.at("original_tokens").get<Tokens>();
    e.target_tokens = j.at("paraphrase_tokens").get<Tokens>();
    e.target_gold = j.at("gold_ids").get<std::vector<int>>();
    e.ext_size = j.at("ext_size").get<int>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dvpg

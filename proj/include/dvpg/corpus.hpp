#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dvpg/metrics.hpp"

namespace dvpg {

struct RawPair {
  std::string original;
  std::string paraphrase;
  int label = 0;
};

struct LoadResult {
  std::vector<RawPair> pairs;
  int skipped = 0;
};

// Quora format: 6 tab-separated columns (id, qid1, qid2, question1,
// question2, is_duplicate), no header. Malformed rows are skipped and
// counted.
LoadResult load_quora_tsv(const std::string& path);

// MSRP format: 5 tab-separated columns (Quality, #1 ID, #2 ID, #1 String,
// #2 String) with one header row.
LoadResult load_msrp_tsv(const std::string& path);

struct TokenizerConfig {
  bool lowercase = true;
  // Path to a subword vocabulary file (one piece per line, continuations
  // prefixed with ##). Empty selects the whitespace+punctuation fallback.
  std::string subword_vocab_path;
};

class Tokenizer {
 public:
  explicit Tokenizer(TokenizerConfig cfg = {});
  Tokens tokenize(const std::string& text) const;

 private:
  TokenizerConfig cfg_;
  std::unordered_set<std::string> pieces_;
};

struct ParaphrasePair {
  Tokens original;
  Tokens paraphrase;
  int label = 0;
};

std::vector<ParaphrasePair> filter_by_length(
    const std::vector<ParaphrasePair>& pairs, int max_source_length);

std::vector<ParaphrasePair> deduplicate(const std::vector<ParaphrasePair>& pairs);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  // Top prune_limit tokens by frequency over both sides of the given pairs,
  // ties broken lexicographically, plus the four specials.
  static Vocabulary build(const std::vector<ParaphrasePair>& pairs,
                          int prune_limit);

  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  void index();
};

// One training/evaluation example after id encoding. Extended copy ids are
// base_size + first-occurrence source position; duplicate source tokens all
// route to the first occurrence so each extended id maps to one position.
struct EncodedPair {
  Tokens source_tokens;
  Tokens target_tokens;               // reference for metrics, no framing
  std::vector<int> source_ids;        // base ids, OOV -> unk
  std::vector<int> copy_targets;      // per position: base id or extended id
  std::vector<int> target_input;      // bos t1 .. tn eos, OOV -> unk
  std::vector<int> target_gold;       // per step: base, extended, or unk id
  int label = 0;
  int ext_size = 0;                   // vocab size + source length
};

EncodedPair encode_pair(const ParaphrasePair& pair, const Vocabulary& vocab);

struct CorpusSplit {
  std::vector<ParaphrasePair> train;
  std::vector<ParaphrasePair> dev;
  std::vector<ParaphrasePair> test;
};

// Seeded shuffle then contiguous carve-up by ratio (rounded); remainders go
// to test.
CorpusSplit split_corpus(const std::vector<ParaphrasePair>& pairs,
                         uint64_t seed, double train_ratio = 0.70,
                         double dev_ratio = 0.15);

void write_encoded_jsonl(const std::string& path,
                         const std::vector<EncodedPair>& pairs);
std::vector<EncodedPair> read_encoded_jsonl(const std::string& path);

}  // namespace dvpg

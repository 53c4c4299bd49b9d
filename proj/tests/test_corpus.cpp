#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "dvpg/common.hpp"
#include "dvpg/corpus.hpp"

using namespace dvpg;

namespace {

std::string tmp_path(const std::string& name) {
  return "/tmp/dvpg_corpus_test_" + name;
}

ParaphrasePair pair_of(const Tokens& a, const Tokens& b, int label = 1) {
  return {a, b, label};
}

}  // namespace

TEST_CASE("quora loader skips malformed rows") {
  const std::string path = tmp_path("quora.tsv");
  write_text_file(path,
                  "1\t10\t11\thow are you\thow do you feel\t1\n"
                  "2\t12\t13\tshort row\t0\n"                          // 5 cols
                  "3\t14\t15\t\tmissing left text\t1\n"                // empty
                  "4\t16\t17\twhere is it\tit is where\t0\n"
                  "5\t18\t19\ta\tb\tnot_a_label\n"                     // label
                  "6\t20\t21\tfine pair\tanother fine pair\t1\n");
  LoadResult r = load_quora_tsv(path);
  REQUIRE(r.pairs.size() == 3);
  CHECK(r.skipped == 3);
  CHECK(r.pairs[0].original == "how are you");
  CHECK(r.pairs[0].paraphrase == "how do you feel");
  CHECK(r.pairs[0].label == 1);
  CHECK(r.pairs[1].label == 0);

  CHECK_THROWS_AS(load_quora_tsv(tmp_path("missing.tsv")), DataError);
}

TEST_CASE("msrp loader skips the header") {
  const std::string path = tmp_path("msrp.tsv");
  write_text_file(path,
                  "Quality\t#1 ID\t#2 ID\t#1 String\t#2 String\n"
                  "1\t100\t101\tthe deal closed monday\tthe deal was closed monday\n"
                  "0\t102\t103\tan unrelated sentence\tsomething else entirely\n");
  LoadResult r = load_msrp_tsv(path);
  REQUIRE(r.pairs.size() == 2);
  CHECK(r.skipped == 0);
  CHECK(r.pairs[0].label == 1);
  CHECK(r.pairs[0].original == "the deal closed monday");
  CHECK(r.pairs[1].label == 0);
}

TEST_CASE("tokenizer splits whitespace and punctuation") {
  Tokenizer tok;
  CHECK(tok.tokenize("How do I quit smoking?") ==
        Tokens{"how", "do", "i", "quit", "smoking", "?"});
  CHECK(tok.tokenize("it's fine") == Tokens{"it", "'", "s", "fine"});
  CHECK(tok.tokenize("  spaced   out  ") == Tokens{"spaced", "out"});
  CHECK(tok.tokenize("a,b;c") == Tokens{"a", ",", "b", ";", "c"});
  CHECK(tok.tokenize("price is $5.50") ==
        Tokens{"price", "is", "$", "5", ".", "50"});

  TokenizerConfig keep_case;
  keep_case.lowercase = false;
  Tokenizer upper(keep_case);
  CHECK(upper.tokenize("How Now") == Tokens{"How", "Now"});

  // non-ascii bytes stay inside their word
  CHECK(tok.tokenize("caf\xc3\xa9 time") == Tokens{"caf\xc3\xa9", "time"});

  CHECK_THROWS_AS(tok.tokenize(""), DataError);
  CHECK_THROWS_AS(tok.tokenize("   "), DataError);
}

TEST_CASE("subword tokenizer greedy longest match") {
  const std::string vocab_path = tmp_path("pieces.txt");
  write_text_file(vocab_path, "quit\nsmok\n##ing\nhow\ndo\ni\n?\n##s\n");
  TokenizerConfig cfg;
  cfg.subword_vocab_path = vocab_path;
  Tokenizer tok(cfg);
  CHECK(tok.tokenize("how do i quit smoking?") ==
        Tokens{"how", "do", "i", "quit", "smok", "##ing", "?"});
  // word with no decomposition collapses to unk
  CHECK(tok.tokenize("how mysterious?") == Tokens{"how", "<unk>", "?"});

  const std::string empty_path = tmp_path("empty_pieces.txt");
  write_text_file(empty_path, "\n");
  TokenizerConfig bad;
  bad.subword_vocab_path = empty_path;
  CHECK_THROWS_AS(Tokenizer{bad}, ConfigError);
}

TEST_CASE("length filter is strict and idempotent") {
  std::vector<ParaphrasePair> pairs;
  Tokens t13(13, "w"), t14(14, "w"), t15(15, "w");
  pairs.push_back(pair_of(t13, t13));
  pairs.push_back(pair_of(t14, t13));  // source at the limit: dropped
  pairs.push_back(pair_of(t13, t14));  // target at the limit: dropped
  pairs.push_back(pair_of(t15, t15));
  auto kept = filter_by_length(pairs, 14);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].original.size() == 13);
  auto again = filter_by_length(kept, 14);
  CHECK(again.size() == kept.size());
}

TEST_CASE("deduplicate keeps first occurrence") {
  std::vector<ParaphrasePair> pairs;
  pairs.push_back(pair_of({"a", "b"}, {"c"}, 1));
  pairs.push_back(pair_of({"a", "b"}, {"c"}, 1));  // exact duplicate
  pairs.push_back(pair_of({"a", "b"}, {"c"}, 0));  // differs by label
  pairs.push_back(pair_of({"a"}, {"b", "c"}, 1));  // same words, new split
  auto out = deduplicate(pairs);
  CHECK(out.size() == 3);
}

TEST_CASE("vocabulary build order and specials") {
  std::vector<ParaphrasePair> pairs;
  pairs.push_back(pair_of({"b", "b", "c"}, {"a", "a", "a"}));
  pairs.push_back(pair_of({"a", "c"}, {"d"}));
  // counts: a=4, b=2, c=2, d=1
  Vocabulary v = Vocabulary::build(pairs, 3);
  CHECK(v.size() == 7);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kBos) == "<bos>");
  CHECK(v.token(Vocabulary::kEos) == "<eos>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  CHECK(v.token(4) == "a");
  CHECK(v.token(5) == "b");  // count tie with c, lexicographic
  CHECK(v.token(6) == "c");
  CHECK(v.id("d") == Vocabulary::kUnk);
  CHECK(v.contains("a"));
  CHECK_FALSE(v.contains("d"));
  CHECK_THROWS(v.token(7));
  CHECK_THROWS(Vocabulary::build(pairs, 0));

  // tie break alone: {a:2, b:2}, limit 1 keeps a
  std::vector<ParaphrasePair> tie;
  tie.push_back(pair_of({"b", "a"}, {"a", "b"}));
  Vocabulary vt = Vocabulary::build(tie, 1);
  CHECK(vt.size() == 5);
  CHECK(vt.token(4) == "a");

  const std::string path = tmp_path("vocab.json");
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(loaded.token(i) == v.token(i));
}

TEST_CASE("encode pair routes out-of-vocabulary tokens through copies") {
  std::vector<ParaphrasePair> train;
  train.push_back(pair_of({"how", "do", "i", "go"}, {"how", "can", "i", "go"}));
  Vocabulary v = Vocabulary::build(train, 100);
  const int base = v.size();

  // zzz is OOV and appears twice in the source; target uses it once
  ParaphrasePair p =
      pair_of({"how", "zzz", "do", "zzz"}, {"zzz", "can", "i"});
  EncodedPair e = encode_pair(p, v);

  REQUIRE(e.source_ids.size() == 4);
  CHECK(e.source_ids[1] == Vocabulary::kUnk);
  CHECK(e.copy_targets[0] == v.id("how"));
  CHECK(e.copy_targets[1] == base + 1);  // first occurrence position
  CHECK(e.copy_targets[3] == base + 1);  // duplicate routes to the first
  CHECK(e.ext_size == base + 4);

  // target: gold prefers the extended id for copyable OOV, unk otherwise
  REQUIRE(e.target_input.size() == 5);   // bos + 3 tokens + eos
  CHECK(e.target_input[0] == Vocabulary::kBos);
  CHECK(e.target_input[1] == Vocabulary::kUnk);
  CHECK(e.target_input.back() == Vocabulary::kEos);
  REQUIRE(e.target_gold.size() == 4);    // 3 tokens + eos
  CHECK(e.target_gold[0] == base + 1);
  CHECK(e.target_gold[1] == v.id("can"));
  CHECK(e.target_gold.back() == Vocabulary::kEos);

  // OOV target token absent from the source falls back to unk
  ParaphrasePair q = pair_of({"how", "do"}, {"qqq"});
  EncodedPair eq = encode_pair(q, v);
  CHECK(eq.target_gold[0] == Vocabulary::kUnk);

  CHECK(e.label == 1);
  CHECK(e.source_tokens == p.original);
  CHECK(e.target_tokens == p.paraphrase);
}

TEST_CASE("corpus split is seeded and disjoint") {
  std::vector<ParaphrasePair> pairs;
  for (int i = 0; i < 100; ++i)
    pairs.push_back(pair_of({"tok" + std::to_string(i)}, {"t"}, i % 2));

  CorpusSplit s1 = split_corpus(pairs, 9, 0.7, 0.15);
  CorpusSplit s2 = split_corpus(pairs, 9, 0.7, 0.15);
  CHECK(s1.train.size() == 70);
  CHECK(s1.dev.size() == 15);
  CHECK(s1.test.size() == 15);
  for (size_t i = 0; i < s1.train.size(); ++i)
    CHECK(s1.train[i].original == s2.train[i].original);

  // all inputs appear exactly once across the three splits
  std::set<std::string> seen;
  auto collect = [&](const std::vector<ParaphrasePair>& v) {
    for (const auto& p : v) seen.insert(p.original[0]);
  };
  collect(s1.train);
  collect(s1.dev);
  collect(s1.test);
  CHECK(seen.size() == 100);

  CorpusSplit s3 = split_corpus(pairs, 10, 0.7, 0.15);
  bool differs = false;
  for (size_t i = 0; i < s1.train.size(); ++i)
    if (s1.train[i].original != s3.train[i].original) differs = true;
  CHECK(differs);
}

TEST_CASE("encoded jsonl round trip") {
  std::vector<ParaphrasePair> train;
  train.push_back(pair_of({"a", "b", "c"}, {"c", "b", "a"}, 1));
  train.push_back(pair_of({"a", "zzz"}, {"zzz", "a"}, 0));
  Vocabulary v = Vocabulary::build(train, 2);

  std::vector<EncodedPair> encoded;
  for (const auto& p : train) encoded.push_back(encode_pair(p, v));

  const std::string path = tmp_path("pairs.jsonl");
  write_encoded_jsonl(path, encoded);
  auto loaded = read_encoded_jsonl(path);
  REQUIRE(loaded.size() == encoded.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].source_tokens == encoded[i].source_tokens);
    CHECK(loaded[i].target_tokens == encoded[i].target_tokens);
    CHECK(loaded[i].source_ids == encoded[i].source_ids);
    CHECK(loaded[i].copy_targets == encoded[i].copy_targets);
    CHECK(loaded[i].target_input == encoded[i].target_input);
    CHECK(loaded[i].target_gold == encoded[i].target_gold);
    CHECK(loaded[i].label == encoded[i].label);
    CHECK(loaded[i].ext_size == encoded[i].ext_size);
  }

  write_encoded_jsonl(tmp_path("empty.jsonl"), {});
  CHECK(read_encoded_jsonl(tmp_path("empty.jsonl")).empty());
}

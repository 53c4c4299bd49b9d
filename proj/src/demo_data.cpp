#include "dvpg/demo_data.hpp"

#include <string>
#include <vector>

#include "dvpg/common.hpp"

namespace dvpg {

namespace {

const std::vector<std::string> kVerbs = {
    "learn", "cook", "paint", "fix",  "clean", "grow",
    "build", "play", "write", "read", "draw",  "study"};

const std::vector<std::string> kObjects = {
    "rice",    "pasta", "chess",  "guitar", "spanish", "french",
    "code",    "bread", "tables", "chairs", "poems",   "songs",
    "algebra", "piano", "history", "maps"};

const std::vector<std::string> kModifiers = {"quickly", "easily", "properly",
                                             "slowly", "well"};
const std::vector<std::string> kCopyModifiers = {"today", "now"};

struct Row {
  std::string q1;
  std::string q2;
  int label;
};

void emit(std::string& out, int id, const Row& r) {
  out += std::to_string(id) + "\t" + std::to_string(2 * id) + "\t" +
         std::to_string(2 * id + 1) + "\t" + r.q1 + "\t" + r.q2 + "\t" +
         std::to_string(r.label) + "\n";
}

std::vector<Row> toy_rows() {
  std::vector<Row> rows;
  for (int i = 0; i < 16; ++i) {
    const std::string& v = kVerbs[i % kVerbs.size()];
    const std::string& o = kObjects[i];
    rows.push_back({"how do i " + v + " " + o, "how can i " + v + " " + o, 1});
  }
  for (int i = 0; i < 16; ++i) {
    const std::string& v = kVerbs[(i + 5) % kVerbs.size()];
    const std::string& o = kObjects[15 - i];
    const std::string q = "i want to " + v + " " + o;
    rows.push_back({q, q, 0});
  }
  return rows;
}

std::vector<Row> desk_rows() {
  std::vector<Row> rows;
  // one source, three renderings: the source-conditioned generator has to
  // spread probability over genuinely different outputs
  for (const auto& v : kVerbs)
    for (const auto& o : kObjects)
      for (const auto& m : kModifiers) {
        const std::string base = v + " " + o + " " + m;
        const std::string src = "how do i " + base + " ?";
        rows.push_back({src, "what is the best way to " + base + " ?", 1});
        rows.push_back({src, "how can i " + base + " ?", 1});
        rows.push_back({src, "what should i do to " + base + " ?", 1});
      }
  // non-paraphrase pairs: reserved modifiers, target repeats the source
  for (const auto& v : kVerbs)
    for (const auto& o : kObjects)
      for (const auto& m : kCopyModifiers) {
        const std::string src = "how do i " + v + " " + o + " " + m + " ?";
        rows.push_back({src, src, 0});
      }
  // rare entities that fall out of a pruned vocabulary, forcing the copy path
  for (int k = 0; k < 60; ++k) {
    char name[16];
    std::snprintf(name, sizeof(name), "entity%02d", k);
    rows.push_back({std::string("where can i buy ") + name + " ?",
                    std::string("which store sells ") + name + " ?", 1});
  }
  return rows;
}

}  // namespace

void write_demo_corpus(const std::string& path, const std::string& flavor) {
  std::vector<Row> rows;
  if (flavor == "toy")
    rows = toy_rows();
  else if (flavor == "desk")
    rows = desk_rows();
  else
    throw ConfigError("unknown demo corpus flavor: " + flavor);

  std::string out;
  int id = 0;
  for (const auto& r : rows) emit(out, id++, r);
  write_text_file(path, out);
}

}  // namespace dvpg

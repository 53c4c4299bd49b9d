#pragma once

#include <string>

namespace dvpg {

// Writes a synthetic paraphrase corpus in the six-column quora TSV layout.
// Flavors:
//   toy  - 32 short pairs (16 rephrasings, 16 copies) for overfit checks
//   desk - ~3.3k pairs; rephrasing sources have three distinct renderings,
//          copy pairs reuse a reserved modifier set, and a block of rare
//          entity pairs exercises the copy path once the vocabulary is pruned
void write_demo_corpus(const std::string& path, const std::string& flavor);

}  // namespace dvpg

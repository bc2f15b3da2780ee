#pragma once

// Corpus JSON:
//   { "vocab_size": int, "gammas": [float per level],
//     "nodes": [ {"id": int, "parent": int|null, "level": int} ],
//     "documents": [ {"leaf": int, "counts": {"word-id": count} } ] }

#include "specbnp/moments.hpp"

#include <filesystem>
#include <string>

namespace specbnp {

HdpTree corpus_from_json_text(const std::string& text);
std::string corpus_to_json_text(const HdpTree& tree);

HdpTree load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const HdpTree& tree);

}  // namespace specbnp

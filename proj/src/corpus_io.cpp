#include "specbnp/corpus_io.hpp"

#include "specbnp/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace specbnp {

using nlohmann::json;

HdpTree corpus_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("corpus is not valid JSON: ") + e.what());
  }
  try {
    const auto vocab = j.at("vocab_size").get<long long>();
    if (vocab <= 0) throw InputError("vocab_size must be positive");
    auto gammas = j.at("gammas").get<std::vector<double>>();

    std::vector<HdpNode> nodes;
    std::map<int, std::size_t> pos;
    for (const auto& jn : j.at("nodes")) {
      HdpNode n;
      n.id = jn.at("id").get<int>();
      if (!jn.at("parent").is_null()) n.parent = jn.at("parent").get<int>();
      n.level = jn.at("level").get<int>();
      pos[n.id] = nodes.size();
      nodes.push_back(std::move(n));
    }
    for (const auto& jd : j.at("documents")) {
      const int leaf = jd.at("leaf").get<int>();
      auto it = pos.find(leaf);
      if (it == pos.end()) throw InputError("document refers to unknown leaf " + std::to_string(leaf));
      if (nodes[it->second].document) throw InputError("leaf " + std::to_string(leaf) + " has two documents");
      std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
      for (const auto& [word, count] : jd.at("counts").items()) {
        const long long w = std::stoll(word);
        const long long c = count.get<long long>();
        if (w < 0 || c <= 0) throw InputError("invalid count entry \"" + word + "\" in leaf " + std::to_string(leaf));
        counts.emplace_back(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(c));
      }
      nodes[it->second].document = Document(std::move(counts));
    }
    return HdpTree(std::move(nodes), std::move(gammas), static_cast<std::size_t>(vocab));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed corpus: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("malformed corpus: ") + e.what());
  }
}

std::string corpus_to_json_text(const HdpTree& tree) {
  json j;
  j["vocab_size"] = tree.vocab_size();
  j["gammas"] = tree.gammas();
  json nodes = json::array();
  json docs = json::array();
  std::vector<const HdpNode*> sorted;
  for (const auto& n : tree.nodes()) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const HdpNode* n : sorted) {
    nodes.push_back({{"id", n->id}, {"parent", n->parent ? json(*n->parent) : json(nullptr)}, {"level", n->level}});
    if (n->document) {
      json counts = json::object();
      for (auto [w, c] : n->document->counts()) counts[std::to_string(w)] = c;
      docs.push_back({{"leaf", n->id}, {"counts", counts}});
    }
  }
  j["nodes"] = nodes;
  j["documents"] = docs;
  return j.dump();
}

HdpTree load_corpus(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return corpus_from_json_text(ss.str());
}

void save_corpus(const std::filesystem::path& path, const HdpTree& tree) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << corpus_to_json_text(tree) << '\n';
}

}  // namespace specbnp

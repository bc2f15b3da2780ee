#include "doctest.h"

#include "specbnp/corpus_io.hpp"
#include "specbnp/tensor_io.hpp"

#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace specbnp;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / "specbnp_cli_test") {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  Run run(const std::string& args) const {
    const fs::path log = dir_ / "stdout.txt";
    const std::string cmd = std::string(SPECBNP_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read(log)};
  }

  static std::string read(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }

 private:
  fs::path dir_;
};

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(Workspace::read(p)); }

const char* kTemplateSpec =
    R"({"model": "ibp-lg", "seed": 4, "n": 300, "phi": "templates", "pi": [0.3, 0.4, 0.55, 0.8], "sigma2": 0.5})";
const char* kExactSpec =
    R"({"model": "ibp-lg", "seed": 1, "exact": true, "phi": {"random": {"d": 9, "k": 3}},
        "pi": [0.2, 0.45, 0.9], "sigma2": 0.25})";
const char* kHdpSpec =
    R"({"model": "hdp", "seed": 2, "phi": {"random": {"d": 12, "k": 3}}, "pi0": [0.5, 0.3, 0.2],
        "gammas": [1, 3, 3, 1], "shape": [[20, 20], [20]], "words_per_doc": 30, "heldout_docs_per_group": 2})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen writes reproducible datasets") {
  Workspace ws;
  const fs::path spec = ws.write("templates.json", kTemplateSpec);
  CHECK(ws.run("gen " + spec.string() + " --out " + (ws / "a").string()).code == 0);
  CHECK(ws.run("gen " + spec.string() + " --out " + (ws / "b").string()).code == 0);
  const Matrix x = load_matrix(ws / "a" / "samples.txt");
  CHECK(x.rows() == 300);
  CHECK(x.cols() == 36);
  CHECK(Workspace::read(ws / "a" / "samples.txt") == Workspace::read(ws / "b" / "samples.txt"));
  CHECK(read_json(ws / "a" / "truth.json").at("K") == 4);

  const fs::path hdp = ws.write("hdp.json", kHdpSpec);
  CHECK(ws.run("gen " + hdp.string() + " --out " + (ws / "h").string()).code == 0);
  const HdpTree tree = load_corpus(ws / "h" / "corpus.json");
  CHECK(tree.depth() == 4);
  CHECK(tree.leaves().size() == 60);

  CHECK(ws.run("gen " + ws.write("bad.json", R"({"model": "ibp-lg", "phi": 3})").string()).code == 2);
  CHECK(ws.run("gen " + (ws / "missing.json").string()).code == 2);
  CHECK(ws.run("frobnicate").code == 2);
}

TEST_CASE("fit and eval on an exact-moment fixture") {
  Workspace ws;
  CHECK(ws.run("gen " + ws.write("exact.json", kExactSpec).string() + " --out " + (ws / "d").string()).code == 0);
  const Run fit = ws.run("fit " + (ws / "d" / "moments").string() + " --solver als --out " + (ws / "m.json").string());
  REQUIRE(fit.code == 0);
  CHECK(fit.out.find("als") != std::string::npos);
  CHECK(fit.out.find("K       3") != std::string::npos);
  const auto model = read_json(ws / "m.json");
  CHECK(model.at("solver") == "als");
  CHECK(model.at("K") == 3);
  CHECK(model.at("K1") == 2);
  CHECK(model.at("sigma2").get<double>() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(model.at("timings_ms").is_object());

  const Run eval = ws.run("eval " + (ws / "m.json").string() + " --truth " + (ws / "d" / "truth.json").string() +
                          " --csv --out " + (ws / "r.json").string());
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("model,solver,seed,K,frobenius,max_column_error") != std::string::npos);
  CHECK(read_json(ws / "r.json").at("frobenius").get<double>() < 1e-6);
  CHECK(read_json(ws / "r.json").at("permutation").size() == 3);
}

TEST_CASE("fit flags and reproducibility") {
  Workspace ws;
  CHECK(ws.run("gen " + ws.write("t.json", kTemplateSpec).string() + " --out " + (ws / "d").string()).code == 0);
  const std::string data = (ws / "d" / "samples.txt").string();
  REQUIRE(ws.run("fit " + data + " --k 4 --seed 3 --out " + (ws / "a.json").string()).code == 0);
  REQUIRE(ws.run("fit " + data + " --k 4 --seed 3 --out " + (ws / "b.json").string()).code == 0);
  auto a = read_json(ws / "a.json");
  auto b = read_json(ws / "b.json");
  for (auto* j : {&a, &b}) {
    j->erase("timings_ms");
    j->erase("phi_file");
  }
  CHECK(a == b);
  CHECK(Workspace::read(ws / "a.phi.txt") == Workspace::read(ws / "b.phi.txt"));
  CHECK(a.at("K") == 4);

  REQUIRE(ws.run("fit " + data + " --k 2 --solver fc --sketch-len 64 --out " + (ws / "c.json").string()).code == 0);
  CHECK(read_json(ws / "c.json").at("K") == 2);
  CHECK(read_json(ws / "c.json").at("solver") == "fc");
  REQUIRE(ws.run("fit " + data + " --k auto --out " + (ws / "auto.json").string()).code == 0);
  CHECK(read_json(ws / "auto.json").at("K").get<int>() >= 1);

  CHECK(ws.run("fit " + data + " --k five").code == 2);
  CHECK(ws.run("fit " + data + " --model gmm").code == 2);
  CHECK(ws.run("fit " + data + " --solver svd").code == 2);
  CHECK(ws.run("fit " + data + " --threads 0").code == 2);
  CHECK(ws.run("fit " + (ws / "nope.txt").string()).code == 2);

  std::ostringstream constant;
  constant << "6 4\n";
  for (int i = 0; i < 6; ++i) constant << "1 2 3 4\n";
  CHECK(ws.run("fit " + ws.write("const.txt", constant.str()).string() + " --k 1").code == 3);

  // shape mismatch between model and truth
  CHECK(ws.run("gen " + ws.write("e.json", kExactSpec).string() + " --out " + (ws / "e").string()).code == 0);
  CHECK(ws.run("eval " + (ws / "a.json").string() + " --truth " + (ws / "e" / "truth.json").string()).code == 2);
  CHECK(ws.run("eval " + (ws / "a.json").string()).code == 2);
}

TEST_CASE("hdp fit and held-out evaluation") {
  Workspace ws;
  CHECK(ws.run("gen " + ws.write("h.json", kHdpSpec).string() + " --out " + (ws / "h").string()).code == 0);
  const std::string corpus = (ws / "h" / "corpus.json").string();
  REQUIRE(ws.run("fit " + corpus + " --model hdp --k 3 --out " + (ws / "m.json").string()).code == 0);
  REQUIRE(ws.run("fit " + corpus + " --model hdp --k 3 --flat --out " + (ws / "f.json").string()).code == 0);
  const Run eval = ws.run("eval " + (ws / "m.json").string() + " --heldout " + (ws / "h" / "heldout.json").string() +
                          " --csv --out " + (ws / "r.json").string());
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("perword_nll") != std::string::npos);
  const double nll = read_json(ws / "r.json").at("perword_nll").get<double>();
  CHECK(nll > 0.0);
  CHECK(nll < std::log(12.0) + 0.5);
  CHECK(read_json(ws / "r.json").at("documents") == 6);
  CHECK(ws.run("fit " + (ws / "h").string() + " --model hdp").code == 2);
}

}  // TEST_SUITE

// specbnp: generate synthetic data, fit spectral IBP/HDP models, and evaluate fits.
//
//   specbnp gen spec.json --out DIR
//   specbnp fit DATA --model ibp-lg|isfa-gauss|isfa-laplace|hdp [solver flags] --out model.json
//   specbnp eval model.json --truth DIR/truth.json | --heldout corpus.json [--csv]
//
// Exit codes: 0 ok, 2 input error, 3 numerical failure.

#include "specbnp/corpus_io.hpp"
#include "specbnp/error.hpp"
#include "specbnp/evaluation.hpp"
#include "specbnp/pipelines.hpp"
#include "specbnp/synthesis.hpp"
#include "specbnp/tensor_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace specbnp;
using nlohmann::json;

namespace {

constexpr int kInputExit = 2;
constexpr int kNumericalExit = 3;

struct FitOptions {
  std::string data;
  std::string model = "ibp-lg";
  std::string solver = "rtpm";
  std::string k = "auto";
  int restarts = 50;
  int iters = 10;
  int iters_final = 30;
  double tol = 1e-8;
  int sketch_len = 10;
  int sketch_repeats = 6;
  std::uint64_t seed = 0;
  int threads = 1;
  int projection = 0;
  bool flat = false;
  std::string out = "model.json";
};

struct EvalOptions {
  std::string model;
  std::string truth;
  std::string heldout;
  bool csv = false;
  std::string out;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << j.dump(2) << '\n';
}

void print_timings(const std::vector<std::pair<std::string, double>>& timings) {
  for (const auto& [stage, ms] : timings) std::printf("  %-18s %10.3f ms\n", stage.c_str(), ms);
}

int cmd_gen(const std::string& spec_path, const std::string& out) {
  const GeneratorSpec spec = parse_generator_spec(read_file(spec_path));
  run_generator(spec, out);
  std::printf("wrote %s data for model %s (seed %llu) to %s\n", spec.exact ? "exact-moment" : "sampled",
              spec.model.c_str(), static_cast<unsigned long long>(spec.seed), out.c_str());
  return 0;
}

int cmd_fit(const FitOptions& o) {
  DecompositionConfig dc;
  dc.backend = parse_solver(o.solver);
  dc.restarts = o.restarts;
  dc.iters_init = o.iters;
  dc.iters_final = o.iters_final;
  dc.tol = o.tol;
  dc.sketch_len = o.sketch_len;
  dc.sketch_repeats = o.sketch_repeats;
  dc.seed = o.seed;
  dc.threads = o.threads;
  dc.validate();

  PipelineConfig config;
  config.decomposition = dc;
  if (o.k != "auto") {
    try {
      std::size_t used = 0;
      config.k = std::stoi(o.k, &used);
      if (used != o.k.size()) throw std::invalid_argument(o.k);
    } catch (const std::logic_error&) {
      throw InputError("--k must be an integer or \"auto\", got \"" + o.k + "\"");
    }
    if (*config.k < 1) throw InputError("--k must be positive");
  }
  if (o.projection > 0) config.projection_dim = o.projection;

  ModelRecord record;
  if (o.model == "hdp") {
    if (std::filesystem::is_directory(o.data)) throw InputError("hdp fits read a corpus JSON file, not a directory");
    HdpTree tree = load_corpus(o.data);
    if (o.flat) tree = flatten(tree);
    record = to_record(fit_hdp(tree, config), dc);
  } else if (o.model == "ibp-lg" || o.model == "isfa-gauss" || o.model == "isfa-laplace") {
    std::optional<ExactMoments> exact;
    std::optional<SampleSet> samples;
    std::optional<SampleMoments> sample_source;
    if (std::filesystem::is_directory(o.data)) {
      exact.emplace(load_raw_moments(o.data));
    } else {
      samples.emplace(load_matrix(o.data));
      sample_source.emplace(*samples, dc.threads);
    }
    const MomentSource& source =
        exact ? static_cast<const MomentSource&>(*exact) : static_cast<const MomentSource&>(*sample_source);
    const IbpFit fit = o.model == "ibp-lg" ? fit_ibp_linear_gaussian(source, config)
                                           : fit_isfa(source, parse_isfa_prior(o.model.substr(5)), config);
    for (const std::string& flag : fit.flags) std::fprintf(stderr, "warning: %s\n", flag.c_str());
    record = to_record(fit, o.model, dc);
  } else {
    throw InputError("unknown --model \"" + o.model + "\" (expected ibp-lg, isfa-gauss, isfa-laplace or hdp)");
  }

  save_model(o.out, record);
  std::printf("model   %s\nsolver  %s\nK       %d\n", record.model.c_str(), record.solver.c_str(), record.k);
  if (record.model != "hdp") std::printf("K1      %d\nsigma2  %.10g\n", record.k1, record.sigma2);
  std::printf("timings\n");
  print_timings(record.timings_ms);
  std::printf("wrote %s\n", o.out.c_str());
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  const ModelRecord model = load_model(o.model);
  json report = {{"model", model.model}, {"solver", model.solver}, {"seed", model.seed}, {"K", model.k}};
  json timings = json::object();
  for (const auto& [stage, ms] : model.timings_ms) timings[stage] = ms;
  report["timings_ms"] = timings;

  std::string header, row;
  const std::string prefix = model.model + "," + model.solver + "," + std::to_string(model.seed) + "," +
                             std::to_string(model.k);
  if (!o.truth.empty()) {
    const std::filesystem::path truth_path(o.truth);
    json truth;
    try {
      truth = json::parse(read_file(o.truth));
    } catch (const json::exception& e) {
      throw InputError("malformed truth manifest: " + std::string(e.what()));
    }
    const Matrix phi = load_matrix(truth_path.parent_path() / truth.value("phi_file", std::string("truth_phi.txt")));
    if (phi.rows() != model.phi.rows() || phi.cols() != model.phi.cols())
      throw DimensionError("truth Φ is " + std::to_string(phi.rows()) + "×" + std::to_string(phi.cols()) +
                               " but the model Φ is " + std::to_string(model.phi.rows()) + "×" +
                               std::to_string(model.phi.cols()),
                           1);
    const bool allow_sign = model.model.rfind("isfa", 0) == 0;
    const MatchResult m = match_columns(phi, model.phi, allow_sign);
    report["frobenius"] = frobenius_error(m);
    report["column_errors"] = std::vector<double>(m.column_errors.data(), m.column_errors.data() + m.column_errors.size());
    report["permutation"] = m.permutation;
    report["signs"] = m.signs;
    std::printf("frobenius error %.10g\nmax column error %.10g\n", frobenius_error(m), m.column_errors.maxCoeff());
    header = "model,solver,seed,K,frobenius,max_column_error";
    std::ostringstream s;
    s.precision(10);
    s << prefix << ',' << frobenius_error(m) << ',' << m.column_errors.maxCoeff();
    row = s.str();
  } else {
    const HdpTree corpus = load_corpus(o.heldout);
    std::vector<Document> docs;
    for (int leaf : corpus.leaves()) docs.push_back(*corpus.node(leaf).document);
    if (corpus.vocab_size() != static_cast<std::size_t>(model.phi.rows()))
      throw DimensionError("held-out vocabulary has " + std::to_string(corpus.vocab_size()) + " words but the model Φ has " +
                               std::to_string(model.phi.rows()) + " rows",
                           0);
    const double nll = heldout_perword_nll(model.phi, docs);
    report["perword_nll"] = nll;
    report["documents"] = docs.size();
    std::printf("held-out per-word NLL %.10g over %zu documents\n", nll, docs.size());
    header = "model,solver,seed,K,perword_nll";
    std::ostringstream s;
    s.precision(10);
    s << prefix << ',' << nll;
    row = s.str();
  }
  if (o.csv) std::printf("%s\n%s\n", header.c_str(), row.c_str());
  if (!o.out.empty()) write_json(o.out, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral inference for Indian buffet and hierarchical Dirichlet process models"};
  app.require_subcommand(1);

  std::string spec_path, gen_out = ".";
  CLI::App* gen = app.add_subcommand("gen", "Write a synthetic dataset and its ground truth");
  gen->add_option("spec", spec_path, "Generator spec JSON")->required();
  gen->add_option("--out", gen_out, "Output directory");

  FitOptions fo;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model by the method of moments");
  fit->add_option("data", fo.data, "Sample matrix file, raw-moment directory, or corpus JSON")->required();
  fit->add_option("--model", fo.model, "ibp-lg, isfa-gauss, isfa-laplace or hdp")->capture_default_str();
  fit->add_option("--solver", fo.solver, "rtpm, als or fc")->capture_default_str();
  fit->add_option("--k", fo.k, "Number of components or \"auto\"")->capture_default_str();
  fit->add_option("--restarts", fo.restarts, "Random restarts per component (L)")->capture_default_str();
  fit->add_option("--iters", fo.iters, "Power steps per restart (T)")->capture_default_str();
  fit->add_option("--iters-final", fo.iters_final, "Refinement steps")->capture_default_str();
  fit->add_option("--tol", fo.tol, "Convergence tolerance")->capture_default_str();
  fit->add_option("--sketch-len", fo.sketch_len, "Count sketch length (b)")->capture_default_str();
  fit->add_option("--sketch-repeats", fo.sketch_repeats, "Independent sketches (B)")->capture_default_str();
  fit->add_option("--seed", fo.seed, "Random seed")->capture_default_str();
  fit->add_option("--threads", fo.threads, "Worker threads")->capture_default_str();
  fit->add_option("--projection", fo.projection, "Fit in a random subspace of this dimension (IBP models)");
  fit->add_flag("--flat", fo.flat, "Hang every document directly under the root (hdp)");
  fit->add_option("--out", fo.out, "Model JSON path")->capture_default_str();

  EvalOptions eo;
  CLI::App* eval = app.add_subcommand("eval", "Score a fitted model");
  eval->add_option("model", eo.model, "Model JSON")->required();
  auto* truth = eval->add_option("--truth", eo.truth, "Ground-truth manifest (truth.json)");
  auto* heldout = eval->add_option("--heldout", eo.heldout, "Held-out corpus JSON");
  truth->excludes(heldout);
  eval->add_flag("--csv", eo.csv, "Also print a CSV header and row");
  eval->add_option("--out", eo.out, "Report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputExit;
  }

  try {
    if (*gen) return cmd_gen(spec_path, gen_out);
    if (*fit) return cmd_fit(fo);
    if (eo.truth.empty() == eo.heldout.empty()) throw InputError("eval needs exactly one of --truth or --heldout");
    return cmd_eval(eo);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputExit;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kNumericalExit;
  }
}

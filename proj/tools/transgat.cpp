// transgat: ingest, train, eval, gradcheck, gen-synth.
//
// Exit codes: 0 success, 1 internal fault, 2 bad input.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "transgat.hpp"

namespace fs = std::filesystem;
using namespace transgat;

namespace {

constexpr int kOk = 0;
constexpr int kFault = 1;
constexpr int kBadInput = 2;

struct IngestArgs {
  std::string conllu, scores, out;
};

struct TrainArgs {
  std::string data, val, out, history, init, precision = "double";
  GatConfig gat;
  TrainConfig train;
};

struct EvalArgs {
  std::string data, ckpt;
  bool json = false;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  bool json = false;
};

struct SynthArgs {
  SynthConfig synth;
  std::string out;
};

std::string slurp(const fs::path& p) {
  auto f = io::open_in(p, std::ios::in | std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int run_ingest(const IngestArgs& a) {
  auto records = conllu::to_records(slurp(a.conllu), fs::path(a.conllu).stem().string());
  std::map<std::string, TraitScores> scores;
  {
    auto f = io::open_in(a.scores);
    scores = io::read_scores_csv(f, a.scores);
  }
  std::set<std::string> seen;
  for (auto& r : records) {
    if (!seen.insert(r.id).second) throw InputError(a.conllu + ": duplicate document id '" + r.id + "'");
    auto it = scores.find(r.id);
    if (it == scores.end()) throw InputError(a.scores + ": no scores for essay '" + r.id + "'");
    r.gold = it->second;
    if (auto v = validate_structure(r); !v.ok()) throw InputError("essay '" + r.id + "': " + v.violations.front());
  }
  std::size_t unused = 0;
  for (const auto& [id, s] : scores)
    if (!seen.count(id)) ++unused;
  {
    auto f = io::open_out(a.out, std::ios::out | std::ios::binary);
    io::write_essays(f, records);
  }
  std::size_t tokens = 0;
  for (const auto& r : records) tokens += r.tokens.size();
  std::cout << "wrote " << records.size() << " essays (" << tokens << " tokens) to " << a.out << "\n";
  if (unused) std::cerr << "warning: " << unused << " score rows matched no essay\n";
  return kOk;
}

template <typename T>
int train_as(const TrainArgs& a) {
  const auto train_split = io::load_split(a.data, SplitRole::train);
  const auto val_split = io::load_split(a.val, SplitRole::validation);
  const auto train = PreparedSplit<T>::from(train_split);
  const auto val = PreparedSplit<T>::from(val_split);

  TransGatModel<T> model;
  if (!a.init.empty()) {
    model = load_checkpoint<T>(fs::path(a.init));
    if (model.d_in != train.dim) throw InputError(a.init + ": checkpoint input dimension does not match the data");
  } else {
    model = TransGatModel<T>::init(a.gat, train.dim, a.train.seed);
  }

  std::cout << "train " << train.size() << " essays, val " << val.size() << " essays, d=" << train.dim << "\n";
  auto result = fit(train, val, model, a.train, [](const EpochRecord& r) {
    std::printf("epoch %zu  loss %.6f  val avg QWK %.4f\n", r.epoch, r.train_loss, r.val.average);
    std::fflush(stdout);
  });

  save_checkpoint(fs::path(a.out), result.best);
  const std::string history = a.history.empty() ? a.out + ".history.csv" : a.history;
  {
    auto f = io::open_out(history, std::ios::out | std::ios::binary);
    write_history_csv(f, result.history);
  }
  std::cout << "best epoch " << result.best_epoch << ", checkpoint " << a.out << ", history " << history << "\n";
  return kOk;
}

int run_train(const TrainArgs& a) {
  try {
    a.gat.validate();
    a.train.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (a.precision == "float") return train_as<float>(a);
  return train_as<double>(a);
}

int run_eval(const EvalArgs& a) {
  const auto split = io::load_split(a.data, SplitRole::test);
  const auto model = load_checkpoint<double>(fs::path(a.ckpt));
  const auto prepared = PreparedSplit<double>::from(split);
  if (prepared.dim != model.d_in)
    throw InputError("embedding dimension " + std::to_string(prepared.dim) + " does not match checkpoint input " +
                     std::to_string(model.d_in));
  const auto report = evaluate_split(prepared, model);
  if (a.json)
    std::cout << report.to_json().dump(2) << "\n";
  else
    std::cout << report.table();
  return kOk;
}

int run_gradcheck(const GradcheckArgs& a) {
  ModelGradcheckConfig cfg;
  cfg.seed = a.seed;
  const auto report = model_gradcheck(cfg);
  const bool pass = report.max_rel_err <= 1e-4;
  if (a.json) {
    nlohmann::ordered_json j;
    j["seed"] = a.seed;
    j["max_rel_err"] = report.max_rel_err;
    for (const auto& e : report.per_param) j["params"][e.name] = e.max_rel_err;
    j["pass"] = pass;
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& e : report.per_param) std::printf("%-22s %4zu coords  max rel err %.3e\n", e.name.c_str(), e.coords, e.max_rel_err);
    std::printf("max rel err %.3e (tolerance 1e-4): %s\n", report.max_rel_err, pass ? "ok" : "FAILED");
  }
  return pass ? kOk : kFault;
}

int run_gen_synth(const SynthArgs& a) {
  try {
    a.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  const auto ds = gen_synthetic(a.synth);
  write_synthetic(a.out, ds, a.synth);
  std::cout << "wrote " << ds.records.size() << " synthetic essays (d=" << ds.dim << ") to " << a.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream graph attention essay scorer"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file; [subcommand] sections");
  app.set_version_flag("--version", "transgat 0.1.0");

  IngestArgs ingest;
  auto* ci = app.add_subcommand("ingest", "Convert CoNLL-U parses plus a score CSV into essays JSONL");
  ci->add_option("--conllu", ingest.conllu, "CoNLL-U file; documents split on '# newdoc id = ...'")->required()->check(CLI::ExistingFile);
  ci->add_option("--scores", ingest.scores, "CSV: id,cohesion,syntax,vocabulary,phraseology,grammar,conventions")->required()->check(CLI::ExistingFile);
  ci->add_option("--out", ingest.out, "Output JSONL path")->required();

  TrainArgs train;
  auto* ct = app.add_subcommand("train", "Train both streams and write the best checkpoint");
  ct->add_option("--data", train.data, "Training directory (essays.jsonl + embeddings.tgeb)")->required()->check(CLI::ExistingDirectory);
  ct->add_option("--val", train.val, "Validation directory")->required()->check(CLI::ExistingDirectory);
  ct->add_option("--out", train.out, "Checkpoint path")->required();
  ct->add_option("--history", train.history, "History CSV path (default <out>.history.csv)");
  ct->add_option("--init", train.init, "Start from this checkpoint instead of a fresh init")->check(CLI::ExistingFile);
  ct->add_option("--epochs", train.train.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  ct->add_option("--batch-size", train.train.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  ct->add_option("--lr", train.train.lr, "Peak learning rate (cosine decay per step)")->capture_default_str()->check(CLI::NonNegativeNumber);
  ct->add_option("--weight-decay", train.train.weight_decay, "AdamW decoupled weight decay")->capture_default_str()->check(CLI::NonNegativeNumber);
  ct->add_option("--beta1", train.train.beta1, "Adam beta1")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  ct->add_option("--beta2", train.train.beta2, "Adam beta2")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  ct->add_option("--adam-eps", train.train.eps, "Adam epsilon")->capture_default_str()->check(CLI::PositiveNumber);
  ct->add_option("--seed", train.train.seed, "Seed for init and shuffling")->capture_default_str()->envname("TRANSGAT_SEED");
  ct->add_flag("--freeze-essay-head", train.train.freeze_essay_head, "Keep essay-stream weights at their initial values");
  ct->add_flag("!--no-shuffle", train.train.shuffle, "Keep the data order fixed");
  ct->add_option("--layers", train.gat.num_layers, "GAT layers")->capture_default_str()->check(CLI::PositiveNumber);
  ct->add_option("--heads", train.gat.num_heads, "Attention heads per layer")->capture_default_str()->check(CLI::PositiveNumber);
  ct->add_option("--d-head", train.gat.d_head, "Width of each head")->capture_default_str()->check(CLI::PositiveNumber);
  ct->add_option("--precision", train.precision, "Arithmetic for training")->capture_default_str()->check(CLI::IsMember({"double", "float"}));

  EvalArgs eval;
  auto* ce = app.add_subcommand("eval", "Per-trait QWK of a checkpoint on a scored split");
  ce->add_option("--data", eval.data, "Directory (essays.jsonl + embeddings.tgeb)")->required()->check(CLI::ExistingDirectory);
  ce->add_option("--ckpt", eval.ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  ce->add_flag("--json", eval.json, "Print JSON instead of a table");

  GradcheckArgs gc;
  auto* cg = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  cg->add_option("--seed", gc.seed, "Seed for the random model and essay")->capture_default_str()->envname("TRANSGAT_SEED");
  cg->add_flag("--json", gc.json, "Print JSON");

  SynthArgs synth;
  auto* cs = app.add_subcommand("gen-synth", "Write a seeded synthetic dataset directory");
  cs->add_option("--n", synth.synth.num_essays, "Number of essays")->capture_default_str()->check(CLI::PositiveNumber);
  cs->add_option("--dim", synth.synth.dim, "Embedding dimension")->capture_default_str()->check(CLI::Range(4, 1 << 16));
  cs->add_option("--seed", synth.synth.seed, "Generator seed")->capture_default_str()->envname("TRANSGAT_SEED");
  cs->add_option("--min-tokens", synth.synth.min_tokens, "Fewest tokens per essay")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  cs->add_option("--max-tokens", synth.synth.max_tokens, "Most tokens per essay")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  cs->add_option("--out", synth.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (ci->parsed()) return run_ingest(ingest);
    if (ct->parsed()) return run_train(train);
    if (ce->parsed()) return run_eval(eval);
    if (cg->parsed()) return run_gradcheck(gc);
    if (cs->parsed()) return run_gen_synth(synth);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kFault;
  }
  return kFault;
}

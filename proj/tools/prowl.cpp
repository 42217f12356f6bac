// prowl: train, evaluate, and tune feature-annotated rule programs scored by
// restart walks over proof graphs.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prowl/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << content;
}

struct CommonOptions {
  std::vector<std::string> programs;
  std::vector<std::string> facts;
  std::string mode = "classify";
  double alpha = 0.1;
  int iterations = 40;
  double tolerance = 1e-7;
  int epochs = 40;
  double lr = 0.1;
  double l2 = 1e-4;
  int batch = 1;
  uint64_t seed = 13;
  int threads = std::max(1u, std::thread::hardware_concurrency());
  int max_depth = 16;
  long max_nodes = 200000;
  bool json = false;

  prowl::TaskConfig task() const {
    prowl::TaskConfig cfg;
    cfg.walk.alpha = alpha;
    cfg.walk.iterations = iterations;
    cfg.walk.tolerance = tolerance;
    cfg.sgd.epochs = epochs;
    cfg.sgd.learning_rate = lr;
    cfg.sgd.l2 = l2;
    cfg.sgd.batch = batch;
    cfg.sgd.seed = seed;
    cfg.sgd.threads = threads;
    cfg.limits.max_depth = max_depth;
    cfg.limits.max_nodes = max_nodes;
    return cfg;
  }

  void attach(CLI::App* cmd, bool with_sgd) {
    cmd->add_option("--program", programs, "rule program file(s), .dl");
    cmd->add_option("--facts", facts, "fact file(s), .facts TSV");
    cmd->add_option("--mode", mode, "task mode")->check(CLI::IsMember({"classify", "extract"}));
    cmd->add_option("--alpha", alpha, "reset weight (0,1)");
    cmd->add_option("--iterations", iterations, "walk truncation horizon");
    cmd->add_option("--tolerance", tolerance, "walk early-stop tolerance");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--threads", threads, "worker threads (1 = deterministic)");
    cmd->add_option("--max-depth", max_depth, "grounding depth limit");
    cmd->add_option("--max-nodes", max_nodes, "grounding node budget");
    cmd->add_flag("--json", json, "machine-readable summary on stdout");
    if (with_sgd) {
      cmd->add_option("--epochs", epochs, "SGD epochs");
      cmd->add_option("--lr", lr, "learning rate");
      cmd->add_option("--l2", l2, "L2 penalty");
      cmd->add_option("--batch", batch, "batch size");
    }
  }
};

prowl::TaskMode task_mode(const CommonOptions& opt) {
  return opt.mode == "extract" ? prowl::TaskMode::Relation : prowl::TaskMode::Link;
}

prowl::ConstraintBudget load_budget(const std::string& path, const CommonOptions& opt) {
  prowl::ConstraintBudget budget;
  if (!path.empty()) {
    try {
      budget = prowl::parse_budget(read_file(path), task_mode(opt));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("budget file " + path + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw InputError("budget file " + path + ": " + e.what());
    }
  }
  budget.seed = opt.seed;
  return budget;
}

struct ExtractInputs {
  std::string corpus;
  std::string rel_examples, neg_rel_examples, type_examples, neg_type_examples;

  void attach(CLI::App* cmd) {
    cmd->add_option("--corpus", corpus, "entity corpus, JSON-lines");
    cmd->add_option("--rel-examples", rel_examples, "ranked relation examples");
    cmd->add_option("--neg-rel-examples", neg_rel_examples, "ranked negative relation examples");
    cmd->add_option("--type-examples", type_examples, "ranked type examples");
    cmd->add_option("--neg-type-examples", neg_type_examples, "ranked negative type examples");
  }

  void fill(prowl::RelationPipeline& pipe) const {
    if (corpus.empty()) throw InputError("--corpus is required in extract mode");
    pipe.load_corpus(read_file(corpus));
    if (!rel_examples.empty()) pipe.load_relation_examples(read_file(rel_examples));
    if (!neg_rel_examples.empty())
      pipe.load_negative_relation_examples(read_file(neg_rel_examples));
    if (!type_examples.empty()) pipe.load_type_examples(read_file(type_examples));
    if (!neg_type_examples.empty())
      pipe.load_negative_type_examples(read_file(neg_type_examples));
  }
};

void fill_classify(prowl::ClassifyPipeline& pipe, const CommonOptions& opt,
                   const std::vector<std::string>& examples,
                   const std::string& citation_examples, const std::string& unlabeled) {
  if (opt.programs.empty()) throw InputError("--program is required");
  for (const std::string& p : opt.programs) pipe.load_program(read_file(p));
  for (const std::string& f : opt.facts) pipe.load_facts(read_file(f));
  for (const std::string& e : examples) pipe.load_supervised(read_file(e));
  if (!citation_examples.empty()) pipe.load_citation_supervised(read_file(citation_examples));
  if (!unlabeled.empty()) pipe.load_unlabeled(read_file(unlabeled));
  pipe.finalize();
}

void fill_relation_base(prowl::RelationPipeline& pipe, const CommonOptions& opt) {
  if (opt.programs.empty()) throw InputError("--program is required");
  for (const std::string& p : opt.programs) pipe.load_program(read_file(p));
  for (const std::string& f : opt.facts) pipe.load_facts(read_file(f));
}

void summary(const CommonOptions& opt, const nlohmann::json& j) {
  if (opt.json) {
    std::cout << j.dump() << "\n";
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    std::cout << it.key() << ": " << it.value().dump() << "\n";
}

// ---- ground ---------------------------------------------------------------

int cmd_ground(const CommonOptions& opt, const std::string& query_text,
               const std::string& out_path) {
  prowl::SymbolTable syms;
  prowl::FeatureTable feats;
  prowl::Program program;
  if (opt.programs.empty()) throw InputError("--program is required");
  for (const std::string& p : opt.programs) {
    prowl::Program parsed = prowl::parse_program(read_file(p), syms);
    for (prowl::Rule& r : parsed.rules) program.add_rule(std::move(r));
  }
  for (const std::string& f : opt.facts) {
    prowl::FactSet fs = prowl::parse_facts(read_file(f), syms);
    for (const prowl::Atom& a : fs.all()) program.facts.add(a);
  }

  prowl::Atom query = prowl::parse_query(query_text, syms);
  prowl::GroundingLimits limits;
  limits.max_depth = opt.max_depth;
  limits.max_nodes = opt.max_nodes;
  limits.keep_node_text = true;

  prowl::ProofGraph graph;
  try {
    graph = prowl::ground(program, query, limits, syms, feats);
  } catch (const prowl::GroundingError& e) {
    throw InputError(e.what());
  }

  std::ostringstream dump;
  prowl::write_graph_tsv(dump, graph, feats);
  if (out_path.empty())
    std::cout << dump.str();
  else
    write_file(out_path, dump.str());

  summary(opt, {{"command", "ground"},
                {"nodes", graph.node_count},
                {"edges", graph.edges.size()},
                {"solutions", graph.solutions.size()},
                {"truncated", graph.truncated}});
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const CommonOptions& opt, const std::vector<std::string>& examples,
              const std::string& citation_examples, const std::string& unlabeled,
              const std::string& budget_path, const ExtractInputs& extract,
              const std::string& model_out, const std::string& log_out, bool clamp) {
  prowl::TaskConfig cfg = opt.task();
  prowl::ConstraintBudget budget = load_budget(budget_path, opt);

  prowl::TrainResult result;
  if (task_mode(opt) == prowl::TaskMode::Link) {
    if (examples.empty()) throw InputError("--examples is required in classify mode");
    prowl::ClassifyPipeline pipe;
    fill_classify(pipe, opt, examples, citation_examples, unlabeled);
    result = pipe.train_budget(budget, cfg, clamp);
    std::ostringstream model;
    prowl::write_model(model, result.params, pipe.feats);
    write_file(model_out, model.str());
  } else {
    prowl::RelationPipeline pipe;
    fill_relation_base(pipe, opt);
    extract.fill(pipe);
    result = pipe.train_budget(budget, cfg, clamp);
    std::ostringstream model;
    prowl::write_model(model, result.params, pipe.feats);
    write_file(model_out, model.str());
  }

  if (!log_out.empty()) {
    std::ostringstream log;
    prowl::write_training_log(log, result);
    write_file(log_out, log.str());
  }

  summary(opt, {{"command", "train"},
                {"model", model_out},
                {"epochs", result.epoch_mean_loss.size()},
                {"final_loss",
                 result.epoch_mean_loss.empty() ? 0.0 : result.epoch_mean_loss.back()},
                {"skipped", result.skipped},
                {"vacuous", result.vacuous}});
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

int cmd_eval(const CommonOptions& opt, const std::vector<std::string>& examples,
             const std::string& budget_path, const ExtractInputs& extract,
             const std::string& model_path, double threshold,
             const std::string& predictions_out, const std::string& pr_curve_out) {
  prowl::TaskConfig cfg = opt.task();
  prowl::ConstraintBudget budget = load_budget(budget_path, opt);

  if (task_mode(opt) == prowl::TaskMode::Link) {
    if (examples.empty()) throw InputError("--examples (test queries) is required");
    prowl::ClassifyPipeline pipe;
    fill_classify(pipe, opt, {}, "", "");
    std::vector<prowl::TrainingExample> test;
    for (const std::string& e : examples)
      for (prowl::TrainingExample& ex : prowl::parse_examples(read_file(e), pipe.syms))
        test.push_back(std::move(ex));
    if (test.empty()) throw InputError("empty test example file");
    prowl::ParameterTable params = prowl::load_model(read_file(model_path), pipe.feats);

    std::vector<prowl::Prediction> preds = pipe.predict(params, test, budget, cfg);
    std::unordered_map<std::string, std::string> gold;
    for (const prowl::TrainingExample& q : test) {
      if (q.positives.empty()) throw InputError("test example without a gold positive answer");
      gold[pipe.syms.name(q.query.args.front().sym)] =
          pipe.syms.name(q.positives.front().args.back().sym);
    }
    double acc = prowl::accuracy(preds, gold);

    if (!predictions_out.empty()) {
      std::vector<prowl::Prediction> out;
      for (const prowl::Prediction& p : preds)
        out.push_back({prowl::unsafe_token(p.instance), prowl::unsafe_token(p.label), p.score});
      write_file(predictions_out, prowl::predictions_tsv(out));
    }
    summary(opt, {{"command", "eval"},
                  {"mode", "classify"},
                  {"accuracy", acc},
                  {"instances", preds.size()}});
  } else {
    prowl::RelationPipeline pipe;
    fill_relation_base(pipe, opt);
    extract.fill(pipe);
    prowl::ParameterTable params = prowl::load_model(read_file(model_path), pipe.feats);
    std::vector<prowl::Prediction> preds = pipe.predict_mentions(params, budget, cfg);
    std::vector<prowl::ExtractionResult> results = pipe.extraction_results(preds);
    prowl::PrfResult metrics = prowl::prf(results, threshold);

    if (!predictions_out.empty()) {
      std::vector<prowl::Prediction> out;
      for (const prowl::Prediction& p : preds)
        out.push_back({prowl::unsafe_token(p.instance), prowl::unsafe_token(p.label), p.score});
      write_file(predictions_out, prowl::predictions_tsv(out));
    }
    if (!pr_curve_out.empty()) write_file(pr_curve_out, prowl::pr_curve_csv(results));
    summary(opt, {{"command", "eval"},
                  {"mode", "extract"},
                  {"precision", metrics.precision},
                  {"recall", metrics.recall},
                  {"f1", metrics.f1},
                  {"tp", metrics.tp},
                  {"fp", metrics.fp},
                  {"fn", metrics.fn}});
  }
  return kExitOk;
}

// ---- tune -------------------------------------------------------------------

int cmd_tune(const CommonOptions& opt, const std::vector<std::string>& examples,
             const std::string& citation_examples, const std::string& unlabeled,
             const std::string& tune_examples, const ExtractInputs& extract,
             const std::string& space_arg, int trials, double threshold,
             const std::string& budget_out, const std::string& history_out) {
  prowl::TaskConfig cfg = opt.task();
  prowl::SearchSpace space;
  bool builtin = true;
  try {
    space = prowl::builtin_space(space_arg);
  } catch (const std::runtime_error&) {
    builtin = false;
  }
  if (!builtin) space = prowl::parse_space(read_file(space_arg));

  prowl::TuneResult result;
  if (task_mode(opt) == prowl::TaskMode::Link) {
    if (examples.empty() || tune_examples.empty())
      throw InputError("--examples and --tune-examples are required in classify mode");
    prowl::ClassifyPipeline pipe;
    fill_classify(pipe, opt, examples, citation_examples, unlabeled);
    std::vector<prowl::TrainingExample> tune =
        prowl::parse_examples(read_file(tune_examples), pipe.syms);
    auto objective = [&](const std::vector<long>& values) {
      prowl::ConstraintBudget budget =
          prowl::assignment_to_budget(space, values, prowl::TaskMode::Link, opt.seed);
      prowl::TrainResult tr = pipe.train_budget(budget, cfg, true);
      return pipe.accuracy_on(tr.params, tune, budget, cfg);
    };
    result = prowl::run_tuning(space, trials, objective, opt.seed);
  } else {
    prowl::RelationPipeline pipe;
    fill_relation_base(pipe, opt);
    extract.fill(pipe);
    auto objective = [&](const std::vector<long>& values) {
      prowl::ConstraintBudget budget =
          prowl::assignment_to_budget(space, values, prowl::TaskMode::Relation, opt.seed);
      prowl::TrainResult tr = pipe.train_budget(budget, cfg, true);
      return pipe.prf_on(tr.params, budget, cfg, threshold).f1;
    };
    result = prowl::run_tuning(space, trials, objective, opt.seed);
  }

  prowl::ConstraintBudget best =
      prowl::assignment_to_budget(space, result.best.values, task_mode(opt), opt.seed);
  if (!budget_out.empty()) write_file(budget_out, prowl::budget_to_json(best));
  if (!history_out.empty()) write_file(history_out, prowl::history_csv(space, result.history));

  nlohmann::json best_json = nlohmann::json::object();
  for (size_t d = 0; d < space.dims.size(); ++d)
    best_json[space.dims[d].name] = result.best.values[d];
  summary(opt, {{"command", "tune"},
                {"trials", result.history.size()},
                {"best_objective", result.best.objective},
                {"best", best_json}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-annotated rule programs scored by restart walks"};
  app.require_subcommand(1);

  CommonOptions ground_opt, train_opt, eval_opt, tune_opt;
  std::string query_text, ground_out;
  std::vector<std::string> train_examples, eval_examples, tune_sup_examples;
  std::string train_citation, tune_citation, train_unlabeled, tune_unlabeled;
  std::string train_budget_path, eval_budget_path;
  ExtractInputs train_extract, eval_extract, tune_extract;
  std::string model_out = "model.tsv", train_log_out;
  std::string eval_model, predictions_out, pr_curve_out;
  std::string tune_examples_path, space_arg, tune_budget_out = "budget.json", tune_history_out;
  double eval_threshold = 0.0, tune_threshold = 0.0;
  int trials = 20;
  bool clamp = false;

  CLI::App* ground = app.add_subcommand("ground", "ground one query to a proof-graph dump");
  ground_opt.attach(ground, false);
  ground->add_option("--query", query_text, "query atom, e.g. 'predict(d1,Y)'")->required();
  ground->add_option("--out", ground_out, "dump path (stdout when omitted)");

  CLI::App* train = app.add_subcommand("train", "train edge weights by SGD");
  train_opt.attach(train, true);
  train->add_option("--examples", train_examples, "supervised example file(s)");
  train->add_option("--examples-citation", train_citation, "citation-view supervised examples");
  train->add_option("--unlabeled", train_unlabeled, "unlabeled instance ids, one per line");
  train->add_option("--budget", train_budget_path, "constraint budget JSON");
  train_extract.attach(train);
  train->add_option("--model-out", model_out, "output model TSV");
  train->add_option("--log-out", train_log_out, "training log CSV");
  train->add_flag("--clamp-budgets", clamp, "clamp counts to pool sizes");

  CLI::App* eval = app.add_subcommand("eval", "score test queries and report metrics");
  eval_opt.attach(eval, false);
  eval->add_option("--examples", eval_examples, "test example file(s) with gold answers");
  eval->add_option("--budget", eval_budget_path, "budget JSON (installs templates)");
  eval_extract.attach(eval);
  eval->add_option("--model", eval_model, "model TSV")->required();
  eval->add_option("--threshold", eval_threshold, "extraction score threshold");
  eval->add_option("--predictions-out", predictions_out, "predictions TSV");
  eval->add_option("--pr-curve-out", pr_curve_out, "PR curve CSV (extract mode)");

  CLI::App* tune = app.add_subcommand("tune", "Bayesian optimization of example budgets");
  tune_opt.attach(tune, true);
  tune->add_option("--examples", tune_sup_examples, "supervised example file(s)");
  tune->add_option("--examples-citation", tune_citation, "citation-view supervised examples");
  tune->add_option("--unlabeled", tune_unlabeled, "unlabeled instance ids");
  tune->add_option("--tune-examples", tune_examples_path, "tuning split with gold answers");
  tune_extract.attach(tune);
  tune->add_option("--space", space_arg, "preset name or space JSON file")->required();
  tune->add_option("--trials", trials, "tuning trials");
  tune->add_option("--threshold", tune_threshold, "extraction score threshold");
  tune->add_option("--budget-out", tune_budget_out, "best budget JSON");
  tune->add_option("--history-out", tune_history_out, "trial history CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ground->parsed()) return cmd_ground(ground_opt, query_text, ground_out);
    if (train->parsed())
      return cmd_train(train_opt, train_examples, train_citation, train_unlabeled,
                       train_budget_path, train_extract, model_out, train_log_out, clamp);
    if (eval->parsed())
      return cmd_eval(eval_opt, eval_examples, eval_budget_path, eval_extract, eval_model,
                      eval_threshold, predictions_out, pr_curve_out);
    if (tune->parsed())
      return cmd_tune(tune_opt, tune_sup_examples, tune_citation, tune_unlabeled,
                      tune_examples_path, tune_extract, space_arg, trials, tune_threshold,
                      tune_budget_out, tune_history_out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const prowl::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInput;
}

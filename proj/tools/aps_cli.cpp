#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aps/pipeline.hpp"

namespace {

struct Options {
  std::string backend;
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<std::size_t> k;
  std::optional<std::size_t> limit;
  bool full = false;
  std::string pairs;
  std::string loss;
  std::string out = "aps-run";
  std::string prompt_id;
  std::string example_id;
  std::string question;
  std::string context;
  std::string answer_type = "free-form";
  std::string sweep = "cluster-vote";
};

aps::RunSettings resolve(const Options& o) {
  auto s = aps::load_settings(o.config);
  if (!o.backend.empty()) s.backend = aps::parse_backend(o.backend);
  if (o.seed) s.pipeline.seed = *o.seed;
  if (o.k) s.pipeline.top_k = *o.k;
  if (o.limit) s.limit = *o.limit;
  if (o.full) s.full = true;
  if (!o.pairs.empty()) s.pipeline.pairing = aps::parse_pairing_mode(o.pairs);
  if (!o.loss.empty()) s.pipeline.loss_mode = aps::parse_loss_mode(o.loss);
  return s;
}

void print_stage(const aps::StageResult& r) {
  std::cout << "[" << r.stage << "]\n";
  for (const auto& line : r.lines) std::cout << "  " << line << "\n";
  std::cout << "  ledger delta: " << aps::format_ledger(r.ledger_delta) << "\n";
}

void print_trace(const aps::AnswerTrace& t) {
  std::cout << "example: " << t.example_id << "\nprompts used:";
  for (const auto& id : t.prompts_used) std::cout << " " << id;
  std::cout << "\n";
  for (std::size_t i = 0; i < t.canonical_answers.size(); ++i)
    std::cout << "  " << t.prompts_used[i] << " -> " << aps::display(t.canonical_answers[i]) << "\n";
  std::cout << "final answer: " << aps::display(t.final_answer) << "\n";
}

int run(const std::string& command, const Options& o) {
  const auto settings = resolve(o);

  if (command == "ablation") {
    std::vector<aps::AblationVariant> variants;
    if (o.sweep == "cluster-vote")
      variants = aps::cluster_vote_grid();
    else if (o.sweep == "size")
      variants = aps::size_grid({{10, 3}, {10, 5}, {20, 3}, {20, 5}});
    else
      throw aps::Error(aps::ErrorKind::Config, "unknown sweep '" + o.sweep + "' (expected cluster-vote or size)");
    const auto rows = aps::ablation_sweep(settings, variants, o.out);
    std::vector<std::pair<std::string, aps::EvalReport>> table;
    for (const auto& row : rows)
      if (row.report) table.emplace_back(row.label, *row.report);
    std::cout << aps::format_report_table(table);
    int failures = 0;
    for (const auto& row : rows)
      if (!row.report) {
        std::cout << row.label << ": FAILED: " << row.error << "\n";
        ++failures;
      }
    return failures == 0 ? 0 : 1;
  }

  aps::Pipeline pipeline(settings, o.out);
  if (command == "cluster") {
    print_stage(pipeline.run_cluster());
  } else if (command == "forge") {
    print_stage(pipeline.run_forge());
  } else if (command == "synth") {
    print_stage(pipeline.run_synth());
  } else if (command == "train") {
    print_stage(pipeline.run_train());
  } else if (command == "eval") {
    auto mode = aps::parse_eval_mode(o.mode.empty() ? "aps-vote" : o.mode, settings.pipeline.top_k);
    mode.fixed_prompt_id = o.prompt_id;
    const auto outcome = pipeline.run_eval(mode);
    std::cout << aps::format_report_table({{pipeline.dataset_name(), outcome.report}});
    std::cout << "ledger delta: " << aps::format_ledger(outcome.report.ledger) << "\n";
    return outcome.report.complete ? 0 : 2;
  } else if (command == "answer") {
    aps::QAExample ex;
    if (!o.example_id.empty()) {
      ex = pipeline.find_example(o.example_id);
    } else if (!o.question.empty()) {
      ex.id = "cli-question";
      ex.question = o.question;
      ex.context = o.context;
      ex.answer_type = aps::parse_answer_type(o.answer_type);
    } else {
      throw aps::Error(aps::ErrorKind::Config, "answer needs --example-id or --question");
    }
    const auto before = pipeline.ledger();
    print_trace(pipeline.run_answer(ex, settings.pipeline.top_k));
    std::cout << "ledger delta: " << aps::format_ledger(pipeline.ledger() - before) << "\n";
  } else if (command == "all") {
    for (const auto& r : pipeline.run_all()) print_stage(r);
    std::ifstream table(pipeline.paths().report_table());
    std::cout << "\n" << table.rdbuf();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic prompt selection pipeline"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("--backend", o.backend, "remote or sim")->check(CLI::IsMember({"remote", "sim"}));
  app.add_option("--config", o.config, "config file, or 'default'");
  app.add_option("--seed", o.seed, "pipeline seed");
  app.add_option("--k", o.k, "prompts voted over");
  app.add_option("--limit", o.limit, "evaluate at most this many test questions");
  app.add_flag("--full", o.full, "evaluate the whole test split on the remote backend");
  app.add_option("--pairs", o.pairs, "full-db or within-cluster")->check(CLI::IsMember({"full-db", "within-cluster"}));
  app.add_option("--loss", o.loss, "logistic or literal")->check(CLI::IsMember({"logistic", "literal"}));
  app.add_option("--out", o.out, "artifact directory");
  app.fallthrough();

  for (const char* name : {"cluster", "forge", "synth", "train", "all"}) app.add_subcommand(name);
  auto* eval = app.add_subcommand("eval", "score a test split");
  eval->add_option("--mode", o.mode, "no-prompt | fixed-prompt | aps-novote | aps-vote-<k>");
  eval->add_option("--prompt-id", o.prompt_id, "prompt for fixed-prompt (default: best on training data)");
  auto* ans = app.add_subcommand("answer", "answer one question");
  ans->add_option("--example-id", o.example_id);
  ans->add_option("--question", o.question);
  ans->add_option("--context", o.context);
  ans->add_option("--answer-type", o.answer_type)->check(CLI::IsMember({"free-form", "multiple-choice"}));
  auto* ablation = app.add_subcommand("ablation", "sweep configurations");
  ablation->add_option("--sweep", o.sweep, "cluster-vote or size")->check(CLI::IsMember({"cluster-vote", "size"}));
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const aps::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

// The command-line verbs, callable without a process boundary.

#include <atomic>
#include <csignal>
#include <iomanip>
#include <iostream>

#include "iqrl/app/chat.hpp"
#include "iqrl/app/report.hpp"

namespace iqrl::app {

inline void save_config_copy(const ExperimentConfig& cfg, const std::string& verb) {
  write_text(cfg.out_dir + "/" + verb + ".config", dump_config(cfg));
}

inline void cmd_gen_corpus(const ExperimentConfig& cfg, std::ostream& log) {
  const auto domain = load_domain(cfg);
  const corpus::Corpus c = corpus::synthesize_corpus(domain, cfg.synth);
  ensure_dir(cfg.out_dir);
  corpus::save_jsonl(cfg.corpus_path(), c);
  save_config_copy(cfg, "gen-corpus");

  const corpus::CorpusStats s = corpus::corpus_stats(c), t = corpus::kShapeTargets;
  log << "wrote " << c.size() << " dialogues to " << cfg.corpus_path() << "\n\n";
  log << std::fixed << std::setprecision(1);
  log << "| Statistic | Generated | Target |\n|---|---|---|\n";
  log << "| dialogues | " << s.dialogues << " | " << t.dialogues << " |\n";
  log << "| max turns | " << s.max_turns << " | " << t.max_turns << " |\n";
  log << "| mean turns | " << s.mean_turns << " | " << t.mean_turns << " |\n";
  log << "| median turns | " << s.median_turns << " | " << t.median_turns << " |\n";
  log << "| max tokens per turn | " << s.max_tokens << " | " << t.max_tokens << " |\n";
  log << "| mean tokens per turn | " << s.mean_tokens << " | " << t.mean_tokens << " |\n";
  log << "| median tokens per turn | " << s.median_tokens << " | " << t.median_tokens << " |\n";
  log << std::defaultfloat;
}

inline std::string corpus_tag(const ExperimentConfig& cfg) {
  const std::string path = cfg.corpus_path();
  return path.substr(path.find_last_of('/') + 1);
}

inline void write_iq_results(const ExperimentConfig& cfg, const std::vector<IqRun>& runs) {
  std::ofstream csv(cfg.out_dir + "/iq_runs.csv");
  if (!csv) throw Error("cannot write " + cfg.out_dir + "/iq_runs.csv");
  write_iq_csv(csv, runs);
  write_text(cfg.out_dir + "/iq_table.md", iq_markdown(runs));
}

/// Cross-validation report, then a final model trained on the whole corpus.
inline void cmd_train_iq(const ExperimentConfig& cfg, std::ostream& log) {
  const corpus::Corpus c = load_corpus(cfg);
  ensure_dir(cfg.out_dir);
  save_config_copy(cfg, "train-iq");
  const std::string tag = corpus_tag(cfg);

  std::vector<IqRun> runs;
  const CvResult cv = cross_validate(c, cfg, [&](const FoldResult& f) {
    log << "fold " << f.fold << ": " << f.test_dialogues << " test dialogues, " << f.epochs_run << " epochs (best "
        << f.best_epoch << "), UAR " << f.report.uar << ", kappa " << f.report.kappa << ", " << f.seconds << " s\n";
    runs.push_back(iq_run(tag, std::to_string(f.fold), f.test_dialogues, f.report));
  });
  log << "folds:";
  for (std::size_t i = 0; i < cv.folds.size(); ++i) log << " " << i + 1 << "=" << cv.folds[i].size();
  log << " dialogues, disjoint\n";
  runs.push_back(iq_run(tag, "pooled", c.size(), cv.report));
  write_iq_results(cfg, runs);
  log << "\n" << iq_markdown(runs) << "\n";

  const iq::TrainResult final_model = train_final_model(c, cfg);
  iq::save_model(cfg.iq_model_path(), final_model.model);
  log << "final model (" << final_model.history.size() << " epochs, best " << final_model.best_epoch << ") saved to "
      << cfg.iq_model_path() << "\n";
}

inline void cmd_eval_iq(const ExperimentConfig& cfg, std::ostream& log) {
  const iq::IqModel model = iq::load_model(cfg.iq_model_path());
  const corpus::Corpus c = load_corpus(cfg);
  ensure_dir(cfg.out_dir);
  save_config_copy(cfg, "eval-iq");
  const iq::EvalResult ev = iq::evaluate(model, c);
  const std::vector<IqRun> runs{iq_run(corpus_tag(cfg), "pooled", c.size(), ev.report)};
  write_iq_results(cfg, runs);
  log << iq_markdown(runs);
}

inline void write_rl_results(const ExperimentConfig& cfg, const std::vector<RlRun>& runs, std::ostream& log) {
  std::ofstream csv(cfg.out_dir + "/rl_runs.csv");
  if (!csv) throw Error("cannot write " + cfg.out_dir + "/rl_runs.csv");
  write_rl_csv(csv, runs);
  const std::string md = rl_markdown(runs);
  write_text(cfg.out_dir + "/rl_table.md", md);
  log << "\n" << md;
}

inline void cmd_run_rl(const ExperimentConfig& cfg, std::ostream& log) {
  const auto domain = load_domain(cfg);
  EstimatorHandle est = make_estimator(cfg);
  ensure_dir(cfg.out_dir);
  ensure_dir(cfg.policies());
  save_config_copy(cfg, "run-rl");
  std::vector<RlRun> runs;
  for (std::uint64_t seed : cfg.seeds) {
    const auto start = std::chrono::steady_clock::now();
    policy::GpSarsaPolicy p = train_policy(domain, cfg, seed, est.estimator.get());
    policy::save_policy(cfg.policy_path(seed), p.gp());
    runs.push_back(evaluate_policy(p, domain, cfg, seed, est.estimator.get()));
    log << "seed " << seed << ": dictionary " << p.gp().size() << ", success " << runs.back().success_rate << ", turns "
        << runs.back().avg_turns << ", "
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
  }
  write_rl_results(cfg, runs, log);
}

inline void cmd_eval_rl(const ExperimentConfig& cfg, std::ostream& log) {
  const auto domain = load_domain(cfg);
  EstimatorHandle est = make_estimator(cfg);
  ensure_dir(cfg.out_dir);
  save_config_copy(cfg, "eval-rl");
  std::vector<RlRun> runs;
  for (std::uint64_t seed : cfg.seeds) {
    policy::GpSarsa gp = policy::load_policy(cfg.policy_path(seed));
    policy::check_compatible(gp, domain);
    policy::GpSarsaPolicy p(std::move(gp));
    runs.push_back(evaluate_policy(p, domain, cfg, seed, est.estimator.get()));
  }
  write_rl_results(cfg, runs, log);
}

namespace detail {
inline std::atomic<env::IqService*> active_service{nullptr};
inline void stop_active_service(int) {
  if (env::IqService* s = active_service.load()) s->stop();
}
}  // namespace detail

/// Serves until SIGINT or SIGTERM.
inline void cmd_serve_iq(const ExperimentConfig& cfg, std::ostream& log) {
  const iq::IqModel model = iq::load_model(cfg.iq_model_path());
  env::IqService service(cfg.socket, iq::model_handler(model));
  detail::active_service = &service;
  std::signal(SIGINT, detail::stop_active_service);
  std::signal(SIGTERM, detail::stop_active_service);
  log << "serving " << cfg.iq_model_path() << " on " << cfg.socket << std::endl;
  service.run();
  detail::active_service = nullptr;
  log << "stopped\n";
}

inline ChatResult cmd_chat(const ExperimentConfig& cfg, std::istream& in, std::ostream& out) {
  const auto domain = load_domain(cfg);
  const policy::GpSarsa gp = policy::load_policy(cfg.chat_policy_path());
  ChatResult r = run_chat(gp, domain, in, out, cfg.seed, cfg.reward.max_turns);
  const std::string path = cfg.transcript_path();
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) ensure_dir(path.substr(0, slash));
  corpus::save_jsonl(path, {r.transcript});
  out << "transcript of " << r.transcript.turns.size() << " turns saved to " << path << "\n";
  return r;
}

inline void cmd_report(const ExperimentConfig& cfg, const std::vector<std::string>& dirs, std::ostream& log) {
  const CollectedRuns runs = collect_runs(dirs);
  const std::vector<SummaryRow> rows = summary_rows(runs.rl, runs.iq);
  ensure_dir(cfg.out_dir);
  std::ofstream csv(cfg.out_dir + "/report.csv");
  if (!csv) throw Error("cannot write " + cfg.out_dir + "/report.csv");
  write_summary_csv(csv, rows);
  const std::string md = summary_markdown(rows);
  write_text(cfg.out_dir + "/report.md", md);
  log << md;
}

}  // namespace iqrl::app

#include <iostream>

#include "CLI11.hpp"
#include "iqrl/app/commands.hpp"

using namespace iqrl;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string domain, reward, estimator, out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "flat key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "override one config key, as key=value (repeatable)");
  cmd->add_option("--seed", f.seed, "sets both seed and seeds to this value");
  cmd->add_option("--domain", f.domain, "domain name or domain JSON path");
  cmd->add_option("--reward", f.reward, "ts or iq")->check(CLI::IsMember({"ts", "iq"}));
  cmd->add_option("--estimator", f.estimator, "oracle, inprocess or service")
      ->check(CLI::IsMember({"oracle", "inprocess", "service"}));
  cmd->add_option("--out-dir", f.out_dir, "shorthand for --set out_dir=DIR");
}

/// Defaults, then the file, then --set, then the dedicated flags.
app::ExperimentConfig resolve(const CommonFlags& f) {
  app::ExperimentConfig cfg = f.config.empty() ? app::ExperimentConfig{} : app::load_config(f.config);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + s + "'");
    app::set_config_key(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.seeds = {*f.seed};
  }
  if (!f.domain.empty()) cfg.domain = f.domain;
  if (!f.reward.empty()) app::set_config_key(cfg, "reward", f.reward);
  if (!f.estimator.empty()) app::set_config_key(cfg, "estimator", f.estimator);
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Interaction-quality rewards for statistical dialogue managers"};
  cli.require_subcommand(1);
  CommonFlags flags;
  std::string model_path, socket_path;
  std::vector<std::string> report_dirs;

  auto* gen = cli.add_subcommand("gen-corpus", "write a synthetic annotated corpus and compare its shape to the targets");
  auto* train_iq = cli.add_subcommand("train-iq", "cross-validate the IQ estimator, then train and save a final model");
  auto* eval_iq = cli.add_subcommand("eval-iq", "score a saved IQ model on a corpus");
  auto* run_rl = cli.add_subcommand("run-rl", "train GP-SARSA policies per seed and evaluate them");
  auto* eval_rl = cli.add_subcommand("eval-rl", "evaluate saved policies per seed");
  auto* serve = cli.add_subcommand("serve-iq", "serve a saved IQ model over a Unix socket");
  auto* chat = cli.add_subcommand("chat", "talk to a trained policy at the terminal");
  auto* report = cli.add_subcommand("report", "aggregate result directories into markdown and CSV tables");
  auto* config = cli.add_subcommand("config", "print every config key with its value and meaning");
  for (auto* cmd : {gen, train_iq, eval_iq, run_rl, eval_rl, serve, chat, report, config}) add_common(cmd, flags);
  serve->add_option("model", model_path, "IQ model file (default: config iq_model)");
  serve->add_option("socket", socket_path, "socket path (default: config socket)");
  chat->add_option("--policy", model_path, "policy file (default: config policy_file)");
  report->add_option("dirs", report_dirs, "result directories")->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    app::ExperimentConfig cfg = resolve(flags);
    if (gen->parsed()) app::cmd_gen_corpus(cfg, std::cout);
    if (train_iq->parsed()) app::cmd_train_iq(cfg, std::cout);
    if (eval_iq->parsed()) app::cmd_eval_iq(cfg, std::cout);
    if (run_rl->parsed()) app::cmd_run_rl(cfg, std::cout);
    if (eval_rl->parsed()) app::cmd_eval_rl(cfg, std::cout);
    if (serve->parsed()) {
      if (!model_path.empty()) cfg.iq_model = model_path;
      if (!socket_path.empty()) cfg.socket = socket_path;
      app::cmd_serve_iq(cfg, std::cout);
    }
    if (chat->parsed()) {
      if (!model_path.empty()) cfg.policy_file = model_path;
      app::cmd_chat(cfg, std::cin, std::cout);
    }
    if (report->parsed()) app::cmd_report(cfg, report_dirs, std::cout);
    if (config->parsed()) std::cout << app::dump_config(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

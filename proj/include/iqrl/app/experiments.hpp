#pragma once

// Drivers shared by the command-line tool and the acceptance runner.

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>

#include "iqrl/app/config.hpp"
#include "iqrl/corpus/folds.hpp"
#include "iqrl/corpus/io.hpp"
#include "iqrl/dialogue/domain.hpp"
#include "iqrl/env/service.hpp"
#include "iqrl/iq/estimator.hpp"
#include "iqrl/iq/model_io.hpp"
#include "iqrl/iq/train.hpp"
#include "iqrl/policy/agent.hpp"

namespace iqrl::app {

inline dialogue::DomainSpec load_domain(const ExperimentConfig& cfg) {
  dialogue::LoadOptions opts;
  if (cfg.db_size) opts.db_size = cfg.db_size;
  return dialogue::load_domain(cfg.domain_path(), opts);
}

inline corpus::Corpus load_corpus(const ExperimentConfig& cfg) {
  std::optional<corpus::ColumnMapping> mapping;
  if (!cfg.corpus_mapping.empty()) mapping = corpus::load_mapping(cfg.corpus_mapping);
  return corpus::load_corpus(cfg.corpus_path(), mapping);
}

inline iq::IqModelConfig model_config(const ExperimentConfig& cfg) {
  iq::IqModelConfig m = cfg.iq;
  m.seed = cfg.seed;
  return m;
}

inline corpus::Corpus select(const corpus::Corpus& c, const std::set<std::string>& ids, bool inside) {
  corpus::Corpus out;
  for (const auto& d : c)
    if (ids.contains(d.dialogue_id) == inside) out.push_back(d);
  return out;
}

/// Trains on `train`, early-stopping on `dev`, with the configured vocabulary
/// threshold and optional pretrained embeddings.
inline iq::TrainResult train_model(const corpus::Corpus& train, const corpus::Corpus* dev, const ExperimentConfig& cfg,
                                   const std::function<void(const iq::EpochStats&)>& on_epoch = {}) {
  iq::TrainOptions opts;
  opts.dev = dev;
  opts.vocab = corpus::build_vocab(train, cfg.min_count);
  opts.on_epoch = on_epoch;
  if (!cfg.embeddings.empty()) {
    opts.init = [&cfg](iq::IqModel& m) { iq::load_pretrained_embeddings(cfg.embeddings, m.vocab, m.params.at("embedding")); };
  }
  return iq::train(train, model_config(cfg), opts);
}

struct FoldResult {
  std::size_t fold = 0;  // 1-based
  std::size_t test_dialogues = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  metrics::Report report;
  double seconds = 0.0;
};

struct CvResult {
  std::vector<corpus::Fold> folds;
  std::vector<FoldResult> per_fold;
  metrics::LabelPairs pooled;
  metrics::Report report;
};

/// Dialogue-wise k-fold cross-validation. Fold i is the test set, fold i+1
/// (mod k) the early-stopping dev set, the rest training data. Predictions on
/// all test folds are pooled before scoring.
inline CvResult cross_validate(const corpus::Corpus& corpus, const ExperimentConfig& cfg,
                               const std::function<void(const FoldResult&)>& on_fold = {}) {
  if (cfg.folds < 2) throw Error("cross_validate: folds must be at least 2");
  CvResult cv;
  cv.folds = corpus::make_folds(corpus, cfg.folds, cfg.seed);
  cv.pooled.classes = static_cast<int>(iq::kNumClasses);
  for (std::size_t i = 0; i < cfg.folds; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const std::set<std::string> test_ids(cv.folds[i].begin(), cv.folds[i].end());
    const std::set<std::string> dev_ids(cv.folds[(i + 1) % cfg.folds].begin(), cv.folds[(i + 1) % cfg.folds].end());
    std::set<std::string> held = test_ids;
    held.insert(dev_ids.begin(), dev_ids.end());
    const corpus::Corpus test = select(corpus, test_ids, true), dev = select(corpus, dev_ids, true),
                         train = select(corpus, held, false);
    const iq::TrainResult tr = train_model(train, &dev, cfg);
    const iq::EvalResult ev = iq::evaluate(tr.model, test);
    cv.pooled.gold.insert(cv.pooled.gold.end(), ev.pairs.gold.begin(), ev.pairs.gold.end());
    cv.pooled.pred.insert(cv.pooled.pred.end(), ev.pairs.pred.begin(), ev.pairs.pred.end());
    FoldResult fr{i + 1, test.size(), tr.history.size(), tr.best_epoch, ev.report,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    cv.per_fold.push_back(fr);
    if (on_fold) on_fold(fr);
  }
  cv.report = metrics::evaluate(cv.pooled);
  return cv;
}

/// Final model on the whole corpus, with the first fold as dev set.
inline iq::TrainResult train_final_model(const corpus::Corpus& corpus, const ExperimentConfig& cfg,
                                         const std::function<void(const iq::EpochStats&)>& on_epoch = {}) {
  const auto folds = corpus::make_folds(corpus, std::max<std::size_t>(cfg.folds, 2), cfg.seed);
  const std::set<std::string> dev_ids(folds[0].begin(), folds[0].end());
  const corpus::Corpus dev = select(corpus, dev_ids, true), train = select(corpus, dev_ids, false);
  return train_model(train, &dev, cfg, on_epoch);
}

/// Owns whatever the chosen estimator mode needs.
struct EstimatorHandle {
  std::unique_ptr<iq::IqModel> model;
  std::unique_ptr<env::IqEstimator> estimator;
};

inline EstimatorHandle make_estimator(const ExperimentConfig& cfg) {
  EstimatorHandle h;
  switch (cfg.estimator) {
    case EstimatorMode::oracle:
      h.estimator = std::make_unique<env::OracleIqEstimator>();
      break;
    case EstimatorMode::inprocess:
      h.model = std::make_unique<iq::IqModel>(iq::load_model(cfg.iq_model_path()));
      h.estimator = std::make_unique<iq::InProcessIqEstimator>(*h.model);
      break;
    case EstimatorMode::service:
      h.estimator = std::make_unique<env::ServiceIqEstimator>(cfg.socket, cfg.service_timeout);
      break;
  }
  return h;
}

inline std::uint64_t train_episode_seed(std::uint64_t seed, std::size_t e) { return seed * 1000000 + e; }
inline std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t e) { return (1ULL << 40) + seed * 1000000 + e; }

struct RlRun {
  std::string domain;
  std::string reward;
  std::string estimator;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double avg_turns = 0.0;
  double avg_return = 0.0;
  double avg_iq = 0.0;

  bool operator==(const RlRun&) const = default;
};

/// Online GP-SARSA training for n_train_dialogues episodes.
inline policy::GpSarsaPolicy train_policy(const dialogue::DomainSpec& domain, const ExperimentConfig& cfg,
                                          std::uint64_t seed, env::IqEstimator* estimator) {
  policy::GpSarsaPolicy p(domain, cfg.gp);
  for (std::size_t e = 0; e < cfg.n_train_dialogues; ++e) {
    env::run_episode(p, domain, cfg.reward, estimator, train_episode_seed(seed, e),
                     {true, "train-" + std::to_string(seed) + "-" + std::to_string(e)});
  }
  return p;
}

/// Greedy evaluation; the estimator, when given, scores every episode.
inline RlRun evaluate_policy(env::DialoguePolicy& p, const dialogue::DomainSpec& domain, const ExperimentConfig& cfg,
                             std::uint64_t seed, env::IqEstimator* estimator) {
  if (cfg.n_eval_dialogues == 0) throw Error("evaluate_policy: n_eval_dialogues must be positive");
  RlRun run{cfg.domain_tag(), reward_name(cfg.reward.kind), estimator_name(cfg.estimator), seed, cfg.n_eval_dialogues};
  double iq_total = 0.0;
  for (std::size_t e = 0; e < cfg.n_eval_dialogues; ++e) {
    const env::EpisodeResult r = env::run_episode(p, domain, cfg.reward, estimator, eval_episode_seed(seed, e),
                                                  {false, "eval-" + std::to_string(seed) + "-" + std::to_string(e)});
    run.success_rate += r.success ? 1.0 : 0.0;
    run.avg_turns += static_cast<double>(r.turns);
    run.avg_return += r.return_value;
    iq_total += r.final_iq.value_or(0);
  }
  const double n = static_cast<double>(cfg.n_eval_dialogues);
  run.success_rate /= n;
  run.avg_turns /= n;
  run.avg_return /= n;
  run.avg_iq = iq_total / n;
  return run;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace iqrl::app

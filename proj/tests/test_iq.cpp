#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "gradcases.hpp"
#include "iqrl/corpus/synth.hpp"
#include "iqrl/dialogue/domain.hpp"
#include "iqrl/iq/estimator.hpp"
#include "iqrl/iq/model_io.hpp"
#include "iqrl/iq/train.hpp"
#include "oracles/iq_oracle.hpp"
#include "oracles/metrics_oracle.hpp"

using namespace iqrl;
using namespace iqrl::iq;

namespace {

IqModelConfig small_config(std::size_t vocab, std::size_t d = 4, std::size_t u = 3, std::uint64_t seed = 1) {
  IqModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embedding_dim = d;
  cfg.turn_hidden = u;
  cfg.attention_dim = 3;
  cfg.dialogue_hidden = 4;
  cfg.seed = seed;
  cfg.dropout_rate = 0.0;
  return cfg;
}

/// Initialisation is small; spread every tensor, biases included.
ParameterSet spread_parameters(const IqModelConfig& cfg, double scale = 0.6) {
  ParameterSet p = init_parameters(cfg);
  Rng rng = derive_rng(cfg.seed, "spread");
  for (auto& [name, t] : p)
    for (double& v : t.data()) v = uniform(rng, -scale, scale);
  return p;
}

std::vector<std::vector<std::size_t>> random_dialogue(Rng& rng, std::size_t turns, std::size_t vocab,
                                                      std::size_t max_tokens = 5) {
  std::vector<std::vector<std::size_t>> d(turns);
  for (auto& t : d) {
    t.resize(1 + uniform_index(rng, max_tokens));
    for (auto& id : t) id = uniform_index(rng, vocab);
  }
  return d;
}

const dialogue::DomainSpec& letsgo4() {
  static const dialogue::DomainSpec d = dialogue::load_domain(std::string(IQRL_DATA_DIR) + "/domains/letsgo4.json");
  return d;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.emplace_back(t.data().begin() + r * t.cols(), t.data().begin() + (r + 1) * t.cols());
  return out;
}

}  // namespace

TEST(EmbedTurn, RowLookups) {
  Rng rng(1);
  const Tensor table = iqrl::testing::random_tensor({6, 3}, rng);
  const Tensor zeros = embed_turn(std::vector<std::size_t>{0, 0, 0}, table);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(zeros.at(k, j), table.at(0, j));
  const std::vector<std::size_t> ids{4, 1, 5, 4};
  const Tensor e = embed_turn(ids, table);
  ASSERT_EQ(e.rows(), 4u);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(e.at(k, j), table.at(ids[k], j));
  EXPECT_THROW(embed_turn(std::vector<std::size_t>{6}, table), Error);
}

TEST(EmbedTurn, IdentityEmbeddingGivesOneHots) {
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  const Tensor e = embed_turn(std::vector<std::size_t>{2, 0}, eye);
  EXPECT_EQ(e.storage(), (std::vector<double>{0, 0, 1, 0, 1, 0, 0, 0}));
}

TEST(EncodeTurn, SingleTokenHasUnitAttention) {
  const IqModelConfig cfg = small_config(5);
  const ParameterSet p = spread_parameters(cfg);
  Rng rng(2);
  const TurnEncoding enc = encode_turn(iqrl::testing::random_tensor({1, cfg.embedding_dim}, rng), p, cfg);
  EXPECT_EQ(enc.alpha, (std::vector<double>{1.0}));
}

TEST(EncodeTurn, AttentionIsDistributionAndPooledInHull) {
  const IqModelConfig cfg = small_config(5);
  const ParameterSet p = spread_parameters(cfg, 1.5);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 1 + uniform_index(rng, 8);
    const Tensor E = iqrl::testing::random_tensor({K, cfg.embedding_dim}, rng, 2.0);
    const TurnEncoding enc = encode_turn(E, p, cfg);
    double total = 0.0;
    for (double a : enc.alpha) {
      EXPECT_GE(a, 0.0);
      total += a;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    nn::Tape tape;
    const ModelVars m = ModelVars::bind_const(tape, p);
    const Tensor H = nn::bigru_sequence(tape.constant_ref(E), m.turn_fwd, m.turn_bwd).value();
    for (std::size_t j = 0; j < enc.pooled.size(); ++j) {
      double lo = H.at(0, j), hi = H.at(0, j);
      for (std::size_t k = 1; k < K; ++k) {
        lo = std::min(lo, H.at(k, j));
        hi = std::max(hi, H.at(k, j));
      }
      EXPECT_GE(enc.pooled[j], lo - 1e-12);
      EXPECT_LE(enc.pooled[j], hi + 1e-12);
    }
  }
}

TEST(EncodeTurn, MatchesStraightLineOracle) {
  IqModelConfig cfg = small_config(5, 4, 2, 2);
  const ParameterSet p = spread_parameters(cfg);
  Rng rng = derive_rng(2, "tokens");
  const Tensor E = iqrl::testing::random_tensor({3, cfg.embedding_dim}, rng);
  for (double gamma : {1.0, 0.7}) {
    cfg.attention_scale = gamma;
    const TurnEncoding got = encode_turn(E, p, cfg);
    const oracle::TurnResult want = oracle::encode_turn(rows_of(E), p, cfg);
    ASSERT_EQ(got.alpha.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got.alpha[k], want.alpha[k], 1e-12);
    ASSERT_EQ(got.pooled.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got.pooled[j], want.pooled[j], 1e-12);
  }
}

TEST(PredictSequence, SingleTurnDistribution) {
  const IqModelConfig cfg = small_config(5);
  const ParameterSet p = spread_parameters(cfg);
  const auto preds = predict_sequence({{1, 2}}, p, cfg);
  ASSERT_EQ(preds.size(), 1u);
  double total = 0.0;
  for (double v : preds[0].probs) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(preds[0].iq, argmax_class(preds[0].probs));
  EXPECT_THROW(predict_sequence({}, p, cfg), Error);
}

TEST(PredictSequence, MatchesStraightLineOracle) {
  IqModelConfig cfg = small_config(7, 4, 3, 3);
  const ParameterSet p = spread_parameters(cfg);
  Rng rng = derive_rng(3, "dialogue");
  const auto turns = random_dialogue(rng, 3, cfg.vocab_size);
  for (std::size_t window : {100u, 2u, 1u}) {
    cfg.max_context_turns = window;
    const auto got = predict_sequence(turns, p, cfg);
    const auto want = oracle::dialogue_probs(turns, p, cfg);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(got[t].probs[c], want[t][c], 1e-12) << "window " << window;
  }
}

TEST(PredictSequence, CausalUnderTruncation) {
  const IqModelConfig cfg = small_config(9);
  const ParameterSet p = spread_parameters(cfg);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto turns = random_dialogue(rng, 2 + uniform_index(rng, 10), cfg.vocab_size);
    const auto full = predict_sequence(turns, p, cfg);
    const std::size_t t = uniform_index(rng, turns.size());
    const auto cut = predict_sequence({turns.begin(), turns.begin() + static_cast<std::ptrdiff_t>(t + 1)}, p, cfg);
    EXPECT_EQ(cut.back(), full[t]);
  }
}

TEST(PredictSequence, WindowIgnoresOlderTurns) {
  IqModelConfig cfg = small_config(9);
  cfg.max_context_turns = 3;
  const ParameterSet p = spread_parameters(cfg);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tail = random_dialogue(rng, 3, cfg.vocab_size);
    auto longer = random_dialogue(rng, 1 + uniform_index(rng, 6), cfg.vocab_size);
    const auto base = predict_sequence(tail, p, cfg).back();
    longer.insert(longer.end(), tail.begin(), tail.end());
    EXPECT_EQ(predict_sequence(longer, p, cfg).back(), base);
  }
}

TEST(IqModelGradient, TwoTurnToyModelMatchesFiniteDifferences) {
  const iqrl::testing::GradCase c = iqrl::testing::toy_iq_case();
  const auto result = iqrl::testing::check_gradients(c.inputs, c.build);
  EXPECT_GT(result.checked, 100u);
  EXPECT_LT(result.max_relative_error, 1e-4);
}

TEST(IqModel, RaisingClassBiasNeverLowersItsProbability) {
  const IqModelConfig cfg = small_config(6);
  ParameterSet p = spread_parameters(cfg);
  Rng rng(6);
  const auto turns = random_dialogue(rng, 4, cfg.vocab_size);
  for (std::size_t c = 0; c < 5; ++c) {
    double last = predict_sequence(turns, p, cfg).back().probs[c];
    const double original = p.at("out.b")[c];
    for (double step : {0.1, 0.5, 1.0, 3.0, 10.0}) {
      p.at("out.b")[c] = original + step;
      const double now = predict_sequence(turns, p, cfg).back().probs[c];
      EXPECT_GE(now, last);
      last = now;
    }
    p.at("out.b")[c] = original;
  }
}

TEST(IqModel, ArgmaxTiesGoLow) {
  EXPECT_EQ(argmax_class(std::vector<double>{0.2, 0.2, 0.2, 0.2, 0.2}), 1);
  EXPECT_EQ(argmax_class(std::vector<double>{0.1, 0.3, 0.3, 0.2, 0.1}), 2);
}

TEST(Train, ConstantLabelsDriveLossToZero) {
  corpus::Corpus c;
  for (int i = 0; i < 4; ++i) {
    corpus::AnnotatedDialogue d{"d" + std::to_string(i), {}};
    for (std::size_t t = 0; t < 4; ++t) d.turns.push_back({t, "how may i help", "bus to town", 3});
    c.push_back(d);
  }
  IqModelConfig cfg = small_config(1, 4, 3);
  cfg.lr = 0.05;
  cfg.epochs = 30;
  const TrainResult r = train(c, cfg);
  ASSERT_EQ(r.history.size(), 30u);
  EXPECT_LT(r.history.back().loss / 16.0, 0.05);
  for (const auto& d : c)
    for (const auto& p : r.model.predict(d)) EXPECT_EQ(p.iq, 3);
}

TEST(Train, LabelErrorsNameDialogueAndTurn) {
  corpus::Corpus c{{"abc", {{0, "a", "b", 3}, {1, "a", "b", std::nullopt}}}};
  try {
    train(c, small_config(1));
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'abc'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("turn 1"), std::string::npos) << msg;
  }
  EXPECT_THROW(train({}, small_config(1)), Error);
}

TEST(Train, DeterministicGivenSeed) {
  corpus::SynthConfig sc;
  sc.n_dialogues = 4;
  sc.mean_turns = 8;
  const corpus::Corpus c = corpus::synthesize_corpus(letsgo4(), sc);
  IqModelConfig cfg = small_config(1);
  cfg.epochs = 3;
  cfg.dropout_rate = 0.5;
  cfg.batch_dialogues = 2;
  const TrainResult a = train(c, cfg), b = train(c, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  EXPECT_EQ(a.model.params, b.model.params);
}

TEST(Train, LearnsPlantedRuleOnFortyDialogues) {
  corpus::SynthConfig sc;
  sc.n_dialogues = 40;
  sc.mean_turns = 30;
  sc.seed = 21;
  const corpus::Corpus c = corpus::synthesize_corpus(letsgo4(), sc);
  IqModelConfig cfg;
  cfg.embedding_dim = 16;
  cfg.turn_hidden = 16;
  cfg.attention_dim = 16;
  cfg.dialogue_hidden = 32;
  cfg.lr = 0.005;
  cfg.epochs = 30;
  cfg.batch_dialogues = 2;
  const TrainResult r = train(c, cfg);
  const EvalResult e = evaluate(r.model, c);
  EXPECT_GE(e.report.uar, 0.95);
  EXPECT_NEAR(e.report.uar, oracle::uar(e.pairs.gold, e.pairs.pred, 5), 1e-12);
  EXPECT_NEAR(e.report.kappa, oracle::kappa_linear(e.pairs.gold, e.pairs.pred, 5), 1e-12);
  EXPECT_NEAR(e.report.rho, oracle::spearman(e.pairs.gold, e.pairs.pred), 1e-12);
}

TEST(Evaluate, ConstantPredictorOnBalancedCorpus) {
  corpus::Corpus c{{"d", {}}};
  for (std::size_t t = 0; t < 10; ++t) c[0].turns.push_back({t, "x", "y", static_cast<int>(t % 5) + 1});
  IqModel m;
  m.config = small_config(1);
  m.params = init_parameters(m.config);
  m.params.at("out.b")[2] = 50.0;
  const EvalResult e = evaluate(m, c);
  EXPECT_DOUBLE_EQ(e.report.uar, 0.2);
  for (int p : e.pairs.pred) EXPECT_EQ(p, 3);
}

TEST(ModelFile, RoundTripPredictsBitwise) {
  IqModel m;
  m.vocab = corpus::Vocab({"<unk>", "bus", "late"});
  m.config = small_config(3);
  m.config.attention_scale = 0.3;
  m.params = spread_parameters(m.config);
  std::stringstream buf;
  save_model(buf, m);
  const std::string bytes = buf.str();
  std::istringstream in(bytes);
  const IqModel back = read_model(in);
  EXPECT_EQ(back.vocab, m.vocab);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(back.config.architecture(), m.config.architecture());
  corpus::AnnotatedDialogue d{"q", {{0, "bus late", "late", std::nullopt}, {1, "what", "bus", std::nullopt}}};
  EXPECT_EQ(back.predict(d), m.predict(d));
  InProcessIqEstimator est(back);
  const auto e = est.estimate(d, {});
  EXPECT_EQ(e.iq, m.predict_final(d).iq);
  EXPECT_EQ(e.probs, m.predict_final(d).probs);
}

TEST(ModelFile, TruncatedAndMismatchedFilesRejected) {
  IqModel m;
  m.config = small_config(2);
  m.vocab = corpus::Vocab({"<unk>", "a"});
  m.params = init_parameters(m.config);
  std::stringstream buf;
  save_model(buf, m);
  const std::string bytes = buf.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_model(truncated), CorruptFileError);
  IqModelConfig want = m.config;
  want.embedding_dim = 5;
  std::istringstream in(bytes);
  try {
    read_model(in, "m", want);
    FAIL();
  } catch (const ConfigMismatchError& e) {
    EXPECT_NE(std::string(e.what()).find("embedding_dim"), std::string::npos);
  }
}

TEST(Embeddings, CoverageAndExactRows) {
  const corpus::Vocab vocab({"<unk>", "bus", "stop", "late"});
  IqModelConfig cfg = small_config(4, 3);
  Tensor table = init_parameters(cfg).at("embedding");
  const Tensor initial = table;

  std::istringstream empty("");
  EXPECT_EQ(load_pretrained_embeddings(empty, vocab, table), 0.0);
  EXPECT_EQ(table, initial);

  std::istringstream two("bus 0.5 -1 2\nzebra 1 1 1\nlate 0.25 0 -0.125\n");
  EXPECT_DOUBLE_EQ(load_pretrained_embeddings(two, vocab, table), 2.0 / 3.0);
  EXPECT_EQ(std::vector<double>(table.data().begin() + 3, table.data().begin() + 6), (std::vector<double>{0.5, -1, 2}));
  EXPECT_EQ(std::vector<double>(table.data().begin() + 9, table.data().begin() + 12),
            (std::vector<double>{0.25, 0, -0.125}));
  EXPECT_EQ(table.at(2, 0), initial.at(2, 0));

  std::istringstream all("3 3\nbus 1 2 3\nstop 4 5 6\nlate 7 8 9\n");
  EXPECT_EQ(load_pretrained_embeddings(all, vocab, table), 1.0);
}

TEST(Embeddings, InconsistentDimensionNamesLine) {
  const corpus::Vocab vocab({"<unk>", "bus"});
  Tensor table({2, 3});
  std::istringstream bad("bus 1 2 3\nstop 1 2\n");
  try {
    load_pretrained_embeddings(bad, vocab, table, "vec.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("vec.txt:2"), std::string::npos) << e.what();
  }
  std::istringstream wide("bus 1 2 3 4\n");
  EXPECT_THROW(load_pretrained_embeddings(wide, vocab, table), ConfigMismatchError);
}

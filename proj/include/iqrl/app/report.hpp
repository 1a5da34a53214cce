#pragma once

// Result files and aggregated tables.
//
//   rl_runs.csv  domain,reward,estimator,seed,episodes,success_rate,avg_turns,avg_return,avg_iq
//   iq_runs.csv  corpus,fold,dialogues,turns,uar,kappa,rho
//
// One row per seed or fold; fold "pooled" holds the cross-validated score.
// Reals are written with 17 significant digits so they re-parse exactly.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "iqrl/app/experiments.hpp"

namespace iqrl::app {

inline constexpr const char* kRlHeader = "domain,reward,estimator,seed,episodes,success_rate,avg_turns,avg_return,avg_iq";
inline constexpr const char* kIqHeader = "corpus,fold,dialogues,turns,uar,kappa,rho";
inline constexpr const char* kSummaryHeader = "table,group,metric,mean,std,runs";

struct IqRun {
  std::string corpus;
  std::string fold;  // 1-based index or "pooled"
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  double uar = 0.0;
  double kappa = 0.0;
  double rho = 0.0;  // NaN when undefined

  bool operator==(const IqRun& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return corpus == o.corpus && fold == o.fold && dialogues == o.dialogues && turns == o.turns && same(uar, o.uar) &&
           same(kappa, o.kappa) && same(rho, o.rho);
  }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.empty() || s.find_first_of(",\"\n\r") != std::string::npos) {
    throw Error("report: field '" + s + "' is empty or contains a comma, quote or newline");
  }
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_csv_real(const std::string& s, const std::string& where) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError(where + ": '" + s + "' is not a number");
  return v;
}

inline std::size_t parse_csv_size(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ParseError(where + ": '" + s + "' is not a count");
  return v;
}

inline std::string real_field(double v) { return std::isnan(v) ? "nan" : format_real(v); }

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Rows after the header, each with exactly as many fields as the header.
inline std::vector<CsvRow> read_rows(std::istream& in, const std::string& header, const std::string& what) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) throw ParseError(what + ":1: expected header '" + header + "'");
  const std::size_t columns = split_csv_line(header).size();
  std::vector<CsvRow> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    CsvRow row{n, split_csv_line(trim(line))};
    if (row.fields.size() != columns) {
      throw ParseError(what + ":" + std::to_string(n) + ": " + std::to_string(row.fields.size()) + " fields, expected " +
                       std::to_string(columns));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline void write_rl_csv(std::ostream& out, const std::vector<RlRun>& runs) {
  out << kRlHeader << "\n";
  for (const auto& r : runs) {
    out << detail::csv_field(r.domain) << ',' << detail::csv_field(r.reward) << ',' << detail::csv_field(r.estimator) << ','
        << r.seed << ',' << r.episodes << ',' << detail::real_field(r.success_rate) << ','
        << detail::real_field(r.avg_turns) << ',' << detail::real_field(r.avg_return) << ','
        << detail::real_field(r.avg_iq) << "\n";
  }
}

inline std::vector<RlRun> read_rl_csv(std::istream& in, const std::string& what = "rl_runs.csv") {
  std::vector<RlRun> runs;
  for (const auto& row : detail::read_rows(in, kRlHeader, what)) {
    const std::string at = what + ":" + std::to_string(row.line);
    const auto& f = row.fields;
    RlRun r;
    r.domain = f[0];
    r.reward = f[1];
    r.estimator = f[2];
    r.seed = detail::parse_csv_size(f[3], at);
    r.episodes = detail::parse_csv_size(f[4], at);
    r.success_rate = detail::parse_csv_real(f[5], at);
    r.avg_turns = detail::parse_csv_real(f[6], at);
    r.avg_return = detail::parse_csv_real(f[7], at);
    r.avg_iq = detail::parse_csv_real(f[8], at);
    runs.push_back(r);
  }
  return runs;
}

inline void write_iq_csv(std::ostream& out, const std::vector<IqRun>& runs) {
  out << kIqHeader << "\n";
  for (const auto& r : runs) {
    out << detail::csv_field(r.corpus) << ',' << detail::csv_field(r.fold) << ',' << r.dialogues << ',' << r.turns << ','
        << detail::real_field(r.uar) << ',' << detail::real_field(r.kappa) << ',' << detail::real_field(r.rho) << "\n";
  }
}

inline std::vector<IqRun> read_iq_csv(std::istream& in, const std::string& what = "iq_runs.csv") {
  std::vector<IqRun> runs;
  for (const auto& row : detail::read_rows(in, kIqHeader, what)) {
    const std::string at = what + ":" + std::to_string(row.line);
    const auto& f = row.fields;
    IqRun r;
    r.corpus = f[0];
    r.fold = f[1];
    r.dialogues = detail::parse_csv_size(f[2], at);
    r.turns = detail::parse_csv_size(f[3], at);
    r.uar = detail::parse_csv_real(f[4], at);
    r.kappa = detail::parse_csv_real(f[5], at);
    r.rho = detail::parse_csv_real(f[6], at);
    runs.push_back(r);
  }
  return runs;
}

inline IqRun iq_run(const std::string& corpus, const std::string& fold, std::size_t dialogues, const metrics::Report& m) {
  return {corpus, fold, dialogues, m.n, m.uar, m.kappa, m.rho_defined ? m.rho : std::nan("")};
}

/// Mean and sample standard deviation; std is absent for a single value.
struct Summary {
  double mean = 0.0;
  std::optional<double> std;
  std::size_t runs = 0;

  bool operator==(const Summary& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return same(mean, o.mean) && runs == o.runs && std.has_value() == o.std.has_value() && (!std || same(*std, *o.std));
  }
};

inline Summary summarize(const std::vector<double>& v) {
  if (v.empty()) throw Error("summarize: no values");
  Summary s;
  s.runs = v.size();
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct SummaryRow {
  std::string table;  // "rl" or "iq"
  std::string group;  // domain/reward/estimator, or the corpus
  std::string metric;
  Summary value;

  bool operator==(const SummaryRow&) const = default;
};

/// Groups runs and summarizes each metric: RL by domain/reward/estimator over
/// seeds, IQ by corpus over pooled rows.
inline std::vector<SummaryRow> summary_rows(const std::vector<RlRun>& rl, const std::vector<IqRun>& iq) {
  std::vector<SummaryRow> out;
  std::map<std::string, std::vector<const RlRun*>> rl_groups;
  std::vector<std::string> rl_order;
  for (const auto& r : rl) {
    const std::string g = r.domain + "/" + r.reward + "/" + r.estimator;
    if (!rl_groups.contains(g)) rl_order.push_back(g);
    rl_groups[g].push_back(&r);
  }
  for (const auto& g : rl_order) {
    auto metric = [&](const std::string& name, double RlRun::*field) {
      std::vector<double> v;
      for (const RlRun* r : rl_groups[g]) v.push_back(r->*field);
      out.push_back({"rl", g, name, summarize(v)});
    };
    metric("success_rate", &RlRun::success_rate);
    metric("avg_turns", &RlRun::avg_turns);
    metric("avg_return", &RlRun::avg_return);
    metric("avg_iq", &RlRun::avg_iq);
  }
  std::map<std::string, std::vector<const IqRun*>> iq_groups;
  std::vector<std::string> iq_order;
  for (const auto& r : iq) {
    if (r.fold != "pooled") continue;
    if (!iq_groups.contains(r.corpus)) iq_order.push_back(r.corpus);
    iq_groups[r.corpus].push_back(&r);
  }
  for (const auto& g : iq_order) {
    auto metric = [&](const std::string& name, double IqRun::*field) {
      std::vector<double> v;
      for (const IqRun* r : iq_groups[g]) v.push_back(r->*field);
      out.push_back({"iq", g, name, summarize(v)});
    };
    metric("uar", &IqRun::uar);
    metric("kappa", &IqRun::kappa);
    metric("rho", &IqRun::rho);
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << "\n";
  for (const auto& r : rows) {
    out << r.table << ',' << detail::csv_field(r.group) << ',' << r.metric << ',' << detail::real_field(r.value.mean) << ','
        << (r.value.std ? detail::real_field(*r.value.std) : "") << ',' << r.value.runs << "\n";
  }
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in, const std::string& what = "report.csv") {
  std::vector<SummaryRow> rows;
  for (const auto& row : detail::read_rows(in, kSummaryHeader, what)) {
    const std::string at = what + ":" + std::to_string(row.line);
    const auto& f = row.fields;
    SummaryRow r{f[0], f[1], f[2], {}};
    r.value.mean = detail::parse_csv_real(f[3], at);
    if (!f[4].empty()) r.value.std = detail::parse_csv_real(f[4], at);
    r.value.runs = detail::parse_csv_size(f[5], at);
    rows.push_back(r);
  }
  return rows;
}

/// "mean ± std" scaled by `factor`, or just the mean for a single run.
inline std::string format_summary(const Summary& s, double factor, int decimals) {
  char buf[96];
  if (s.std) {
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, s.mean * factor, decimals, *s.std * factor);
  } else {
    std::snprintf(buf, sizeof buf, "%.*f", decimals, s.mean * factor);
  }
  return buf;
}

inline const Summary& find_summary(const std::vector<SummaryRow>& rows, const std::string& table, const std::string& group,
                                   const std::string& metric) {
  for (const auto& r : rows)
    if (r.table == table && r.group == group && r.metric == metric) return r.value;
  throw Error("report: no " + metric + " for " + group);
}

/// Markdown tables: task success and turns per configuration, then pooled
/// UAR, kappa and rho per corpus.
inline std::string summary_markdown(const std::vector<SummaryRow>& rows) {
  std::ostringstream md;
  std::vector<std::string> rl_groups, iq_groups;
  for (const auto& r : rows) {
    auto& groups = r.table == "rl" ? rl_groups : iq_groups;
    if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);
  }
  if (!rl_groups.empty()) {
    md << "| Domain | Reward | Estimator | Seeds | Task success (%) | Avg. turns |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& g : rl_groups) {
      const auto first = g.find('/'), second = g.find('/', first + 1);
      const Summary& s = find_summary(rows, "rl", g, "success_rate");
      md << "| " << g.substr(0, first) << " | " << g.substr(first + 1, second - first - 1) << " | " << g.substr(second + 1)
         << " | " << s.runs << " | " << format_summary(s, 100.0, 1) << " | "
         << format_summary(find_summary(rows, "rl", g, "avg_turns"), 1.0, 2) << " |\n";
    }
  }
  if (!iq_groups.empty()) {
    if (!rl_groups.empty()) md << "\n";
    md << "| Corpus | Runs | UAR | Kappa | Rho |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& g : iq_groups) {
      const Summary& u = find_summary(rows, "iq", g, "uar");
      md << "| " << g << " | " << u.runs << " | " << format_summary(u, 1.0, 3) << " | "
         << format_summary(find_summary(rows, "iq", g, "kappa"), 1.0, 3) << " | "
         << format_summary(find_summary(rows, "iq", g, "rho"), 1.0, 3) << " |\n";
    }
  }
  return md.str();
}

/// Per-fold and pooled cross-validation table for one corpus.
inline std::string iq_markdown(const std::vector<IqRun>& runs) {
  std::ostringstream md;
  char buf[160];
  md << "| Corpus | Fold | Dialogues | Turns | UAR | Kappa | Rho |\n|---|---|---|---|---|---|---|\n";
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %zu | %zu | %.3f | %.3f | %.3f |\n", r.corpus.c_str(), r.fold.c_str(),
                  r.dialogues, r.turns, r.uar, r.kappa, r.rho);
    md << buf;
  }
  return md.str();
}

/// Per-seed rows followed by the summary table.
inline std::string rl_markdown(const std::vector<RlRun>& runs) {
  std::ostringstream md;
  char buf[200];
  md << "| Domain | Reward | Estimator | Seed | Task success (%) | Avg. turns | Avg. return | Avg. IQ |\n";
  md << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %s | %llu | %.1f | %.2f | %.2f | %.2f |\n", r.domain.c_str(),
                  r.reward.c_str(), r.estimator.c_str(), static_cast<unsigned long long>(r.seed), 100.0 * r.success_rate,
                  r.avg_turns, r.avg_return, r.avg_iq);
    md << buf;
  }
  md << "\n" << summary_markdown(summary_rows(runs, {}));
  return md.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

struct CollectedRuns {
  std::vector<RlRun> rl;
  std::vector<IqRun> iq;
};

/// Reads rl_runs.csv and iq_runs.csv from each directory; a directory that
/// is missing or holds neither file is an error.
inline CollectedRuns collect_runs(const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw Error("report: no result directories given");
  CollectedRuns all;
  for (const auto& dir : dirs) {
    if (!std::filesystem::is_directory(dir)) throw Error("report: result directory " + dir + " does not exist");
    bool found = false;
    const std::string rl = dir + "/rl_runs.csv", iq = dir + "/iq_runs.csv";
    if (std::filesystem::exists(rl)) {
      std::ifstream in(rl);
      auto runs = read_rl_csv(in, rl);
      all.rl.insert(all.rl.end(), runs.begin(), runs.end());
      found = true;
    }
    if (std::filesystem::exists(iq)) {
      std::ifstream in(iq);
      auto runs = read_iq_csv(in, iq);
      all.iq.insert(all.iq.end(), runs.begin(), runs.end());
      found = true;
    }
    if (!found) throw Error("report: " + dir + " has neither rl_runs.csv nor iq_runs.csv");
  }
  return all;
}

}  // namespace iqrl::app

#pragma once
// Macro/micro P/R/F1, MAE, Spearman's rho, and stratified reporting.
// Scores are percentages in [0, 100]; rho is in [-1, 1] or N/A.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lexpred/common.hpp"
#include "lexpred/corpus.hpp"

namespace lexpred {

struct PRF {
  double p = 0.0;
  double r = 0.0;
  double f1 = 0.0;
  bool zero_denominator = false;  // some component hit the 0-convention
};

// Binary task. Per-class P/R/F1 with the 0-convention when a class is never
// predicted (or never occurs); macro = unweighted mean over the two classes,
// macro-F1 = mean of the per-class F1 scores.
PRF macro_prf(const std::vector<int>& predictions,
              const std::vector<int>& gold);

// Multi-label task. Pooled TP/FP/FN over (case, label) pairs, optionally
// restricted to a label subset.
PRF micro_prf(const std::vector<std::vector<std::string>>& predicted_sets,
              const std::vector<std::vector<std::string>>& gold_sets,
              const LabelVocabulary& vocab,
              const std::optional<std::set<std::string>>& restrict_to =
                  std::nullopt);

double mae(const std::vector<double>& predictions,
           const std::vector<double>& gold);

// Pearson correlation of average-tie ranks; constant input -> N/A.
std::optional<double> spearman_rho(const std::vector<double>& predictions,
                                   const std::vector<double>& gold);

struct StratumScores {
  std::optional<PRF> all;
  std::optional<PRF> frequent;  // N/A when the stratum is empty
  std::optional<PRF> few;
};

StratumScores stratified_report(
    const std::vector<std::vector<std::string>>& predicted_sets,
    const std::vector<std::vector<std::string>>& gold_sets,
    const LabelVocabulary& vocab, const FrequencyStrata& strata);

struct MetricsReport {
  std::string task;  // binary | multilabel | importance
  std::optional<PRF> macro;
  std::optional<PRF> micro_all;
  std::optional<PRF> micro_frequent;
  std::optional<PRF> micro_few;
  std::string micro_na_reason;
  std::optional<double> mae_value;
  std::optional<double> rho;
  std::string rho_na_reason;

  // flat name -> value view used for multi-run aggregation; N/A metrics are
  // absent
  std::vector<std::pair<std::string, double>> flat() const;
  std::string to_json_string() const;
  static MetricsReport from_json_string(const std::string& s);
  std::string format_table() const;
};

struct AggregateEntry {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by n)
  size_t n = 0;
};

// Per-metric mean and population std across runs. Metrics that are N/A in
// any run are reported with the runs that have them.
std::vector<std::pair<std::string, AggregateEntry>> aggregate_reports(
    const std::vector<MetricsReport>& runs);

std::string aggregate_to_json_string(
    const std::vector<std::pair<std::string, AggregateEntry>>& agg);

}  // namespace lexpred

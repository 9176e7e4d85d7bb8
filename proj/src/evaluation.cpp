#include "lexpred/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

using json = nlohmann::json;

namespace lexpred {

namespace {

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

PRF prf_from_counts(const Counts& c) {
  PRF out;
  if (c.tp + c.fp == 0) {
    out.p = 0.0;
    out.zero_denominator = true;
  } else {
    out.p = 100.0 * double(c.tp) / double(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    out.r = 0.0;
    out.zero_denominator = true;
  } else {
    out.r = 100.0 * double(c.tp) / double(c.tp + c.fn);
  }
  if (out.p + out.r == 0.0) {
    out.f1 = 0.0;
    out.zero_denominator = true;
  } else {
    out.f1 = 2.0 * out.p * out.r / (out.p + out.r);
  }
  return out;
}

}  // namespace

PRF macro_prf(const std::vector<int>& predictions,
              const std::vector<int>& gold) {
  if (predictions.size() != gold.size())
    throw ValidationError("macro_prf: length mismatch " +
                          std::to_string(predictions.size()) + " vs " +
                          std::to_string(gold.size()));
  if (predictions.empty()) throw ValidationError("macro_prf: empty input");
  Counts per_class[2];
  for (size_t i = 0; i < predictions.size(); ++i) {
    int p = predictions[i] ? 1 : 0;
    int g = gold[i] ? 1 : 0;
    for (int cls = 0; cls < 2; ++cls) {
      bool pp = p == cls, gg = g == cls;
      if (pp && gg)
        per_class[cls].tp++;
      else if (pp && !gg)
        per_class[cls].fp++;
      else if (!pp && gg)
        per_class[cls].fn++;
    }
  }
  PRF c0 = prf_from_counts(per_class[0]);
  PRF c1 = prf_from_counts(per_class[1]);
  PRF macro;
  macro.p = (c0.p + c1.p) / 2.0;
  macro.r = (c0.r + c1.r) / 2.0;
  macro.f1 = (c0.f1 + c1.f1) / 2.0;  // mean of per-class F1
  macro.zero_denominator = c0.zero_denominator || c1.zero_denominator;
  return macro;
}

PRF micro_prf(const std::vector<std::vector<std::string>>& predicted_sets,
              const std::vector<std::vector<std::string>>& gold_sets,
              const LabelVocabulary& vocab,
              const std::optional<std::set<std::string>>& restrict_to) {
  if (predicted_sets.size() != gold_sets.size())
    throw ValidationError("micro_prf: length mismatch");
  auto in_scope = [&](const std::string& a) {
    if (!vocab.contains(a))
      throw ValidationError("micro_prf: unknown label '" + a + "'");
    return !restrict_to || restrict_to->count(a) > 0;
  };
  Counts c;
  for (size_t i = 0; i < predicted_sets.size(); ++i) {
    std::set<std::string> pred(predicted_sets[i].begin(),
                               predicted_sets[i].end());
    std::set<std::string> gold(gold_sets[i].begin(), gold_sets[i].end());
    for (auto& a : pred) {
      if (!in_scope(a)) continue;
      if (gold.count(a))
        c.tp++;
      else
        c.fp++;
    }
    for (auto& a : gold) {
      if (!in_scope(a)) continue;
      if (!pred.count(a)) c.fn++;
    }
  }
  return prf_from_counts(c);
}

double mae(const std::vector<double>& predictions,
           const std::vector<double>& gold) {
  if (predictions.size() != gold.size())
    throw ValidationError("mae: length mismatch");
  if (predictions.empty()) throw ValidationError("mae: empty input");
  double s = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i)
    s += std::abs(predictions[i] - gold[i]);
  return s / double(predictions.size());
}

namespace {

// average ranks with ties
std::vector<double> average_ranks(const std::vector<double>& x) {
  size_t n = x.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    double avg = (double(i) + double(j)) / 2.0 + 1.0;  // 1-based
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman_rho(const std::vector<double>& predictions,
                                   const std::vector<double>& gold) {
  if (predictions.size() != gold.size())
    throw ValidationError("spearman_rho: length mismatch");
  if (predictions.size() < 2)
    throw ValidationError("spearman_rho: needs at least 2 pairs");
  auto rp = average_ranks(predictions);
  auto rg = average_ranks(gold);
  double n = double(rp.size());
  double mp = 0, mg = 0;
  for (size_t i = 0; i < rp.size(); ++i) {
    mp += rp[i];
    mg += rg[i];
  }
  mp /= n;
  mg /= n;
  double cov = 0, vp = 0, vg = 0;
  for (size_t i = 0; i < rp.size(); ++i) {
    double a = rp[i] - mp, b = rg[i] - mg;
    cov += a * b;
    vp += a * a;
    vg += b * b;
  }
  if (vp == 0.0 || vg == 0.0) return std::nullopt;  // zero rank variance
  return cov / std::sqrt(vp * vg);
}

StratumScores stratified_report(
    const std::vector<std::vector<std::string>>& predicted_sets,
    const std::vector<std::vector<std::string>>& gold_sets,
    const LabelVocabulary& vocab, const FrequencyStrata& strata) {
  StratumScores out;
  out.all = micro_prf(predicted_sets, gold_sets, vocab);
  if (strata.frequent.empty()) {
    out.frequent = std::nullopt;
  } else {
    out.frequent = micro_prf(
        predicted_sets, gold_sets, vocab,
        std::set<std::string>(strata.frequent.begin(), strata.frequent.end()));
  }
  if (strata.few.empty()) {
    out.few = std::nullopt;
  } else {
    out.few = micro_prf(
        predicted_sets, gold_sets, vocab,
        std::set<std::string>(strata.few.begin(), strata.few.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// reports

std::vector<std::pair<std::string, double>> MetricsReport::flat() const {
  std::vector<std::pair<std::string, double>> out;
  auto push_prf = [&](const std::string& prefix,
                      const std::optional<PRF>& prf) {
    if (!prf) return;
    out.emplace_back(prefix + ".precision", prf->p);
    out.emplace_back(prefix + ".recall", prf->r);
    out.emplace_back(prefix + ".f1", prf->f1);
  };
  push_prf("macro", macro);
  push_prf("micro.all", micro_all);
  push_prf("micro.frequent", micro_frequent);
  push_prf("micro.few", micro_few);
  if (mae_value) out.emplace_back("mae", *mae_value);
  if (rho) out.emplace_back("spearman_rho", *rho);
  return out;
}

namespace {

json prf_json(const std::optional<PRF>& prf, const std::string& na_reason) {
  if (!prf) {
    json j;
    j["value"] = nullptr;
    j["reason"] = na_reason.empty() ? "not applicable" : na_reason;
    return j;
  }
  json j;
  j["precision"] = prf->p;
  j["recall"] = prf->r;
  j["f1"] = prf->f1;
  if (prf->zero_denominator) j["zero_denominator"] = true;
  return j;
}

std::optional<PRF> prf_from_json(const json& j) {
  if (j.contains("value") && j["value"].is_null()) return std::nullopt;
  PRF p;
  p.p = j["precision"].get<double>();
  p.r = j["recall"].get<double>();
  p.f1 = j["f1"].get<double>();
  p.zero_denominator = j.value("zero_denominator", false);
  return p;
}

}  // namespace

std::string MetricsReport::to_json_string() const {
  json j;
  j["task"] = task;
  if (task == "binary") j["macro"] = prf_json(macro, "");
  if (task == "multilabel") {
    j["micro"]["all"] = prf_json(micro_all, micro_na_reason);
    j["micro"]["frequent"] = prf_json(micro_frequent, micro_na_reason);
    j["micro"]["few"] = prf_json(micro_few, micro_na_reason);
  }
  if (task == "importance") {
    j["mae"] = mae_value ? json(*mae_value) : json(nullptr);
    if (rho)
      j["spearman_rho"] = *rho;
    else {
      j["spearman_rho"] = nullptr;
      j["spearman_rho_reason"] =
          rho_na_reason.empty() ? "zero rank variance" : rho_na_reason;
    }
  }
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json_string(const std::string& s) {
  json j = json::parse(s);
  MetricsReport r;
  r.task = j["task"].get<std::string>();
  if (j.contains("macro")) r.macro = prf_from_json(j["macro"]);
  if (j.contains("micro")) {
    r.micro_all = prf_from_json(j["micro"]["all"]);
    r.micro_frequent = prf_from_json(j["micro"]["frequent"]);
    r.micro_few = prf_from_json(j["micro"]["few"]);
  }
  if (j.contains("mae") && !j["mae"].is_null())
    r.mae_value = j["mae"].get<double>();
  if (j.contains("spearman_rho") && !j["spearman_rho"].is_null())
    r.rho = j["spearman_rho"].get<double>();
  return r;
}

std::string MetricsReport::format_table() const {
  std::ostringstream os;
  char buf[160];
  auto line = [&](const char* name, const std::optional<PRF>& prf) {
    if (!prf) {
      std::snprintf(buf, sizeof(buf), "%-16s %6s %6s %6s\n", name, "N/A",
                    "N/A", "N/A");
    } else {
      std::snprintf(buf, sizeof(buf), "%-16s %6.1f %6.1f %6.1f\n", name,
                    prf->p, prf->r, prf->f1);
    }
    os << buf;
  };
  if (task == "binary") {
    os << "                      P      R     F1\n";
    line("macro", macro);
  } else if (task == "multilabel") {
    os << "                      P      R     F1\n";
    line("micro overall", micro_all);
    line("micro frequent", micro_frequent);
    line("micro few", micro_few);
  } else if (task == "importance") {
    if (mae_value) {
      std::snprintf(buf, sizeof(buf), "MAE            %6.3f\n", *mae_value);
      os << buf;
    }
    if (rho) {
      std::snprintf(buf, sizeof(buf), "Spearman's rho %6.3f\n", *rho);
      os << buf;
    } else {
      os << "Spearman's rho    N/A\n";
    }
  }
  return os.str();
}

std::vector<std::pair<std::string, AggregateEntry>> aggregate_reports(
    const std::vector<MetricsReport>& runs) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> values;
  for (auto& r : runs)
    for (auto& [name, v] : r.flat()) {
      if (!values.count(name)) order.push_back(name);
      values[name].push_back(v);
    }
  std::vector<std::pair<std::string, AggregateEntry>> out;
  for (auto& name : order) {
    auto& vs = values[name];
    AggregateEntry e;
    e.n = vs.size();
    for (double v : vs) e.mean += v;
    e.mean /= double(vs.size());
    double var = 0.0;
    for (double v : vs) var += (v - e.mean) * (v - e.mean);
    var /= double(vs.size());  // population std
    e.stddev = std::sqrt(var);
    out.emplace_back(name, e);
  }
  return out;
}

std::string aggregate_to_json_string(
    const std::vector<std::pair<std::string, AggregateEntry>>& agg) {
  json j;
  for (auto& [name, e] : agg) {
    j[name]["mean"] = e.mean;
    j[name]["std"] = e.stddev;
    j[name]["runs"] = e.n;
  }
  return j.dump(2) + "\n";
}

}  // namespace lexpred

#include "lexpred/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lexpred/text.hpp"

using json = nlohmann::json;

namespace lexpred {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string AttentionTrace::to_json_string() const {
  json j;
  j["case_id"] = case_id;
  j["model"] = model_tag;
  j["word_weights"] = word_weights;
  j["tokens"] = tokens;
  if (fact_weights)
    j["fact_weights"] = *fact_weights;
  else
    j["fact_weights"] = nullptr;
  return j.dump(2) + "\n";
}

AttentionTrace AttentionTrace::from_json_string(const std::string& s) {
  json j = json::parse(s);
  AttentionTrace t;
  t.case_id = j["case_id"].get<std::string>();
  t.model_tag = j["model"].get<std::string>();
  t.word_weights = j["word_weights"].get<std::vector<std::vector<double>>>();
  t.tokens = j["tokens"].get<std::vector<std::vector<std::string>>>();
  if (!j["fact_weights"].is_null())
    t.fact_weights = j["fact_weights"].get<std::vector<double>>();
  return t;
}

std::string render_heatmap(const AttentionTrace& trace) {
  if (trace.tokens.size() != trace.word_weights.size())
    throw ValidationError("heatmap: token/weight fact counts differ");
  for (size_t f = 0; f < trace.tokens.size(); ++f)
    if (trace.tokens[f].size() != trace.word_weights[f].size())
      throw ValidationError("heatmap: token/weight lengths differ in fact " +
                            std::to_string(f));
  if (trace.fact_weights &&
      trace.fact_weights->size() != trace.word_weights.size())
    throw ValidationError("heatmap: fact weight length mismatch");

  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
     << "<title>attention " << html_escape(trace.case_id) << "</title>\n"
     << "<style>\n"
     << "body{font-family:serif;max-width:60em;margin:2em auto;}\n"
     << ".fact{display:flex;margin:.4em 0;}\n"
     << ".bar{width:14px;margin-right:10px;flex:none;}\n"
     << ".words{line-height:1.7;}\n"
     << ".w{padding:0 2px;border-radius:2px;}\n"
     << "</style></head>\n<body>\n"
     << "<h3>" << html_escape(trace.case_id) << " &mdash; "
     << html_escape(trace.model_tag) << "</h3>\n";

  double fmax = 0.0, fmin = 0.0;
  if (trace.fact_weights && !trace.fact_weights->empty()) {
    fmax = *std::max_element(trace.fact_weights->begin(),
                             trace.fact_weights->end());
    fmin = *std::min_element(trace.fact_weights->begin(),
                             trace.fact_weights->end());
  }

  for (size_t f = 0; f < trace.word_weights.size(); ++f) {
    const auto& ws = trace.word_weights[f];
    double wmin = ws.empty() ? 0.0 : *std::min_element(ws.begin(), ws.end());
    double wmax = ws.empty() ? 0.0 : *std::max_element(ws.begin(), ws.end());
    double span = wmax - wmin;
    os << "<div class=\"fact\">";
    if (trace.fact_weights) {
      double fw = (*trace.fact_weights)[f];
      double fspan = fmax - fmin;
      double alpha = fspan > 0.0 ? (fw - fmin) / fspan : 0.5;
      os << "<div class=\"bar\" data-fw=\"" << fmt_double(fw)
         << "\" style=\"background:rgba(30,90,200," << fmt_double(alpha)
         << ")\"></div>";
    }
    os << "<div class=\"words\">";
    for (size_t i = 0; i < ws.size(); ++i) {
      // zero-variance rows shade uniformly
      double alpha = span > 0.0 ? (ws[i] - wmin) / span : 0.5;
      os << "<span class=\"w\" data-w=\"" << fmt_double(ws[i])
         << "\" style=\"background:rgba(220,40,40," << fmt_double(alpha * 0.85)
         << ")\">" << html_escape(trace.tokens[f][i]) << "</span> ";
    }
    os << "</div></div>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

void export_heatmap(const AttentionTrace& trace, const std::string& path) {
  std::string html = render_heatmap(trace);
  std::ofstream osf(path, std::ios::trunc | std::ios::binary);
  if (!osf) throw RuntimeFailure("heatmap: cannot open " + path);
  osf << html;
}

std::vector<double> parse_heatmap_weights(const std::string& html) {
  std::vector<double> out;
  const std::string key = "data-w=\"";
  size_t pos = 0;
  while ((pos = html.find(key, pos)) != std::string::npos) {
    pos += key.size();
    size_t end = html.find('"', pos);
    out.push_back(std::stod(html.substr(pos, end - pos)));
    pos = end;
  }
  return out;
}

double entity_attention_share(
    const AttentionTrace& trace,
    const std::vector<std::vector<uint8_t>>& flags) {
  if (flags.size() != trace.word_weights.size())
    throw ValidationError("entity_attention_share: fact count mismatch");
  double share = 0.0;
  for (size_t f = 0; f < flags.size(); ++f) {
    if (flags[f].size() != trace.word_weights[f].size())
      throw ValidationError("entity_attention_share: length mismatch in fact " +
                            std::to_string(f));
    double mass = 0.0;
    for (size_t i = 0; i < flags[f].size(); ++i)
      if (flags[f][i]) mass += trace.word_weights[f][i];
    double fw = trace.fact_weights
                    ? (*trace.fact_weights)[f]
                    : 1.0 / double(flags.size());
    share += fw * mass;
  }
  return share;
}

EntityShare entity_attention_share(const AttentionTrace& trace,
                                   const Case& source_case,
                                   const Gazetteer& gazetteer) {
  EntityShare result;
  // per-fact entity flags over this fact's tokens
  std::vector<std::vector<uint8_t>> fact_flags;
  for (auto& fact : source_case.facts) {
    auto spans = recognize_entities(fact, gazetteer);
    auto toks = text::tokenize_spans(fact);
    std::vector<uint8_t> flags(toks.size(), 0);
    for (auto& sp : spans) {
      bool hit = false;
      for (size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].start < sp.end && sp.start < toks[i].end) {
          flags[i] = 1;
          hit = true;
        }
      }
      if (!hit) result.skipped++;
    }
    fact_flags.push_back(std::move(flags));
  }

  std::vector<std::vector<uint8_t>> aligned;
  if (trace.word_weights.size() == fact_flags.size()) {
    aligned = fact_flags;
  } else if (trace.word_weights.size() == 1) {
    // flat architectures: concatenated facts, possibly separator-joined and
    // truncated; walk the trace tokens against the per-fact token streams
    std::vector<uint8_t> flat;
    size_t f = 0, i = 0;
    for (auto& tok : trace.tokens[0]) {
      if (tok == "<sep>") {
        flat.push_back(0);
        continue;
      }
      while (f < fact_flags.size() && i >= fact_flags[f].size()) {
        ++f;
        i = 0;
      }
      if (f < fact_flags.size()) {
        flat.push_back(fact_flags[f][i]);
        ++i;
      } else {
        flat.push_back(0);
      }
    }
    aligned.push_back(std::move(flat));
  } else {
    throw ValidationError("entity_attention_share: trace does not align with case");
  }
  result.share = entity_attention_share(trace, aligned);
  return result;
}

}  // namespace lexpred

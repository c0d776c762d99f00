// Copyright 2026 The padkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "padkit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace padkit {

using json = nlohmann::json;

std::string_view to_string(ApcerConvention convention) {
  return convention == ApcerConvention::pooled ? "pooled" : "max";
}

ApcerConvention parse_apcer_convention(std::string_view text) {
  if (text == "max") return ApcerConvention::max_over_pai;
  if (text == "pooled") return ApcerConvention::pooled;
  throw MetricsError("unknown APCER convention '" + std::string(text) + "' (expected max or pooled)");
}

namespace {

double percent(std::size_t count, std::size_t total) {
  return 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

void require_both_classes(std::size_t n_bona, std::size_t n_attack, const char* what) {
  if (n_bona == 0 || n_attack == 0) {
    throw MetricsError(std::string(what) + " needs both bona fide and attack scores (got " +
                       std::to_string(n_bona) + " bona fide, " + std::to_string(n_attack) + " attack)");
  }
}

}  // namespace

EerResult eer_threshold(std::span<const ScoreRecord> dev_scores) {
  std::vector<std::pair<double, Label>> sorted;
  sorted.reserve(dev_scores.size());
  std::size_t n_bona = 0, n_attack = 0;
  for (const auto& r : dev_scores) {
    if (!std::isfinite(r.score)) throw MetricsError("non-finite score for '" + r.sample_id + "'");
    sorted.emplace_back(r.score, r.label);
    (r.label == Label::bona_fide ? n_bona : n_attack) += 1;
  }
  require_both_classes(n_bona, n_attack, "eer_threshold");
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Sweep the distinct values; at value v every score <= v is rejected.
  std::size_t bona_rejected = 0, attack_rejected = 0;
  bool have_best = false;
  double best_gap = 0.0;
  EerResult best;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double v = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == v) {
      (sorted[i].second == Label::bona_fide ? bona_rejected : attack_rejected) += 1;
      ++i;
    }
    const double frr = percent(bona_rejected, n_bona);
    const double far = percent(n_attack - attack_rejected, n_attack);
    const double gap = std::abs(far - frr);
    if (!have_best || gap < best_gap) {
      have_best = true;
      best_gap = gap;
      best.far = far;
      best.frr = frr;
      best.eer = (far + frr) / 2.0;
      best.threshold = v;
      if (i < sorted.size()) {
        const double mid = v + (sorted[i].first - v) / 2.0;
        if (mid > v && mid < sorted[i].first) best.threshold = mid;
      }
    }
  }
  return best;
}

MetricsReport evaluate(std::span<const ScoreRecord> test_scores, double threshold, const EvaluateOptions& options) {
  MetricsReport rep;
  rep.threshold = threshold;
  rep.convention = options.apcer;
  std::size_t bona_rejected = 0, attack_accepted = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_pai;  // accepted, total
  std::set<std::string> unknown_tags;
  for (const auto& r : test_scores) {
    if (!std::isfinite(r.score)) throw MetricsError("non-finite score for '" + r.sample_id + "'");
    const bool accepted = r.score > threshold;
    if (r.label == Label::bona_fide) {
      ++rep.n_bona_fide;
      if (!accepted) ++bona_rejected;
      continue;
    }
    ++rep.n_attack;
    if (accepted) ++attack_accepted;
    std::string pai = r.pai;
    const bool known = !options.pai_vocabulary.empty()
                           ? std::find(options.pai_vocabulary.begin(), options.pai_vocabulary.end(), pai) !=
                                 options.pai_vocabulary.end()
                           : (!pai.empty() && pai != kBonaFidePai);
    if (!known) {
      unknown_tags.insert(pai);
      pai = "unknown";
    }
    auto& [acc, total] = per_pai[pai];
    acc += accepted ? 1 : 0;
    total += 1;
  }
  require_both_classes(rep.n_bona_fide, rep.n_attack, "evaluate");
  for (const auto& tag : unknown_tags) {
    rep.warnings.push_back("attack PAI '" + tag + "' is not in the vocabulary; pooled into 'unknown'");
  }

  rep.bpcer = percent(bona_rejected, rep.n_bona_fide);
  rep.frr = rep.bpcer;
  rep.apcer_pooled = percent(attack_accepted, rep.n_attack);
  rep.far = rep.apcer_pooled;
  rep.apcer_max = 0.0;
  for (const auto& [pai, counts] : per_pai) {
    const double rate = percent(counts.first, counts.second);
    rep.apcer_per_pai[pai] = rate;
    rep.apcer_max = std::max(rep.apcer_max, rate);
  }
  rep.apcer = options.apcer == ApcerConvention::pooled ? rep.apcer_pooled : rep.apcer_max;
  rep.acer = (rep.apcer + rep.bpcer) / 2.0;
  rep.hter = (rep.far + rep.frr) / 2.0;
  return rep;
}

FoldedReport aggregate_folds(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw MetricsError("aggregate_folds needs at least one report");
  FoldedReport out;
  out.per_fold.assign(reports.begin(), reports.end());
  const auto summarize = [&](auto field) {
    const double n = static_cast<double>(reports.size());
    double sum = 0.0;
    for (const auto& r : reports) sum += field(r);
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : reports) sq += (field(r) - mean) * (field(r) - mean);
    return RateSummary{mean, reports.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0};
  };
  out.summary["apcer"] = summarize([](const MetricsReport& r) { return r.apcer; });
  out.summary["bpcer"] = summarize([](const MetricsReport& r) { return r.bpcer; });
  out.summary["acer"] = summarize([](const MetricsReport& r) { return r.acer; });
  out.summary["far"] = summarize([](const MetricsReport& r) { return r.far; });
  out.summary["frr"] = summarize([](const MetricsReport& r) { return r.frr; });
  out.summary["hter"] = summarize([](const MetricsReport& r) { return r.hter; });
  if (std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.eer_dev.has_value(); })) {
    out.summary["eer_dev"] = summarize([](const MetricsReport& r) { return *r.eer_dev; });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

json to_json(const MetricsReport& r) {
  json j = {{"threshold", r.threshold},
            {"apcer_convention", std::string(to_string(r.convention))},
            {"apcer", r.apcer},
            {"apcer_pooled", r.apcer_pooled},
            {"apcer_max", r.apcer_max},
            {"apcer_per_pai", r.apcer_per_pai},
            {"bpcer", r.bpcer},
            {"acer", r.acer},
            {"far", r.far},
            {"frr", r.frr},
            {"hter", r.hter},
            {"n_bona_fide", r.n_bona_fide},
            {"n_attack", r.n_attack},
            {"warnings", r.warnings}};
  j["eer_dev"] = r.eer_dev ? json(*r.eer_dev) : json(nullptr);
  if (!r.threshold_source.empty()) j["threshold_source"] = r.threshold_source;
  return j;
}

json to_json(const FoldedReport& r) {
  json folds = json::array();
  for (const auto& f : r.per_fold) folds.push_back(to_json(f));
  json summary = json::object();
  for (const auto& [key, s] : r.summary) summary[key] = {{"mean", s.mean}, {"std", s.std}};
  return {{"per_fold", folds}, {"summary", summary}};
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string table(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t width = 0;
  for (const auto& [k, _] : rows) width = std::max(width, k.size());
  std::ostringstream os;
  for (const auto& [k, v] : rows) os << k << std::string(width - k.size() + 2, ' ') << v << '\n';
  return os.str();
}

}  // namespace

std::string render_table(const MetricsReport& r) {
  std::vector<std::pair<std::string, std::string>> rows;
  char thr[64];
  std::snprintf(thr, sizeof(thr), "%.6f", r.threshold);
  rows.emplace_back("threshold", thr);
  if (!r.threshold_source.empty()) rows.emplace_back("threshold_source", r.threshold_source);
  if (r.eer_dev) rows.emplace_back("EER_dev(%)", fixed2(*r.eer_dev));
  rows.emplace_back("APCER(%)", fixed2(r.apcer) + " [" + std::string(to_string(r.convention)) + "]");
  for (const auto& [pai, rate] : r.apcer_per_pai) rows.emplace_back("  APCER[" + pai + "](%)", fixed2(rate));
  rows.emplace_back("APCER_pooled(%)", fixed2(r.apcer_pooled));
  rows.emplace_back("BPCER(%)", fixed2(r.bpcer));
  rows.emplace_back("ACER(%)", fixed2(r.acer));
  rows.emplace_back("FAR(%)", fixed2(r.far));
  rows.emplace_back("FRR(%)", fixed2(r.frr));
  rows.emplace_back("HTER(%)", fixed2(r.hter));
  rows.emplace_back("n_bona_fide", std::to_string(r.n_bona_fide));
  rows.emplace_back("n_attack", std::to_string(r.n_attack));
  return table(rows);
}

std::string render_table(const FoldedReport& r) {
  static const std::vector<std::pair<std::string, std::string>> order = {
      {"eer_dev", "EER_dev(%)"}, {"apcer", "APCER(%)"}, {"bpcer", "BPCER(%)"}, {"acer", "ACER(%)"},
      {"far", "FAR(%)"},         {"frr", "FRR(%)"},     {"hter", "HTER(%)"}};
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("folds", std::to_string(r.per_fold.size()));
  for (const auto& [key, label] : order) {
    const auto it = r.summary.find(key);
    if (it == r.summary.end()) continue;
    rows.emplace_back(label, fixed2(it->second.mean) + "±" + fixed2(it->second.std));
  }
  return table(rows);
}

std::string render_comparison(std::span<const ComparisonRow> rows, const std::string& source_name,
                              const std::string& target_name) {
  const std::string c1 = "tested on " + source_name;
  const std::string c2 = "tested on " + target_name;
  std::size_t w0 = std::string("training").size();
  for (const auto& r : rows) w0 = std::max(w0, r.name.size());
  const std::size_t w1 = c1.size(), w2 = c2.size();
  const auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  std::ostringstream os;
  os << "ACER(%) trained on " << source_name << '\n';
  os << pad("training", w0) << " | " << pad(c1, w1) << " | " << c2 << '\n';
  os << std::string(w0, '-') << "-+-" << std::string(w1, '-') << "-+-" << std::string(w2, '-') << '\n';
  for (const auto& r : rows) {
    os << pad(r.name, w0) << " | " << pad(fixed2(r.intra_acer), w1) << " | " << fixed2(r.cross_acer) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Score CSV

void write_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw MetricsError("cannot write score file '" + path.string() + "'");
  out << kScoreHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.score);
    out << r.sample_id << ',' << r.subject_id << ',' << buf << ',' << to_string(r.label) << ',' << r.pai << '\n';
  }
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MetricsError("cannot open score file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScoreHeader) throw MetricsError("score file '" + path.string() + "' has an unexpected header");
  std::vector<ScoreRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 5) throw MetricsError("score file line " + std::to_string(line_no) + ": expected 5 fields");
    ScoreRecord r;
    r.sample_id = f[0];
    r.subject_id = f[1];
    const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.score);
    if (ec != std::errc() || ptr != f[2].data() + f[2].size()) {
      throw MetricsError("score file line " + std::to_string(line_no) + ": bad score '" + f[2] + "'");
    }
    try {
      r.label = parse_label(f[3]);
    } catch (const Error& e) {
      throw MetricsError("score file line " + std::to_string(line_no) + ": " + e.what());
    }
    r.pai = f[4];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace padkit

/* Copyright 2026 The AAD Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "aad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aad/errors.hpp"
#include "aad/models.hpp"
#include "aad/pipeline.hpp"

namespace aad {

using nlohmann::json;

namespace {

void require_both_classes(std::size_t n_normal, std::size_t n_anomaly) {
  if (n_normal == 0 || n_anomaly == 0) {
    fail(ErrorKind::kDegenerateEval, "need at least one normal and one anomaly score (got " +
                                         std::to_string(n_normal) + " normal, " +
                                         std::to_string(n_anomaly) + " anomaly)");
  }
}

// Twice the number of (negative, positive) pairs won by the positive, ties
// counting one half.
std::uint64_t doubled_wins(double negative, const std::vector<double>& sorted_positive) {
  const auto lo = std::lower_bound(sorted_positive.begin(), sorted_positive.end(), negative);
  const auto hi = std::upper_bound(lo, sorted_positive.end(), negative);
  const auto above = static_cast<std::uint64_t>(sorted_positive.end() - hi);
  const auto tied = static_cast<std::uint64_t>(hi - lo);
  return 2 * above + tied;
}

void split_labels(const std::vector<ScoreRecord>& records, std::vector<double>& normal,
                  std::vector<double>& anomaly) {
  for (const auto& r : records) {
    if (r.label == Label::kNormal) normal.push_back(r.score);
    if (r.label == Label::kAnomaly) anomaly.push_back(r.score);
  }
}

}  // namespace

double roc_auc(std::span<const double> normal_scores, std::span<const double> anomaly_scores) {
  require_both_classes(normal_scores.size(), anomaly_scores.size());
  std::vector<double> positive(anomaly_scores.begin(), anomaly_scores.end());
  std::sort(positive.begin(), positive.end());
  std::uint64_t wins = 0;
  for (double n : normal_scores) wins += doubled_wins(n, positive);
  return static_cast<double>(wins) /
         (2.0 * static_cast<double>(normal_scores.size()) * static_cast<double>(positive.size()));
}

double roc_auc(const std::vector<ScoreRecord>& records) {
  std::vector<double> normal, anomaly;
  split_labels(records, normal, anomaly);
  return roc_auc(normal, anomaly);
}

double roc_auc_trapezoid(std::span<const double> normal_scores,
                         std::span<const double> anomaly_scores) {
  require_both_classes(normal_scores.size(), anomaly_scores.size());
  struct Point {
    double score;
    bool positive;
  };
  std::vector<Point> all;
  for (double s : normal_scores) all.push_back({s, false});
  for (double s : anomaly_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Point& a, const Point& b) { return a.score > b.score; });

  // Walk thresholds from high to low; each block of equal scores is one ROC
  // segment. Area is accumulated in doubled integer units.
  std::uint64_t tp = 0, fp = 0, doubled_area = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t dtp = 0, dfp = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      (all[j].positive ? dtp : dfp) += 1;
      ++j;
    }
    doubled_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return static_cast<double>(doubled_area) / (2.0 * static_cast<double>(fp) * static_cast<double>(tp));
}

double pauc(std::span<const double> normal_scores, std::span<const double> anomaly_scores,
            double p, bool use_ceil) {
  require_both_classes(normal_scores.size(), anomaly_scores.size());
  if (!(p > 0.0 && p <= 1.0)) fail(ErrorKind::kContract, "p must be in (0, 1]");
  const double raw = p * static_cast<double>(normal_scores.size());
  auto count = static_cast<std::size_t>(use_ceil ? std::ceil(raw - 1e-9) : std::floor(raw + 1e-9));
  count = std::min(count, normal_scores.size());
  if (count == 0) {
    fail(ErrorKind::kPTooSmall, "p = " + std::to_string(p) + " selects no normal score out of " +
                                    std::to_string(normal_scores.size()));
  }
  std::vector<double> negative(normal_scores.begin(), normal_scores.end());
  std::sort(negative.begin(), negative.end(), std::greater<>());
  std::vector<double> positive(anomaly_scores.begin(), anomaly_scores.end());
  std::sort(positive.begin(), positive.end());

  std::uint64_t wins = 0;
  for (std::size_t i = 0; i < count; ++i) wins += doubled_wins(negative[i], positive);
  return static_cast<double>(wins) /
         (2.0 * static_cast<double>(count) * static_cast<double>(positive.size()));
}

double pauc(const std::vector<ScoreRecord>& records, double p, bool use_ceil) {
  std::vector<double> normal, anomaly;
  split_labels(records, normal, anomaly);
  return pauc(normal, anomaly, p, use_ceil);
}

EvalReport build_report(const std::vector<ScoreRecord>& records, const std::string& model,
                        double p, bool use_ceil) {
  EvalReport report;
  report.model = model;
  report.p = p;
  std::map<std::pair<MachineType, int>, std::vector<ScoreRecord>> groups;
  for (const auto& r : records) groups[{r.machine_type, r.machine_id}].push_back(r);

  for (const auto& [key, group] : groups) {
    if (report.machines.empty() || report.machines.back().type != key.first) {
      report.machines.push_back({key.first, {}, 0.0, 0.0});
    }
    IdResult id;
    id.id = key.second;
    for (const auto& r : group) {
      id.n_normal += r.label == Label::kNormal;
      id.n_anomaly += r.label == Label::kAnomaly;
    }
    try {
      id.auc = 100.0 * roc_auc(group);
      id.pauc = 100.0 * pauc(group, p, use_ceil);
    } catch (const Error& e) {
      id.auc = id.pauc = std::numeric_limits<double>::quiet_NaN();
      id.error = e.what();
    }
    report.machines.back().ids.push_back(std::move(id));
  }

  for (auto& machine : report.machines) {
    double auc = 0.0, pa = 0.0;
    std::size_t n = 0;
    for (const auto& id : machine.ids) {
      if (id.error) continue;
      auc += id.auc;
      pa += id.pauc;
      ++n;
    }
    machine.avg_auc = n ? auc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    machine.avg_pauc = n ? pa / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

EvalReport evaluate_dataset(const Model& model, const DatasetIndex& index,
                            const FeatureConfig& features, const EvalConfig& config,
                            std::vector<ScoreRecord>* records_out) {
  const DatasetSplit split = split_dataset(index, config.test_normal_fraction);
  const LogMelExtractor extractor(features);
  std::vector<ScoreRecord> records = score_entries(model, split.test, extractor,
                                                      config.feature_cache_dir, index.root);
  EvalReport report = build_report(records, std::string(to_string(model.spec().kind)), config.p,
                                   config.pauc_ceil);
  report.parameters = model.param_count();
  if (records_out) *records_out = std::move(records);
  return report;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string report_json(const EvalReport& report) {
  json machines = json::array();
  for (const auto& m : report.machines) {
    json ids = json::array();
    for (const auto& id : m.ids) {
      json entry = {{"id", id.id},
                    {"auc", number_or_null(id.auc)},
                    {"pauc", number_or_null(id.pauc)},
                    {"n_normal", id.n_normal},
                    {"n_anomaly", id.n_anomaly}};
      if (id.error) entry["error"] = *id.error;
      ids.push_back(std::move(entry));
    }
    machines.push_back({{"type", std::string(to_string(m.type))},
                        {"ids", std::move(ids)},
                        {"avg", {{"auc", number_or_null(m.avg_auc)},
                                 {"pauc", number_or_null(m.avg_pauc)}}}});
  }
  json j = {{"model", report.model}, {"p", report.p}, {"machines", std::move(machines)}};
  if (report.parameters) j["parameters"] = *report.parameters;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("report: ") + e.what());
  }
  EvalReport report;
  report.model = j.at("model").get<std::string>();
  report.p = j.at("p").get<double>();
  if (j.contains("parameters")) report.parameters = j["parameters"].get<std::size_t>();
  for (const auto& m : j.at("machines")) {
    MachineResult machine;
    machine.type = parse_machine_type(m.at("type").get<std::string>());
    for (const auto& e : m.at("ids")) {
      IdResult id;
      id.id = e.at("id").get<int>();
      id.auc = number_from(e.at("auc"));
      id.pauc = number_from(e.at("pauc"));
      id.n_normal = e.value("n_normal", std::size_t{0});
      id.n_anomaly = e.value("n_anomaly", std::size_t{0});
      if (e.contains("error")) id.error = e["error"].get<std::string>();
      machine.ids.push_back(std::move(id));
    }
    machine.avg_auc = number_from(m.at("avg").at("auc"));
    machine.avg_pauc = number_from(m.at("avg").at("pauc"));
    report.machines.push_back(std::move(machine));
  }
  return report;
}

namespace {

std::string fixed2(double v) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "machine_type,id,auc,pauc\n";
  for (const auto& m : report.machines) {
    for (const auto& id : m.ids) {
      os << to_string(m.type) << ',' << id.id << ',' << fixed2(id.auc) << ','
         << fixed2(id.pauc) << '\n';
    }
    os << to_string(m.type) << ",avg," << fixed2(m.avg_auc) << ',' << fixed2(m.avg_pauc) << '\n';
  }
  return os.str();
}

std::string report_markdown(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  struct Row {
    MachineType type;
    std::string id;
  };
  std::vector<Row> rows;
  for (const auto& m : reports.front().machines) {
    for (const auto& id : m.ids) rows.push_back({m.type, std::to_string(id.id)});
    rows.push_back({m.type, "Avg"});
  }
  auto lookup = [](const EvalReport& r, const Row& row) -> std::pair<double, double> {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& m : r.machines) {
      if (m.type != row.type) continue;
      if (row.id == "Avg") return {m.avg_auc, m.avg_pauc};
      for (const auto& id : m.ids) {
        if (std::to_string(id.id) == row.id) return {id.auc, id.pauc};
      }
    }
    return {nan, nan};
  };

  std::ostringstream os;
  os << "| Model | ID |";
  for (const auto& r : reports) os << ' ' << r.model << " |";
  os << "\n|---|---|";
  for (std::size_t i = 0; i < reports.size(); ++i) os << "---|";
  os << "\n| Parameters | |";
  for (const auto& r : reports) {
    os << ' ' << (r.parameters ? std::to_string(*r.parameters) : std::string("n/a")) << " |";
  }
  os << "\n| Metric | |";
  for (std::size_t i = 0; i < reports.size(); ++i) os << " AUC(%) pAUC(%) |";
  os << '\n';

  std::string current;
  for (const auto& row : rows) {
    std::vector<std::pair<double, double>> values;
    double best_auc = -std::numeric_limits<double>::infinity();
    double best_pauc = best_auc;
    for (const auto& r : reports) {
      values.push_back(lookup(r, row));
      if (std::isfinite(values.back().first)) best_auc = std::max(best_auc, values.back().first);
      if (std::isfinite(values.back().second)) best_pauc = std::max(best_pauc, values.back().second);
    }
    const std::string type(to_string(row.type));
    os << "| " << (type != current ? type : "") << " | " << row.id << " |";
    current = type;
    for (const auto& [auc, pa] : values) {
      const bool bold_auc = reports.size() > 1 && std::isfinite(auc) && auc == best_auc;
      const bool bold_pauc = reports.size() > 1 && std::isfinite(pa) && pa == best_pauc;
      os << ' ' << (bold_auc ? "**" + fixed2(auc) + "**" : fixed2(auc)) << ' '
         << (bold_pauc ? "**" + fixed2(pa) + "**" : fixed2(pa)) << " |";
    }
    os << '\n';
  }
  return os.str();
}

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  switch (format) {
    case ReportFormat::kJson: out << report_json(report); break;
    case ReportFormat::kCsv: out << report_csv(report); break;
    case ReportFormat::kMarkdown: out << report_markdown({report}); break;
  }
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace aad

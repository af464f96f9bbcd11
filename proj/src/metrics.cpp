#include "casehold/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "casehold/csv.hpp"
#include "casehold/util.hpp"

namespace casehold {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

void check_range(std::span<const int> values, int n_classes, const char* what) {
  for (int v : values)
    if (v < 0 || v >= n_classes)
      throw std::invalid_argument(std::string(what) + ": label " + std::to_string(v) + " outside [0, " +
                                  std::to_string(n_classes) + ")");
}

double f1_from_counts(double tp, double fp, double fn) {
  double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

}  // namespace

double binary_f1(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size(), "binary_f1");
  check_range(predictions, 2, "binary_f1");
  check_range(labels, 2, "binary_f1");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    if (predictions[i] == 1 && labels[i] == 0) ++fp;
    if (predictions[i] == 0 && labels[i] == 1) ++fn;
  }
  return f1_from_counts(static_cast<double>(tp), static_cast<double>(fp), static_cast<double>(fn));
}

double weighted_macro_f1(std::span<const int> predictions, std::span<const int> labels,
                         std::span<const double> weights, int n_classes) {
  check_lengths(predictions.size(), labels.size(), "macro_f1");
  check_lengths(weights.size(), labels.size(), "macro_f1 weights");
  if (n_classes < 1) throw std::invalid_argument("n_classes must be positive");
  check_range(predictions, n_classes, "macro_f1");
  check_range(labels, n_classes, "macro_f1");
  std::vector<double> tp(n_classes, 0.0), fp(n_classes, 0.0), fn(n_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) {
      tp[labels[i]] += weights[i];
    } else {
      fp[predictions[i]] += weights[i];
      fn[labels[i]] += weights[i];
    }
  }
  double sum = 0.0;
  for (int c = 0; c < n_classes; ++c) sum += f1_from_counts(tp[c], fp[c], fn[c]);
  return sum / n_classes;
}

double macro_f1(std::span<const int> predictions, std::span<const int> labels, int n_classes) {
  std::vector<double> ones(labels.size(), 1.0);
  return weighted_macro_f1(predictions, labels, ones, n_classes);
}

std::string MetricReport::format(int digits) const {
  return fixed(mean, digits) + " \xC2\xB1 " + fixed(half_width, digits);
}

MetricReport aggregate_folds(std::span<const double> scores) {
  if (scores.size() < 2) throw std::invalid_argument("aggregate_folds needs at least 2 scores");
  MetricReport r;
  r.scores.assign(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  r.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - r.mean) * (s - r.mean);
  r.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return r;
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 100000; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (std::isnan(t)) throw std::invalid_argument("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size(), "paired_t_test");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test needs at least 2 pairs");
  const double n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / (n - 1.0));

  TTestResult r;
  r.df = a.size() - 1;
  if (sd == 0.0) {
    if (mean == 0.0) return r;  // t = 0, p = 1
    r.t = mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.degenerate = true;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  r.p = student_t_two_sided_p(r.t, static_cast<double>(r.df));
  return r;
}

// ---------------------------------------------------------------------------

LossTable parse_losses(std::string_view text) {
  auto table = csv::read_table(text);
  auto id_col = table.column("example_id");
  auto loss_col = table.column("loss");
  LossTable out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.emplace_back(row[id_col], parse_double(row[loss_col]));
  return out;
}

DsResult ds_scores(const LossTable& general, const LossTable& domain) {
  auto to_map = [](const LossTable& t, const char* which) {
    std::map<std::string, double> m;
    for (const auto& [id, loss] : t) {
      if (!std::isfinite(loss) || loss < 0.0)
        throw std::invalid_argument(std::string(which) + " loss for '" + id + "' is negative or not finite");
      if (!m.emplace(id, loss).second)
        throw std::invalid_argument(std::string(which) + " loss file repeats id '" + id + "'");
    }
    return m;
  };
  auto g = to_map(general, "general");
  auto d = to_map(domain, "domain");

  std::vector<std::string> only_g, only_d;
  for (const auto& [id, _] : g)
    if (!d.contains(id)) only_g.push_back(id);
  for (const auto& [id, _] : d)
    if (!g.contains(id)) only_d.push_back(id);
  if (!only_g.empty() || !only_d.empty()) {
    std::string msg = "loss files cover different examples;";
    auto list = [&](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" only in ") + label + ":";
      for (const auto& id : ids) msg += " " + id;
      msg += ";";
    };
    list("general", only_g);
    list("domain", only_d);
    throw std::invalid_argument(msg);
  }

  DsResult r;
  r.records.reserve(g.size());
  double sum = 0.0;
  for (const auto& [id, lg] : g) {
    double ld = d.at(id);
    r.records.push_back({id, lg, ld, lg - ld});
    sum += lg - ld;
  }
  r.mean = r.records.empty() ? 0.0 : sum / static_cast<double>(r.records.size());
  return r;
}

std::string format_ds(const DsResult& result) {
  std::string out = csv::format_row({"example_id", "loss_general", "loss_domain", "ds"});
  for (const auto& r : result.records)
    out += csv::format_row({r.example_id, format_double(r.loss_general), format_double(r.loss_domain), format_double(r.ds)});
  return out;
}

std::vector<double> rank_weights(std::span<const std::string> example_ids,
                                 const std::unordered_map<std::string, double>& ds) {
  std::vector<std::size_t> order(example_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> values(example_ids.size());
  for (std::size_t i = 0; i < example_ids.size(); ++i) {
    auto it = ds.find(example_ids[i]);
    if (it == ds.end()) throw std::invalid_argument("no DS score for example '" + example_ids[i] + "'");
    values[i] = it->second;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return example_ids[a] < example_ids[b];
  });
  std::vector<double> weights(example_ids.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) weights[order[rank]] = static_cast<double>(rank + 1);
  return weights;
}

double rank_weighted_f1(std::span<const std::string> example_ids, std::span<const int> predictions,
                        std::span<const int> labels, const std::unordered_map<std::string, double>& ds,
                        int n_classes) {
  check_lengths(example_ids.size(), labels.size(), "rank_weighted_f1");
  return weighted_macro_f1(predictions, labels, rank_weights(example_ids, ds), n_classes);
}

std::string format_domain_match_table(std::span<const std::string> models, std::span<const DomainMatchRow> rows,
                                      int digits) {
  if (models.size() < 2) throw std::invalid_argument("domain match table needs at least two models");
  std::string out = "Mean macro F1";
  for (const auto& m : models) out += " | " + m;
  out += " | Mean Gain\n";
  for (const auto& row : rows) {
    check_lengths(row.per_model.size(), models.size(), "domain match row");
    out += row.name;
    for (double v : row.per_model) out += " | " + fixed(v, digits);
    out += " | " + fixed(row.per_model.back() - row.per_model.front(), digits) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> ErrorBreakdown::labels(std::string_view a, std::string_view b) {
  return {"both correct", std::string(a) + " correct / " + std::string(b) + " incorrect",
          std::string(b) + " correct / " + std::string(a) + " incorrect", "both incorrect"};
}

std::string ErrorBreakdown::format(std::string_view a, std::string_view b) const {
  auto names = labels(a, b);
  const double values[] = {both_correct, only_a, only_b, neither};
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += fixed(values[i], 1) + "% " + names[i] + "\n";
  return out;
}

ErrorBreakdown error_breakdown(std::span<const int> predictions_a, std::span<const int> predictions_b,
                               std::span<const int> labels) {
  check_lengths(predictions_a.size(), labels.size(), "error_breakdown");
  check_lengths(predictions_b.size(), labels.size(), "error_breakdown");
  if (labels.empty()) throw std::invalid_argument("error_breakdown needs at least one example");
  std::size_t counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool a = predictions_a[i] == labels[i];
    bool b = predictions_b[i] == labels[i];
    ++counts[a && b ? 0 : a ? 1 : b ? 2 : 3];
  }
  const double n = static_cast<double>(labels.size());
  ErrorBreakdown r;
  r.n = labels.size();
  r.both_correct = 100.0 * static_cast<double>(counts[0]) / n;
  r.only_a = 100.0 * static_cast<double>(counts[1]) / n;
  r.only_b = 100.0 * static_cast<double>(counts[2]) / n;
  r.neither = 100.0 * static_cast<double>(counts[3]) / n;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, int>> parse_predictions(std::string_view text) {
  auto table = csv::read_table(text);
  auto id_col = table.column("example_id");
  auto label_col = table.has_column("label") ? table.column("label") : table.column("prediction");
  std::vector<std::pair<std::string, int>> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.emplace_back(row[id_col], static_cast<int>(parse_int(row[label_col])));
  return out;
}

std::vector<int> align_predictions(std::span<const std::string> example_ids,
                                   const std::vector<std::pair<std::string, int>>& predictions, int n_classes) {
  std::unordered_map<std::string, int> by_id;
  for (const auto& [id, label] : predictions) {
    if (label < 0 || label >= n_classes)
      throw std::invalid_argument("prediction for '" + id + "' outside [0, " + std::to_string(n_classes) + ")");
    if (!by_id.emplace(id, label).second) throw std::invalid_argument("duplicate prediction for '" + id + "'");
  }
  std::vector<int> out;
  out.reserve(example_ids.size());
  for (const auto& id : example_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("no prediction for example '" + id + "'");
    out.push_back(it->second);
  }
  if (by_id.size() != example_ids.size())
    throw std::invalid_argument("prediction file has " + std::to_string(by_id.size() - example_ids.size()) +
                                " ids not in the dataset");
  return out;
}

// ---------------------------------------------------------------------------

std::string emit_plot_data(const VariantResults& results) {
  std::vector<std::string> grid;
  bool first = true;
  for (const auto& [model, rows] : results) {
    std::vector<std::string> labels;
    for (const auto& [variant, _] : rows) labels.push_back(variant);
    if (first) {
      grid = labels;
      first = false;
    } else if (labels != grid) {
      throw std::invalid_argument("model '" + model + "' has a different variant grid");
    }
  }
  std::set<std::string> distinct(grid.begin(), grid.end());
  if (distinct.size() != grid.size()) throw std::invalid_argument("variant grid repeats a value");

  std::string out = csv::format_row({"variant", "model", "mean", "half_width", "folds"});
  for (std::size_t v = 0; v < grid.size(); ++v) {
    for (const auto& [model, rows] : results) {
      const auto& report = rows[v].second;
      std::string folds;
      for (std::size_t i = 0; i < report.scores.size(); ++i) {
        if (i) folds += ';';
        folds += format_double(report.scores[i]);
      }
      out += csv::format_row({grid[v], model, format_double(report.mean), format_double(report.half_width), folds});
    }
  }
  return out;
}

VariantResults parse_plot_data(std::string_view text) {
  auto table = csv::read_table(text);
  auto variant_col = table.column("variant");
  auto model_col = table.column("model");
  auto mean_col = table.column("mean");
  auto hw_col = table.column("half_width");
  auto folds_col = table.column("folds");
  VariantResults out;
  for (const auto& row : table.rows) {
    MetricReport r;
    r.mean = parse_double(row[mean_col]);
    r.half_width = parse_double(row[hw_col]);
    if (!row[folds_col].empty())
      for (auto s : split(row[folds_col], ';')) r.scores.push_back(parse_double(s));
    out[row[model_col]].emplace_back(row[variant_col], std::move(r));
  }
  return out;
}

}  // namespace casehold

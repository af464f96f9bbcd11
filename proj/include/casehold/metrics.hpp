#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace casehold {

/// F1 of the positive class (label 1); 0 when precision + recall is 0.
/// Throws std::invalid_argument on length mismatch or labels outside {0, 1}.
double binary_f1(std::span<const int> predictions, std::span<const int> labels);

/// Unweighted mean of per-class F1 over classes 0..n_classes-1. A class with
/// no true, predicted or gold instances contributes 0.
double macro_f1(std::span<const int> predictions, std::span<const int> labels, int n_classes = 5);

/// macro_f1 with per-example weights on the TP/FP/FN tallies.
double weighted_macro_f1(std::span<const int> predictions, std::span<const int> labels,
                         std::span<const double> weights, int n_classes = 5);

struct MetricReport {
  std::vector<double> scores;
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * sample sd / sqrt(n)

  /// "0.695 ± 0.003"
  std::string format(int digits = 3) const;
  bool operator==(const MetricReport&) const = default;
};

/// Throws std::invalid_argument for fewer than 2 scores.
MetricReport aggregate_folds(std::span<const double> scores);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
/// Two-sided p-value of a t statistic with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  double t = 0.0;
  std::size_t df = 0;
  double p = 1.0;
  /// Zero variance of the differences with a nonzero mean: t is infinite, p is 0.
  bool degenerate = false;

  bool significant(double alpha = 0.05) const { return p < alpha; }
};

/// Paired t-test on d = a - b. Throws std::invalid_argument on length
/// mismatch or fewer than 2 pairs.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Domain specificity

struct DsRecord {
  std::string example_id;
  double loss_general = 0.0;
  double loss_domain = 0.0;
  double ds = 0.0;  // loss_general - loss_domain; positive favours the domain model
};

struct DsResult {
  std::vector<DsRecord> records;  // sorted by example_id
  double mean = 0.0;
};

using LossTable = std::vector<std::pair<std::string, double>>;

/// Reads a delimited loss file with columns example_id and loss.
LossTable parse_losses(std::string_view text);

/// Throws std::invalid_argument listing the symmetric difference of ids when
/// the two tables do not cover the same examples, or on negative/non-finite
/// losses or duplicate ids.
DsResult ds_scores(const LossTable& general, const LossTable& domain);

std::string format_ds(const DsResult& result);

/// Rank weights: examples sorted by ascending ds (ties by example_id) get
/// weights 1..N. Returned in the order of `example_ids`. Throws
/// std::invalid_argument if any id has no ds.
std::vector<double> rank_weights(std::span<const std::string> example_ids,
                                 const std::unordered_map<std::string, double>& ds);

double rank_weighted_f1(std::span<const std::string> example_ids, std::span<const int> predictions,
                        std::span<const int> labels,
                        const std::unordered_map<std::string, double>& ds, int n_classes = 5);

struct DomainMatchRow {
  std::string name;                      // "Unweighted" / "Weighted"
  std::vector<double> per_model;         // mean macro F1 per model
};

/// Rows "Unweighted" and "Weighted", one column per model, and a gain column
/// (last model minus first).
std::string format_domain_match_table(std::span<const std::string> models,
                                      std::span<const DomainMatchRow> rows, int digits = 3);

// ---------------------------------------------------------------------------

struct ErrorBreakdown {
  double both_correct = 0.0;  // percentages
  double only_a = 0.0;
  double only_b = 0.0;
  double neither = 0.0;
  std::size_t n = 0;

  /// Quadrant labels in reporting order.
  static std::vector<std::string> labels(std::string_view model_a, std::string_view model_b);
  std::string format(std::string_view model_a, std::string_view model_b) const;
};

ErrorBreakdown error_breakdown(std::span<const int> predictions_a, std::span<const int> predictions_b,
                               std::span<const int> labels);

// ---------------------------------------------------------------------------
// Prediction files

/// (example_id, label) rows from a delimited file with columns example_id and
/// label (or prediction).
std::vector<std::pair<std::string, int>> parse_predictions(std::string_view text);

/// Reorders predictions to follow `example_ids`. Throws std::invalid_argument
/// on duplicate, missing or extra ids, or labels outside [0, n_classes).
std::vector<int> align_predictions(std::span<const std::string> example_ids,
                                   const std::vector<std::pair<std::string, int>>& predictions,
                                   int n_classes);

// ---------------------------------------------------------------------------
// Plot data

/// model -> ordered (variant label, report) list.
using VariantResults = std::map<std::string, std::vector<std::pair<std::string, MetricReport>>>;

/// Columns: variant, model, mean, half_width, folds (semicolon-separated fold
/// scores). Rows follow the variant order, then model name. Throws
/// std::invalid_argument when models do not share the same variant grid.
std::string emit_plot_data(const VariantResults& results);
VariantResults parse_plot_data(std::string_view text);

}  // namespace casehold

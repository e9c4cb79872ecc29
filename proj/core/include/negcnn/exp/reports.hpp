#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "negcnn/exp/metrics.hpp"
#include "negcnn/train/checkpoint.hpp"

namespace negcnn::exp {

struct AccuracyReport {
  std::string classifier;
  std::string dataset;
  bool augmented = false;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  // Best-regular-validation checkpoint.
  std::uint32_t best_epoch = 0;
  double accuracy_regular = 0.0;
  double accuracy_negative = 0.0;
  // Last epoch.
  std::uint32_t final_epoch = 0;
  double final_accuracy_regular = 0.0;
  double final_accuracy_negative = 0.0;

  double gap() const { return accuracy_regular - accuracy_negative; }
};

// Per-epoch accuracies on one shared epoch axis.
struct CurveSeries {
  std::string label;
  std::vector<std::uint32_t> epochs;
  std::vector<double> validation_regular;
  std::vector<double> test_regular;
  std::vector<double> test_negative;

  static CurveSeries from_history(std::string label, const train::History& history);

  double max_test_validation_gap() const;
  // Final regular-test minus negative-test.
  double final_gap() const;
  // Negative below regular at every epoch after the first.
  bool negative_below_regular() const;
};

struct NamedConfusion {
  std::string label;
  ConfusionMatrix matrix;
};

// One cell of the fine-tune / scratch sweep.
struct NegativeTrainingPoint {
  std::string arm;  // "finetune" or "scratch"
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double accuracy_regular = 0.0;
  double accuracy_negative = 0.0;
};

// Seed average of NegativeTrainingPoints sharing (arm, n).
struct NegativeTrainingSummary {
  std::string arm;
  std::size_t n = 0;
  std::size_t seeds = 0;
  double mean_regular = 0.0;
  double mean_negative = 0.0;
};

std::vector<NegativeTrainingSummary> summarize(const std::vector<NegativeTrainingPoint>& points);

// Accuracy rows measured on people rather than models; carried in reports
// as labeled constants and never recomputed.
struct ReferenceRow {
  std::string classifier;
  std::string dataset;
  double accuracy_regular;
  double accuracy_negative;
};
const std::vector<ReferenceRow>& human_reference_rows();

struct ExperimentReport {
  std::string kind;
  std::vector<AccuracyReport> accuracies;
  std::vector<CurveSeries> curves;
  std::vector<NamedConfusion> confusions;
  std::vector<NegativeTrainingPoint> negative_training;
  std::optional<RandomBaseline> baseline;
  std::vector<std::string> notes;
};

std::string to_json(const ExperimentReport& report);
// One row per AccuracyReport.
std::string accuracies_csv(const std::vector<AccuracyReport>& reports);
// One row per (curve, epoch).
std::string curves_csv(const std::vector<CurveSeries>& curves);
// One row per sweep point.
std::string negative_training_csv(const std::vector<NegativeTrainingPoint>& points);

}  // namespace negcnn::exp

#include "negcnn/exp/reports.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"

namespace negcnn::exp {

namespace {

using nlohmann::ordered_json;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

ordered_json metric(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json to_json(const AccuracyReport& r) {
  return {{"classifier", r.classifier},
          {"dataset", r.dataset},
          {"augmented", r.augmented},
          {"seed", r.seed},
          {"config_fingerprint", r.config_fingerprint},
          {"best_epoch", r.best_epoch},
          {"accuracy_regular", metric(r.accuracy_regular)},
          {"accuracy_negative", metric(r.accuracy_negative)},
          {"final_epoch", r.final_epoch},
          {"final_accuracy_regular", metric(r.final_accuracy_regular)},
          {"final_accuracy_negative", metric(r.final_accuracy_negative)}};
}

ordered_json to_json(const CurveSeries& c) {
  auto series = [](const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(metric(x));
    return a;
  };
  return {{"label", c.label},
          {"epochs", c.epochs},
          {"validation_regular", series(c.validation_regular)},
          {"test_regular", series(c.test_regular)},
          {"test_negative", series(c.test_negative)}};
}

ordered_json to_json(const NamedConfusion& nc) {
  const auto& m = nc.matrix;
  ordered_json rows = ordered_json::array();
  ordered_json support = ordered_json::array();
  for (std::size_t i = 0; i < m.num_classes(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < m.num_classes(); ++j) row.push_back(m.at(i, j));
    rows.push_back(std::move(row));
    support.push_back(m.support(i));
  }
  return {{"label", nc.label},
          {"accuracy", m.accuracy()},
          {"macro_recall", m.macro_recall()},
          {"top_predicted", m.top_predicted(3)},
          {"support", std::move(support)},
          {"matrix", std::move(rows)}};
}

}  // namespace

CurveSeries CurveSeries::from_history(std::string label, const train::History& history) {
  CurveSeries c;
  c.label = std::move(label);
  for (const auto& r : history.records()) {
    c.epochs.push_back(r.epoch);
    c.validation_regular.push_back(r.validation_accuracy);
    c.test_regular.push_back(r.test_accuracy);
    c.test_negative.push_back(r.negative_test_accuracy);
  }
  return c;
}

double CurveSeries::max_test_validation_gap() const {
  double gap = 0.0;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    gap = std::max(gap, std::abs(test_regular[i] - validation_regular[i]));
  }
  return gap;
}

double CurveSeries::final_gap() const {
  if (epochs.empty()) return 0.0;
  return test_regular.back() - test_negative.back();
}

bool CurveSeries::negative_below_regular() const {
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (!(test_negative[i] < test_regular[i])) return false;
  }
  return true;
}

std::vector<NegativeTrainingSummary> summarize(const std::vector<NegativeTrainingPoint>& points) {
  std::map<std::pair<std::string, std::size_t>, NegativeTrainingSummary> cells;
  for (const auto& p : points) {
    auto& s = cells[{p.arm, p.n}];
    s.arm = p.arm;
    s.n = p.n;
    ++s.seeds;
    s.mean_regular += p.accuracy_regular;
    s.mean_negative += p.accuracy_negative;
  }
  std::vector<NegativeTrainingSummary> out;
  for (auto& [key, s] : cells) {
    s.mean_regular /= static_cast<double>(s.seeds);
    s.mean_negative /= static_cast<double>(s.seeds);
    out.push_back(s);
  }
  return out;
}

const std::vector<ReferenceRow>& human_reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"Human", "GTSRB-color", 0.9848, 0.9731},
      {"Human", "GTSRB-gray", 0.9800, 0.9641},
  };
  return rows;
}

std::string to_json(const ExperimentReport& report) {
  ordered_json j;
  j["kind"] = report.kind;
  j["accuracies"] = ordered_json::array();
  for (const auto& r : report.accuracies) j["accuracies"].push_back(to_json(r));
  if (!report.curves.empty()) {
    j["curves"] = ordered_json::array();
    for (const auto& c : report.curves) j["curves"].push_back(to_json(c));
  }
  if (!report.confusions.empty()) {
    j["confusions"] = ordered_json::array();
    for (const auto& c : report.confusions) j["confusions"].push_back(to_json(c));
  }
  if (!report.negative_training.empty()) {
    auto& pts = j["negative_training"]["points"] = ordered_json::array();
    for (const auto& p : report.negative_training) {
      pts.push_back({{"arm", p.arm},
                     {"n", p.n},
                     {"seed", p.seed},
                     {"accuracy_regular", p.accuracy_regular},
                     {"accuracy_negative", p.accuracy_negative}});
    }
    auto& sum = j["negative_training"]["summary"] = ordered_json::array();
    for (const auto& s : summarize(report.negative_training)) {
      sum.push_back({{"arm", s.arm},
                     {"n", s.n},
                     {"seeds", s.seeds},
                     {"mean_regular", s.mean_regular},
                     {"mean_negative", s.mean_negative}});
    }
  }
  if (report.baseline) {
    const auto& b = *report.baseline;
    j["random_baseline"] = {{"closed_form", b.closed_form},
                            {"test_frequency", b.test_frequency},
                            {"uniform", b.uniform},
                            {"monte_carlo", b.monte_carlo},
                            {"standard_error", b.standard_error},
                            {"trials", b.trials}};
  }
  if (report.kind == "table2") {
    auto& ref = j["reference_not_reproduced"] = ordered_json::array();
    for (const auto& r : human_reference_rows()) {
      ref.push_back({{"classifier", r.classifier},
                     {"dataset", r.dataset},
                     {"accuracy_regular", r.accuracy_regular},
                     {"accuracy_negative", r.accuracy_negative}});
    }
  }
  if (!report.notes.empty()) j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

std::string accuracies_csv(const std::vector<AccuracyReport>& reports) {
  std::ostringstream os;
  os << "classifier,dataset,augmented,seed,config_fingerprint,best_epoch,accuracy_regular,"
        "accuracy_negative,final_epoch,final_accuracy_regular,final_accuracy_negative\n";
  for (const auto& r : reports) {
    os << r.classifier << ',' << r.dataset << ',' << (r.augmented ? 1 : 0) << ',' << r.seed << ','
       << r.config_fingerprint << ',' << r.best_epoch << ',' << num(r.accuracy_regular) << ','
       << num(r.accuracy_negative) << ',' << r.final_epoch << ',' << num(r.final_accuracy_regular)
       << ',' << num(r.final_accuracy_negative) << '\n';
  }
  return os.str();
}

std::string curves_csv(const std::vector<CurveSeries>& curves) {
  std::ostringstream os;
  os << "label,epoch,validation_regular,test_regular,test_negative\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.epochs.size(); ++i) {
      os << c.label << ',' << c.epochs[i] << ',' << num(c.validation_regular[i]) << ','
         << num(c.test_regular[i]) << ',' << num(c.test_negative[i]) << '\n';
    }
  }
  return os.str();
}

std::string negative_training_csv(const std::vector<NegativeTrainingPoint>& points) {
  std::ostringstream os;
  os << "arm,n,seed,accuracy_regular,accuracy_negative\n";
  for (const auto& p : points) {
    os << p.arm << ',' << p.n << ',' << p.seed << ',' << num(p.accuracy_regular) << ','
       << num(p.accuracy_negative) << '\n';
  }
  return os.str();
}

}  // namespace negcnn::exp

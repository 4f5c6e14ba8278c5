#include "eyedrive/gaze/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "eyedrive/errors.hpp"
#include "eyedrive/gaze/model.hpp"
#include "json.hpp"

namespace eyedrive::gaze {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EvalReport report_from_confusion(const ConfusionMatrix& confusion) {
  EvalReport r;
  r.confusion = confusion;
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      row += confusion[k][j];
      col += confusion[j][k];
    }
    const std::uint64_t tp = confusion[k][k];
    r.support[k] = row;
    r.precision[k] = ratio(tp, col);
    r.recall[k] = ratio(tp, row);
    const double pr = r.precision[k] + r.recall[k];
    r.f1[k] = pr == 0.0 ? 0.0 : 2.0 * r.precision[k] * r.recall[k] / pr;
    trace += tp;
    r.total += row;
  }
  r.accuracy = ratio(trace, r.total);
  return r;
}

EvalReport evaluate(nn::Network& net, const LabeledSet& set) {
  if (set.empty()) throw InputError("evaluation set is empty");
  set.validate();
  ConfusionMatrix confusion{};
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Prediction p = predict(net, set.frames[i]);
    ++confusion[index_of(set.labels[i])][index_of(p.label)];
  }
  return report_from_confusion(confusion);
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge keeps decimal ties such as 0.125 from rounding down on binary representation.
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_up(value, 2));
  return buf;
}

std::string render_text(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];
  out << "Confusion matrix (rows actual, columns predicted)\n";
  std::snprintf(buf, sizeof buf, "%-10s", "");
  out << buf;
  for (const GazeClass c : kAllClasses) {
    std::snprintf(buf, sizeof buf, "%10s", std::string(name_of(c)).c_str());
    out << buf;
  }
  out << '\n';
  for (const GazeClass a : kAllClasses) {
    std::snprintf(buf, sizeof buf, "%-10s", std::string(name_of(a)).c_str());
    out << buf;
    for (const GazeClass p : kAllClasses) {
      std::snprintf(buf, sizeof buf, "%10llu",
                    static_cast<unsigned long long>(r.confusion[index_of(a)][index_of(p)]));
      out << buf;
    }
    out << '\n';
  }
  out << "\nClassification report\n";
  std::snprintf(buf, sizeof buf, "%-10s%11s%11s%11s%11s\n", "Class", "Precision", "Recall",
                "F1 Score", "Support");
  out << buf;
  for (const GazeClass c : kAllClasses) {
    const std::size_t k = index_of(c);
    std::snprintf(buf, sizeof buf, "%-10s%11s%11s%11s%11llu\n", std::string(name_of(c)).c_str(),
                  format_metric(r.precision[k]).c_str(), format_metric(r.recall[k]).c_str(),
                  format_metric(r.f1[k]).c_str(), static_cast<unsigned long long>(r.support[k]));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s%33s%11llu\n", "Accuracy", format_metric(r.accuracy).c_str(),
                static_cast<unsigned long long>(r.total));
  out << buf;
  return out.str();
}

std::string render_json(const EvalReport& r) {
  using nlohmann::json;
  json j;
  j["classes"] = json::array();
  for (const GazeClass c : kAllClasses) j["classes"].push_back(std::string(name_of(c)));
  j["confusion"] = r.confusion;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["support"] = r.support;
  j["accuracy"] = r.accuracy;
  j["total"] = r.total;
  return j.dump(2);
}

}  // namespace eyedrive::gaze

#include "e2emd/training/metrics.hpp"

#include "e2emd/common/error.hpp"

namespace e2emd::training {

Confusion confusion_of(const std::vector<int>& labels, const std::vector<int>& predictions) {
  if (labels.size() != predictions.size()) {
    throw DimensionError(std::to_string(labels.size()) + " labels vs " + std::to_string(predictions.size()) + " predictions");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == 0, predicted = predictions[i] == 0;
    if (actual && predicted) {
      ++c.tp;
    } else if (!actual && predicted) {
      ++c.fp;
    } else if (actual) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

Metrics metrics_from(const Confusion& c) {
  auto ratio = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  Metrics m;
  m.confusion = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}, {"tn", m.confusion.tn}}}};
}

}  // namespace e2emd::training

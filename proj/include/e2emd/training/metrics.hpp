#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

namespace e2emd::training {

// Class 0 (parasitized) is the positive class.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  Confusion confusion;
};

// Labels and predictions must have equal length; any non-zero class counts
// as negative.
Confusion confusion_of(const std::vector<int>& labels, const std::vector<int>& predictions);

// Zero denominators give 0 for precision/recall, and f1 = 0 when P + R = 0.
Metrics metrics_from(const Confusion& c);

// {"accuracy", "confusion": {"fn","fp","tn","tp"}, "f1", "precision", "recall"}
nlohmann::json to_json(const Metrics& m);

}  // namespace e2emd::training

#include "e2emd/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "e2emd/common/error.hpp"
#include "e2emd/common/rng.hpp"
#include "e2emd/data/image.hpp"
#include "e2emd/model/weight_io.hpp"
#include "e2emd/nn/pass.hpp"

namespace e2emd::data {

namespace fs = std::filesystem;
using namespace e2emd::nn;

std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, std::size_t n, std::uint64_t seed) {
  if (n > labels.size()) {
    throw ConfigError("subset of " + std::to_string(n) + " requested from " + std::to_string(labels.size()) + " samples");
  }
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw IndexError("negative label " + std::to_string(l));
    classes = std::max(classes, l + 1);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::vector<std::size_t> take(members.size());
  std::size_t given = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    take[c] = n * members[c].size() / labels.size();
    given += take[c];
  }
  for (std::size_t c = 0; given < n; c = (c + 1) % members.size()) {
    if (take[c] < members[c].size()) {
      ++take[c];
      ++given;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < members.size(); ++c) {
    Rng rng(derive_seed(seed, c, 0x5b5e));
    rng.shuffle(std::span(members[c]));
    out.insert(out.end(), members[c].begin(), members[c].begin() + take[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dataset load_dataset(const fs::path& root, const Shape& input, std::size_t limit, std::uint64_t seed) {
  std::vector<std::pair<fs::path, int>> files;
  for (std::size_t label = 0; label < kClassDirs.size(); ++label) {
    const fs::path dir = root / kClassDirs[label];
    if (!fs::is_directory(dir)) throw LayoutError("missing class directory " + dir.string());
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) found.push_back(entry.path());
    }
    if (found.empty()) throw LayoutError("class directory " + dir.string() + " is empty");
    std::sort(found.begin(), found.end());
    for (auto& p : found) files.emplace_back(std::move(p), static_cast<int>(label));
  }

  if (limit > 0 && limit < files.size()) {
    std::vector<int> labels;
    for (const auto& f : files) labels.push_back(f.second);
    std::vector<std::pair<fs::path, int>> chosen;
    for (std::size_t i : stratified_subset(labels, limit, seed)) chosen.push_back(std::move(files[i]));
    files = std::move(chosen);
  }

  std::vector<LabeledImage> decoded(files.size());
  std::vector<std::string> failures(files.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      decoded[i] = {preprocess_png(model::read_file(files[i].first), input), files[i].second, files[i].first.string()};
    } catch (const Error& e) {
      failures[i] = files[i].first.string() + ": " + e.what();
    }
  }

  Dataset out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (failures[i].empty()) {
      out.samples.push_back(std::move(decoded[i]));
    } else {
      out.report.warnings.push_back(std::move(failures[i]));
    }
  }
  out.report.loaded = out.samples.size();
  out.report.skipped = out.report.warnings.size();
  return out;
}

DatasetSplit split(const std::vector<int>& labels, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw IndexError("negative label " + std::to_string(l));
    classes = std::max(classes, l + 1);
  }
  classes = std::max(classes, 2);
  DatasetSplit out;
  out.seed = seed;
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (members.empty()) throw DataError("class " + std::to_string(c) + " has no samples");
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), 0x5917));
    rng.shuffle(std::span(members));
    // The epsilon keeps e.g. 0.1 * 30 = 3 from flooring to 2.
    const auto n = static_cast<double>(members.size());
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * n + 1e-9));
    const auto n_test = std::min(static_cast<std::size_t>(std::floor(ratios.test * n + 1e-9)), members.size() - n_val);
    out.val.insert(out.val.end(), members.begin(), members.begin() + n_val);
    out.test.insert(out.test.end(), members.begin() + n_val, members.begin() + n_val + n_test);
    out.train.insert(out.train.end(), members.begin() + n_val + n_test, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<int> labels_of(const std::vector<LabeledImage>& samples) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  return labels;
}

Tensor stack(const std::vector<LabeledImage>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("cannot stack an empty index list");
  const Shape& sample_shape = samples.at(indices[0]).pixels.shape();
  Tensor out(batched(indices.size(), sample_shape));
  const std::size_t per = element_count(sample_shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& p = samples.at(indices[i]).pixels;
    if (p.shape() != sample_shape) throw DimensionError("samples have different shapes");
    std::memcpy(out.ptr() + i * per, p.ptr(), per * sizeof(float));
  }
  return out;
}

}  // namespace e2emd::data

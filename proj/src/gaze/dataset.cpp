#include "eyedrive/gaze/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "eyedrive/errors.hpp"
#include "eyedrive/gaze/png_io.hpp"
#include "eyedrive/gaze/preprocess.hpp"
#include "eyedrive/rng.hpp"
#include "json.hpp"

namespace eyedrive::gaze {

using nlohmann::json;

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kAll: return "all";
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
  }
  return "?";
}

ClassCounts LabeledSet::class_counts() const {
  ClassCounts counts{};
  for (const GazeClass c : labels) ++counts[index_of(c)];
  return counts;
}

void LabeledSet::validate() const {
  if (frames.size() != labels.size() || frames.size() != source_index.size()) {
    throw InputError("labeled set has " + std::to_string(frames.size()) + " frames, " +
                     std::to_string(labels.size()) + " labels and " +
                     std::to_string(source_index.size()) + " indices");
  }
  for (const Frame& f : frames) {
    if (f.extent() != frames.front().extent()) {
      throw InputError("labeled set mixes frame extents");
    }
  }
}

void LabeledSet::push_back(Frame frame, GazeClass label) {
  source_index.push_back(frames.size());
  frames.push_back(std::move(frame));
  labels.push_back(label);
}

ClassCounts scaled_counts(std::size_t total) {
  const std::size_t reference_total =
      std::accumulate(kReferenceClassCounts.begin(), kReferenceClassCounts.end(), std::size_t{0});
  ClassCounts counts{};
  std::array<std::size_t, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    counts[k] = kReferenceClassCounts[k] * total / reference_total;
    remainder[k] = kReferenceClassCounts[k] * total % reference_total;
    assigned += counts[k];
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % kNumClasses, ++assigned) {
    ++counts[order[r]];
  }
  return counts;
}

LabeledSet generate_corpus(const ClassCounts& counts, std::uint64_t seed,
                           const SynthStyle& style, std::size_t extent) {
  LabeledSet set;
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  set.frames.reserve(total);
  set.labels.reserve(total);
  set.source_index.reserve(total);
  for (const GazeClass c : kAllClasses) {
    for (std::size_t i = 0; i < counts[index_of(c)]; ++i) {
      auto [img, label] = synth_eye(c, sample_seed(seed, c, i), style);
      set.push_back(preprocess(img, CropRect::full(img), extent), label);
    }
  }
  return set;
}

std::size_t DatasetManifest::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

namespace {

json style_to_json(const SynthStyle& s) {
  return {{"min_width", s.min_width},
          {"max_width", s.max_width},
          {"min_aspect", s.min_aspect},
          {"max_aspect", s.max_aspect},
          {"min_displacement", s.min_displacement},
          {"max_displacement", s.max_displacement},
          {"lateral_jitter", s.lateral_jitter},
          {"offset_jitter", s.offset_jitter},
          {"brightness_jitter", s.brightness_jitter},
          {"noise_sigma", s.noise_sigma}};
}

SynthStyle style_from_json(const json& j) {
  SynthStyle s;
  s.min_width = j.at("min_width").get<std::size_t>();
  s.max_width = j.at("max_width").get<std::size_t>();
  s.min_aspect = j.at("min_aspect").get<double>();
  s.max_aspect = j.at("max_aspect").get<double>();
  s.min_displacement = j.at("min_displacement").get<double>();
  s.max_displacement = j.at("max_displacement").get<double>();
  s.lateral_jitter = j.at("lateral_jitter").get<double>();
  s.offset_jitter = j.at("offset_jitter").get<double>();
  s.brightness_jitter = j.at("brightness_jitter").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  return s;
}

std::filesystem::path image_path(const std::filesystem::path& dir, GazeClass c, std::size_t i) {
  return dir / std::string(name_of(c)) / (std::to_string(i) + ".png");
}

}  // namespace

DatasetManifest write_dataset(const std::filesystem::path& dir, const ClassCounts& counts,
                              std::uint64_t seed, const SynthStyle& style,
                              const std::function<void(std::size_t)>& progress) {
  std::error_code ec;
  for (const GazeClass c : kAllClasses) {
    std::filesystem::create_directories(dir / std::string(name_of(c)), ec);
    if (ec) throw IoError("cannot create " + (dir / std::string(name_of(c))).string() + ": " +
                          ec.message());
  }
  std::size_t written = 0;
  for (const GazeClass c : kAllClasses) {
    for (std::size_t i = 0; i < counts[index_of(c)]; ++i) {
      write_png(synth_eye(c, sample_seed(seed, c, i), style).first, image_path(dir, c, i));
      ++written;
      if (progress) progress(written);
    }
  }

  DatasetManifest manifest{counts, seed, style};
  json counts_json = json::object();
  for (const GazeClass c : kAllClasses) counts_json[std::string(name_of(c))] = counts[index_of(c)];
  const json j = {{"format", "eyedrive-dataset"},
                  {"version", 1},
                  {"seed", seed},
                  {"counts", counts_json},
                  {"total", manifest.total()},
                  {"layout", "<ClassName>/<index>.png"},
                  {"style", style_to_json(style)}};
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("missing dataset manifest " + path.string());
  try {
    const json j = json::parse(in);
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const GazeClass c : kAllClasses) {
      m.counts[index_of(c)] = j.at("counts").at(std::string(name_of(c))).get<std::size_t>();
    }
    m.style = style_from_json(j.at("style"));
    return m;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
}

LabeledSet load_dataset(const std::filesystem::path& dir, std::size_t extent) {
  const DatasetManifest m = read_manifest(dir);
  LabeledSet set;
  for (const GazeClass c : kAllClasses) {
    for (std::size_t i = 0; i < m.counts[index_of(c)]; ++i) {
      const RawImage img = read_png(image_path(dir, c, i));
      set.push_back(preprocess(img, CropRect::full(img), extent), c);
    }
  }
  return set;
}

std::pair<LabeledSet, LabeledSet> split(const LabeledSet& set, double val_fraction,
                                        std::uint64_t seed) {
  if (set.empty()) throw InputError("cannot split an empty set");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  set.validate();

  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < set.size(); ++i) members[index_of(set.labels[i])].push_back(i);

  const auto n = static_cast<double>(set.size());
  const auto val_total = static_cast<std::size_t>(std::floor(n * val_fraction));

  // Largest-remainder apportionment of val_total across classes.
  ClassCounts quota{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double exact = static_cast<double>(members[k].size()) * val_fraction;
    quota[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - std::floor(exact);
    assigned += quota[k];
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < val_total && r < kNumClasses; ++r) {
    const std::size_t k = order[r];
    if (quota[k] < members[k].size()) {
      ++quota[k];
      ++assigned;
    }
  }

  // Where the total allows it, keep each class with two or more samples on both sides.
  auto donor = [&](auto&& can_give) {
    std::size_t best = kNumClasses;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (can_give(k) && (best == kNumClasses || quota[k] > quota[best])) best = k;
    }
    return best;
  };
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const std::size_t size = members[k].size();
    if (size < 2) continue;
    if (quota[k] == 0) {
      const std::size_t d = donor([&](std::size_t j) { return j != k && quota[j] > 1; });
      if (d != kNumClasses) {
        --quota[d];
        quota[k] = 1;
      }
    } else if (quota[k] == size) {
      const std::size_t d = donor([&](std::size_t j) {
        return j != k && quota[j] + 1 < members[j].size();
      });
      if (d != kNumClasses) {
        ++quota[d];
        quota[k] = size - 1;
      }
    }
  }

  std::vector<std::uint8_t> in_val(set.size(), 0);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    Rng rng(derive_seed(seed, k));
    auto idx = members[k];
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t j = 0; j < quota[k]; ++j) in_val[idx[j]] = 1;
  }

  LabeledSet train;
  LabeledSet val;
  train.tag = SplitTag::kTrain;
  val.tag = SplitTag::kVal;
  for (std::size_t i = 0; i < set.size(); ++i) {
    LabeledSet& dst = in_val[i] ? val : train;
    dst.frames.push_back(set.frames[i]);
    dst.labels.push_back(set.labels[i]);
    dst.source_index.push_back(set.source_index[i]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace eyedrive::gaze

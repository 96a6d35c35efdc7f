#include "nph/tissue.hpp"

#include "nph/errors.hpp"
#include "nph/filters.hpp"
#include "nph/parallel.hpp"

#include <fstream>
#include <sstream>

namespace nph {

FeatureVolume extract_features(const ScalarVolume& volume, const FeatureOptions& options) {
  FeatureVolume f;
  f.channels.push_back(volume);
  if (!options.intensity_only) {
    f.channels.push_back(gaussian_smooth(volume, 1.0));
    f.channels.push_back(gaussian_smooth(volume, 2.0));
    f.channels.push_back(gradient_magnitude(volume));
  }
  return f;
}

std::vector<VoxelAnnotation> load_annotations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations CSV: " + path.string());
  std::vector<VoxelAnnotation> out;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row == 1 && line.rfind("x,", 0) == 0) continue;  // header
    std::stringstream ss(line);
    VoxelAnnotation a;
    int cls = -1;
    char c1, c2, c3;
    if (!(ss >> a.x >> c1 >> a.y >> c2 >> a.z >> c3 >> cls) || c1 != ',' || c2 != ',' || c3 != ',')
      throw IoError("annotations CSV row " + std::to_string(row) + ": expected x,y,z,class_id");
    if (cls < 0 || cls >= kTissueClassCount)
      throw IoError("annotations CSV row " + std::to_string(row) + ": class_id " +
                    std::to_string(cls) + " outside the tissue scheme 0-3");
    a.label = TissueClass(cls);
    out.push_back(a);
  }
  return out;
}

void save_annotations_csv(const std::vector<VoxelAnnotation>& annotations,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open annotations CSV for writing: " + path.string());
  out << "x,y,z,class_id\n";
  for (const auto& a : annotations)
    out << a.x << ',' << a.y << ',' << a.z << ',' << int(a.label) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

LabeledVoxelSet build_training_set(const FeatureVolume& features,
                                   const std::vector<VoxelAnnotation>& annotations) {
  if (annotations.empty()) throw InvalidInput("training set: no annotations");
  const ScalarVolume& ref = features.channels.front();

  LabeledVoxelSet set;
  set.features.resize(Eigen::Index(annotations.size()), features.n_features());
  set.labels.reserve(annotations.size());

  std::array<std::int64_t, kTissueClassCount> present{};
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    if (!ref.in_bounds(a.x, a.y, a.z))
      throw InvalidInput("training set: annotation " + std::to_string(i + 1) + " at (" +
                         std::to_string(a.x) + "," + std::to_string(a.y) + "," + std::to_string(a.z) +
                         ") is out of bounds");
    std::vector<double> row(std::size_t(features.n_features()));
    features.row(ref.index_of(a.x, a.y, a.z), row.data());
    for (int c = 0; c < features.n_features(); ++c) set.features(Eigen::Index(i), c) = row[std::size_t(c)];
    set.labels.push_back(int(a.label));
    ++present[std::size_t(a.label)];
  }
  for (int c = 0; c < kTissueClassCount; ++c)
    if (present[std::size_t(c)] == 0)
      throw InvalidInput("training set: tissue class " + std::to_string(c) +
                         " has no annotations (untrainable class)");
  return set;
}

RandomForest train_tissue_forest(const LabeledVoxelSet& data, const ForestParams& params,
                                 std::uint64_t seed) {
  return RandomForest::train(data.features, data.labels, kTissueClassCount, params, seed);
}

LabelVolume predict_voxelwise(const RandomForest& forest, const FeatureVolume& features) {
  if (forest.n_features() != features.n_features())
    throw InvalidInput("predict_voxelwise: feature count mismatch");
  auto out = LabelVolume::zeros(features.geometry());
  const std::int64_t n = out.size();
  parallel_chunks(0, n, [&](std::int64_t v0, std::int64_t v1) {
    std::vector<double> row(std::size_t(features.n_features()));
    for (std::int64_t v = v0; v < v1; ++v) {
      features.row(v, row.data());
      out[v] = std::uint8_t(forest.predict(row.data()));
    }
  });
  return out;
}

}  // namespace nph

#pragma once

#include "nph/random_forest.hpp"
#include "nph/records.hpp"
#include "nph/rng.hpp"
#include "nph/svm.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nph {

/// NPH iff the ratio clears the 0.3 guideline. Ratio must lie in (0,1).
Diagnosis evans_threshold(double evans_ratio);

enum class ClassifierKind { Svm, Rf, Evans };

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Svm;
  SvmParams svm{};          // C=2, gamma=0.1 per the reference setup
  ForestParams rf{};        // 200 trees, depth 4, min split 3, max features 2
  double evans_cutoff = 0.3;
};

/// Repeated stratified splits at 50/11 train/test proportions. Each repeat
/// draws its own fold from a stream derived from (rng_seed, repeat).
struct CvPlan {
  int n_repeats = 100;
  int split_train = 50;
  int split_test = 11;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct ScorePair {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct RepeatScore {
  ScorePair train;
  ScorePair test;
};

/// Sensitivity/specificity as train/test mean +- population std over repeats.
struct MetricsSummary {
  ScorePair train_mean, train_std;
  ScorePair test_mean, test_std;
  std::vector<RepeatScore> repeats;
  int redraws = 0;  // folds redrawn because a class came up empty
};

/// Confusion-matrix scores of a prediction set; NPH is the positive class.
ScorePair confusion_scores(const std::vector<Diagnosis>& predicted,
                           const std::vector<Diagnosis>& actual);

/// One stratified train/test draw at the plan's proportions (indices into
/// the record list). Exposed so the fold arithmetic is testable directly.
struct StratifiedFold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
StratifiedFold draw_stratified_fold(const std::vector<SubjectRecord>& records, const CvPlan& plan,
                                    Rng& rng);

/// Evan's-threshold scores over all records at once (the baseline protocol
/// reported alongside the cross-validated ones).
ScorePair evans_all_data(const std::vector<SubjectRecord>& records, double cutoff = 0.3);

MetricsSummary run_cv(const std::vector<SubjectRecord>& records, const ClassifierSpec& spec,
                      const CvPlan& plan);

/// Permutation importance for the RBF SVM: per repeat, the drop in test
/// balanced accuracy when one feature column is shuffled.
struct ImportanceResult {
  std::array<std::string, 4> feature_names;
  Eigen::MatrixXd drops;  // n_repeats x 4
};
ImportanceResult feature_importance(const std::vector<SubjectRecord>& records, const SvmParams& svm,
                                    const CvPlan& plan);

void save_metrics_json(const MetricsSummary& metrics, const std::string& classifier_name,
                       const std::filesystem::path& path);
void save_repeat_scores_csv(const MetricsSummary& metrics, const std::filesystem::path& path);

}  // namespace nph

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nph {

enum class Diagnosis { NonNph = 0, Nph = 1 };

inline const char* to_string(Diagnosis d) { return d == Diagnosis::Nph ? "NPH" : "non-NPH"; }

/// One subject's volumetric features and (for training data) diagnosis.
struct SubjectRecord {
  std::string subject_id;
  double ventricle_ml = 0.0;
  double subarachnoid_ml = 0.0;
  double cerebral_ml = 0.0;
  double total_ml = 0.0;
  std::optional<Diagnosis> label;
  std::optional<double> evans_ratio;

  Eigen::Vector4d features() const {
    return {ventricle_ml, subarachnoid_ml, cerebral_ml, total_ml};
  }

  /// total must equal the compartment sum within 1e-6 mL.
  void validate() const;
};

/// Cohort CSV: subject_id,ventricle_ml,subarachnoid_ml,cerebral_ml,total_ml,label,evans_ratio
/// Label is NPH / non-NPH or empty; evans_ratio may be empty. Schema
/// violations are reported with their row number.
std::vector<SubjectRecord> load_cohort_csv(const std::filesystem::path& path);
void save_cohort_csv(const std::vector<SubjectRecord>& records, const std::filesystem::path& path);

}  // namespace nph

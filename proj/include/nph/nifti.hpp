#pragma once

#include "nph/volume.hpp"

#include <filesystem>

namespace nph {

/// Reads a 3-D NIfTI-1 file (.nii or .nii.gz). Spacing comes from pixdim,
/// pose from the sform (fallback qform, fallback diag(spacing)), and
/// intensities are scaled by scl_slope/scl_inter when present. Intensities
/// are held as 32-bit floats regardless of the on-disk type.
ScalarVolume load_volume(const std::filesystem::path& path);

/// Reads a label map; the on-disk datatype must be integral and fit u8.
LabelVolume load_label_volume(const std::filesystem::path& path);

/// Writes float32 voxels. Gzip-compressed when the path ends in .gz.
void save_volume(const ScalarVolume& volume, const std::filesystem::path& path);

/// Writes unsigned 8-bit voxels. Gzip-compressed when the path ends in .gz.
void save_volume(const LabelVolume& volume, const std::filesystem::path& path);

}  // namespace nph

#pragma once

#include "nph/labels.hpp"
#include "nph/volume.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nph {

/// 8-bit RGB image buffer, row-major, top row first.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 bytes per pixel

  static RgbImage filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  /// 5x7 bitmap text (lowercase letters, digits, '_', '.', '-'), scaled.
  void text(int x, int y, const std::string& s, int scale, std::uint8_t r, std::uint8_t g,
            std::uint8_t b);
};

/// Minimal PNG encoder (color type 2, no interlace) over zlib.
void write_png(const RgbImage& image, const std::filesystem::path& path);

/// Axial slice of the scan with class-colored labels blended in; slice < 0
/// selects the mid-slice. Intensity window defaults to a brain CT window.
void write_overlay_png(const ScalarVolume& scan, const LabelVolume& labels, int axial_slice,
                       const std::filesystem::path& path, double window_lo = -50.0,
                       double window_hi = 120.0);

/// Box-and-whisker chart of per-feature sample columns (rows = repeats).
void write_boxplot_png(const Eigen::MatrixXd& samples, const std::vector<std::string>& column_names,
                       const std::filesystem::path& path);

}  // namespace nph

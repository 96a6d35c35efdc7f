#include "nph/png_io.hpp"

#include "nph/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>

namespace nph {

RgbImage RgbImage::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(std::size_t(w) * h * 3);
  for (std::size_t p = 0; p < img.pixels.size(); p += 3) {
    img.pixels[p] = r;
    img.pixels[p + 1] = g;
    img.pixels[p + 2] = b;
  }
  return img;
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t p = 3 * (std::size_t(y) * width + x);
  pixels[p] = r;
  pixels[p + 1] = g;
  pixels[p + 2] = b;
}

namespace {

// 5x7 glyphs; one byte per row, low 5 bits used, MSB of the 5 on the left
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> glyphs = {
      {'a', {0x00, 0x00, 0x0e, 0x01, 0x0f, 0x11, 0x0f}},
      {'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x19, 0x16}},
      {'c', {0x00, 0x00, 0x0e, 0x10, 0x10, 0x11, 0x0e}},
      {'d', {0x01, 0x01, 0x0d, 0x13, 0x11, 0x13, 0x0d}},
      {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
      {'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'i', {0x04, 0x00, 0x0c, 0x04, 0x04, 0x04, 0x0e}},
      {'l', {0x0c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'m', {0x00, 0x00, 0x1a, 0x15, 0x15, 0x15, 0x15}},
      {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'o', {0x00, 0x00, 0x0e, 0x11, 0x11, 0x11, 0x0e}},
      {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {'s', {0x00, 0x00, 0x0f, 0x10, 0x0e, 0x01, 0x1e}},
      {'t', {0x04, 0x04, 0x1f, 0x04, 0x04, 0x04, 0x03}},
      {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0d}},
      {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0a, 0x04}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
      {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
      {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
      {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
      {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
      {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
      {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
      {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
      {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
      {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return glyphs;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

void write_chunk(std::FILE* f, const char type[4], const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> head;
  put_u32_be(head, std::uint32_t(data.size()));
  std::fwrite(head.data(), 1, head.size(), f);
  std::fwrite(type, 1, 4, f);
  if (!data.empty()) std::fwrite(data.data(), 1, data.size(), f);
  std::uint32_t crc = std::uint32_t(crc32(0, reinterpret_cast<const Bytef*>(type), 4));
  if (!data.empty()) crc = std::uint32_t(crc32(crc, data.data(), uInt(data.size())));
  std::vector<std::uint8_t> tail;
  put_u32_be(tail, crc);
  std::fwrite(tail.data(), 1, tail.size(), f);
}

}  // namespace

void RgbImage::text(int x, int y, const std::string& s, int scale, std::uint8_t r, std::uint8_t g,
                    std::uint8_t b) {
  int cx = x;
  for (char raw : s) {
    const char c = char(std::tolower(static_cast<unsigned char>(raw)));
    auto it = font().find(c);
    if (it != font().end()) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (it->second[std::size_t(row)] & (0x10 >> col))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                set(cx + col * scale + sx, y + row * scale + sy, r, g, b);
    }
    cx += 6 * scale;
  }
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != std::size_t(image.width) * image.height * 3)
    throw InvalidInput("write_png: inconsistent image buffer");

  // filter byte 0 before every scanline
  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t(image.height) * (std::size_t(image.width) * 3 + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = image.pixels.data() + std::size_t(y) * image.width * 3;
    raw.insert(raw.end(), row, row + std::size_t(image.width) * 3);
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw IoError("write_png: deflate failed for " + path.string());
  compressed.resize(bound);

  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError("cannot open PNG for writing: " + path.string());
  const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  std::fwrite(sig, 1, 8, f);

  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, std::uint32_t(image.width));
  put_u32_be(ihdr, std::uint32_t(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(f, "IHDR", ihdr);
  write_chunk(f, "IDAT", compressed);
  write_chunk(f, "IEND", {});
  if (std::fclose(f) != 0) throw IoError("write failed: " + path.string());
}

void write_overlay_png(const ScalarVolume& scan, const LabelVolume& labels, int axial_slice,
                       const std::filesystem::path& path, double window_lo, double window_hi) {
  if (!scan.geometry().same_grid(labels.geometry()))
    throw InvalidInput("write_overlay_png: scan and labels geometry mismatch");
  const auto& d = scan.dims();
  const int k = axial_slice < 0 ? d[2] / 2 : axial_slice;
  if (k < 0 || k >= d[2]) throw InvalidInput("write_overlay_png: slice out of range");

  // class colors: ventricle red, subarachnoid blue, mass green, skull yellow
  const std::uint8_t palette[kSegLabelCount][3] = {
      {0, 0, 0}, {230, 40, 40}, {60, 120, 230}, {60, 200, 90}, {230, 220, 60}};

  RgbImage img = RgbImage::filled(d[0], d[1], 0, 0, 0);
  for (int j = 0; j < d[1]; ++j) {
    for (int i = 0; i < d[0]; ++i) {
      const double t = std::clamp((scan.at(i, j, k) - window_lo) / (window_hi - window_lo), 0.0, 1.0);
      const double gray = 255.0 * t;
      const std::uint8_t lab = labels.at(i, j, k);
      double r = gray, g = gray, b = gray;
      if (lab != 0 && lab < kSegLabelCount) {
        r = 0.45 * gray + 0.55 * palette[lab][0];
        g = 0.45 * gray + 0.55 * palette[lab][1];
        b = 0.45 * gray + 0.55 * palette[lab][2];
      }
      // y axis flipped so the anterior side renders upward
      img.set(i, d[1] - 1 - j, std::uint8_t(r), std::uint8_t(g), std::uint8_t(b));
    }
  }
  write_png(img, path);
}

void write_boxplot_png(const Eigen::MatrixXd& samples, const std::vector<std::string>& column_names,
                       const std::filesystem::path& path) {
  const int n_cols = int(samples.cols());
  if (n_cols == 0 || samples.rows() < 1 || int(column_names.size()) != n_cols)
    throw InvalidInput("write_boxplot_png: inconsistent inputs");

  const int width = std::max(360, 140 * n_cols + 80), height = 420;
  const int plot_left = 60, plot_right = width - 20, plot_top = 20, plot_bottom = height - 50;
  RgbImage img = RgbImage::filled(width, height, 255, 255, 255);

  double lo = samples.minCoeff(), hi = samples.maxCoeff();
  if (hi - lo < 1e-9) {
    lo -= 0.05;
    hi += 0.05;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto ypix = [&](double v) {
    return int(plot_bottom - (v - lo) / (hi - lo) * (plot_bottom - plot_top));
  };

  // frame, zero line and scale labels
  for (int y = plot_top; y <= plot_bottom; ++y) img.set(plot_left, y, 0, 0, 0);
  for (int x = plot_left; x <= plot_right; ++x) img.set(x, plot_bottom, 0, 0, 0);
  if (lo < 0.0 && hi > 0.0)
    for (int x = plot_left; x <= plot_right; x += 3) img.set(x, ypix(0.0), 170, 170, 170);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", hi);
  img.text(4, plot_top - 3, buf, 1, 0, 0, 0);
  std::snprintf(buf, sizeof(buf), "%.2f", lo);
  img.text(4, plot_bottom - 4, buf, 1, 0, 0, 0);

  for (int c = 0; c < n_cols; ++c) {
    std::vector<double> v(std::size_t(samples.rows()));
    for (Eigen::Index r = 0; r < samples.rows(); ++r) v[std::size_t(r)] = samples(r, c);
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
      const double pos = q * double(v.size() - 1);
      const std::size_t i = std::size_t(pos);
      const double f = pos - double(i);
      return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
    };
    const double q1 = quantile(0.25), med = quantile(0.5), q3 = quantile(0.75);
    const double iqr = q3 - q1;
    double wlo = v.front(), whi = v.back();
    for (double x : v)
      if (x >= q1 - 1.5 * iqr) {
        wlo = x;
        break;
      }
    for (auto it = v.rbegin(); it != v.rend(); ++it)
      if (*it <= q3 + 1.5 * iqr) {
        whi = *it;
        break;
      }

    const int cx = plot_left + (plot_right - plot_left) * (2 * c + 1) / (2 * n_cols);
    const int half = std::min(40, (plot_right - plot_left) / (3 * n_cols));
    auto hline = [&](double val, int hw) {
      for (int x = cx - hw; x <= cx + hw; ++x) img.set(x, ypix(val), 0, 0, 0);
    };
    auto vline = [&](double from, double to, int x) {
      for (int y = std::min(ypix(from), ypix(to)); y <= std::max(ypix(from), ypix(to)); ++y)
        img.set(x, y, 0, 0, 0);
    };
    // whiskers, box, median
    vline(wlo, q1, cx);
    vline(q3, whi, cx);
    hline(wlo, half / 2);
    hline(whi, half / 2);
    hline(q1, half);
    hline(q3, half);
    vline(q1, q3, cx - half);
    vline(q1, q3, cx + half);
    for (int x = cx - half; x <= cx + half; ++x) img.set(x, ypix(med), 200, 30, 30);

    const int label_w = int(column_names[std::size_t(c)].size()) * 6;
    img.text(cx - label_w / 2, plot_bottom + 10, column_names[std::size_t(c)], 1, 0, 0, 0);
  }
  write_png(img, path);
}

}  // namespace nph

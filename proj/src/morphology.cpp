#include "nph/morphology.hpp"

#include "nph/errors.hpp"
#include "nph/parallel.hpp"

#include <vector>

namespace nph {
namespace {

template <typename Fn>
LabelVolume morph27(const LabelVolume& mask, Fn&& keep) {
  auto out = LabelVolume::zeros(mask.geometry());
  const auto& d = mask.dims();
  parallel_chunks(0, d[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < d[1]; ++j) {
        for (int i = 0; i < d[0]; ++i) {
          out.at(i, j, int(k)) = keep(mask, i, j, int(k)) ? 1 : 0;
        }
      }
    }
  });
  return out;
}

}  // namespace

LabelVolume largest_component_26(const LabelVolume& mask) {
  const auto& d = mask.dims();
  const std::int64_t n = mask.size();
  std::vector<std::int32_t> comp(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> stack;
  std::int32_t n_comp = 0;
  std::int64_t best_size = 0;
  std::int32_t best_comp = -1;

  for (std::int64_t seed = 0; seed < n; ++seed) {
    if (mask[seed] == 0 || comp[std::size_t(seed)] >= 0) continue;
    const std::int32_t id = n_comp++;
    std::int64_t size = 0;
    comp[std::size_t(seed)] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::int64_t v = stack.back();
      stack.pop_back();
      ++size;
      const int i = int(v % d[0]);
      const int j = int((v / d[0]) % d[1]);
      const int k = int(v / (std::int64_t(d[0]) * d[1]));
      for (int dk = -1; dk <= 1; ++dk) {
        for (int dj = -1; dj <= 1; ++dj) {
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0 && dk == 0) continue;
            const int ni = i + di, nj = j + dj, nk = k + dk;
            if (!mask.in_bounds(ni, nj, nk)) continue;
            const std::int64_t nv = mask.index_of(ni, nj, nk);
            if (mask[nv] != 0 && comp[std::size_t(nv)] < 0) {
              comp[std::size_t(nv)] = id;
              stack.push_back(nv);
            }
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_comp = id;
    }
  }

  auto out = LabelVolume::zeros(mask.geometry());
  if (best_comp >= 0)
    for (std::int64_t v = 0; v < n; ++v)
      if (comp[std::size_t(v)] == best_comp) out[v] = 1;
  return out;
}

LabelVolume fill_interior(const LabelVolume& mask) {
  const auto& d = mask.dims();
  const std::int64_t n = mask.size();
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> stack;

  auto push = [&](int i, int j, int k) {
    const std::int64_t v = mask.index_of(i, j, k);
    if (mask[v] == 0 && !outside[std::size_t(v)]) {
      outside[std::size_t(v)] = 1;
      stack.push_back(v);
    }
  };
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (i == 0 || j == 0 || k == 0 || i == d[0] - 1 || j == d[1] - 1 || k == d[2] - 1) push(i, j, k);

  const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (!stack.empty()) {
    const std::int64_t v = stack.back();
    stack.pop_back();
    const int i = int(v % d[0]);
    const int j = int((v / d[0]) % d[1]);
    const int k = int(v / (std::int64_t(d[0]) * d[1]));
    for (const auto& o : off) {
      const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
      if (mask.in_bounds(ni, nj, nk)) push(ni, nj, nk);
    }
  }

  auto out = LabelVolume::zeros(mask.geometry());
  for (std::int64_t v = 0; v < n; ++v) out[v] = (mask[v] == 0 && !outside[std::size_t(v)]) ? 1 : 0;
  return out;
}

LabelVolume dilate27(const LabelVolume& mask) {
  return morph27(mask, [](const LabelVolume& m, int i, int j, int k) {
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di)
          if (m.in_bounds(i + di, j + dj, k + dk) && m.at(i + di, j + dj, k + dk) != 0) return true;
    return false;
  });
}

LabelVolume erode27(const LabelVolume& mask) {
  return morph27(mask, [](const LabelVolume& m, int i, int j, int k) {
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (!m.in_bounds(i + di, j + dj, k + dk)) return false;
          if (m.at(i + di, j + dj, k + dk) == 0) return false;
        }
    return true;
  });
}

std::int64_t count_nonzero(const LabelVolume& mask) {
  std::int64_t c = 0;
  for (std::int64_t v = 0; v < mask.size(); ++v) c += mask[v] != 0;
  return c;
}

LabelVolume mask_difference(const LabelVolume& a, const LabelVolume& b) {
  if (!a.geometry().same_grid(b.geometry()))
    throw InvalidInput("mask_difference: geometry mismatch");
  auto out = LabelVolume::zeros(a.geometry());
  for (std::int64_t v = 0; v < a.size(); ++v) out[v] = (a[v] != 0 && b[v] == 0) ? 1 : 0;
  return out;
}

LabelVolume mask_of_label(const LabelVolume& labels, std::uint8_t id) {
  auto out = LabelVolume::zeros(labels.geometry());
  for (std::int64_t v = 0; v < labels.size(); ++v) out[v] = labels[v] == id ? 1 : 0;
  return out;
}

}  // namespace nph

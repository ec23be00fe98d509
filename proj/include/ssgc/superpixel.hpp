#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "ssgc/binio.hpp"
#include "ssgc/common.hpp"
#include "ssgc/hsi_io.hpp"

namespace ssgc {

// Per-pixel superpixel ids in 0..count-1, row-major.
struct Segmentation {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t count = 0;
  std::vector<std::uint32_t> assignment;

  std::size_t pixels() const { return height * width; }
  bool operator==(const Segmentation&) const = default;
};

struct SuperpixelSet {
  Segmentation seg;
  std::vector<std::vector<std::uint32_t>> members;  // pixel indices, ascending
  Matrix features;                                  // count x d, member means

  std::size_t size() const { return seg.count; }
  std::size_t size_of(std::size_t j) const { return members[j].size(); }
};

struct SlicOptions {
  // Weight of spatial proximity against gray-value difference; in gray units
  // per grid interval.
  double compactness = 0.1;
  int iterations = 10;
};

namespace detail {

template <typename Fn>
void for_each_4_neighbor(std::size_t p, std::size_t h, std::size_t w, Fn&& fn) {
  const std::size_t y = p / w;
  const std::size_t x = p % w;
  if (y > 0) fn(p - w);
  if (y + 1 < h) fn(p + w);
  if (x > 0) fn(p - 1);
  if (x + 1 < w) fn(p + 1);
}

// Connected components of equal labels; returns component id per pixel.
inline std::vector<std::uint32_t> label_components(const std::vector<int>& labels, std::size_t h, std::size_t w,
                                                   std::size_t& n_components) {
  const std::size_t n = h * w;
  constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> comp(n, unset);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for_each_4_neighbor(p, h, w, [&](std::size_t q) {
        if (comp[q] == unset && labels[q] == labels[s]) {
          comp[q] = next;
          stack.push_back(q);
        }
      });
    }
    ++next;
  }
  n_components = next;
  return comp;
}

// Renumbers region ids to 0..R-1 in raster order of first appearance.
inline std::size_t relabel_raster_order(std::vector<int>& labels) {
  std::map<int, int> remap;
  for (int& l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    l = it->second;
  }
  return remap.size();
}

// Mutable region bookkeeping for the exact-count split/merge stage.
struct RegionTable {
  std::size_t h, w;
  const std::vector<double>& gray;
  std::vector<int> label;
  std::vector<std::vector<std::uint32_t>> members;  // empty = retired id
  std::vector<double> value_sum;
  std::size_t live = 0;

  RegionTable(std::size_t h_, std::size_t w_, const std::vector<double>& g, std::vector<int> lab)
      : h(h_), w(w_), gray(g), label(std::move(lab)) {
    const std::size_t r = relabel_raster_order(label);
    members.resize(r);
    value_sum.assign(r, 0.0);
    for (std::size_t p = 0; p < label.size(); ++p) {
      members[static_cast<std::size_t>(label[p])].push_back(static_cast<std::uint32_t>(p));
      value_sum[static_cast<std::size_t>(label[p])] += gray[p];
    }
    live = r;
  }

  std::size_t largest() const {
    std::size_t best = 0;
    for (std::size_t r = 1; r < members.size(); ++r)
      if (members[r].size() > members[best].size()) best = r;
    return best;
  }

  std::size_t smallest() const {
    std::size_t best = members.size();
    for (std::size_t r = 0; r < members.size(); ++r)
      if (!members[r].empty() && (best == members.size() || members[r].size() < members[best].size())) best = r;
    return best;
  }

  double mean(std::size_t r) const { return value_sum[r] / static_cast<double>(members[r].size()); }

  // BFS distances restricted to region r from the given sources.
  std::vector<int> bfs(std::size_t r, const std::vector<std::uint32_t>& sources, std::vector<int>* owner) const {
    std::vector<int> dist(label.size(), -1);
    std::deque<std::uint32_t> queue;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      dist[sources[s]] = 0;
      if (owner) (*owner)[sources[s]] = static_cast<int>(s);
      queue.push_back(sources[s]);
    }
    while (!queue.empty()) {
      const auto p = queue.front();
      queue.pop_front();
      for_each_4_neighbor(p, h, w, [&](std::size_t q) {
        if (dist[q] < 0 && label[q] == static_cast<int>(r)) {
          dist[q] = dist[p] + 1;
          if (owner) (*owner)[q] = (*owner)[p];
          queue.push_back(static_cast<std::uint32_t>(q));
        }
      });
    }
    return dist;
  }

  std::uint32_t farthest(std::size_t r, std::uint32_t from) const {
    const auto dist = bfs(r, {from}, nullptr);
    std::uint32_t best = from;
    for (auto p : members[r])
      if (dist[p] > dist[best]) best = p;
    return best;
  }

  // Bisects a region into two 4-connected parts grown from two far-apart pixels.
  void split(std::size_t r) {
    const std::uint32_t a = farthest(r, members[r].front());
    const std::uint32_t b = farthest(r, a);
    std::vector<int> owner(label.size(), -1);
    bfs(r, {a, b}, &owner);
    const auto fresh = members.size();
    members.emplace_back();
    value_sum.push_back(0.0);
    std::vector<std::uint32_t> keep;
    value_sum[r] = 0.0;
    for (auto p : members[r]) {
      if (owner[p] == 1) {
        label[p] = static_cast<int>(fresh);
        members[fresh].push_back(p);
        value_sum[fresh] += gray[p];
      } else {
        keep.push_back(p);
        value_sum[r] += gray[p];
      }
    }
    members[r] = std::move(keep);
    ++live;
  }

  // Merges region r into the adjacent region with the closest mean value.
  void merge_into_neighbor(std::size_t r) {
    std::set<int> adjacent;
    for (auto p : members[r])
      for_each_4_neighbor(p, h, w, [&](std::size_t q) {
        if (label[q] != static_cast<int>(r)) adjacent.insert(label[q]);
      });
    if (adjacent.empty()) return;
    const double m = mean(r);
    int target = *adjacent.begin();
    double best = std::abs(mean(static_cast<std::size_t>(target)) - m);
    for (int a : adjacent) {
      const double d = std::abs(mean(static_cast<std::size_t>(a)) - m);
      if (d < best) {
        best = d;
        target = a;
      }
    }
    const auto t = static_cast<std::size_t>(target);
    for (auto p : members[r]) label[p] = target;
    members[t].insert(members[t].end(), members[r].begin(), members[r].end());
    std::sort(members[t].begin(), members[t].end());
    value_sum[t] += value_sum[r];
    members[r].clear();
    value_sum[r] = 0.0;
    --live;
  }
};

}  // namespace detail

// SLIC-style segmentation of a gray image into exactly `target` 4-connected
// regions: grid seeding, local (value, y, x) clustering, orphan absorption,
// then split/merge to reach the exact count.
inline Segmentation segment(const Matrix& gray, std::size_t target, std::uint64_t seed,
                            const SlicOptions& opts = {}) {
  const std::size_t h = gray.rows;
  const std::size_t w = gray.cols;
  const std::size_t n = h * w;
  if (target < 1) throw Error(ErrorCode::TooManySuperpixels, "superpixel count must be >= 1");
  if (target > n)
    throw Error(ErrorCode::TooManySuperpixels,
                std::to_string(target) + " superpixels requested for " + std::to_string(n) + " pixels");

  std::size_t nx = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(target) * static_cast<double>(w) / static_cast<double>(h))));
  nx = std::clamp<std::size_t>(nx, 1, w);
  std::size_t ny = std::clamp<std::size_t>((target + nx - 1) / nx, 1, h);
  const double step_x = static_cast<double>(w) / static_cast<double>(nx);
  const double step_y = static_cast<double>(h) / static_cast<double>(ny);
  const double step = std::sqrt(step_x * step_y);

  struct Center {
    double v, y, x;
  };
  std::vector<Center> centers;
  centers.reserve(nx * ny);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> jitter(-1, 1);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      auto cy = static_cast<long>((static_cast<double>(j) + 0.5) * step_y);
      auto cx = static_cast<long>((static_cast<double>(i) + 0.5) * step_x);
      if (step_x >= 4.0 && step_y >= 4.0) {
        cy += jitter(rng);
        cx += jitter(rng);
      }
      cy = std::clamp<long>(cy, 0, static_cast<long>(h) - 1);
      cx = std::clamp<long>(cx, 0, static_cast<long>(w) - 1);
      centers.push_back({gray(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx)), static_cast<double>(cy),
                         static_cast<double>(cx)});
    }

  std::vector<int> label(n, -1);
  std::vector<double> best(n);
  const double inv_c2 = 1.0 / (opts.compactness * opts.compactness);
  const double inv_s2 = 1.0 / (step * step);
  for (int it = 0; it < opts.iterations; ++it) {
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& c = centers[k];
      const long y0 = std::max<long>(0, static_cast<long>(std::floor(c.y - step_y)));
      const long y1 = std::min<long>(static_cast<long>(h) - 1, static_cast<long>(std::ceil(c.y + step_y)));
      const long x0 = std::max<long>(0, static_cast<long>(std::floor(c.x - step_x)));
      const long x1 = std::min<long>(static_cast<long>(w) - 1, static_cast<long>(std::ceil(c.x + step_x)));
      for (long y = y0; y <= y1; ++y)
        for (long x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          const double dv = gray.data[p] - c.v;
          const double dy = static_cast<double>(y) - c.y;
          const double dx = static_cast<double>(x) - c.x;
          const double d = dv * dv * inv_c2 + (dy * dy + dx * dx) * inv_s2;
          if (d < best[p]) {
            best[p] = d;
            label[p] = static_cast<int>(k);
          }
        }
    }
    std::vector<Center> acc(centers.size(), {0.0, 0.0, 0.0});
    std::vector<std::size_t> cnt(centers.size(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      if (label[p] < 0) continue;
      auto& a = acc[static_cast<std::size_t>(label[p])];
      a.v += gray.data[p];
      a.y += static_cast<double>(p / w);
      a.x += static_cast<double>(p % w);
      ++cnt[static_cast<std::size_t>(label[p])];
    }
    for (std::size_t k = 0; k < centers.size(); ++k)
      if (cnt[k] > 0) {
        const double c = static_cast<double>(cnt[k]);
        centers[k] = {acc[k].v / c, acc[k].y / c, acc[k].x / c};
      }
  }

  // Keep each label's largest component; fold every other component into
  // the largest adjacent kept region.
  std::size_t n_comp = 0;
  const auto comp = detail::label_components(label, h, w, n_comp);
  std::vector<std::size_t> comp_size(n_comp, 0);
  std::vector<int> comp_label(n_comp, -1);
  for (std::size_t p = 0; p < n; ++p) {
    ++comp_size[comp[p]];
    comp_label[comp[p]] = label[p];
  }
  std::map<int, std::size_t> best_comp;
  for (std::size_t c = 0; c < n_comp; ++c) {
    if (comp_label[c] < 0) continue;
    auto it = best_comp.find(comp_label[c]);
    if (it == best_comp.end() || comp_size[c] > comp_size[it->second]) best_comp[comp_label[c]] = c;
  }
  std::vector<int> owner(n_comp, -1);  // kept component each component resolves to
  for (const auto& [lab, c] : best_comp) owner[c] = static_cast<int>(c);
  std::vector<std::vector<std::size_t>> comp_pixels(n_comp);
  for (std::size_t p = 0; p < n; ++p) comp_pixels[comp[p]].push_back(p);
  std::vector<std::size_t> resolved_size(comp_size);
  bool pending = true;
  while (pending) {
    pending = false;
    bool progressed = false;
    for (std::size_t c = 0; c < n_comp; ++c) {
      if (owner[c] >= 0) continue;
      int target_comp = -1;
      for (auto p : comp_pixels[c])
        detail::for_each_4_neighbor(p, h, w, [&](std::size_t q) {
          const int o = owner[comp[q]];
          if (o < 0) return;
          if (target_comp < 0 || resolved_size[static_cast<std::size_t>(o)] >
                                     resolved_size[static_cast<std::size_t>(target_comp)] ||
              (resolved_size[static_cast<std::size_t>(o)] == resolved_size[static_cast<std::size_t>(target_comp)] &&
               o < target_comp))
            target_comp = o;
        });
      if (target_comp < 0) {
        pending = true;
        continue;
      }
      owner[c] = target_comp;
      resolved_size[static_cast<std::size_t>(target_comp)] += comp_size[c];
      progressed = true;
    }
    if (pending && !progressed) break;
  }
  std::vector<int> region(n);
  for (std::size_t p = 0; p < n; ++p) region[p] = owner[comp[p]] >= 0 ? owner[comp[p]] : static_cast<int>(comp[p]);

  detail::RegionTable table(h, w, gray.data, std::move(region));
  while (table.live < target) table.split(table.largest());
  while (table.live > target) table.merge_into_neighbor(table.smallest());

  Segmentation seg{h, w, 0, {}};
  std::vector<int> final_labels = std::move(table.label);
  seg.count = detail::relabel_raster_order(final_labels);
  seg.assignment.assign(final_labels.begin(), final_labels.end());
  return seg;
}

inline std::vector<std::vector<std::uint32_t>> members_of(const Segmentation& seg) {
  std::vector<std::vector<std::uint32_t>> members(seg.count);
  for (std::size_t p = 0; p < seg.assignment.size(); ++p) members[seg.assignment[p]].push_back(static_cast<std::uint32_t>(p));
  return members;
}

// Ids of superpixels whose pixels do not form one 4-connected component.
inline std::vector<std::uint32_t> disconnected_superpixels(const Segmentation& seg) {
  std::vector<int> labels(seg.assignment.begin(), seg.assignment.end());
  std::size_t n_comp = 0;
  const auto comp = detail::label_components(labels, seg.height, seg.width, n_comp);
  std::vector<std::set<std::uint32_t>> comps(seg.count);
  for (std::size_t p = 0; p < labels.size(); ++p) comps[seg.assignment[p]].insert(comp[p]);
  std::vector<std::uint32_t> out;
  for (std::size_t j = 0; j < seg.count; ++j)
    if (comps[j].size() > 1) out.push_back(static_cast<std::uint32_t>(j));
  return out;
}

inline void write_segmentation(const std::string& path, const Segmentation& seg) {
  binio::json h = {{"height", seg.height}, {"width", seg.width}, {"count", seg.count}};
  std::string payload;
  payload.reserve(seg.assignment.size() * 4);
  for (auto v : seg.assignment) binio::append_le(payload, v);
  binio::write_framed(path, h, payload);
}

struct ImportedSegmentation {
  Segmentation seg;
  bool relabeled = false;
  std::vector<std::uint32_t> disconnected;
};

// Reads a .spseg raster. Gapped ids are compacted (order preserved) with a
// warning; disconnected superpixels are reported, not rejected.
inline ImportedSegmentation import_segmentation(const std::string& path, std::size_t expect_h = 0,
                                                std::size_t expect_w = 0) {
  auto f = binio::read_framed(path);
  ImportedSegmentation out;
  auto& seg = out.seg;
  seg.height = binio::header_dim(f.header, "height", path);
  seg.width = binio::header_dim(f.header, "width", path);
  const std::size_t declared = binio::header_dim(f.header, "count", path);
  if ((expect_h && expect_h != seg.height) || (expect_w && expect_w != seg.width))
    throw Error(ErrorCode::DimensionMismatch, path + ": raster dimensions do not match the cube");
  const std::size_t n = seg.height * seg.width;
  if (f.payload.size() != n * 4) throw Error(ErrorCode::SizeMismatch, path + ": payload size mismatch");
  seg.assignment.resize(n);
  std::set<std::uint32_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    seg.assignment[i] = binio::read_le<std::uint32_t>(f.payload.data() + i * 4);
    ids.insert(seg.assignment[i]);
  }
  seg.count = ids.size();
  if (!ids.empty() && *ids.rbegin() + 1 != ids.size()) {
    std::map<std::uint32_t, std::uint32_t> remap;
    for (auto id : ids) remap.emplace(id, static_cast<std::uint32_t>(remap.size()));
    for (auto& a : seg.assignment) a = remap[a];
    out.relabeled = true;
    warn(path + ": superpixel ids have gaps, relabeled to 0.." + std::to_string(seg.count - 1));
  }
  if (declared != seg.count)
    warn(path + ": header count " + std::to_string(declared) + " differs from " + std::to_string(seg.count) +
         " distinct ids");
  out.disconnected = disconnected_superpixels(seg);
  if (!out.disconnected.empty())
    warn(path + ": " + std::to_string(out.disconnected.size()) + " superpixel(s) are not 4-connected");
  return out;
}

// Row j = mean of the member pixel features of superpixel j.
inline Matrix mean_features(const Segmentation& seg, const Matrix& pixel_features) {
  if (pixel_features.rows != seg.pixels())
    throw Error(ErrorCode::DimensionMismatch, "feature rows != segmentation pixels");
  const std::size_t d = pixel_features.cols;
  Matrix out(seg.count, d);
  std::vector<std::size_t> sizes(seg.count, 0);
  for (std::size_t p = 0; p < seg.pixels(); ++p) {
    const auto j = seg.assignment[p];
    if (j >= seg.count) throw Error(ErrorCode::DimensionMismatch, "assignment id out of range");
    ++sizes[j];
    for (std::size_t c = 0; c < d; ++c) out(j, c) += pixel_features(p, c);
  }
  for (std::size_t j = 0; j < seg.count; ++j) {
    if (sizes[j] == 0) throw Error(ErrorCode::EmptySuperpixel, "superpixel " + std::to_string(j) + " has no pixels");
    for (std::size_t c = 0; c < d; ++c) out(j, c) /= static_cast<double>(sizes[j]);
  }
  return out;
}

inline SuperpixelSet make_superpixel_set(Segmentation seg, const Matrix& pixel_features) {
  SuperpixelSet set;
  set.features = mean_features(seg, pixel_features);
  set.members = members_of(seg);
  set.seg = std::move(seg);
  return set;
}

// Mode over labeled member pixels; 0 when none are labeled; ties go to the
// smaller class id.
inline std::vector<int> majority_labels(const Segmentation& seg, const LabelRaster& labels) {
  if (labels.pixels() != seg.pixels()) throw Error(ErrorCode::DimensionMismatch, "label raster size mismatch");
  std::vector<std::map<int, std::size_t>> counts(seg.count);
  for (std::size_t p = 0; p < seg.pixels(); ++p)
    if (labels.labels[p] > 0) ++counts[seg.assignment[p]][labels.labels[p]];
  std::vector<int> out(seg.count, 0);
  for (std::size_t j = 0; j < seg.count; ++j) {
    std::size_t best = 0;
    for (const auto& [cls, c] : counts[j])
      if (c > best) {
        best = c;
        out[j] = cls;
      }
  }
  return out;
}

// Augmented view: one uniformly drawn member pixel per superpixel.
inline Matrix sample_augmented_views(const SuperpixelSet& set, const Matrix& pixel_features, std::uint64_t seed,
                                     std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32), 0x5a17u};
  std::mt19937_64 rng(seq);
  const std::size_t d = pixel_features.cols;
  Matrix out(set.size(), d);
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& mem = set.members[j];
    if (mem.empty()) throw Error(ErrorCode::EmptySuperpixel, "superpixel " + std::to_string(j) + " has no pixels");
    std::uniform_int_distribution<std::size_t> pick(0, mem.size() - 1);
    const auto p = mem[pick(rng)];
    for (std::size_t c = 0; c < d; ++c) out(j, c) = pixel_features(p, c);
  }
  return out;
}

}  // namespace ssgc

#pragma once

#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "ssgc/binio.hpp"
#include "ssgc/common.hpp"
#include "ssgc/hsi_io.hpp"
#include "ssgc/superpixel.hpp"

namespace ssgc {

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centroids;            // K x F, unit rows for the spherical variant
  double objective = 0.0;      // sum_i z_i . c_a(i)  (spherical) or -SSE (Euclidean)
  std::vector<double> history; // objective after each iteration
  int iterations = 0;
};

namespace detail {

inline void normalize_row(std::span<double> r) {
  const double n = norm2(r);
  if (n > 1e-12)
    for (auto& v : r) v /= n;
}

}  // namespace detail

// Spherical k-means: k-means++-style seeding on cosine distance, then
// alternate max-dot assignment and normalized-mean update. An empty cluster
// takes the point least similar to its own centroid.
inline KMeansResult spherical_kmeans(const Matrix& z, std::size_t k, std::uint64_t seed, int max_iter = 100,
                                     double tol = 1e-6) {
  const std::size_t m = z.rows, f = z.cols;
  if (k < 1 || k > m) throw Error(ErrorCode::TooManyClusters, "K=" + std::to_string(k) + " for " + std::to_string(m) + " points");
  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centroids = Matrix(k, f);

  // Seeding with probability proportional to (1 - max similarity).
  std::uniform_int_distribution<std::size_t> first(0, m - 1);
  std::size_t pick = first(rng);
  std::vector<double> best_sim(m, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(z.row(pick).begin(), z.row(pick).end(), res.centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      best_sim[i] = std::max(best_sim[i], dot(z.row(i), res.centroids.row(c)));
      total += std::max(0.0, 1.0 - best_sim[i]);
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = first(rng);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    pick = m - 1;
    for (std::size_t i = 0; i < m; ++i) {
      r -= std::max(0.0, 1.0 - best_sim[i]);
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
  }

  res.assignment.assign(m, 0);
  std::vector<double> sim(m);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      int arg = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double s = dot(z.row(i), res.centroids.row(c));
        if (s > best) {
          best = s;
          arg = static_cast<int>(c);
        }
      }
      res.assignment[i] = arg;
    }
    // Update, reseeding empties until every cluster has a member.
    for (;;) {
      Matrix sums(k, f);
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < m; ++i) {
        const auto c = static_cast<std::size_t>(res.assignment[i]);
        ++counts[c];
        for (std::size_t j = 0; j < f; ++j) sums(c, j) += z(i, j);
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        detail::normalize_row(sums.row(c));
        std::copy(sums.row(c).begin(), sums.row(c).end(), res.centroids.row(c).begin());
      }
      auto empty = std::find(counts.begin(), counts.end(), std::size_t{0});
      if (empty == counts.end()) break;
      std::size_t worst = m;
      double worst_sim = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (counts[static_cast<std::size_t>(res.assignment[i])] < 2) continue;
        const double s = dot(z.row(i), res.centroids.row(static_cast<std::size_t>(res.assignment[i])));
        if (s < worst_sim) {
          worst_sim = s;
          worst = i;
        }
      }
      res.assignment[worst] = static_cast<int>(empty - counts.begin());
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < m; ++i) obj += dot(z.row(i), res.centroids.row(static_cast<std::size_t>(res.assignment[i])));
    res.history.push_back(obj);
    res.objective = obj;
    res.iterations = it + 1;
    if (obj - prev <= tol * std::max(1.0, std::abs(obj))) break;
    prev = obj;
  }
  return res;
}

// Best objective over `restarts` seeds derived from `seed`.
inline KMeansResult spherical_kmeans_best(const Matrix& z, std::size_t k, std::uint64_t seed, int restarts,
                                          int max_iter = 100, double tol = 1e-6) {
  KMeansResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  std::mt19937_64 seeder(seed);
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto res = spherical_kmeans(z, k, seeder(), max_iter, tol);
    if (res.objective > best.objective) best = std::move(res);
  }
  return best;
}

// Plain Euclidean k-means with k-means++ seeding (pixel-level baseline).
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iter = 100, double tol = 1e-8) {
  const std::size_t m = x.rows, f = x.cols;
  if (k < 1 || k > m) throw Error(ErrorCode::TooManyClusters, "K exceeds point count");
  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centroids = Matrix(k, f);
  auto sqdist = [&](std::size_t i, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double d = x(i, j) - c[j];
      s += d * d;
    }
    return s;
  };
  std::uniform_int_distribution<std::size_t> first(0, m - 1);
  std::size_t pick = first(rng);
  std::vector<double> d2(m, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), res.centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], sqdist(i, res.centroids.row(c)));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      pick = first(rng);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    pick = m - 1;
    for (std::size_t i = 0; i < m; ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
  }
  res.assignment.assign(m, 0);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    double sse = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sqdist(i, res.centroids.row(c));
        if (d < best) {
          best = d;
          res.assignment[i] = static_cast<int>(c);
        }
      }
      sse += best;
    }
    Matrix sums(k, f);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto c = static_cast<std::size_t>(res.assignment[i]);
      ++counts[c];
      for (std::size_t j = 0; j < f; ++j) sums(c, j) += x(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t j = 0; j < f; ++j) res.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    res.history.push_back(-sse);
    res.objective = -sse;
    res.iterations = it + 1;
    if (prev - sse <= tol * std::max(1.0, sse)) break;
    prev = sse;
  }
  return res;
}

// Counts over labeled pixels: rows = predicted clusters, cols = true classes.
struct ConfusionMatrix {
  std::size_t pred_classes = 0;
  std::size_t true_classes = 0;
  std::vector<long long> counts;  // pred_classes x true_classes
  std::vector<int> pred_ids;      // original cluster id per row
  std::vector<int> true_ids;      // original class id per column

  long long at(std::size_t p, std::size_t t) const { return counts[p * true_classes + t]; }
  long long total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }
};

// Rows for every predicted id occurring on a labeled pixel, columns for
// every labeled ground-truth class. Pixels with gt <= 0 are skipped.
inline ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::DimensionMismatch, "prediction/ground-truth sizes differ");
  std::map<int, std::size_t> prow, tcol;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i] > 0) {
      prow.emplace(pred[i], 0);
      tcol.emplace(gt[i], 0);
    }
  if (tcol.empty()) throw Error(ErrorCode::NoLabeledPixels, "no labeled pixels to evaluate");
  ConfusionMatrix cm;
  for (auto& [id, idx] : prow) {
    idx = cm.pred_ids.size();
    cm.pred_ids.push_back(id);
  }
  for (auto& [id, idx] : tcol) {
    idx = cm.true_ids.size();
    cm.true_ids.push_back(id);
  }
  cm.pred_classes = prow.size();
  cm.true_classes = tcol.size();
  cm.counts.assign(cm.pred_classes * cm.true_classes, 0);
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i] > 0) ++cm.counts[prow[pred[i]] * cm.true_classes + tcol[gt[i]]];
  return cm;
}

namespace detail {

// Maximum-weight perfect matching on a square matrix (Kuhn-Munkres on
// negated weights). Returns col assigned to each row.
inline std::vector<int> max_assignment(const std::vector<double>& w, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -w[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j]) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

inline long long assignment_value(const std::vector<long long>& w, std::size_t n, const std::vector<int>& perm) {
  long long s = 0;
  for (std::size_t i = 0; i < n; ++i) s += w[i * n + static_cast<std::size_t>(perm[i])];
  return s;
}

}  // namespace detail

// Optimal one-to-one map from predicted clusters to classes on the
// zero-padded square matrix; perm[row] = column. Among optimal maps the
// lexicographically smallest permutation is returned (up to n = 24; larger
// matrices keep the plain Hungarian optimum).
inline std::vector<int> hungarian_map(const ConfusionMatrix& cm) {
  const std::size_t n = std::max(cm.pred_classes, cm.true_classes);
  std::vector<long long> w(n * n, 0);
  for (std::size_t p = 0; p < cm.pred_classes; ++p)
    for (std::size_t t = 0; t < cm.true_classes; ++t) w[p * n + t] = cm.at(p, t);
  auto solve = [](const std::vector<long long>& sub, std::size_t size) {
    std::vector<double> d(sub.begin(), sub.end());
    return detail::max_assignment(d, size);
  };
  std::vector<int> perm = solve(w, n);
  if (n > 24) return perm;
  const long long best = detail::assignment_value(w, n, perm);

  // Fix rows in order to the smallest column that still admits the optimum.
  std::vector<int> fixed;
  std::vector<char> col_used(n, 0);
  long long fixed_value = 0;
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      if (col_used[col]) continue;
      const std::size_t rest = n - row - 1;
      long long value = fixed_value + w[row * n + col];
      if (rest > 0) {
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < n; ++c)
          if (!col_used[c] && c != col) cols.push_back(c);
        std::vector<long long> sub(rest * rest);
        for (std::size_t r = 0; r < rest; ++r)
          for (std::size_t c = 0; c < rest; ++c) sub[r * rest + c] = w[(row + 1 + r) * n + cols[c]];
        const auto sp = solve(sub, rest);
        value += detail::assignment_value(sub, rest, sp);
      }
      if (value == best) {
        fixed.push_back(static_cast<int>(col));
        col_used[col] = 1;
        fixed_value += w[row * n + col];
        break;
      }
    }
  }
  return fixed;
}

struct MetricsReport {
  double acc = 0.0;
  double kappa = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double purity = 0.0;
  std::size_t evaluated_pixels = 0;

  binio::json to_json() const {
    return {{"ACC", acc},
            {"Kappa", kappa},
            {"NMI", nmi},
            {"ARI", ari},
            {"Precision", precision},
            {"Recall", recall},
            {"F1", f1},
            {"Purity", purity},
            {"evaluated_pixels", evaluated_pixels},
            {"conventions",
             {{"nmi_normalization", "arithmetic"},
              {"macro_average", "over ground-truth classes; classes never predicted contribute 0"},
              {"mapping", "Hungarian"}}}};
  }
};

namespace detail {

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace detail

// ACC, kappa, NMI, ARI, macro P/R/F1 and purity over labeled pixels.
inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  const double n = static_cast<double>(cm.total());
  r.evaluated_pixels = static_cast<std::size_t>(cm.total());
  const std::size_t kp = cm.pred_classes, kt = cm.true_classes;
  std::vector<double> row(kp, 0.0), col(kt, 0.0);
  for (std::size_t p = 0; p < kp; ++p)
    for (std::size_t t = 0; t < kt; ++t) {
      row[p] += static_cast<double>(cm.at(p, t));
      col[t] += static_cast<double>(cm.at(p, t));
    }

  const auto perm = hungarian_map(cm);
  double matched = 0.0;
  std::vector<double> mapped_pred_total(std::max(kp, kt), 0.0);
  std::vector<double> tp(kt, 0.0);
  for (std::size_t p = 0; p < kp; ++p) {
    const auto t = static_cast<std::size_t>(perm[p]);
    mapped_pred_total[t] += row[p];
    if (t < kt) {
      matched += static_cast<double>(cm.at(p, t));
      tp[t] = static_cast<double>(cm.at(p, t));
    }
  }
  r.acc = matched / n;

  double pe = 0.0;
  for (std::size_t t = 0; t < kt; ++t) pe += col[t] * mapped_pred_total[t];
  pe /= n * n;
  r.kappa = pe < 1.0 ? (r.acc - pe) / (1.0 - pe) : (r.acc == 1.0 ? 1.0 : 0.0);

  double mutual = 0.0, hp = 0.0, ht = 0.0;
  for (std::size_t p = 0; p < kp; ++p)
    for (std::size_t t = 0; t < kt; ++t) {
      const double c = static_cast<double>(cm.at(p, t));
      if (c > 0) mutual += (c / n) * std::log(c * n / (row[p] * col[t]));
    }
  for (double v : row)
    if (v > 0) hp -= (v / n) * std::log(v / n);
  for (double v : col)
    if (v > 0) ht -= (v / n) * std::log(v / n);
  r.nmi = (hp + ht) > 0.0 ? 2.0 * mutual / (hp + ht) : 1.0;

  double index = 0.0, a = 0.0, b = 0.0;
  for (std::size_t p = 0; p < kp; ++p)
    for (std::size_t t = 0; t < kt; ++t) index += detail::choose2(static_cast<double>(cm.at(p, t)));
  for (double v : row) a += detail::choose2(v);
  for (double v : col) b += detail::choose2(v);
  const double expected = n > 1 ? a * b / detail::choose2(n) : 0.0;
  const double maxi = 0.5 * (a + b);
  r.ari = maxi - expected != 0.0 ? (index - expected) / (maxi - expected) : 1.0;

  double sp = 0.0, sr = 0.0, sf = 0.0;
  for (std::size_t t = 0; t < kt; ++t) {
    const double prec = mapped_pred_total[t] > 0 ? tp[t] / mapped_pred_total[t] : 0.0;
    const double rec = col[t] > 0 ? tp[t] / col[t] : 0.0;
    sp += prec;
    sr += rec;
    sf += (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  r.precision = sp / static_cast<double>(kt);
  r.recall = sr / static_cast<double>(kt);
  r.f1 = sf / static_cast<double>(kt);

  double pure = 0.0;
  for (std::size_t p = 0; p < kp; ++p) {
    long long mx = 0;
    for (std::size_t t = 0; t < kt; ++t) mx = std::max(mx, cm.at(p, t));
    pure += static_cast<double>(mx);
  }
  r.purity = pure / n;

  auto clamp01 = [](double& v) { v = std::clamp(v, 0.0, 1.0); };
  auto clamp11 = [](double& v) { v = std::clamp(v, -1.0, 1.0); };
  clamp01(r.acc), clamp01(r.nmi), clamp01(r.precision), clamp01(r.recall), clamp01(r.f1), clamp01(r.purity);
  clamp11(r.kappa), clamp11(r.ari);
  return r;
}

inline MetricsReport compute_metrics(const std::vector<int>& pred, const LabelRaster& gt) {
  return compute_metrics(confusion(pred, gt.labels));
}

// Every pixel takes its superpixel's label.
inline std::vector<int> labels_to_pixels(const std::vector<int>& superpixel_labels, const Segmentation& seg) {
  if (superpixel_labels.size() != seg.count) throw Error(ErrorCode::DimensionMismatch, "one label per superpixel");
  std::vector<int> out(seg.pixels());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = superpixel_labels[seg.assignment[p]];
  return out;
}

}  // namespace ssgc

#include "roesl/flow.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "roesl/util.hpp"

namespace roesl {
namespace {

inline int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace

double FlowField::mean_dx() const { return mean(dx); }
double FlowField::mean_dy() const { return mean(dy); }

FlowField dense_flow(const Frame& prev, const Frame& next, const FlowParams& params) {
  if (prev.width != next.width || prev.height != next.height)
    throw std::invalid_argument("dense_flow: frame dimension mismatch (" +
                                std::to_string(prev.width) + "x" + std::to_string(prev.height) +
                                " vs " + std::to_string(next.width) + "x" +
                                std::to_string(next.height) + ")");
  const int w = prev.width;
  const int h = prev.height;
  const size_t n = static_cast<size_t>(w) * h;
  const double scale = 255.0;  // see FlowParams::alpha

  // Spatial gradients averaged over both frames, plus the temporal difference.
  std::vector<double> ix(n), iy(n), it(n);
  for (int y = 0; y < h; ++y) {
    const int ym = reflect(y - 1, h), yp = reflect(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = reflect(x - 1, w), xp = reflect(x + 1, w);
      const size_t i = static_cast<size_t>(y) * w + x;
      ix[i] = 0.25 * scale *
              (prev.at(xp, y) - prev.at(xm, y) + next.at(xp, y) - next.at(xm, y));
      iy[i] = 0.25 * scale *
              (prev.at(x, yp) - prev.at(x, ym) + next.at(x, yp) - next.at(x, ym));
      it[i] = scale * (next.at(x, y) - prev.at(x, y));
    }
  }

  const double alpha2 = params.alpha * params.alpha;
  std::vector<double> u(n, 0.0), v(n, 0.0), un(n), vn(n);
  for (int iter = 0; iter < params.iterations; ++iter) {
    for (int y = 0; y < h; ++y) {
      const int ym = reflect(y - 1, h), yp = reflect(y + 1, h);
      for (int x = 0; x < w; ++x) {
        const int xm = reflect(x - 1, w), xp = reflect(x + 1, w);
        const size_t i = static_cast<size_t>(y) * w + x;
        const double ubar = 0.25 * (u[static_cast<size_t>(y) * w + xm] +
                                    u[static_cast<size_t>(y) * w + xp] +
                                    u[static_cast<size_t>(ym) * w + x] +
                                    u[static_cast<size_t>(yp) * w + x]);
        const double vbar = 0.25 * (v[static_cast<size_t>(y) * w + xm] +
                                    v[static_cast<size_t>(y) * w + xp] +
                                    v[static_cast<size_t>(ym) * w + x] +
                                    v[static_cast<size_t>(yp) * w + x]);
        const double t = (ix[i] * ubar + iy[i] * vbar + it[i]) /
                         (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
        un[i] = ubar - ix[i] * t;
        vn[i] = vbar - iy[i] * t;
      }
    }
    u.swap(un);
    v.swap(vn);
  }

  FlowField flow;
  flow.width = w;
  flow.height = h;
  flow.dx = std::move(u);
  flow.dy = std::move(v);
  return flow;
}

double motion_score(const FlowField& flow) {
  const size_t n = flow.dx.size();
  if (n == 0 || flow.dy.size() != n)
    throw std::invalid_argument("motion_score: malformed flow field");
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += std::hypot(flow.dx[i], flow.dy[i]);
  return sum / static_cast<double>(n);
}

MotionScores motion_scores(const FrameSequence& seq, const FlowParams& params) {
  seq.validate();
  MotionScores out;
  out.scores.reserve(seq.size() - 1);
  for (size_t k = 1; k < seq.size(); ++k)
    out.scores.push_back(motion_score(dense_flow(seq.frames[k - 1], seq.frames[k], params)));
  return out;
}

SelectionResult select_frames(const MotionScores& scores, int target_count,
                              std::optional<double> threshold) {
  const int n = static_cast<int>(scores.scores.size());
  if (target_count <= 0) throw std::invalid_argument("select_frames: target count must be >= 1");
  if (n == 0) throw std::invalid_argument("select_frames: empty motion scores");
  for (double s : scores.scores)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::invalid_argument("select_frames: motion scores must be finite and >= 0");

  const int k = std::min(target_count, n);
  const double thr = threshold.value_or(mean(scores.scores));

  // Rank by descending score; stable toward lower frame index on ties.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores.scores[a] > scores.scores[b];
  });

  std::vector<bool> chosen(n, false);
  std::vector<int> motion;
  for (int idx : order) {
    if (static_cast<int>(motion.size()) >= k) break;
    if (scores.scores[idx] > thr) {
      motion.push_back(idx);
      chosen[idx] = true;
    }
  }

  // Uniform top-up over the remaining pool, deterministic even spacing.
  std::vector<int> pool;
  for (int i = 0; i < n; ++i)
    if (!chosen[i]) pool.push_back(i);
  const int deficit = k - static_cast<int>(motion.size());
  std::vector<int> topup;
  for (int j = 0; j < deficit; ++j) {
    size_t pos = static_cast<size_t>((j + 0.5) * pool.size() / deficit);
    if (pos >= pool.size()) pos = pool.size() - 1;
    while (chosen[pool[pos]]) pos = (pos + 1) % pool.size();
    chosen[pool[pos]] = true;
    topup.push_back(pool[pos]);
  }

  struct Entry {
    int index;
    SelectionTag tag;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<size_t>(k));
  for (int i : motion) entries.push_back({i, SelectionTag::kMotion});
  for (int i : topup) entries.push_back({i, SelectionTag::kUniformTopup});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.index < b.index; });

  SelectionResult result;
  result.target_count = target_count;
  for (const Entry& e : entries) {
    result.indices.push_back(e.index + 1);  // frame index k for score sigma_k
    result.tags.push_back(e.tag);
  }
  return result;
}

}  // namespace roesl

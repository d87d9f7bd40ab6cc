// Cost regularization, depth-wise softmax and moment-based depth regression.
//
// The regularizer is a fixed per-slice box filter standing in for a learned
// 3D network; softmax and the first two moments follow the usual
// soft-argmax formulation.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "atv/common.hpp"
#include "atv/costvol.hpp"
#include "atv/parallel.hpp"

namespace atv {

struct ProbabilityVolume {
  Volume<double> probs;

  int planes() const noexcept { return probs.depth(); }
  Size size() const noexcept { return probs.size(); }
};

struct DepthEstimate {
  DepthMap depth;
  DepthMap sigma;
  int stage_index = 1;
};

/// Box filter of half-width `radius` over each slice. Sentinel cells are
/// left untouched and do not contribute to their neighbors.
inline CostVolume regularize_cost(const CostVolume& costs, int radius) {
  if (radius < 0) throw InputError("smoothing radius must be >= 0");
  CostVolume out = costs;
  if (radius == 0) return out;
  const int w = costs.size().width;
  const int h = costs.size().height;
  parallel_for(0, costs.planes(), [&](std::ptrdiff_t jj) {
    const int j = static_cast<int>(jj);
    const auto in = costs.costs.slice(j);
    auto dst = out.costs.slice(j);
    // Separable running sums of value and finite-cell count.
    std::vector<double> row_sum(in.size(), 0.0);
    std::vector<double> row_cnt(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        double n = 0.0;
        for (int dx = std::max(0, x - radius); dx <= std::min(w - 1, x + radius); ++dx) {
          const double v = in[static_cast<std::size_t>(y) * w + dx];
          if (!is_sentinel(v)) {
            s += v;
            n += 1.0;
          }
        }
        row_sum[static_cast<std::size_t>(y) * w + x] = s;
        row_cnt[static_cast<std::size_t>(y) * w + x] = n;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (is_sentinel(in[i])) continue;
        double s = 0.0;
        double n = 0.0;
        for (int dy = std::max(0, y - radius); dy <= std::min(h - 1, y + radius); ++dy) {
          s += row_sum[static_cast<std::size_t>(dy) * w + x];
          n += row_cnt[static_cast<std::size_t>(dy) * w + x];
        }
        dst[i] = s / n;
      }
    }
  });
  return out;
}

/// probs[j] = softmax(-beta * cost[j]) over the plane axis, computed with
/// max subtraction.
inline ProbabilityVolume softmax_probability(const CostVolume& costs, double beta) {
  if (!(beta > 0.0)) throw InputError("softmax temperature beta must be positive");
  const int d = costs.planes();
  const int w = costs.size().width;
  const int h = costs.size().height;
  ProbabilityVolume out{Volume<double>(d, w, h)};
  parallel_for(0, h, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    std::vector<double> score(static_cast<std::size_t>(d));
    for (int x = 0; x < w; ++x) {
      double m = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < d; ++j) {
        score[static_cast<std::size_t>(j)] = -beta * costs.costs(j, x, y);
        m = std::max(m, score[static_cast<std::size_t>(j)]);
      }
      double total = 0.0;
      for (int j = 0; j < d; ++j) {
        score[static_cast<std::size_t>(j)] = std::exp(score[static_cast<std::size_t>(j)] - m);
        total += score[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < d; ++j) out.probs(j, x, y) = score[static_cast<std::size_t>(j)] / total;
    }
  });
  return out;
}

namespace detail {
inline void check_same_shape(const ProbabilityVolume& probs, const HypothesisVolume& hyps) {
  if (probs.planes() != hyps.planes() || probs.size() != hyps.size()) {
    throw InputError("probability and hypothesis volumes differ in shape");
  }
}
}  // namespace detail

/// Per-pixel expectation of the hypotheses. Results are clamped into the
/// per-pixel hypothesis span to absorb rounding.
inline DepthMap expect_depth(const ProbabilityVolume& probs, const HypothesisVolume& hyps) {
  detail::check_same_shape(probs, hyps);
  const int d = probs.planes();
  const int w = probs.size().width;
  const int h = probs.size().height;
  DepthMap depth(w, h);
  parallel_for(0, h, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      double lo = hyps.depths(0, x, y);
      double hi = lo;
      for (int j = 0; j < d; ++j) {
        const double l = hyps.depths(j, x, y);
        s += probs.probs(j, x, y) * l;
        lo = std::min(lo, l);
        hi = std::max(hi, l);
      }
      depth(x, y) = std::clamp(s, lo, hi);
    }
  });
  return depth;
}

/// Per-pixel variance sum_j P_j (L_j - depth)^2.
inline DepthMap variance_depth(const ProbabilityVolume& probs, const HypothesisVolume& hyps, const DepthMap& depth) {
  detail::check_same_shape(probs, hyps);
  if (depth.size() != probs.size()) throw InputError("depth map differs in shape from the probability volume");
  const int d = probs.planes();
  const int w = probs.size().width;
  const int h = probs.size().height;
  DepthMap var(w, h);
  parallel_for(0, h, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        const double e = hyps.depths(j, x, y) - depth(x, y);
        s += probs.probs(j, x, y) * e * e;
      }
      var(x, y) = std::max(0.0, s);
    }
  });
  return var;
}

/// Expectation plus standard deviation in one estimate.
inline DepthEstimate estimate_depth(const ProbabilityVolume& probs, const HypothesisVolume& hyps, int stage_index) {
  DepthEstimate est;
  est.depth = expect_depth(probs, hyps);
  est.sigma = variance_depth(probs, hyps, est.depth);
  for (double& v : est.sigma.data()) v = std::sqrt(v);
  est.stage_index = stage_index;
  return est;
}

}  // namespace atv

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mgrad/rng.hpp"
#include "mgrad/tensor.hpp"

namespace mgrad {

/// Inputs and targets. Regression targets are [n, 1]; classification
/// targets are class indices of shape [n].
struct Batch {
  Tensor x;
  Tensor y;
};

struct Task {
  Batch support;
  Batch query;
  std::string family_tag;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  /// Intervals sharing only an endpoint count as disjoint.
  bool overlaps(const Interval& other) const { return lo < other.hi && other.lo < hi; }
};

enum class FamilyKind { Sinusoid, Clusters };

/// y = A·sin(x + φ) with A, φ and x drawn uniformly from their ranges.
struct SinusoidRanges {
  Interval amplitude{0.1, 5.0};
  Interval phase{0.0, 3.14159265358979323846};
  Interval input{-5.0, 5.0};
};

/// n_way Gaussian clusters in d_in dimensions; means drawn uniformly per
/// coordinate from `mean_region`.
struct ClusterRanges {
  Index n_way = 5;
  Index d_in = 16;
  Interval mean_region{-2.0, 2.0};
  double cluster_std = 1.0;
};

struct TaskFamily {
  FamilyKind kind = FamilyKind::Sinusoid;
  SinusoidRanges sinusoid;
  ClusterRanges clusters;
  /// Alternate ranges for cross-domain meta-testing. Must be disjoint from
  /// the training ranges: amplitude for sinusoids, mean region for clusters.
  std::optional<Interval> shift;

  void validate() const;
  std::string tag(bool shifted) const;
  Index input_dim() const { return kind == FamilyKind::Sinusoid ? 1 : clusters.d_in; }
  Index output_dim() const { return kind == FamilyKind::Sinusoid ? 1 : clusters.n_way; }
};

struct SinusoidParams {
  double amplitude = 1.0;
  double phase = 0.0;
};

struct ClusterParams {
  Tensor means;  // [n_way, d_in]
};

using TaskParams = std::variant<SinusoidParams, ClusterParams>;

TaskParams draw_task_params(const TaskFamily& family, RngStream& rng, bool use_shift);

/// Draws fresh support/query points for fixed task parameters. For
/// classification `k_shot` and `n_query` count points per class. Query
/// inputs never repeat a support input (except with zero cluster noise,
/// where every point sits on its class mean).
Task materialize(const TaskFamily& family, const TaskParams& params, Index k_shot, Index n_query, RngStream& rng,
                 bool use_shift = false);

Task sample_task(const TaskFamily& family, Index k_shot, Index n_query, RngStream& rng, bool use_shift = false);

/// Finite set of frozen task parameters. Sampling from it re-materializes
/// one of these tasks with new data points.
struct TaskPool {
  TaskFamily family;
  std::vector<TaskParams> tasks;

  std::size_t size() const { return tasks.size(); }
};

TaskPool make_pool(const TaskFamily& family, std::size_t n_pool, RngStream& rng);
TaskPool make_pool(const TaskFamily& family, std::size_t n_pool, std::uint64_t seed);

/// Picks a pool index uniformly, then materializes it. The chosen index is
/// written to `index` when given.
Task sample_from_pool(const TaskPool& pool, Index k_shot, Index n_query, RngStream& rng,
                      std::size_t* index = nullptr);

}  // namespace mgrad

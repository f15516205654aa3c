#include "mgrad/tasks.hpp"

#include <cmath>

namespace mgrad {

void TaskFamily::validate() const {
  if (kind == FamilyKind::Sinusoid) {
    const auto& s = sinusoid;
    if (s.amplitude.lo > s.amplitude.hi || s.phase.lo > s.phase.hi) {
      throw ConfigError("sinusoid family: amplitude/phase range has lo > hi");
    }
    if (!(s.input.lo < s.input.hi)) throw ConfigError("sinusoid family: input range must have lo < hi");
    if (shift) {
      if (shift->lo > shift->hi) throw ConfigError("sinusoid family: shifted amplitude range has lo > hi");
      if (shift->overlaps(s.amplitude)) {
        throw ConfigError("sinusoid family: shifted amplitude range overlaps the training range");
      }
    }
  } else {
    const auto& c = clusters;
    if (c.n_way < 2) throw ConfigError("cluster family: n_way must be at least 2");
    if (c.d_in < 1) throw ConfigError("cluster family: d_in must be positive");
    if (!(c.mean_region.lo < c.mean_region.hi)) throw ConfigError("cluster family: mean region must have lo < hi");
    if (!(c.cluster_std >= 0.0)) throw ConfigError("cluster family: cluster_std must be non-negative");
    if (shift) {
      if (!(shift->lo < shift->hi)) throw ConfigError("cluster family: shifted mean region must have lo < hi");
      if (shift->overlaps(c.mean_region)) {
        throw ConfigError("cluster family: shifted mean region overlaps the training region");
      }
    }
  }
}

std::string TaskFamily::tag(bool shifted) const {
  std::string base = kind == FamilyKind::Sinusoid ? "sinusoid" : "clusters";
  return shifted ? base + "-shifted" : base;
}

TaskParams draw_task_params(const TaskFamily& family, RngStream& rng, bool use_shift) {
  if (use_shift && !family.shift) throw ConfigError("task family has no shifted domain configured");
  if (family.kind == FamilyKind::Sinusoid) {
    const Interval amp = use_shift ? *family.shift : family.sinusoid.amplitude;
    SinusoidParams p;
    p.amplitude = rng.uniform(amp.lo, amp.hi);
    p.phase = rng.uniform(family.sinusoid.phase.lo, family.sinusoid.phase.hi);
    return p;
  }
  const Interval region = use_shift ? *family.shift : family.clusters.mean_region;
  ClusterParams p;
  p.means = Tensor(Shape{family.clusters.n_way, family.clusters.d_in});
  for (Index k = 0; k < p.means.size(); ++k) p.means[k] = rng.uniform(region.lo, region.hi);
  return p;
}

namespace {

bool row_in(const Tensor::Matrix& rows, Index upto, const Eigen::RowVectorXd& row) {
  for (Index r = 0; r < upto; ++r) {
    if (rows.row(r) == row) return true;
  }
  return false;
}

Task sinusoid_task(const TaskFamily& family, const SinusoidParams& p, Index k_shot, Index n_query, RngStream& rng,
                   bool use_shift) {
  const Interval in = family.sinusoid.input;
  Tensor::Matrix xs(k_shot + n_query, 1);
  for (Index r = 0; r < xs.rows(); ++r) {
    Eigen::RowVectorXd row(1);
    do {
      row[0] = rng.uniform(in.lo, in.hi);
    } while (row_in(xs, r, row));
    xs.row(r) = row;
  }
  auto make = [&](Index offset, Index n) {
    Batch b{Tensor(Shape{n, 1}), Tensor(Shape{n, 1})};
    for (Index r = 0; r < n; ++r) {
      const double x = xs(offset + r, 0);
      b.x[r] = x;
      b.y[r] = p.amplitude * std::sin(x + p.phase);
    }
    return b;
  };
  return Task{make(0, k_shot), make(k_shot, n_query), family.tag(use_shift)};
}

Task cluster_task(const TaskFamily& family, const ClusterParams& p, Index k_shot, Index n_query, RngStream& rng,
                  bool use_shift) {
  const Index n_way = p.means.shape()[0];
  const Index d = p.means.shape()[1];
  const double stddev = family.clusters.cluster_std;
  const Index per_class = k_shot + n_query;
  // Rows grouped by class: support points first, then query points.
  Tensor::Matrix xs(n_way * per_class, d);
  auto means = p.means.matrix();
  for (Index c = 0; c < n_way; ++c) {
    for (Index j = 0; j < per_class; ++j) {
      const Index r = c * per_class + j;
      Eigen::RowVectorXd row(d);
      do {
        for (Index k = 0; k < d; ++k) row[k] = means(c, k) + stddev * rng.normal();
      } while (stddev > 0.0 && row_in(xs, r, row));
      xs.row(r) = row;
    }
  }
  auto make = [&](Index first, Index n) {
    Batch b{Tensor(Shape{n_way * n, d}), Tensor(Shape{n_way * n})};
    auto bx = b.x.matrix();
    for (Index c = 0; c < n_way; ++c) {
      for (Index j = 0; j < n; ++j) {
        bx.row(c * n + j) = xs.row(c * per_class + first + j);
        b.y[c * n + j] = static_cast<double>(c);
      }
    }
    return b;
  };
  return Task{make(0, k_shot), make(k_shot, n_query), family.tag(use_shift)};
}

}  // namespace

Task materialize(const TaskFamily& family, const TaskParams& params, Index k_shot, Index n_query, RngStream& rng,
                 bool use_shift) {
  if (k_shot < 1 || n_query < 1) throw ConfigError("task sampling: k_shot and n_query must be at least 1");
  if (family.kind == FamilyKind::Sinusoid) {
    return sinusoid_task(family, std::get<SinusoidParams>(params), k_shot, n_query, rng, use_shift);
  }
  return cluster_task(family, std::get<ClusterParams>(params), k_shot, n_query, rng, use_shift);
}

Task sample_task(const TaskFamily& family, Index k_shot, Index n_query, RngStream& rng, bool use_shift) {
  TaskParams params = draw_task_params(family, rng, use_shift);
  return materialize(family, params, k_shot, n_query, rng, use_shift);
}

TaskPool make_pool(const TaskFamily& family, std::size_t n_pool, RngStream& rng) {
  if (n_pool < 1) throw ConfigError("task pool: n_pool must be at least 1");
  family.validate();
  TaskPool pool{family, {}};
  pool.tasks.reserve(n_pool);
  for (std::size_t i = 0; i < n_pool; ++i) pool.tasks.push_back(draw_task_params(family, rng, false));
  return pool;
}

TaskPool make_pool(const TaskFamily& family, std::size_t n_pool, std::uint64_t seed) {
  RngStream rng(seed, "pool");
  return make_pool(family, n_pool, rng);
}

Task sample_from_pool(const TaskPool& pool, Index k_shot, Index n_query, RngStream& rng, std::size_t* index) {
  if (pool.tasks.empty()) throw ConfigError("task pool is empty");
  const auto i = static_cast<std::size_t>(rng.below(pool.tasks.size()));
  if (index) *index = i;
  return materialize(pool.family, pool.tasks[i], k_shot, n_query, rng, false);
}

}  // namespace mgrad

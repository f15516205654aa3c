#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mgrad/tensor.hpp"

namespace mgrad {

/// Ordered, named parameter tensors, each tagged with a layer label
/// ("L0", "L1", ..., "OUT"). Order is the registration order and is what
/// checkpoints, optimizers and gradient maps iterate over.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    std::string layer;
    Tensor value;
  };

  void add(std::string name, std::string layer, Tensor value);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Tensor& value(std::size_t i) { return entries_[i].value; }
  const Tensor& value(std::size_t i) const { return entries_[i].value; }

  std::optional<std::size_t> find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;

  std::vector<std::string> names() const;
  std::vector<std::string> layers() const;
  Index parameter_count() const;

  /// Same names, layers and shapes, in the same order.
  bool congruent(const ParamSet& other) const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

bool bit_equal(const ParamSet& a, const ParamSet& b);

/// Gradient per parameter, keyed like the ParamSet it was computed for.
/// When built with create_graph, `nodes` holds the graph node of every
/// entry so the gradient itself can be differentiated.
struct GradMap {
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::vector<std::size_t> nodes;

  std::size_t size() const { return names.size(); }
  bool graph_backed() const { return !nodes.empty(); }
  const Tensor& at(const std::string& name) const;
};

/// Throws if `grads` is not keyed and shaped exactly like `params`.
void check_congruent(const GradMap& grads, const ParamSet& params);

bool bit_equal(const GradMap& a, const GradMap& b);

}  // namespace mgrad

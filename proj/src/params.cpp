#include "mgrad/params.hpp"

namespace mgrad {

void ParamSet::add(std::string name, std::string layer, Tensor value) {
  if (name.empty() || layer.empty()) throw Error("ParamSet: empty name or layer label");
  if (find(name)) throw Error("ParamSet: duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(layer), std::move(value)});
}

std::optional<std::size_t> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto i = find(name);
  if (!i) throw Error("ParamSet: no parameter named '" + name + "'");
  return entries_[*i].value;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::vector<std::string> ParamSet::layers() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::find(out.begin(), out.end(), e.layer) == out.end()) out.push_back(e.layer);
  }
  return out;
}

Index ParamSet::parameter_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool ParamSet::congruent(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.layer != b.layer || a.value.shape() != b.value.shape()) return false;
  }
  return true;
}

bool bit_equal(const ParamSet& a, const ParamSet& b) {
  if (!a.congruent(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bit_equal(a.value(i), b.value(i))) return false;
  }
  return true;
}

const Tensor& GradMap::at(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw Error("GradMap: no entry named '" + name + "'");
}

void check_congruent(const GradMap& grads, const ParamSet& params) {
  if (grads.size() != params.size() || grads.values.size() != grads.names.size()) {
    throw Error("GradMap: " + std::to_string(grads.size()) + " entries for " + std::to_string(params.size()) +
                " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.names[i] != params[i].name) {
      throw Error("GradMap: key '" + grads.names[i] + "' does not match parameter '" + params[i].name + "'");
    }
    if (grads.values[i].shape() != params[i].value.shape()) {
      throw ShapeError("GradMap: entry '" + grads.names[i] + "' has shape " + shape_string(grads.values[i].shape()) +
                       ", parameter has " + shape_string(params[i].value.shape()));
    }
  }
}

bool bit_equal(const GradMap& a, const GradMap& b) {
  if (a.names != b.names || a.values.size() != b.values.size()) return false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (!bit_equal(a.values[i], b.values[i])) return false;
  }
  return true;
}

}  // namespace mgrad

#include <stdexcept>

#include "bwe/errors.hpp"
#include "bwe/model.hpp"

namespace bwe::model {

Tensor ParameterStore::add(std::string name, Tensor t) {
  for (const auto& [existing, _] : params_) {
    if (existing == name) throw std::logic_error("duplicate parameter name " + name);
  }
  t.set_requires_grad(true);
  params_.emplace_back(std::move(name), t);
  return t;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [_, t] : params_) out.push_back(t);
  return out;
}

std::size_t ParameterStore::numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

void ParameterStore::set_requires_grad(bool flag) {
  for (auto& [_, t] : params_) t.set_requires_grad(flag);
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void ParameterStore::export_to(std::vector<nn::NamedArray>& out, const std::string& prefix) const {
  for (const auto& [name, t] : params_) {
    out.push_back({prefix + name, t.shape(), std::vector<nn::Real>(t.data().begin(), t.data().end())});
  }
}

void ParameterStore::import_from(const nn::Checkpoint& ckpt, const std::string& prefix) {
  for (auto& [name, t] : params_) {
    const nn::NamedArray& a = ckpt.at(prefix + name);
    if (a.shape != t.shape()) {
      throw DataError("checkpoint array '" + a.name + "' has shape " + nn::shape_string(a.shape) +
                      ", model expects " + nn::shape_string(t.shape()));
    }
    std::copy(a.values.begin(), a.values.end(), t.data().begin());
  }
}

Tensor init_normal(nn::Shape shape, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<nn::Real> values(nn::shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values));
}

Conv1dLayer make_conv1d(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                        std::size_t kernel, nn::Conv1dOptions opt, Rng& rng) {
  if (in % opt.groups != 0 || out % opt.groups != 0) {
    throw std::invalid_argument(name + ": channels not divisible by groups");
  }
  Conv1dLayer layer;
  layer.weight = store.add(name + ".weight", init_normal({out, in / opt.groups, kernel}, rng));
  layer.bias = store.add(name + ".bias", Tensor::zeros({out}));
  layer.options = opt;
  return layer;
}

}  // namespace bwe::model

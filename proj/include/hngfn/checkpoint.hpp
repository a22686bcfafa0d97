// Copyright 2026 The hngfn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HNGFN_CHECKPOINT_HPP_
#define HNGFN_CHECKPOINT_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hngfn/error.hpp"
#include "hngfn/nn.hpp"

namespace hngfn::nn {

/// Named tensor stored row-major.
struct Tensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> values;
};

/// Flat list of named tensors plus free-form metadata. Serialized as JSON;
/// doubles are written with round-trip precision, so save/load is bit-exact.
class Checkpoint {
 public:
  nlohmann::json meta = nlohmann::json::object();

  const std::vector<Tensor>& tensors() const { return tensors_; }

  void add(Tensor t) {
    std::int64_t expected = 1;
    for (auto d : t.shape) expected *= d;
    if (expected != static_cast<std::int64_t>(t.values.size())) {
      throw DimensionError("checkpoint tensor '" + t.name +
                           "' shape does not match value count");
    }
    tensors_.push_back(std::move(t));
  }

  void add_vector(const std::string& name, const ConstVecRef& v) {
    add({name, {v.size()}, std::vector<double>(v.data(), v.data() + v.size())});
  }

  const Tensor& get(const std::string& name) const {
    for (const auto& t : tensors_) {
      if (t.name == name) return t;
    }
    throw StateError("checkpoint has no tensor named '" + name + "'");
  }

  bool contains(const std::string& name) const {
    for (const auto& t : tensors_) {
      if (t.name == name) return true;
    }
    return false;
  }

  Vector get_vector(const std::string& name) const {
    const Tensor& t = get(name);
    return Eigen::Map<const Vector>(t.values.data(),
                                    static_cast<Index>(t.values.size()));
  }

  // One "<prefix>.layer<l>.weight" [out, in] and ".bias" [out] pair per layer.
  void add_mlp(const std::string& prefix, const MlpLayout& layout,
               const ConstVecRef& params) {
    for (std::size_t l = 0; l < layout.num_layers(); ++l) {
      const auto w = weight(layout, params, l);
      Tensor tw{prefix + ".layer" + std::to_string(l) + ".weight",
                {w.rows(), w.cols()},
                {}};
      tw.values.reserve(static_cast<std::size_t>(w.size()));
      for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) tw.values.push_back(w(r, c));
      }
      add(std::move(tw));
      add_vector(prefix + ".layer" + std::to_string(l) + ".bias",
                 bias(layout, params, l));
    }
  }

  Vector read_mlp(const std::string& prefix, const MlpLayout& layout) const {
    Vector params(layout.param_count());
    for (std::size_t l = 0; l < layout.num_layers(); ++l) {
      const Tensor& tw = get(prefix + ".layer" + std::to_string(l) + ".weight");
      if (tw.shape != std::vector<std::int64_t>{layout.fan_out(l),
                                                 layout.fan_in(l)}) {
        throw DimensionError("checkpoint tensor '" + tw.name +
                             "' does not match the network layout");
      }
      Eigen::Map<Matrix> w(params.data() + layout.weight_offset(l),
                           layout.fan_out(l), layout.fan_in(l));
      std::size_t k = 0;
      for (Index r = 0; r < w.rows(); ++r) {
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = tw.values[k++];
      }
      const Tensor& tb = get(prefix + ".layer" + std::to_string(l) + ".bias");
      if (tb.values.size() != static_cast<std::size_t>(layout.fan_out(l))) {
        throw DimensionError("checkpoint tensor '" + tb.name +
                             "' does not match the network layout");
      }
      for (Index i = 0; i < layout.fan_out(l); ++i) {
        params[layout.bias_offset(l) + i] = tb.values[static_cast<std::size_t>(i)];
      }
    }
    return params;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["meta"] = meta;
    j["tensors"] = nlohmann::json::array();
    for (const auto& t : tensors_) {
      j["tensors"].push_back(
          {{"name", t.name}, {"shape", t.shape}, {"values", t.values}});
    }
    return j;
  }

  static Checkpoint from_json(const nlohmann::json& j) {
    Checkpoint c;
    c.meta = j.value("meta", nlohmann::json::object());
    for (const auto& t : j.at("tensors")) {
      c.add({t.at("name").get<std::string>(),
             t.at("shape").get<std::vector<std::int64_t>>(),
             t.at("values").get<std::vector<double>>()});
    }
    return c;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw StateError("cannot open checkpoint for writing: " + path);
    out << to_json().dump();
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StateError("cannot open checkpoint: " + path);
    return from_json(nlohmann::json::parse(in));
  }

 private:
  std::vector<Tensor> tensors_;
};

}  // namespace hngfn::nn

#endif  // HNGFN_CHECKPOINT_HPP_

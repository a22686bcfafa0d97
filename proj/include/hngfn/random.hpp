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

#ifndef HNGFN_RANDOM_HPP_
#define HNGFN_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace hngfn {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named substream of a master seed. Components draw from their own stream
// (e.g. "surrogate", "gfn", "env", "mc") so that changing how much randomness
// one of them consumes leaves the others untouched.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ fnv1a(name)) + splitmix64(index + 1));
}

inline Rng make_rng(std::uint64_t master, std::string_view name,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, name, index));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace hngfn

#endif  // HNGFN_RANDOM_HPP_

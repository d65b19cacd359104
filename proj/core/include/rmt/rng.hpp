// Copyright 2026 The rmtlab Authors.
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

#ifndef RMTLAB_RNG_HPP
#define RMTLAB_RNG_HPP

#include <cstdint>
#include <random>

namespace rmt {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Stream derivation is pinned to this exact function so
// that runs are reproducible across machines and ports:
//   stream_seed(master, k) = mix64(master + 0x9e3779b97f4a7c15 * (k + 1)).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + kGoldenGamma * (index + 1));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index) {
  return Rng(stream_seed(master, index));
}

}  // namespace rmt

#endif  // RMTLAB_RNG_HPP

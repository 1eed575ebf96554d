// core/include/punct/augmentation.hpp
//
// Copyright 2026  The punct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Contextual dropout: training-time perturbation of the future context and
// token identities of a window.

#include <cstddef>

#include "punct/rng.hpp"
#include "punct/text.hpp"

namespace punct {

struct DropoutRates {
  // Per surviving future token: replaced by <DROP>.
  double token_drop = 0.15;
  // Per sample: the last ceil(C_T / 2) future slots become <PAD>.
  double half_future = 0.15;
  // Per sample: every future slot becomes <PAD>.
  double no_future = 0.015;
  // Per past/future word token: replaced by a random corpus token.
  double token_swap = 0.015;

  // Throws ValidationError naming the first rate outside [0, 1].
  void validate() const;
  bool is_zero() const;

  friend bool operator==(const DropoutRates&, const DropoutRates&) = default;
};

// Rates used by every evaluation path: all zero.
DropoutRates dropout_schedule_for_eval();

// What apply_contextual_dropout did, for statistics.
struct DropoutTrace {
  bool no_future = false;
  bool half_future = false;
  // Non-PAD future tokens still present after the sample-level step.
  std::size_t surviving_future = 0;
  std::size_t dropped = 0;
  std::size_t swapped = 0;
};

// Steps run in a fixed order: (1) sample-level truncation (no_future, else
// half_future); (2) per-token <DROP> over surviving future tokens; (3) swaps
// over word tokens of past and future. <PAD> and <DROP> slots are never
// swapped. The target token and gold label are never touched.
//
// vocab_size bounds the swap draw to ids [kNumReserved, vocab_size); swaps are
// skipped when the vocabulary has no corpus tokens.
WindowExample apply_contextual_dropout(const WindowExample& example, const DropoutRates& rates, Rng& rng,
                                       std::size_t vocab_size, DropoutTrace* trace = nullptr);

}  // namespace punct

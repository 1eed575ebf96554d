// core/src/augmentation.cpp
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

#include "punct/augmentation.hpp"

#include "punct/errors.hpp"

namespace punct {

void DropoutRates::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError(std::string("dropout.") + name + " must lie in [0, 1], got " + std::to_string(v));
  };
  check(token_drop, "token_drop");
  check(half_future, "half_future");
  check(no_future, "no_future");
  check(token_swap, "token_swap");
}

bool DropoutRates::is_zero() const {
  return token_drop == 0.0 && half_future == 0.0 && no_future == 0.0 && token_swap == 0.0;
}

DropoutRates dropout_schedule_for_eval() { return DropoutRates{0.0, 0.0, 0.0, 0.0}; }

WindowExample apply_contextual_dropout(const WindowExample& example, const DropoutRates& rates, Rng& rng,
                                       std::size_t vocab_size, DropoutTrace* trace) {
  DropoutTrace local;
  WindowExample out = example;
  auto& future = out.future;
  const std::size_t n = future.size();

  if (rates.no_future > 0.0 && rng.bernoulli(rates.no_future)) {
    for (auto& t : future) t = Vocab::kPad;
    local.no_future = true;
  } else if (rates.half_future > 0.0 && rng.bernoulli(rates.half_future)) {
    const std::size_t removed = (n + 1) / 2;
    for (std::size_t k = n - removed; k < n; ++k) future[k] = Vocab::kPad;
    local.half_future = true;
  }

  for (auto& t : future) {
    if (t == Vocab::kPad) continue;
    ++local.surviving_future;
    if (rates.token_drop > 0.0 && rng.bernoulli(rates.token_drop)) {
      t = Vocab::kDrop;
      ++local.dropped;
    }
  }

  const std::size_t corpus_tokens = vocab_size > Vocab::kNumReserved ? vocab_size - Vocab::kNumReserved : 0;
  if (rates.token_swap > 0.0 && corpus_tokens > 0) {
    auto swap = [&](TokenId& t) {
      if (t == Vocab::kPad || t == Vocab::kDrop) return;
      if (rng.bernoulli(rates.token_swap)) {
        t = static_cast<TokenId>(Vocab::kNumReserved + rng.below(corpus_tokens));
        ++local.swapped;
      }
    };
    for (auto& t : out.past) swap(t);
    for (auto& t : future) swap(t);
  }

  if (trace) *trace = local;
  return out;
}

}  // namespace punct

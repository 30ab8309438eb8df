/*
 * Copyright 2026 The shelora Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Keyed order-preserving encoding of nonnegative reals.
//
// Inputs are quantized to a `domain_bits`-bit fixed-point integer with
// `frac_bits` fractional bits, then mapped through a keyed strictly
// increasing function into [0, 2^63). The function is sampled lazily as a
// binary tree over the domain: each node splits its code interval at a
// pseudorandom point drawn from the middle half, so every domain value owns a
// nonempty code interval and codes are strictly ordered. Codes reveal the
// order of the inputs and a coarse sense of magnitude, nothing else that a
// single key holder would not already know.

#ifndef SHELORA_OPE_H_
#define SHELORA_OPE_H_

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace shelora::crypto {

struct OpeKey {
  std::uint64_t seed = 0;
  unsigned domain_bits = 40;
  unsigned frac_bits = 20;

  // Largest encodable value (exclusive).
  double max_value() const;
};

struct OpeCode {
  std::uint64_t code = 0;

  friend auto operator<=>(const OpeCode&, const OpeCode&) = default;
};

// Fixed-point quantization; throws ValidationError for inputs outside
// [0, max_value()) and for NaN.
std::uint64_t ope_quantize(double value, const OpeKey& key);

OpeCode ope_encode(double value, const OpeKey& key);
std::vector<OpeCode> ope_encode(std::span<const double> values,
                                const OpeKey& key);

}  // namespace shelora::crypto

#endif  // SHELORA_OPE_H_

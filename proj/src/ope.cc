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

#include "shelora/ope.h"

#include <cmath>
#include <string>

#include "shelora/errors.h"
#include "shelora/random.h"

namespace shelora::crypto {

namespace {

constexpr unsigned kCodeBits = 63;

void validate(const OpeKey& key) {
  if (key.domain_bits == 0 || key.domain_bits > 62 ||
      key.frac_bits > key.domain_bits) {
    throw ValidationError("OPE key needs 0 < domain_bits <= 62 and "
                          "frac_bits <= domain_bits");
  }
}

std::uint64_t node_hash(std::uint64_t seed, unsigned level,
                        std::uint64_t prefix) {
  return splitmix64(seed ^ splitmix64(prefix * 64u + level));
}

}  // namespace

double OpeKey::max_value() const {
  return std::ldexp(1.0, static_cast<int>(domain_bits) -
                             static_cast<int>(frac_bits));
}

std::uint64_t ope_quantize(double value, const OpeKey& key) {
  validate(key);
  if (!std::isfinite(value)) {
    throw ValidationError("OPE input must be finite");
  }
  if (value < 0.0 || value >= key.max_value()) {
    throw ValidationError("OPE input " + std::to_string(value) +
                          " outside [0, " + std::to_string(key.max_value()) +
                          ")");
  }
  const double scaled =
      std::nearbyint(std::ldexp(value, static_cast<int>(key.frac_bits)));
  const std::uint64_t top = (std::uint64_t{1} << key.domain_bits) - 1;
  const auto q = static_cast<std::uint64_t>(scaled);
  return q > top ? top : q;
}

OpeCode ope_encode(double value, const OpeKey& key) {
  const std::uint64_t q = ope_quantize(value, key);
  std::uint64_t lo = 0;
  std::uint64_t span = std::uint64_t{1} << kCodeBits;
  for (int level = static_cast<int>(key.domain_bits) - 1; level >= 0; --level) {
    // The current node covers 2^(level+1) domain values; each half needs at
    // least 2^level codes.
    const std::uint64_t half = std::uint64_t{1} << level;
    const std::uint64_t slack = span - 2 * half;
    const std::uint64_t h = node_hash(key.seed, static_cast<unsigned>(level),
                                      q >> (level + 1));
    const auto jitter = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(slack / 2) * h) >> 64);
    const std::uint64_t left = half + slack / 4 + jitter;
    if ((q >> level) & 1u) {
      lo += left;
      span -= left;
    } else {
      span = left;
    }
  }
  const std::uint64_t leaf = node_hash(key.seed, 63, q);
  return OpeCode{lo + leaf % span};
}

std::vector<OpeCode> ope_encode(std::span<const double> values,
                                const OpeKey& key) {
  std::vector<OpeCode> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(ope_encode(v, key));
  return out;
}

}  // namespace shelora::crypto

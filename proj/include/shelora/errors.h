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

#ifndef SHELORA_ERRORS_H_
#define SHELORA_ERRORS_H_

#include <stdexcept>
#include <string>

namespace shelora {

// Root of every error raised by the library. The CLI maps any of these to a
// nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite input where a finite value is required.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented range (ratios, permutations, counts).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A block does not fit into the slot capacity of the HE parameters.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Ciphertexts that cannot be combined (shape, parameter set or level).
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

// Multiplicative depth exhausted.
class DepthError : public Error {
 public:
  using Error::Error;
};

// Decryption attempted with a key that did not produce the ciphertext.
class AuthenticationError : public Error {
 public:
  using Error::Error;
};

// Local training diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized message or configuration document.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace shelora

#endif  // SHELORA_ERRORS_H_

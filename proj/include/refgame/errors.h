// Copyright 2026 The Refgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REFGAME_ERRORS_H_
#define REFGAME_ERRORS_H_

#include <stdexcept>
#include <string>

namespace refgame {

// Base of every error the library raises. The CLI maps subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index or label out of range, unknown taxonomy node.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or request sizes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Empty or otherwise unusable input data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or divergence during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Batchnorm asked to normalize fewer than two rows in train mode.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

// Malformed game batch (duplicate sample ids, too few items).
class BatchError : public Error {
 public:
  using Error::Error;
};

// Unreadable or corrupt checkpoint / manifest file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace refgame

#endif  // REFGAME_ERRORS_H_

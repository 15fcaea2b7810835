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

#ifndef REFGAME_PARALLEL_H_
#define REFGAME_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace refgame {

// Worker cap: REFGAME_THREADS if set and positive, else the hardware
// concurrency (at least 1).
std::size_t WorkerCount();

// Runs fn(i) for i in [0, count) across up to WorkerCount() threads. Each
// index must write only its own outputs; results are then independent of
// scheduling.
void ParallelFor(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace refgame

#endif  // REFGAME_PARALLEL_H_

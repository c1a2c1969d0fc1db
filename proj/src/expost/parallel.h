// Copyright 2026 The Expost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EXPOST_PARALLEL_H_
#define EXPOST_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace expost {

// Calls fn(i) for every i in [0, n) on a pool of worker threads. Work items
// are claimed dynamically, so fn must not depend on execution order; results
// should be written to slot i of a preallocated buffer. workers = 0 picks the
// hardware concurrency.
void ParallelFor(size_t n, const std::function<void(size_t)>& fn,
                 unsigned workers = 0);

}  // namespace expost

#endif  // EXPOST_PARALLEL_H_

// SPDX-License-Identifier: Apache-2.0

#include "imuloc/parallel.hpp"

#include <atomic>

namespace imuloc {

namespace {
std::atomic<unsigned> g_threads{1};
}

unsigned thread_count() { return g_threads.load(); }
void set_thread_count(unsigned threads) { g_threads.store(std::max(1u, threads)); }

}  // namespace imuloc

#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace idol::util {

// Runs body(i) for i in [0, count) across up to `threads` workers. Each index
// is processed exactly once and workers write only to their own slots, so the
// result is identical for any thread count. Exceptions propagate from the
// first failing index.
inline void parallel_for(std::int64_t count, int threads,
                         const std::function<void(std::int64_t)>& body) {
    if (threads <= 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, count));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int wkr = 0; wkr < workers; ++wkr) {
        pool.emplace_back([&, wkr] {
            try {
                for (std::int64_t i = wkr; i < count; i += workers) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(wkr)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace idol::util

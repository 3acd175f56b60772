#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace spinodal {

// Deterministic path-parallel driver. fn(ctx, path_index) is invoked for
// every path index in [0, paths); each worker thread gets its own context
// from make_ctx(). Because every path derives its RNG stream from its index
// and writes only to per-path slots, results are independent of the worker
// count and of scheduling order.
template <class MakeCtx, class Fn>
void parallel_for_paths(long long paths, int workers, MakeCtx&& make_ctx, Fn&& fn) {
    if (paths <= 0) return;
    if (workers < 1) workers = 1;
    if (workers == 1 || paths == 1) {
        auto ctx = make_ctx();
        for (long long i = 0; i < paths; ++i) fn(ctx, i);
        return;
    }
    std::atomic<long long> next{0};
    const long long chunk = 8;
    auto body = [&] {
        auto ctx = make_ctx();
        for (;;) {
            const long long begin = next.fetch_add(chunk);
            if (begin >= paths) break;
            const long long end = begin + chunk < paths ? begin + chunk : paths;
            for (long long i = begin; i < end; ++i) fn(ctx, i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
}

}  // namespace spinodal

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace cardylab {

// worker cap from CARDY_LAB_THREADS, defaulting to hardware concurrency
inline int worker_count() {
    int hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* s = std::getenv("CARDY_LAB_THREADS")) {
        int v = std::atoi(s);
        if (v >= 1) return v;
    }
    return hw;
}

// Runs fn(block, begin, end, worker) over fixed-size sample blocks. Block boundaries do not
// depend on the worker count, so per-block partial results merged in block order are deterministic.
template <class Fn>
void for_each_block(std::uint64_t total, std::uint64_t block, Fn&& fn, int workers = worker_count()) {
    std::uint64_t nb = (total + block - 1) / block;
    workers = int(std::min<std::uint64_t>(std::max(1, workers), std::max<std::uint64_t>(nb, 1)));
    auto run = [&](int w) {
        for (std::uint64_t b = w; b < nb; b += workers) fn(b, b * block, std::min(total, (b + 1) * block), w);
    };
    if (workers == 1) {
        run(0);
        return;
    }
    std::vector<std::thread> ts;
    for (int w = 0; w < workers; ++w) ts.emplace_back(run, w);
    for (auto& t : ts) t.join();
}

}  // namespace cardylab

#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace quadpost {

/// Runs fn(i) for i in [0, count). Work items write only to their own output
/// slot, so the final reduction order (and therefore every bit of the
/// result) is independent of the thread count.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min<std::size_t>(threads, count);
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

/// Pairwise tree reduction over items[0..count): deterministic and
/// numerically balanced. combine(a, b) must fold b into a.
template <typename T, typename Combine>
T pairwise_reduce(std::vector<T>& items, Combine combine) {
    std::size_t n = items.size();
    while (n > 1) {
        std::size_t half = n / 2;
        for (std::size_t i = 0; i < half; ++i) {
            combine(items[2 * i], items[2 * i + 1]);
            if (2 * i != i) items[i] = std::move(items[2 * i]);
        }
        if (n % 2 == 1) {
            items[half] = std::move(items[n - 1]);
            n = half + 1;
        } else {
            n = half;
        }
    }
    return std::move(items[0]);
}

}  // namespace quadpost

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kpls {

namespace detail {
inline std::atomic<unsigned>& thread_override()
{
    static std::atomic<unsigned> value{0};
    return value;
}
} // namespace detail

/// Number of worker threads: an explicit override, else KPLS_THREADS, else the hardware count.
inline unsigned thread_count()
{
    if (unsigned forced = detail::thread_override().load())
        return forced;
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("KPLS_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<unsigned>(v);
    }
    return hw;
}

/// Forces a thread count for the lifetime of the object (0 restores the default).
class ScopedThreadLimit {
public:
    explicit ScopedThreadLimit(unsigned threads) : previous_(detail::thread_override().exchange(threads)) {}
    ~ScopedThreadLimit() { detail::thread_override().store(previous_); }
    ScopedThreadLimit(const ScopedThreadLimit&) = delete;
    ScopedThreadLimit& operator=(const ScopedThreadLimit&) = delete;

private:
    unsigned previous_;
};

/// Calls fn(i) for i in [0, count). Work is split in contiguous blocks; fn must not
/// touch state shared with other indices.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn)
{
    std::size_t workers = std::min<std::size_t>(thread_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
        if (lo >= hi)
            break;
        pool.emplace_back([lo, hi, &fn, &failure, &failure_mutex] {
            try {
                for (std::size_t i = lo; i < hi; ++i)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace kpls

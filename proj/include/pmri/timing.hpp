#pragma once

#include <algorithm>
#include <chrono>
#include <vector>

namespace pmri {

/// Wall-clock seconds of f(); the result of f is handed to sink.
template <class F, class Sink>
double time_call(F&& f, Sink&& sink) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sink(std::move(out));
    return s;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace pmri

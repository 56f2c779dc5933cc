#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hvm {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

/// Uniform node grid: node(i) = x0 + i*dx, i = 0..n-1.
struct UniformGrid {
    double x0 = 0.0;
    double dx = 1.0;
    int n = 0;

    double node(int i) const { return x0 + dx * static_cast<double>(i); }
    double back() const { return node(n - 1); }
    bool contains(double x) const { return x >= x0 && x <= back(); }

    // Bracketing cell for tent interpolation/deposition; frac in [0,1].
    struct Cell { int i; double frac; };
    Cell locate(double x) const {
        double s = (x - x0) / dx;
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, n - 2);
        return {i, s - static_cast<double>(i)};
    }
};

inline double lerp(double a, double b, double t) { return a + (b - a) * t; }

inline double interp(const UniformGrid& g, const std::vector<double>& v, double x) {
    if (g.n == 0) return 0.0;
    if (x <= g.x0) return v.front();
    if (x >= g.back()) return v.back();
    auto c = g.locate(x);
    return lerp(v[c.i], v[c.i + 1], c.frac);
}

inline double trapezoid(const UniformGrid& g, const std::vector<double>& v) {
    double s = 0.0;
    for (int i = 0; i + 1 < g.n; ++i) s += v[i] + v[i + 1];
    return 0.5 * g.dx * s;
}

/// In-place cumulative trapezoid with out[0] = 0.
inline void cumulative_trapezoid(const UniformGrid& g, const std::vector<double>& v,
                                 std::vector<double>& out) {
    out.assign(v.size(), 0.0);
    for (size_t i = 1; i < v.size(); ++i)
        out[i] = out[i - 1] + 0.5 * g.dx * (v[i - 1] + v[i]);
}

/// Composite Simpson on [a,b]; n_panels rounded up to even.
template <class F>
double simpson(F&& f, double a, double b, int n_panels) {
    if (b <= a) return 0.0;
    if (n_panels % 2) ++n_panels;
    const double h = (b - a) / n_panels;
    double s = f(a) + f(b);
    for (int i = 1; i < n_panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline void require_finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite value in " + what);
}

/// Deterministic parallel loop: fixed-size chunks, results independent of
/// worker count. body(begin, end, chunk_index) must not touch shared state
/// except through per-chunk slots.
inline constexpr size_t kChunk = 4096;

inline size_t chunk_count(size_t n) { return (n + kChunk - 1) / kChunk; }

template <class Body>
void parallel_chunks(size_t n, int threads, Body&& body) {
    const size_t nchunks = chunk_count(n);
    if (threads <= 1 || nchunks <= 1) {
        for (size_t c = 0; c < nchunks; ++c)
            body(c * kChunk, std::min(n, (c + 1) * kChunk), c);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mtx;
    auto worker = [&] {
        for (;;) {
            size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            try {
                body(c * kChunk, std::min(n, (c + 1) * kChunk), c);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mtx);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    int nt = std::min<int>(threads, static_cast<int>(nchunks));
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace hvm

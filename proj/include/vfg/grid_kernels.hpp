#pragma once
#include <functional>
#include <vector>

namespace vfg::kernels {

using GridFn = std::function<double(double, double)>;

/// Row-major values f(xs[i], ys[j]) at index i * ys.size() + j. Reference implementation.
std::vector<double> evaluate_grid_serial(const GridFn& f, const std::vector<double>& xs,
                                         const std::vector<double>& ys);
/// Same values as evaluate_grid_serial, cells distributed over OpenMP threads.
std::vector<double> evaluate_grid_parallel(const GridFn& f, const std::vector<double>& xs,
                                           const std::vector<double>& ys);

inline std::vector<double> evaluate_grid(const GridFn& f, const std::vector<double>& xs,
                                         const std::vector<double>& ys, bool parallel) {
    return parallel ? evaluate_grid_parallel(f, xs, ys) : evaluate_grid_serial(f, xs, ys);
}

/// n equally spaced points on [lo, hi]; a single point sits at lo when n == 1.
std::vector<double> linspace(double lo, double hi, int n);

int max_threads();

}  // namespace vfg::kernels

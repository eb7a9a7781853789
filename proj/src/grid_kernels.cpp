#include "vfg/grid_kernels.hpp"

#include <exception>

#include <omp.h>

namespace vfg::kernels {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(static_cast<size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return out;
}

std::vector<double> evaluate_grid_serial(const GridFn& f, const std::vector<double>& xs,
                                         const std::vector<double>& ys) {
    std::vector<double> out(xs.size() * ys.size());
    for (size_t i = 0; i < xs.size(); ++i)
        for (size_t j = 0; j < ys.size(); ++j) out[i * ys.size() + j] = f(xs[i], ys[j]);
    return out;
}

std::vector<double> evaluate_grid_parallel(const GridFn& f, const std::vector<double>& xs,
                                           const std::vector<double>& ys) {
    const long nx = static_cast<long>(xs.size()), ny = static_cast<long>(ys.size());
    std::vector<double> out(static_cast<size_t>(nx * ny));
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic, 16)
    for (long k = 0; k < nx * ny; ++k) {
        try {
            out[static_cast<size_t>(k)] = f(xs[static_cast<size_t>(k / ny)], ys[static_cast<size_t>(k % ny)]);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace vfg::kernels

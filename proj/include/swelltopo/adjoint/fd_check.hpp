#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "swelltopo/io.hpp"

namespace swelltopo {

struct FdRow {
    double h = 0;
    int index = 0;
    double adjoint = 0;
    double fd = 0;
    double rel_error = 0;
};

struct FdReport {
    std::vector<FdRow> rows;
    std::vector<int> indices;
    std::vector<double> best_error; // per checked index, minimum over the step sweep
    double worst_best_error = 0;
};

inline std::vector<double> default_fd_steps() { return {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}; }

inline double relative_error(double a, double b) {
    const double d = std::max(std::abs(a), std::abs(b));
    return d == 0.0 ? 0.0 : std::abs(a - b) / d;
}

/// count distinct parameter indices drawn with a seeded generator, sorted.
inline std::vector<int> pick_indices(int num_params, int count, std::uint64_t seed) {
    std::vector<int> all(num_params);
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(count, num_params));
    std::sort(all.begin(), all.end());
    return all;
}

/// Central differences of loss around w for each index and step, where a
/// step h is scaled by max(1, |w_k|). The loss is re-evaluated from scratch.
inline FdReport fd_check(const std::function<double(const std::vector<double>&)>& loss, const std::vector<double>& w,
                         const std::vector<double>& adjoint, const std::vector<int>& indices,
                         const std::vector<double>& steps = default_fd_steps()) {
    FdReport rep;
    rep.indices = indices;
    std::vector<double> wk = w;
    for (int k : indices) {
        double best = std::numeric_limits<double>::infinity();
        for (double step : steps) {
            const double h = step * std::max(1.0, std::abs(w[k]));
            wk[k] = w[k] + h;
            const double fp = loss(wk);
            wk[k] = w[k] - h;
            const double fm = loss(wk);
            wk[k] = w[k];
            FdRow row{h, k, adjoint[k], (fp - fm) / (2.0 * h), 0.0};
            row.rel_error = relative_error(row.adjoint, row.fd);
            best = std::min(best, row.rel_error);
            rep.rows.push_back(row);
        }
        rep.best_error.push_back(best);
        rep.worst_best_error = std::max(rep.worst_best_error, best);
    }
    return rep;
}

inline std::string fd_report_csv(const FdReport& rep) {
    std::ostringstream os;
    os << "h,index,adjoint,fd,rel_error\n";
    for (const auto& r : rep.rows)
        os << format_double(r.h) << ',' << r.index << ',' << format_double(r.adjoint) << ',' << format_double(r.fd)
           << ',' << format_double(r.rel_error) << '\n';
    return os.str();
}

} // namespace swelltopo

#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <doctest.h>

#include "glu/autodiff.hpp"
#include "glu/dataio.hpp"
#include "glu/nn.hpp"

namespace test {

inline glu::Mat random_mat(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    glu::Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
    return m;
}

inline double max_abs_diff(const glu::Mat& a, const glu::Mat& b) {
    REQUIRE(a.same_shape(b));
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central-difference gradient of f with respect to every entry of x.
inline glu::Mat numeric_grad(const std::function<double(const glu::Mat&)>& f, glu::Mat x, double h = 1e-6) {
    glu::Mat g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double o = x[i];
        x[i] = o + h;
        const double fp = f(x);
        x[i] = o - h;
        const double fm = f(x);
        x[i] = o;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

// Small dataset with a smooth two-channel field on an n x n grid over [-1,1]^2.
inline glu::dataio::FieldDataset toy_dataset(std::size_t n = 12, std::size_t n_cases = 3, std::size_t n_t = 6,
                                             std::uint64_t seed = 1) {
    glu::dataio::FieldDataset ds;
    ds.n_cases = n_cases, ds.n_t = n_t, ds.n_p = n * n, ds.n_c = 2, ds.n_d = 2;
    ds.grid_shape = {n, n};
    ds.channel_names = {"a", "b"};
    ds.coords.resize(ds.n_p * 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            ds.coords[(i * n + j) * 2] = float(-1.0 + 2.0 * double(j) / double(n - 1));
            ds.coords[(i * n + j) * 2 + 1] = float(-1.0 + 2.0 * double(i) / double(n - 1));
        }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 6.28);
    ds.fields.resize(n_cases * n_t * ds.n_p * 2);
    for (std::size_t c = 0; c < n_cases; ++c) {
        const double p0 = u(rng), p1 = u(rng);
        for (std::size_t t = 0; t < n_t; ++t)
            for (std::size_t p = 0; p < ds.n_p; ++p) {
                const double x = ds.coords[p * 2], y = ds.coords[p * 2 + 1];
                ds.fields[ds.index(c, t, p, 0)] = float(std::sin(2.0 * x + p0 + 0.2 * double(t)) * std::cos(1.5 * y));
                ds.fields[ds.index(c, t, p, 1)] = float(0.5 * std::cos(x - y + p1 - 0.1 * double(t)));
            }
    }
    ds.normalized = true;
    ds.norm.mean = {0.0, 0.0};
    ds.norm.stddev = {1.0, 1.0};
    ds.norm.coord_min = {-1.0, -1.0};
    ds.norm.coord_max = {1.0, 1.0};
    ds.train_frac = 0.67;
    return ds;
}

}  // namespace test

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace phiharm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;

enum class ErrorKind {
    DegenerateFrame,
    NotHypersurface,
    NonConvergence,
    DimensionTooSmall,
    RepresentationUnsupported,
    GeodesicIntegrationFailure,
    NotPhiHarmonic,
    ProjectionDivergence,
    NoDescentDirection,
    StalledDecay,
    StepUnderflow,
    ConfigParse,
    FileIO,
    InvalidArgument,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::DegenerateFrame: return "DegenerateFrame";
        case ErrorKind::NotHypersurface: return "NotHypersurface";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
        case ErrorKind::RepresentationUnsupported: return "RepresentationUnsupported";
        case ErrorKind::GeodesicIntegrationFailure: return "GeodesicIntegrationFailure";
        case ErrorKind::NotPhiHarmonic: return "NotPhiHarmonic";
        case ErrorKind::ProjectionDivergence: return "ProjectionDivergence";
        case ErrorKind::NoDescentDirection: return "NoDescentDirection";
        case ErrorKind::StalledDecay: return "StalledDecay";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::ConfigParse: return "ConfigParse";
        case ErrorKind::FileIO: return "FileIO";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Deterministic uniform doubles; std distributions differ between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }
    Vec normal_vec(int n) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = normal();
        return x;
    }
    Vec unit_vec(int n) {
        Vec x;
        do { x = normal_vec(n); } while (x.norm() < 1e-12);
        return x / x.norm();
    }
    Mat orthogonal(int n) {
        Mat g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) = normal();
        Eigen::HouseholderQR<Mat> qr(g);
        Mat q = qr.householderQ();
        Mat r = qr.matrixQR();
        for (int j = 0; j < n; ++j)
            if (r(j, j) < 0) q.col(j) = -q.col(j);
        return q;
    }
    std::uint64_t next() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Pairwise summation; the grouping depends only on the length so results are bit-stable.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

inline int& thread_cap() {
    static int cap = 1;
    return cap;
}

inline void set_threads(int n) { thread_cap() = std::max(1, n); }

// Runs f(i) for i in [0, n). Each index writes its own slot, so output order never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    int t = std::min<int>(thread_cap(), static_cast<int>(n));
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(t);
    for (int w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += t) f(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

template <class F>
std::vector<double> map_nodes(std::size_t n, F&& f) {
    std::vector<double> out(n, 0.0);
    parallel_for(n, [&](std::size_t i) { out[i] = f(i); });
    return out;
}

namespace fd {

// Central difference with one Richardson level: (4 D(h/2) - D(h)) / 3.
template <class F>
auto richardson_d1(F&& f, double h) {
    auto d = [&](double s) { return ((f(s) - f(-s)) / (2.0 * s)).eval(); };
    auto dh = d(h);
    auto dh2 = d(0.5 * h);
    return ((4.0 * dh2 - dh) / 3.0).eval();
}

template <class F>
double richardson_d1_scalar(F&& f, double h) {
    auto d = [&](double s) { return (f(s) - f(-s)) / (2.0 * s); };
    return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

// Five-point stencils with values at t = -2h, -h, 0, h, 2h.
inline double d1_5pt(const double v[5], double h) { return (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h); }
inline double d2_5pt(const double v[5], double h) {
    return (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
}
inline double d3_5pt(const double v[5], double h) { return (-v[0] + 2.0 * v[1] - 2.0 * v[3] + v[4]) / (2.0 * h * h * h); }

inline double step_for(double param) { return 1e-5 * (1.0 + std::abs(param)); }

}  // namespace fd

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline Vec sorted_eigenvalues(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

}  // namespace phiharm

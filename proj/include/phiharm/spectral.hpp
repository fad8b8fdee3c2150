#pragma once

#include "ssu.hpp"

#include <array>
#include <map>
#include <memory>

namespace phiharm {

struct SpectrumModel {
    int dim = 0;
    double einstein_c = 0.0;
    int isometry_dim = 0;
    std::vector<std::pair<double, int>> eigenpairs;  // (lambda, multiplicity), ascending, lambda > 0

    double scal() const { return dim * einstein_c; }
    double lambda1() const {
        if (eigenpairs.empty()) throw Error(ErrorKind::InvalidArgument, "empty spectrum");
        return eigenpairs.front().first;
    }
    void validate() const {
        if (dim < 1) throw Error(ErrorKind::InvalidArgument, "dim must be positive");
        if (isometry_dim < 0) throw Error(ErrorKind::InvalidArgument, "isometry_dim must be >= 0");
        for (std::size_t i = 0; i < eigenpairs.size(); ++i) {
            if (!(eigenpairs[i].first > 0.0)) throw Error(ErrorKind::InvalidArgument, "eigenvalues must be positive");
            if (eigenpairs[i].second < 1) throw Error(ErrorKind::InvalidArgument, "multiplicities must be >= 1");
            if (i > 0 && !(eigenpairs[i].first > eigenpairs[i - 1].first))
                throw Error(ErrorKind::InvalidArgument, "eigenvalues must be strictly increasing");
        }
    }
};

inline long long binomial(long long n, long long k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long long r = 1;
    for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// harmonic homogeneous polynomials of degree k in n+1 variables
inline long long harmonic_dim(int n, int k) { return binomial(n + k, k) - binomial(n + k - 2, k - 2); }

namespace detail {

inline void monomials(int vars, int deg, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == vars - 1) {
        cur.push_back(deg);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int d = deg; d >= 0; --d) {
        cur.push_back(d);
        monomials(vars, deg - d, cur, out);
        cur.pop_back();
    }
}

}  // namespace detail

// dim ker(Laplacian: P_k -> P_{k-2}) on homogeneous polynomials in n+1 variables, by numeric rank
inline int harmonic_dim_by_rank(int n, int k) {
    int vars = n + 1;
    std::vector<std::vector<int>> src, dst;
    std::vector<int> cur;
    detail::monomials(vars, k, cur, src);
    if (k < 2) return static_cast<int>(src.size());
    detail::monomials(vars, k - 2, cur, dst);
    std::map<std::vector<int>, int> row;
    for (std::size_t i = 0; i < dst.size(); ++i) row[dst[i]] = static_cast<int>(i);
    Mat lap = Mat::Zero(dst.size(), src.size());
    for (std::size_t c = 0; c < src.size(); ++c)
        for (int v = 0; v < vars; ++v) {
            int a = src[c][v];
            if (a < 2) continue;
            auto t = src[c];
            t[v] -= 2;
            lap(row.at(t), c) += a * (a - 1.0);
        }
    Eigen::FullPivLU<Mat> lu(lap);
    return static_cast<int>(src.size()) - static_cast<int>(lu.rank());
}

inline SpectrumModel sphere_spectrum(int n, int k_max) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "sphere dimension must be >= 1");
    SpectrumModel s;
    s.dim = n;
    s.einstein_c = n - 1.0;
    s.isometry_dim = n * (n + 1) / 2;
    for (int k = 1; k <= k_max; ++k) s.eigenpairs.push_back({double(k) * (k + n - 1), static_cast<int>(harmonic_dim(n, k))});
    return s;
}

inline bool phi_unstable_criterion(const SpectrumModel& s) { return s.lambda1() < 4.0 / (3.0 * s.dim) * s.scal(); }

struct IndexNullity {
    int index = 0;
    int nullity = 0;
    double threshold = 0.0;
};

inline constexpr double kThresholdTol = 1e-12;

inline IndexNullity count_below(const SpectrumModel& s, double r) {
    s.validate();
    IndexNullity out;
    out.threshold = r;
    out.nullity = s.isometry_dim;
    for (const auto& [lam, mult] : s.eigenpairs) {
        if (std::abs(lam - r) <= kThresholdTol)
            out.nullity += mult;
        else if (lam < r)
            out.index += mult;
    }
    return out;
}

inline IndexNullity phi_index_nullity(const SpectrumModel& s) { return count_below(s, 4.0 * s.einstein_c / 3.0); }

inline IndexNullity p_index_nullity(const SpectrumModel& s, double p) {
    if (!(p > 1.0)) throw Error(ErrorKind::InvalidArgument, "p must exceed 1");
    double r = std::isinf(p) ? 0.0 : 2.0 * s.dim * s.einstein_c / (s.dim + p - 2.0);
    return count_below(s, r);
}

// ---- vector fields ------------------------------------------------------------------------

enum class FieldKind { Killing, ConformalGradient, EigenGradient, Custom };

inline const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::Killing: return "killing";
        case FieldKind::ConformalGradient: return "conformal_gradient";
        case FieldKind::EigenGradient: return "eigen_gradient";
        case FieldKind::Custom: return "custom";
    }
    return "";
}

struct VectorFieldOnManifold {
    FieldKind kind = FieldKind::Custom;
    std::string label;
    std::function<Vec(const Vec&)> value;      // ambient tangent vector at an ambient point
    std::function<Mat(const Vec&)> jacobian;   // optional ambient derivative of the extension

    Vec evaluate(const FramedPoint& fp) const { return value(fp.position); }
};

inline VectorFieldOnManifold killing_field(int q, int i, int j) {
    Mat a = Mat::Zero(q, q);
    a(i, j) = 1.0;
    a(j, i) = -1.0;
    return {FieldKind::Killing, "killing(" + std::to_string(i) + "," + std::to_string(j) + ")",
            [a](const Vec& x) { return Vec(a * x); }, [a](const Vec&) { return a; }};
}

// gradient of x -> <a, x> on the unit sphere
inline VectorFieldOnManifold conformal_field(const Vec& a) {
    return {FieldKind::ConformalGradient, "conformal",
            [a](const Vec& x) { return Vec(a - a.dot(x) * x); },
            [a](const Vec& x) {
                int q = static_cast<int>(x.size());
                return Mat(-a.dot(x) * Mat::Identity(q, q) - x * a.transpose());
            }};
}

// gradient of a degree-1 (a) or degree-2 (traceless symmetric s) spherical harmonic
inline VectorFieldOnManifold eigen_gradient_linear(const Vec& a) {
    auto f = conformal_field(a);
    f.kind = FieldKind::EigenGradient;
    f.label = "eigen_gradient(1)";
    return f;
}

inline VectorFieldOnManifold eigen_gradient_quadratic(const Mat& s) {
    return {FieldKind::EigenGradient, "eigen_gradient(2)",
            [s](const Vec& x) { return Vec(2.0 * s * x - 2.0 * x.dot(s * x) * x); },
            [s](const Vec& x) {
                int q = static_cast<int>(x.size());
                return Mat(2.0 * s - 2.0 * x.dot(s * x) * Mat::Identity(q, q) - 4.0 * x * (s * x).transpose());
            }};
}

// Tangential projection of a raw ambient field; derivatives come from finite differences.
inline VectorFieldOnManifold projected_field(std::shared_ptr<const ImmersionChart> c, std::function<Vec(const Vec&)> raw,
                                             std::string label = "custom") {
    return {FieldKind::Custom, std::move(label),
            [c, raw](const Vec& x) {
                if (c->kind == ChartKind::Sphere) return Vec(raw(x) - raw(x).dot(x) * x);
                return Vec(ambient_frame(*c, x).proj * raw(x));
            },
            nullptr};
}

// sum_k a_k sin(<w_k, x> + phase_k), seeded
inline VectorFieldOnManifold random_trig_field(std::shared_ptr<const ImmersionChart> c, Rng& rng, int terms = 3,
                                               double freq = 1.0) {
    int q = c->q;
    std::vector<Vec> w, amp;
    std::vector<double> ph;
    for (int k = 0; k < terms; ++k) {
        w.push_back(freq * rng.normal_vec(q));
        amp.push_back(rng.normal_vec(q));
        ph.push_back(rng.uniform(0.0, 2.0 * kPi));
    }
    auto raw = [w, amp, ph](const Vec& x) {
        Vec out = Vec::Zero(x.size());
        for (std::size_t k = 0; k < w.size(); ++k) out += std::sin(w[k].dot(x) + ph[k]) * amp[k];
        return out;
    };
    return projected_field(std::move(c), raw, "trig");
}

// ---- Hessian quadratic form of the identity ------------------------------------------------

struct HessianForms {
    double grad_form = 0.0;       // 2|grad v|^2 - v(div v) - 2 Ric(v,v)
    double lie_form = 0.0;        // |L_v g|^2 + v(div v)
    double codiff_form = 0.0;     // 2|grad v|^2 + (div v)^2 - 2 Ric(v,v)
    double laplace_form = 0.0;    // -2<Lap v, v> - v(div v) - 4 Ric(v,v)
    double scale = 0.0;
    double div_sq = 0.0;          // int (div v)^2
    double v_sq = 0.0;            // int |v|^2

    std::array<double, 4> values() const { return {grad_form, lie_form, codiff_form, laplace_form}; }
    double spread() const {
        auto v = values();
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return (*hi - *lo) / std::max(scale, 1e-300);
    }
};

struct HessianOptions {
    bool second_derivatives = true;  // off: only the codifferential form and first-derivative quantities
    double h = 1e-3;
};

namespace detail {

struct LocalField {
    Vec v;
    Mat grad;  // q x m, columns nabla_{e_i} v
    Mat e;
    Mat rinv;
    Mat proj;
};

inline LocalField local_field(const ImmersionChart& c, const VectorFieldOnManifold& f, const Vec& p, double h) {
    LocalField lf;
    Mat j = chart_jacobian(c, p);
    Eigen::HouseholderQR<Mat> qr(j);
    Mat qfull = qr.householderQ();
    int m = c.n;
    lf.e = qfull.leftCols(m);
    Mat r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    for (int a = 0; a < m; ++a)
        if (r(a, a) < 0) {
            r.row(a) *= -1.0;
            lf.e.col(a) *= -1.0;
        }
    lf.rinv = r.triangularView<Eigen::Upper>().solve(Mat::Identity(m, m));
    lf.proj = lf.e * lf.e.transpose();
    Vec x = c.eval(p);
    lf.v = f.value(x);
    Mat d;
    if (f.jacobian) {
        d = f.jacobian(x) * lf.e;
    } else {
        Mat dp(c.q, m);
        for (int a = 0; a < m; ++a) {
            std::array<Vec, 5> vs;
            for (int s = 0; s < 5; ++s) {
                if (s == 2) continue;
                Vec ps = p;
                ps[a] += (s - 2) * h;
                vs[s] = f.value(c.eval(ps));
            }
            dp.col(a) = (vs[0] - 8.0 * vs[1] + 8.0 * vs[3] - vs[4]) / (12.0 * h);
        }
        d = dp * lf.rinv;
    }
    lf.grad = lf.proj * d;
    return lf;
}

}  // namespace detail

inline HessianForms hessian_quadratic_form(const ImmersionChart& c, const QuadratureSet& quad, const VectorFieldOnManifold& f,
                                           const HessianOptions& opt = {}) {
    std::size_t n = quad.size();
    int m = c.n;
    std::vector<std::array<double, 7>> rows(n);
    parallel_for(n, [&](std::size_t i) {
        const auto& fp = quad.points[i];
        auto lf = detail::local_field(c, f, fp.params, opt.h);
        Mat g = lf.e.transpose() * lf.grad;  // g(j, i) = <nabla_{e_i} v, e_j>
        Vec vf = lf.e.transpose() * lf.v;
        Mat ric = gauss_ricci(fp);
        double ricvv = vf.dot(ric * vf);
        double grad2 = g.squaredNorm();
        double div = g.trace();
        double lie2 = (g + g.transpose()).squaredNorm();
        double vdiv = 0.0, lapv = 0.0;
        if (opt.second_derivatives) {
            Vec ddiv(m);
            Mat dual = lf.e * lf.rinv.transpose();  // column a is the dual of d/dp_a
            Vec lap = Vec::Zero(c.q);
            for (int a = 0; a < m; ++a) {
                double dv[5];
                std::array<Mat, 5> w;
                for (int s = 0; s < 5; ++s) {
                    if (s == 2) continue;
                    Vec ps = fp.params;
                    ps[a] += (s - 2) * opt.h;
                    auto l2 = detail::local_field(c, f, ps, opt.h);
                    dv[s] = (l2.e.transpose() * l2.grad).trace();
                    w[s] = l2.grad * l2.e.transpose();
                }
                dv[2] = 0.0;
                ddiv[a] = fd::d1_5pt(dv, opt.h);
                Mat dw = (w[0] - 8.0 * w[1] + 8.0 * w[3] - w[4]) / (12.0 * opt.h);
                lap += dw * dual.col(a);
            }
            lap = lf.proj * lap;
            vdiv = ddiv.dot(lf.rinv * vf);
            // Lap-bar v = rough Laplacian - Ric(v)
            Vec bar = lap - lf.e * (ric * vf);
            lapv = bar.dot(lf.v);
        }
        rows[i] = {2.0 * grad2 - vdiv - 2.0 * ricvv,
                   lie2 + vdiv,
                   2.0 * grad2 + div * div - 2.0 * ricvv,
                   -2.0 * lapv - vdiv - 4.0 * ricvv,
                   2.0 * grad2 + std::abs(vdiv) + 2.0 * std::abs(ricvv),
                   div * div,
                   vf.squaredNorm()};
    });
    auto col = [&](int k) { return quad.integrate([&](std::size_t i) { return rows[i][k]; }); };
    HessianForms h;
    h.codiff_form = col(2);
    h.scale = col(4);
    h.div_sq = col(5);
    h.v_sq = col(6);
    if (opt.second_derivatives) {
        h.grad_form = col(0);
        h.lie_form = col(1);
        h.laplace_form = col(3);
    } else {
        h.grad_form = h.lie_form = h.laplace_form = h.codiff_form;
    }
    return h;
}

// Small Gauss product grid on S^n: integrates polynomials of degree <= 3 exactly.
inline std::vector<int> witness_resolution(int n) {
    std::vector<int> res(n, 2);
    res[0] = 4;
    res[n - 1] = 4;
    if (n == 1) res[0] = 8;
    return res;
}

struct SphereTableRow {
    int n = 0;
    bool ssu = false;        // (A)
    bool unstable = false;   // (D)
    double phi_conformal = 0.0;
    double scale = 0.0;
    bool negative = false;   // (C) witness
    bool consistent() const { return ssu == unstable && unstable == negative; }
};

inline constexpr double kWitnessTol = 1e-6;

inline SphereTableRow sphere_table_row(int n) {
    SphereTableRow r;
    r.n = n;
    auto chart = sphere_chart(n);
    auto quad = build_quadrature(chart, witness_resolution(n));
    r.ssu = check_phi_ssu(quad.points).is_ssu;
    r.unstable = phi_unstable_criterion(sphere_spectrum(n, 2));
    auto h = hessian_quadratic_form(chart, quad, conformal_field(Vec::Unit(n + 1, 0)), {false, 1e-3});
    r.phi_conformal = h.codiff_form;
    r.scale = h.scale;
    r.negative = h.codiff_form < -kWitnessTol * h.scale;
    return r;
}

inline std::vector<SphereTableRow> sphere_equivalence_table(int n_lo, int n_hi) {
    if (n_lo < 2 || n_hi < n_lo) throw Error(ErrorKind::InvalidArgument, "dims must satisfy 2 <= lo <= hi");
    std::vector<SphereTableRow> out;
    for (int n = n_lo; n <= n_hi; ++n) out.push_back(sphere_table_row(n));
    return out;
}

}  // namespace phiharm

#pragma once

// Pruning by edge norm, symbolic fitting of surviving edges to
// c * f(a x + b) + d, and report rendering.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "itfkan/model.hpp"

namespace itfkan {

// ---------------------------------------------------------------------------
// Pruning

struct PruneRow {
    std::string network;
    std::string layer;  // "0", "1", or "-" for an aggregate
    std::size_t pruned = 0;
    std::size_t preserved = 0;
    std::size_t total = 0;

    double ratio() const { return total ? static_cast<double>(pruned) / static_cast<double>(total) : 0.0; }
};

struct PruneReport {
    double tau = 0.0;
    std::vector<PruneRow> rows;

    std::size_t preserved() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.preserved;
        return n;
    }
};

/// Counts over the adjustable (non-injected) slots of a layer.
inline PruneRow layer_counts(const TaylorKanLayer& layer) {
    PruneRow r;
    for (std::size_t s = 0; s < layer.total_edges(); ++s) {
        if (layer.fixed[s]) continue;
        ++r.total;
        if (layer.mask.data()[s] != 0.0) ++r.preserved;
    }
    r.pruned = r.total - r.preserved;
    return r;
}

/// Disables every live Taylor edge whose norm is below tau. Injected edges
/// are exempt.
inline void prune_layer(TaylorKanLayer& layer, double tau) {
    const auto norms = taylor_edge_norms(layer);
    for (std::size_t j = 0; j < layer.out_dim; ++j)
        for (std::size_t i = 0; i < layer.in_dim; ++i) {
            const auto s = layer.slot(j, i);
            if (!layer.fixed[s] && layer.mask.data()[s] != 0.0 && norms[s] < tau) layer.disable(j, i);
        }
}

inline PruneReport prune_report(const ForecastModel& model) {
    PruneReport rep;
    auto add_net = [&rep](const std::string& name, const KanNetwork& net) {
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            auto r = layer_counts(net.layers[k]);
            r.network = name;
            r.layer = std::to_string(k);
            rep.rows.push_back(r);
        }
    };
    add_net("TrendKAN", model.trend_kan);
    add_net("SeasonalKAN", model.seasonal_kan);
    PruneRow tf{"TFKAN", "-", 0, 0, 0};
    for (const auto& net : model.tf.kans)
        for (const auto& l : net.layers) {
            auto r = layer_counts(l);
            tf.pruned += r.pruned;
            tf.preserved += r.preserved;
            tf.total += r.total;
        }
    rep.rows.push_back(tf);
    return rep;
}

inline PruneReport prune(ForecastModel& model, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("prune: tau must be >= 0");
    for (auto& [name, net] : model.networks())
        for (auto& l : net->layers) prune_layer(l, tau);
    auto rep = prune_report(model);
    rep.tau = tau;
    return rep;
}

inline std::string render_prune_report(const PruneReport& rep) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "tau=%g\n%-12s %-5s %10s %10s %10s %8s\n", rep.tau, "network", "layer", "pruned", "preserved",
                  "total", "ratio");
    out += buf;
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "%-12s %-5s %10zu %10zu %10zu %7.2f%%\n", r.network.c_str(), r.layer.c_str(), r.pruned,
                      r.preserved, r.total, 100.0 * r.ratio());
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Symbolic library

enum class Family { Constant, Identity, Square, Cube, Exp, Gaussian, Silu, Sin, Cos };

inline constexpr std::array<Family, 9> kAllFamilies = {Family::Constant, Family::Identity, Family::Square,
                                                       Family::Cube,     Family::Exp,      Family::Gaussian,
                                                       Family::Silu,     Family::Sin,      Family::Cos};

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Constant: return "constant";
        case Family::Identity: return "x";
        case Family::Square: return "x^2";
        case Family::Cube: return "x^3";
        case Family::Exp: return "exp";
        case Family::Gaussian: return "gaussian";
        case Family::Silu: return "silu";
        case Family::Sin: return "sin";
        case Family::Cos: return "cos";
    }
    return "?";
}

inline Family parse_family(const std::string& s) {
    for (auto f : kAllFamilies)
        if (s == family_name(f)) return f;
    throw std::invalid_argument("unknown symbolic family '" + s + "'");
}

inline double family_eval(Family f, double u) {
    switch (f) {
        case Family::Constant: return 0.0;
        case Family::Identity: return u;
        case Family::Square: return u * u;
        case Family::Cube: return u * u * u;
        case Family::Exp: return std::exp(std::min(u, 700.0));
        case Family::Gaussian: return std::exp(-u * u);
        case Family::Silu: return u / (1.0 + std::exp(-u));
        case Family::Sin: return std::sin(u);
        case Family::Cos: return std::cos(u);
    }
    return 0.0;
}

/// d/du of family_eval.
inline double family_derivative(Family f, double u) {
    switch (f) {
        case Family::Constant: return 0.0;
        case Family::Identity: return 1.0;
        case Family::Square: return 2.0 * u;
        case Family::Cube: return 3.0 * u * u;
        case Family::Exp: return u > 700.0 ? 0.0 : std::exp(u);
        case Family::Gaussian: return -2.0 * u * std::exp(-u * u);
        case Family::Silu: {
            const double s = 1.0 / (1.0 + std::exp(-u));
            return s * (1.0 + u * (1.0 - s));
        }
        case Family::Sin: return std::cos(u);
        case Family::Cos: return -std::sin(u);
    }
    return 0.0;
}

struct SymbolicFit {
    Family family = Family::Constant;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    double r2 = 0.0;  // on held-out points, clamped at 0

    double eval(double x) const { return family == Family::Constant ? d : c * family_eval(family, a * x + b) + d; }
};

struct SymbolifyOptions {
    std::size_t samples = 64;
    std::size_t a_points = 41;  // per sign, log-spaced over [a_min, a_max]
    double a_min = 1e-2;
    double a_max = 1e1;
    std::size_t b_points = 41;
    std::size_t rounds = 3;            // coordinate-descent sweeps
    std::size_t polish_iterations = 100;  // Levenberg-Marquardt cap
    std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
};

/// Fit points: n evenly spaced over [lo, hi] inclusive.
inline std::vector<double> fit_points(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return x;
}

/// Held-out points: the n midpoints lo + (k + 1/2)(hi - lo)/n.
inline std::vector<double> holdout_points(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    return x;
}

/// 1 - SSres/SStot; 1 when both vanish, 0 when only SStot does.
inline double r_squared(const std::vector<double>& y, const std::vector<double>& pred) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        ss_res += (y[k] - pred[k]) * (y[k] - pred[k]);
        ss_tot += (y[k] - mean) * (y[k] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

namespace detail {

struct LinearFit {
    double c = 0.0, d = 0.0, ss_res = INFINITY;
};

/// Least-squares (c, d) for y ~ c u + d. The residual comes from the
/// centered moments, ss = syy - suy^2 / suu.
inline LinearFit least_squares(const std::vector<double>& u, const std::vector<double>& y, double y_mean, double syy) {
    const double n = static_cast<double>(u.size());
    double um = 0.0;
    for (double v : u) um += v;
    um /= n;
    double suu = 0.0, suy = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double du = u[k] - um;
        suu += du * du;
        suy += du * (y[k] - y_mean);
    }
    LinearFit f;
    if (!std::isfinite(suu) || !std::isfinite(suy)) return f;
    if (suu <= 1e-300 * std::max(1.0, um * um)) {
        f.d = y_mean;
        f.ss_res = syy;
        return f;
    }
    f.c = suy / suu;
    f.d = y_mean - f.c * um;
    f.ss_res = std::max(0.0, syy - f.c * suy);
    return f;
}

inline double residual_ss(Family fam, const std::vector<double>& t, const std::vector<double>& y, const std::array<double, 4>& p) {
    double ss = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double e = p[2] * family_eval(fam, p[0] * t[k] + p[1]) + p[3] - y[k];
        ss += e * e;
    }
    return std::isfinite(ss) ? ss : INFINITY;
}

/// Solves the 4x4 system m x = v by elimination with partial pivoting.
inline bool solve4(std::array<std::array<double, 4>, 4> m, std::array<double, 4> v, std::array<double, 4>& x) {
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (!(std::abs(m[piv][c]) > 0.0)) return false;
        std::swap(m[c], m[piv]);
        std::swap(v[c], v[piv]);
        for (int r = c + 1; r < 4; ++r) {
            const double f = m[r][c] / m[c][c];
            for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
            v[r] -= f * v[c];
        }
    }
    for (int r = 3; r >= 0; --r) {
        double acc = v[r];
        for (int k = r + 1; k < 4; ++k) acc -= m[r][k] * x[k];
        x[r] = acc / m[r][r];
    }
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]) && std::isfinite(x[3]);
}

/// Levenberg-Marquardt on y ~ c f(a t + beta) + d from p = (a, beta, c, d).
/// Only steps that lower the residual are taken.
inline std::array<double, 4> levenberg_marquardt(Family fam, const std::vector<double>& t, const std::vector<double>& y,
                                                 std::array<double, 4> p, std::size_t iterations, double syy) {
    double ss = residual_ss(fam, t, y, p);
    double mu = 1e-3;
    for (std::size_t it = 0; it < iterations && mu < 1e12; ++it) {
        std::array<std::array<double, 4>, 4> jtj{};
        std::array<double, 4> jtr{};
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double u = p[0] * t[k] + p[1];
            const double g = family_eval(fam, u), dg = p[2] * family_derivative(fam, u);
            const std::array<double, 4> j = {dg * t[k], dg, g, 1.0};
            const double r = p[2] * g + p[3] - y[k];
            for (int i = 0; i < 4; ++i) {
                jtr[i] -= j[i] * r;
                for (int m = 0; m < 4; ++m) jtj[i][m] += j[i] * j[m];
            }
        }
        bool stepped = false;
        while (mu < 1e12) {
            auto damped = jtj;
            for (int i = 0; i < 4; ++i) damped[i][i] += mu * std::max(jtj[i][i], 1e-300);
            std::array<double, 4> delta{};
            if (solve4(damped, jtr, delta)) {
                std::array<double, 4> q = {p[0] + delta[0], p[1] + delta[1], p[2] + delta[2], p[3] + delta[3]};
                const double ss_q = residual_ss(fam, t, y, q);
                if (ss_q < ss) {
                    const bool tiny = ss - ss_q <= 1e-15 * std::max(syy, 1e-300);
                    p = q;
                    ss = ss_q;
                    mu = std::max(mu / 3.0, 1e-12);
                    stepped = !tiny;
                    break;
                }
            }
            mu *= 4.0;
        }
        if (!stepped) break;
    }
    return p;
}

/// Golden-section minimization of g over [lo, hi].
inline double golden_min(const std::function<double(double)>& g, double lo, double hi, int iters = 40) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = g(x1), f2 = g(x2);
    for (int it = 0; it < iters; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = g(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

}  // namespace detail

/// Picks one representative among parameter sets that give the same
/// function: a > 0 where the family has a reflection symmetry, c > 0 and
/// b in (-pi, pi] for the periodic families, b = 0 for exp (absorbed into
/// c), and slope/intercept form for the identity.
inline void canonicalize(SymbolicFit& f) {
    switch (f.family) {
        case Family::Identity:
            f.d += f.c * f.b;
            f.c *= f.a;
            f.a = 1.0;
            f.b = 0.0;
            return;
        case Family::Exp:
            f.c *= std::exp(f.b);
            f.b = 0.0;
            return;
        case Family::Square:
        case Family::Gaussian:
        case Family::Cos:
            if (f.a < 0.0) {
                f.a = -f.a;
                f.b = -f.b;
            }
            break;
        case Family::Cube:
        case Family::Sin:
            if (f.a < 0.0) {
                f.a = -f.a;
                f.b = -f.b;
                f.c = -f.c;
            }
            break;
        default: return;
    }
    if (f.family == Family::Sin || f.family == Family::Cos) {
        if (f.c < 0.0) {
            f.c = -f.c;
            f.b += M_PI;
        }
        f.b = std::remainder(f.b, 2.0 * M_PI);
        if (f.b <= -M_PI) f.b += 2.0 * M_PI;
    }
}

/// Best (a, b, c, d) for one family. The search runs in (a, beta) with
/// beta = a * mid + b, the argument at the domain midpoint, which decouples
/// stretch from shift.
inline SymbolicFit fit_family(Family fam, const std::vector<double>& x, const std::vector<double>& y, double lo, double hi,
                              const SymbolifyOptions& opt) {
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(y.size());
    double syy = 0.0;
    for (double v : y) syy += (v - y_mean) * (v - y_mean);

    SymbolicFit best;
    best.family = fam;
    if (fam == Family::Constant) {
        best.d = y_mean;
        return best;
    }
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    std::vector<double> u(x.size());
    auto score = [&](double a, double beta) {
        for (std::size_t k = 0; k < x.size(); ++k) u[k] = family_eval(fam, a * (x[k] - mid) + beta);
        return detail::least_squares(u, y, y_mean, syy);
    };

    std::vector<double> a_grid;
    const double step = std::pow(opt.a_max / opt.a_min, 1.0 / static_cast<double>(opt.a_points - 1));
    for (std::size_t k = 0; k < opt.a_points; ++k) {
        const double a = opt.a_min * std::pow(step, static_cast<double>(k));
        a_grid.push_back(a);
        a_grid.push_back(-a);
    }
    auto beta_span = [&](double a) { return std::max(M_PI, 1.2 * std::abs(a) * half); };

    // Grid scores. exp(a t + beta) = e^beta exp(a t), so beta only rescales c
    // and the exp residual is scored at beta = 0; sin and cos reuse sin(a t)
    // and cos(a t) across the beta column via the angle-addition formulas.
    const bool periodic = fam == Family::Sin || fam == Family::Cos;
    std::vector<double> sa(x.size()), ca(x.size());
    auto grid_score = [&](double a, double beta) {
        if (!periodic) return score(a, beta).ss_res;
        const double sb = std::sin(beta), cb = std::cos(beta);
        for (std::size_t k = 0; k < x.size(); ++k)
            u[k] = fam == Family::Sin ? sa[k] * cb + ca[k] * sb : ca[k] * cb - sa[k] * sb;
        return detail::least_squares(u, y, y_mean, syy).ss_res;
    };
    double best_a = 1.0, best_beta = 0.0, best_ss = INFINITY;
    for (double a : a_grid) {
        if (periodic)
            for (std::size_t k = 0; k < x.size(); ++k) {
                sa[k] = std::sin(a * (x[k] - mid));
                ca[k] = std::cos(a * (x[k] - mid));
            }
        const double B = beta_span(a);
        for (std::size_t k = 0; k < opt.b_points; ++k) {
            const double beta = fam == Family::Exp ? 0.0 : -B + 2.0 * B * static_cast<double>(k) / static_cast<double>(opt.b_points - 1);
            const double ss = grid_score(a, beta);
            if (ss < best_ss) {
                best_ss = ss;
                best_a = a;
                best_beta = beta;
            }
            if (fam == Family::Exp) break;
        }
    }
    best_ss = score(best_a, best_beta).ss_res;

    // Coordinate descent over one grid cell around the incumbent, then a
    // Levenberg-Marquardt polish of all four parameters.
    const double a_width = std::abs(best_a) * (step - 1.0);
    const double b_width = 2.0 * beta_span(best_a) / static_cast<double>(opt.b_points - 1);
    for (std::size_t round = 0; round < opt.rounds; ++round) {
        const double beta_now = best_beta;
        const double a_next = detail::golden_min([&](double a) { return score(a, beta_now).ss_res; }, best_a - a_width, best_a + a_width);
        const double b_next =
            detail::golden_min([&](double b) { return score(a_next, b).ss_res; }, best_beta - b_width, best_beta + b_width);
        const double ss = score(a_next, b_next).ss_res;
        if (ss < best_ss) {
            best_a = a_next;
            best_beta = b_next;
            best_ss = ss;
        }
    }
    std::vector<double> t(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) t[k] = x[k] - mid;
    const auto start = score(best_a, best_beta);
    std::array<double, 4> p = {best_a, best_beta, start.c, start.d};
    if (opt.polish_iterations > 0) {
        const auto q = detail::levenberg_marquardt(fam, t, y, p, opt.polish_iterations, syy);
        if (detail::residual_ss(fam, t, y, q) < detail::residual_ss(fam, t, y, p)) p = q;
    }
    best_a = p[0];
    best_beta = p[1];
    const auto lin = score(best_a, best_beta);
    // Re-solving (c, d) exactly can only help, but keep the polished pair if
    // rounding says otherwise.
    if (detail::residual_ss(fam, t, y, {best_a, best_beta, lin.c, lin.d}) <= detail::residual_ss(fam, t, y, p)) {
        p[2] = lin.c;
        p[3] = lin.d;
    }
    best.a = best_a;
    best.b = best_beta - best_a * mid;
    best.c = p[2];
    best.d = p[3];
    canonicalize(best);
    return best;
}
/// Fits every library family to `fn` over [lo, hi] and returns the one with
/// the highest held-out R^2. Near-ties prefer the smaller |b|, then the
/// simpler family.
inline SymbolicFit symbolify_edge(const std::function<double(double)>& fn, double lo, double hi, const SymbolifyOptions& opt = {}) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("symbolify_edge: bad domain");
    if (opt.samples < 2 || opt.a_points < 2 || opt.b_points < 2) throw std::invalid_argument("symbolify_edge: grid too small");
    SymbolicFit constant;
    constant.family = Family::Constant;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
        constant.d = fn(lo);
        constant.r2 = 1.0;
        return constant;
    }
    const auto xs = fit_points(lo, hi, opt.samples), xh = holdout_points(lo, hi, opt.samples);
    std::vector<double> ys(xs.size()), yh(xh.size());
    for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = fn(xs[k]);
    for (std::size_t k = 0; k < xh.size(); ++k) yh[k] = fn(xh[k]);
    for (double v : ys)
        if (!std::isfinite(v)) throw std::domain_error("symbolify_edge: edge function is not finite on the domain");

    const double ymin = *std::min_element(ys.begin(), ys.end()), ymax = *std::max_element(ys.begin(), ys.end());
    if (ymax - ymin <= 1e-12 * std::max(1.0, std::abs(ymax))) {
        constant.d = ys.front();
        constant.r2 = 1.0;
        return constant;
    }

    constexpr double kTie = 1e-10;
    std::optional<SymbolicFit> best;
    std::vector<double> pred(xh.size());
    for (auto fam : opt.families) {
        auto fit = fit_family(fam, xs, ys, lo, hi, opt);
        for (std::size_t k = 0; k < xh.size(); ++k) pred[k] = fit.eval(xh[k]);
        const double r2 = r_squared(yh, pred);
        fit.r2 = std::isfinite(r2) ? std::max(0.0, r2) : 0.0;
        if (!best || fit.r2 > best->r2 + kTie || (fit.r2 > best->r2 - kTie && std::abs(fit.b) < std::abs(best->b) - 1e-9))
            best = fit;
    }
    return *best;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

inline bool rounds_to_zero(double v) { return fixed2(v) == "0.00"; }

inline std::string signed_term(double v) {
    const std::string s = fixed2(std::abs(v));
    return (v < 0.0 ? "-" : "+") + s;
}

}  // namespace detail

/// Two-decimal rendering of c*f(a*x+b)+d, e.g. "114.33sin(-0.02x-4.70)-114.31".
/// Zero offsets (to two decimals) are omitted.
inline std::string render_formula(const SymbolicFit& f) {
    using namespace detail;
    if (f.family == Family::Constant) return fixed2(f.d);
    std::string arg = fixed2(f.a) + "x";
    if (!rounds_to_zero(f.b)) arg += signed_term(f.b);
    std::string body;
    switch (f.family) {
        case Family::Identity: body = "(" + arg + ")"; break;
        case Family::Square: body = "(" + arg + ")^2"; break;
        case Family::Cube: body = "(" + arg + ")^3"; break;
        default: body = std::string(family_name(f.family)) + "(" + arg + ")"; break;
    }
    std::string out = fixed2(f.c) + body;
    if (!rounds_to_zero(f.d)) out += signed_term(f.d);
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct EdgeRecord {
    std::string network;
    std::size_t layer = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    bool injected = false;
    SymbolicFit fit;
    double l2norm = 0.0;
    bool highlight = false;
};

struct SymbolicReport {
    std::vector<EdgeRecord> edges;

    std::size_t taylor_rows() const {
        return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [](const EdgeRecord& e) { return !e.injected; }));
    }
};

struct ReportOptions {
    double tau = 5e-4;
    std::size_t top_m = 3;
    double range_padding = 0.1;
    SymbolifyOptions symbolify;
};

/// Scalar evaluation of a Taylor edge: w (silu(x) + a0 + a1 x + a2 x^2).
inline double taylor_edge_value(const TaylorKanLayer& l, std::size_t j, std::size_t i, double x) {
    const auto s = l.slot(j, i);
    const double silu_x = x / (1.0 + std::exp(-x));
    return l.weight.data()[s] * (silu_x + l.a0.data()[s] + l.a1.data()[s] * x + l.a2.data()[s] * x * x);
}

/// Injected terms in exact closed form: trend term k is m_k x^k (+ m_0 on
/// k = 1); seasonal term k is R cos(f pi x - psi) (+ a0/2 on the first).
inline std::vector<EdgeRecord> injected_records(const std::string& network, const TaylorKanLayer& l) {
    std::vector<EdgeRecord> out;
    for (std::size_t i = 0; i < l.in_dim; ++i) {
        if (l.trend) {
            const auto e = l.trend_edge(i);
            for (std::size_t k = 1; k <= l.trend->degree; ++k) {
                EdgeRecord r{network, 0, i, l.trend->output_of(k), true, {}, 0.0, false};
                r.fit.family = k == 1 ? Family::Identity : k == 2 ? Family::Square : Family::Cube;
                r.fit.a = 1.0;
                r.fit.c = e.m[k];
                r.fit.d = k == 1 ? e.m[0] : 0.0;
                r.fit.r2 = 1.0;
                r.l2norm = e.m[k] * e.m[k];
                out.push_back(r);
            }
        }
        if (l.seasonal) {
            const auto e = l.seasonal_edge(i);
            for (std::size_t k = 0; k < e.freqs.size(); ++k) {
                EdgeRecord r{network, 0, i, l.seasonal->outputs[k], true, {}, 0.0, false};
                r.fit.family = Family::Cos;
                r.fit.a = e.freqs[k] * M_PI;
                r.fit.b = -std::atan2(e.b[k], e.a[k]);
                r.fit.c = std::hypot(e.a[k], e.b[k]);
                r.fit.d = k == 0 ? e.a0 / 2.0 : 0.0;
                r.fit.r2 = 1.0;
                r.l2norm = (e.a[k] * e.a[k] + e.b[k] * e.b[k]) / 2.0;
                out.push_back(r);
            }
        }
    }
    return out;
}

namespace detail {

inline std::pair<double, double> padded_range(const std::vector<NodeRanges>* ranges, std::size_t layer, std::size_t i,
                                              double pad) {
    double lo = -1.0, hi = 1.0;
    if (ranges && layer < ranges->size() && i < (*ranges)[layer].lo.size()) {
        lo = (*ranges)[layer].lo[i];
        hi = (*ranges)[layer].hi[i];
    }
    const double w = hi - lo;
    return {lo - pad * w, hi + pad * w};
}

}  // namespace detail

/// Symbolic records for one network: every live Taylor edge (fitted over its
/// padded calibration range) and every injected term. Rows are ordered by
/// layer, then by descending norm; the top_m rows by norm are highlighted.
inline std::vector<EdgeRecord> symbolify_network(const std::string& name, const KanNetwork& net,
                                                 const std::vector<NodeRanges>* ranges, const ReportOptions& opt) {
    std::vector<EdgeRecord> rows;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        std::vector<EdgeRecord> layer_rows = injected_records(name, l);
        const auto norms = taylor_edge_norms(l);
        for (std::size_t j = 0; j < l.out_dim; ++j)
            for (std::size_t i = 0; i < l.in_dim; ++i) {
                if (!l.is_active(j, i)) continue;
                auto [lo, hi] = detail::padded_range(ranges, k, i, opt.range_padding);
                EdgeRecord r{name, k, i, j, false, {}, norms[l.slot(j, i)], false};
                r.fit = symbolify_edge([&](double x) { return taylor_edge_value(l, j, i, x); }, lo, hi, opt.symbolify);
                layer_rows.push_back(r);
            }
        std::stable_sort(layer_rows.begin(), layer_rows.end(),
                         [](const EdgeRecord& a, const EdgeRecord& b) { return a.l2norm > b.l2norm; });
        rows.insert(rows.end(), layer_rows.begin(), layer_rows.end());
    }
    std::vector<std::size_t> order(rows.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].l2norm > rows[b].l2norm; });
    for (std::size_t k = 0; k < std::min(opt.top_m, order.size()); ++k) rows[order[k]].highlight = true;
    return rows;
}

inline SymbolicReport symbolify_model(const ForecastModel& model, const ForwardTrace* trace, const ReportOptions& opt) {
    SymbolicReport rep;
    auto add = [&](const std::string& name, const KanNetwork& net, const std::vector<NodeRanges>* r) {
        auto rows = symbolify_network(name, net, r, opt);
        rep.edges.insert(rep.edges.end(), rows.begin(), rows.end());
    };
    add("TrendKAN", model.trend_kan, trace ? &trace->trend : nullptr);
    add("SeasonalKAN", model.seasonal_kan, trace ? &trace->seasonal : nullptr);
    for (std::size_t p = 0; p < model.tf.kans.size(); ++p)
        add("TFKAN_p" + std::to_string(p), model.tf.kans[p], trace && p < trace->tf.size() ? &trace->tf[p] : nullptr);
    return rep;
}

/// Table-style text: Layer, i, j, formula, L2 norm, R^2, with '*' on highlights.
inline std::string render_symbolic_report(const SymbolicReport& rep) {
    std::string out;
    std::string current;
    char buf[512];
    for (const auto& e : rep.edges) {
        if (e.network != current) {
            current = e.network;
            out += (out.empty() ? "" : "\n") + current + "\n";
            std::snprintf(buf, sizeof buf, "  %-5s %5s %5s  %-48s %12s %8s\n", "Layer", "i", "j", "Symbolic Formula", "L2 norm", "R2");
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%c %-5zu %5zu %5zu  %-48s %12.3e %8.4f%s\n", e.highlight ? '*' : ' ', e.layer, e.i, e.j,
                      render_formula(e.fit).c_str(), e.l2norm, e.fit.r2, e.injected ? "  (injected)" : "");
        out += buf;
    }
    return out;
}

/// One record per edge: layer, i, j, family, a, b, c, d, r2, l2norm.
inline std::string render_edge_table(const std::vector<EdgeRecord>& edges) {
    std::string out = "layer\ti\tj\tfamily\ta\tb\tc\td\tr2\tl2norm\n";
    char buf[512];
    for (const auto& e : edges) {
        std::snprintf(buf, sizeof buf, "%zu\t%zu\t%zu\t%s\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", e.layer, e.i, e.j,
                      family_name(e.fit.family), e.fit.a, e.fit.b, e.fit.c, e.fit.d, e.fit.r2, e.l2norm);
        out += buf;
    }
    return out;
}

/// Graph description for external plotting: one line per surviving edge.
inline std::string render_graph(const SymbolicReport& rep) {
    std::string out = "network\tlayer\tsource\ttarget\tl2norm\tkind\thighlight\n";
    char buf[256];
    for (const auto& e : rep.edges) {
        std::snprintf(buf, sizeof buf, "%s\t%zu\tL%zu.%zu\tL%zu.%zu\t%.17g\t%s\t%d\n", e.network.c_str(), e.layer, e.layer, e.i,
                      e.layer + 1, e.j, e.l2norm, e.injected ? "injected" : "taylor", e.highlight ? 1 : 0);
        out += buf;
    }
    return out;
}

}  // namespace itfkan

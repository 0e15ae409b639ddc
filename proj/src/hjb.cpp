#include "mftlab/hjb.hpp"

#include "mftlab/oracle.hpp"
#include "mftlab/parallel.hpp"
#include "mftlab/simulation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace mft {

// ---------------------------------------------------------------- grid

const Axis& Grid::axis(int a) const {
    if (a == 0) return x;
    if (a <= static_cast<int>(y.size())) return y[a - 1];
    return z[a - 1 - y.size()];
}

std::vector<int> Grid::shape() const {
    std::vector<int> s(dim());
    for (int a = 0; a < dim(); ++a) s[a] = axis(a).nodes;
    return s;
}

std::size_t Grid::node_count() const {
    std::size_t c = 1;
    for (int a = 0; a < dim(); ++a) c *= static_cast<std::size_t>(axis(a).nodes);
    return c;
}

std::size_t Grid::factor_node_count() const { return node_count() / x.nodes; }

std::vector<int> Grid::stored_steps() const {
    std::vector<int> k;
    const int every = std::max(1, store_every);
    for (int s = 0; s < t_steps; s += every) k.push_back(s);
    k.push_back(t_steps);
    return k;
}

void Grid::unflatten(std::size_t node, int* idx) const {
    for (int a = dim() - 1; a >= 0; --a) {
        const int n = axis(a).nodes;
        idx[a] = static_cast<int>(node % n);
        node /= n;
    }
}

std::size_t Grid::flatten(const int* idx) const {
    std::size_t node = 0;
    for (int a = 0; a < dim(); ++a) node = node * axis(a).nodes + idx[a];
    return node;
}

bool Grid::interior(std::size_t node) const {
    int idx[8];
    unflatten(node, idx);
    for (int a = 0; a < dim(); ++a)
        if (idx[a] == 0 || idx[a] == axis(a).nodes - 1) return false;
    return true;
}

void Grid::coordinates(std::size_t node, double& xc, Vec& yc, Vec& zc) const {
    int idx[8];
    unflatten(node, idx);
    xc = x.node(idx[0]);
    yc.resize(y.size());
    zc.resize(z.size());
    for (std::size_t k = 0; k < y.size(); ++k) yc[k] = y[k].node(idx[1 + k]);
    for (std::size_t k = 0; k < z.size(); ++k) zc[k] = z[k].node(idx[1 + y.size() + k]);
}

void Grid::check(const MarketSpec& spec) const {
    if (static_cast<int>(y.size()) != spec.m || static_cast<int>(z.size()) != spec.M)
        throw InputError("grid: need one y axis per eta and one z axis per zeta component");
    if (dim() > max_state_dim) {
        std::ostringstream os;
        os << "grid: state dimension 1+m+M = " << dim() << " exceeds the limit " << max_state_dim;
        throw InputError(os.str());
    }
    for (int a = 0; a < dim(); ++a) {
        const Axis& ax = axis(a);
        if (ax.nodes < 3) throw InputError("grid: every axis needs at least 3 nodes");
        if (!(ax.lo < ax.hi)) throw InputError("grid: axis bounds must satisfy lo < hi");
    }
    if (t_steps < 1) throw InputError("grid: t_steps must be >= 1");
    if (std::abs(T - spec.T) > 1e-12 * spec.T) throw InputError("grid: horizon differs from spec");
}

std::string Grid::describe() const {
    std::ostringstream os;
    os.precision(10);
    os << "x[" << x.lo << "," << x.hi << "]x" << x.nodes;
    for (std::size_t k = 0; k < y.size(); ++k)
        os << " y" << k + 1 << "[" << y[k].lo << "," << y[k].hi << "]x" << y[k].nodes;
    for (std::size_t k = 0; k < z.size(); ++k)
        os << " z" << k + 1 << "[" << z[k].lo << "," << z[k].hi << "]x" << z[k].nodes;
    os << " t_steps=" << t_steps << " T=" << T;
    return os.str();
}

Grid default_grid(const MarketSpec& spec, int x_nodes, int y_nodes, int z_nodes, int t_steps,
                  int max_stored_slices) {
    spec.check();
    auto odd = [](int k) { return k % 2 == 0 ? k + 1 : k; };
    Grid g;
    g.T = spec.T;
    const double spread = 3.0 * std::sqrt(spec.K * spec.T);
    if (spec.domain == Domain::positive) {
        const double c = std::log(spec.x0);
        const double hw = std::log(8.0) + spread;
        g.x = Axis{c - hw, c + hw, odd(x_nodes)};
    } else {
        const double hw = std::max({7.0 * std::abs(spec.x0), spread, 1.0});
        g.x = Axis{spec.x0 - hw, spec.x0 + hw, odd(x_nodes)};
    }

    if (spec.m + spec.M > 0) {
        const Strategy zero(Strategy::Kind::zero, "zero",
                            [](const StatePoint&, const CoefficientSet&, Vec& u) { u.setZero(); });
        const int steps = 100, paths = 2000;
        const PathBundle b = simulate_paths(spec, zero, steps, paths, 0xfac7, {true, 0});
        auto halfwidth = [&](int comp, double center) {
            double hw = 0.0;
            for (int s = 0; s <= steps; ++s) {
                double sum = 0.0, sq = 0.0;
                int cnt = 0;
                for (int p = 0; p < paths; ++p) {
                    if (b.excluded[p]) continue;
                    const double v = b.state(p, s, comp);
                    sum += v;
                    sq += v * v;
                    ++cnt;
                }
                const double mean = sum / cnt;
                const double sd = std::sqrt(std::max(0.0, sq / cnt - mean * mean));
                hw = std::max(hw, std::abs(mean - center) + 4.0 * sd);
            }
            return std::max(hw, 1e-3);
        };
        for (int k = 0; k < spec.m; ++k) {
            const double hw = halfwidth(1 + k, spec.eta0[k]);
            g.y.push_back(Axis{spec.eta0[k] - hw, spec.eta0[k] + hw, odd(y_nodes)});
        }
        for (int k = 0; k < spec.M; ++k) {
            const double hw = halfwidth(1 + spec.m + k, spec.zeta0[k]);
            g.z.push_back(Axis{spec.zeta0[k] - hw, spec.zeta0[k] + hw, odd(z_nodes)});
        }
    }

    g.t_steps = 1;
    if (t_steps > 0) {
        g.t_steps = t_steps;
    } else {
        g.t_steps = static_cast<int>(std::ceil(spec.T / stable_time_step(spec, g) - 1e-9));
    }
    g.store_every = std::max(1, static_cast<int>(std::ceil(static_cast<double>(g.t_steps) /
                                                           std::max(1, max_stored_slices - 1))));
    return g;
}

// ---------------------------------------------------------------- stencils

namespace {

struct Stencil {
    int off[4] = {0, 0, 0, 0};
    double w[4] = {0, 0, 0, 0};  ///< integer weights, applied before `scale`
    double scale = 1.0;
    int count = 0;
};

Stencil first_stencil(int i, int n, double h) {
    Stencil s;
    s.scale = 0.5 / h;
    if (i > 0 && i < n - 1) {
        s.count = 2;
        s.off[0] = -1, s.w[0] = -1.0;
        s.off[1] = 1, s.w[1] = 1.0;
    } else {
        const int dir = i == 0 ? 1 : -1;
        const double w[3] = {-3.0, 4.0, -1.0};
        s.count = 3;
        for (int k = 0; k < 3; ++k) s.off[k] = dir * k, s.w[k] = dir * w[k];
    }
    return s;
}

Stencil second_stencil(int i, int n, double h) {
    Stencil s;
    s.scale = 1.0 / (h * h);
    if (i > 0 && i < n - 1) {
        s.count = 3;
        s.off[0] = -1, s.w[0] = 1.0;
        s.off[1] = 0, s.w[1] = -2.0;
        s.off[2] = 1, s.w[2] = 1.0;
        return s;
    }
    const int dir = i == 0 ? 1 : -1;
    if (n >= 4) {
        s.count = 4;
        const double w[4] = {2.0, -5.0, 4.0, -1.0};
        for (int k = 0; k < 4; ++k) s.off[k] = dir * k, s.w[k] = w[k];
    } else {
        s.count = 3;
        const double w[3] = {1.0, -2.0, 1.0};
        for (int k = 0; k < 3; ++k) s.off[k] = dir * k, s.w[k] = w[k];
    }
    return s;
}

struct StencilContext {
    const Grid& grid;
    int d;
    int idx[8];
    std::size_t stride[8];
    double h[8];
    int n[8];

    StencilContext(const Grid& g, std::size_t node) : grid(g), d(g.dim()) {
        g.unflatten(node, idx);
        std::size_t s = 1;
        for (int a = d - 1; a >= 0; --a) {
            stride[a] = s;
            n[a] = g.axis(a).nodes;
            h[a] = g.axis(a).step();
            s *= static_cast<std::size_t>(n[a]);
        }
    }

    double first(std::span<const double> J, std::size_t node, int a) const {
        const Stencil s = first_stencil(idx[a], n[a], h[a]);
        double v = 0.0;
        for (int k = 0; k < s.count; ++k)
            v += s.w[k] * J[node + static_cast<std::ptrdiff_t>(s.off[k]) *
                                       static_cast<std::ptrdiff_t>(stride[a])];
        return v * s.scale;
    }

    double second(std::span<const double> J, std::size_t node, int a) const {
        const Stencil s = second_stencil(idx[a], n[a], h[a]);
        double v = 0.0;
        for (int k = 0; k < s.count; ++k)
            v += s.w[k] * J[node + static_cast<std::ptrdiff_t>(s.off[k]) *
                                       static_cast<std::ptrdiff_t>(stride[a])];
        return v * s.scale;
    }

    double mixed(std::span<const double> J, std::size_t node, int a, int b) const {
        const Stencil sa = first_stencil(idx[a], n[a], h[a]);
        const Stencil sb = first_stencil(idx[b], n[b], h[b]);
        double v = 0.0;
        for (int i = 0; i < sa.count; ++i) {
            const std::ptrdiff_t oa = static_cast<std::ptrdiff_t>(sa.off[i]) *
                                      static_cast<std::ptrdiff_t>(stride[a]);
            double inner = 0.0;
            for (int j = 0; j < sb.count; ++j)
                inner += sb.w[j] * J[node + oa + static_cast<std::ptrdiff_t>(sb.off[j]) *
                                                     static_cast<std::ptrdiff_t>(stride[b])];
            v += sa.w[i] * inner;
        }
        return v * (sa.scale * sb.scale);
    }
};

void fill_derivatives(std::span<const double> J, const Grid& grid, std::size_t node,
                      NodeDerivatives& out) {
    const StencilContext ctx(grid, node);
    const int m = static_cast<int>(grid.y.size()), M = static_cast<int>(grid.z.size());
    out.J = J[node];
    out.Jx = ctx.first(J, node, 0);
    out.Jxx = ctx.second(J, node, 0);
    out.Jy.resize(m);
    out.Jz.resize(M);
    out.Jxy.resize(m);
    out.Jyy.resize(m, m);
    out.Jzz.resize(M, M);
    out.Jyz.resize(m, M);
    for (int k = 0; k < m; ++k) {
        out.Jy[k] = ctx.first(J, node, 1 + k);
        out.Jxy[k] = ctx.mixed(J, node, 0, 1 + k);
        for (int l = 0; l < m; ++l)
            out.Jyy(k, l) = k == l ? ctx.second(J, node, 1 + k) : ctx.mixed(J, node, 1 + k, 1 + l);
        for (int j = 0; j < M; ++j) out.Jyz(k, j) = ctx.mixed(J, node, 1 + k, 1 + m + j);
    }
    for (int j = 0; j < M; ++j) {
        out.Jz[j] = ctx.first(J, node, 1 + m + j);
        for (int l = 0; l < M; ++l)
            out.Jzz(j, l) =
                j == l ? ctx.second(J, node, 1 + m + j) : ctx.mixed(J, node, 1 + m + j, 1 + m + l);
    }
}

}  // namespace

NodeDerivatives derivatives_at(std::span<const double> J, const Grid& grid, std::size_t node) {
    if (J.size() != grid.node_count()) throw InputError("derivatives_at: slice size mismatch");
    for (int a = 0; a < grid.dim(); ++a)
        if (grid.axis(a).nodes < 3) throw InputError("derivatives_at: need >= 3 nodes per axis");
    NodeDerivatives d;
    fill_derivatives(J, grid, node, d);
    return d;
}

DerivativeFields derivative_stencils(std::span<const double> J, const Grid& grid) {
    const std::size_t nodes = grid.node_count();
    const int m = static_cast<int>(grid.y.size()), M = static_cast<int>(grid.z.size());
    DerivativeFields f;
    f.Jx.resize(nodes);
    f.Jxx.resize(nodes);
    f.Jy.resize(nodes * m);
    f.Jz.resize(nodes * M);
    f.Jxy.resize(nodes * m);
    f.Jyy.resize(nodes * m * m);
    f.Jzz.resize(nodes * M * M);
    f.Jyz.resize(nodes * m * M);
    NodeDerivatives d;
    for (std::size_t node = 0; node < nodes; ++node) {
        if (node == 0) d = derivatives_at(J, grid, node);
        else fill_derivatives(J, grid, node, d);
        f.Jx[node] = d.Jx;
        f.Jxx[node] = d.Jxx;
        for (int k = 0; k < m; ++k) {
            f.Jy[node * m + k] = d.Jy[k];
            f.Jxy[node * m + k] = d.Jxy[k];
            for (int l = 0; l < m; ++l) f.Jyy[(node * m + k) * m + l] = d.Jyy(k, l);
            for (int j = 0; j < M; ++j) f.Jyz[(node * m + k) * M + j] = d.Jyz(k, j);
        }
        for (int j = 0; j < M; ++j) {
            f.Jz[node * M + j] = d.Jz[j];
            for (int l = 0; l < M; ++l) f.Jzz[(node * M + j) * M + l] = d.Jzz(j, l);
        }
    }
    return f;
}

// ---------------------------------------------------------------- solver

namespace {

/// Coefficients and derived quantities at one (y, z) node; the coefficient
/// catalogue is time-homogeneous, so these are computed once per solve.
struct FactorNode {
    CoefficientSet c;
    Eigen::PartialPivLU<Mat> vt_lu;
    Mat psi;        ///< factor directions, n x (m+1)
    Vec tiebreak;   ///< p-space direction for the degenerate case
    int tiebreak_fund = -1;  ///< fund index the tie-break direction belongs to
    double tiebreak_scale = 0.0;  ///< hbar of that fund per unit radius
    Mat Cyy, Czz, Cyz;
};

std::vector<FactorNode> build_factor_nodes(const MarketSpec& spec, const Grid& grid) {
    const std::size_t count = grid.factor_node_count();
    std::vector<FactorNode> out(count);
    const int m = spec.m, n = spec.n;
    for (std::size_t f = 0; f < count; ++f) {
        double xc;
        Vec y, z;
        grid.coordinates(f, xc, y, z);  // x index 0 row enumerates the factor sub-grid
        FactorNode& fn = out[f];
        fn.c = eval_coefficients(spec, y, z, 0.0);
        Eigen::JacobiSVD<Mat> svd(fn.c.v);
        const auto& sv = svd.singularValues();
        if (!(sv[n - 1] > 1e-12 * sv[0]))
            throw NumericalError("solve_bellman: volatility not invertible at a grid node");
        fn.vt_lu.compute(fn.c.v.transpose());
        fn.psi = factor_directions(fn.c);
        // Tie-break: v' psi_{m+1}, then v' psi_1, then e_1.
        fn.tiebreak = Vec::Unit(n, 0);
        for (int k : {m, 0}) {
            if (k > m) continue;
            const Vec d = fn.c.v.transpose() * fn.psi.col(k);
            if (d.norm() > 1e-300) {
                fn.tiebreak = d / d.norm();
                fn.tiebreak_fund = k;
                fn.tiebreak_scale = 1.0 / d.norm();
                break;
            }
        }
        fn.Cyy = fn.c.beta_eta * fn.c.beta_eta.transpose() +
                 fn.c.beta_eta_tilde * fn.c.beta_eta_tilde.transpose();
        fn.Czz = fn.c.beta_zeta_tilde * fn.c.beta_zeta_tilde.transpose();
        fn.Cyz = fn.c.beta_eta_tilde * fn.c.beta_zeta_tilde.transpose();
    }
    return out;
}

struct PolicySlice {
    std::vector<double>* u;
    std::vector<double>* hbar;
    std::vector<double>* kappa;
    std::vector<std::uint8_t>* tag;
};

/// One pass over all nodes of J_next: optional explicit update into J_new
/// (interior nodes only) and optional policy output for J_next itself.
void sweep(const MarketSpec& spec, const Grid& grid, const std::vector<FactorNode>& fnodes,
           std::span<const double> J_next, double dt, std::vector<double>* J_new,
           const PolicySlice* policy, unsigned threads) {
    const std::size_t nodes = grid.node_count();
    const std::size_t fcount = grid.factor_node_count();
    const int n = spec.n, m = spec.m, M = spec.M;
    const double rho = std::sqrt(spec.K);
    parallel_for(
        nodes,
        [&](std::size_t begin, std::size_t end) {
            NodeDerivatives d;
            for (std::size_t node = begin; node < end; ++node) {
                const FactorNode& fn = fnodes[node % fcount];
                fill_derivatives(J_next, grid, node, d);
                const G0Solution g0 =
                    solve_G0(d.Jx, d.Jxx, d.Jxy, fn.c, fn.vt_lu, spec.K, spec.domain, fn.tiebreak);
                if (J_new && grid.interior(node)) {
                    double g1 = 0.0;
                    if (m > 0) {
                        g1 += d.Jy.dot(fn.c.f_eta);
                        g1 += 0.5 * d.Jyy.cwiseProduct(fn.Cyy).sum();
                    }
                    if (M > 0) {
                        g1 += d.Jz.dot(fn.c.f_zeta);
                        g1 += 0.5 * d.Jzz.cwiseProduct(fn.Czz).sum();
                    }
                    if (m > 0 && M > 0) g1 += d.Jyz.cwiseProduct(fn.Cyz).sum();
                    (*J_new)[node] = J_next[node] + dt * (g1 + g0.value);
                }
                if (policy) {
                    double* u = &(*policy->u)[node * n];
                    for (int i = 0; i < n; ++i) u[i] = g0.u[i];
                    double* hb = &(*policy->hbar)[node * (m + 1)];
                    if (g0.kappa) {
                        const double k = *g0.kappa;
                        for (int i = 0; i < m; ++i) hb[i] = k * d.Jxy[i];
                        hb[m] = k * d.Jx;
                        (*policy->kappa)[node] = k;
                    } else {
                        for (int i = 0; i <= m; ++i) hb[i] = 0.0;
                        if (fn.tiebreak_fund >= 0) hb[fn.tiebreak_fund] = rho * fn.tiebreak_scale;
                        (*policy->kappa)[node] = std::numeric_limits<double>::quiet_NaN();
                    }
                    (*policy->tag)[node] = static_cast<std::uint8_t>(g0.case_tag);
                }
            }
        },
        threads);
}

void extrapolate_boundary(const Grid& grid, std::vector<double>& J) {
    const int d = grid.dim();
    const std::vector<int> shape = grid.shape();
    std::vector<std::size_t> stride(d);
    std::size_t s = 1;
    for (int a = d - 1; a >= 0; --a) {
        stride[a] = s;
        s *= shape[a];
    }
    const std::size_t nodes = grid.node_count();
    int idx[8];
    for (int a = 0; a < d; ++a) {
        const int na = shape[a];
        for (std::size_t node = 0; node < nodes; ++node) {
            grid.unflatten(node, idx);
            if (idx[a] == 0) {
                J[node] = 2.0 * J[node + stride[a]] - J[node + 2 * stride[a]];
            } else if (idx[a] == na - 1) {
                J[node] = 2.0 * J[node - stride[a]] - J[node - 2 * stride[a]];
            }
        }
    }
}

double rate_bound(const MarketSpec& spec, const Grid& grid, const std::vector<FactorNode>& fnodes) {
    const int m = spec.m, M = spec.M;
    std::vector<double> h(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) h[a] = grid.axis(a).step();
    double worst = 0.0;
    const double sqK = std::sqrt(spec.K);
    for (const FactorNode& fn : fnodes) {
        double rate = spec.K / (h[0] * h[0]);
        for (int k = 0; k < m; ++k) {
            rate += fn.Cyy(k, k) / (h[1 + k] * h[1 + k]);
            rate += sqK * fn.c.beta_eta.row(k).norm() / (h[0] * h[1 + k]);
            for (int l = k + 1; l < m; ++l) rate += std::abs(fn.Cyy(k, l)) / (h[1 + k] * h[1 + l]);
            for (int j = 0; j < M; ++j)
                rate += std::abs(fn.Cyz(k, j)) / (h[1 + k] * h[1 + m + j]);
        }
        for (int j = 0; j < M; ++j) {
            rate += fn.Czz(j, j) / (h[1 + m + j] * h[1 + m + j]);
            for (int l = j + 1; l < M; ++l)
                rate += std::abs(fn.Czz(j, l)) / (h[1 + m + j] * h[1 + m + l]);
        }
        worst = std::max(worst, rate);
    }
    return worst;
}

}  // namespace

double stable_time_step(const MarketSpec& spec, const Grid& grid) {
    Grid g = grid;
    if (g.t_steps < 1) g.t_steps = 1;
    g.check(spec);
    const auto fnodes = build_factor_nodes(spec, g);
    return 0.9 / rate_bound(spec, g, fnodes);
}

std::vector<double> backward_step(const MarketSpec& spec, const Grid& grid,
                                  std::span<const double> J_next, double /*t_next*/, double dt) {
    grid.check(spec);
    if (J_next.size() != grid.node_count()) throw InputError("backward_step: slice size mismatch");
    const auto fnodes = build_factor_nodes(spec, grid);
    std::vector<double> J_new(J_next.begin(), J_next.end());
    sweep(spec, grid, fnodes, J_next, dt, &J_new, nullptr, 0);
    extrapolate_boundary(grid, J_new);
    return J_new;
}

BellmanSolution solve_bellman(const MarketSpec& spec, const Utility& utility, const Grid& grid,
                              const SolveOptions& opts) {
    spec.check();
    grid.check(spec);
    if (utility.domain() != spec.domain)
        throw InputError("solve_bellman: utility domain does not match the market domain");

    const auto fnodes = build_factor_nodes(spec, grid);
    BellmanSolution sol;
    sol.dt = grid.dt();
    sol.dt_max = 0.9 / rate_bound(spec, grid, fnodes);
    if (sol.dt > sol.dt_max * (1.0 + 1e-12)) {
        const int need = static_cast<int>(std::ceil(spec.T / sol.dt_max - 1e-9));
        std::ostringstream os;
        os.precision(6);
        os << "explicit scheme unstable: dt = " << sol.dt << " exceeds the bound " << sol.dt_max
           << "; use t_steps >= " << need;
        throw StabilityError(os.str(), sol.dt_max, need);
    }

    const std::size_t nodes = grid.node_count();
    const std::vector<int> stored = grid.stored_steps();
    const std::size_t S = stored.size();
    const int n = spec.n, m = spec.m;

    sol.value.grid = grid;
    sol.policy.grid = grid;
    sol.policy.n = n;
    sol.policy.m = m;
    sol.value.times.resize(S);
    sol.value.J.resize(S);
    sol.policy.times.resize(S);
    sol.policy.u.assign(S, std::vector<double>(nodes * n));
    sol.policy.hbar.assign(S, std::vector<double>(nodes * (m + 1)));
    sol.policy.kappa.assign(S, std::vector<double>(nodes));
    sol.policy.case_tag.assign(S, std::vector<std::uint8_t>(nodes));
    for (std::size_t s = 0; s < S; ++s) {
        const double t = stored[s] == grid.t_steps ? grid.T : stored[s] * sol.dt;
        sol.value.times[s] = t;
        sol.policy.times[s] = t;
    }

    std::vector<double> J_next(nodes), J_cur(nodes);
    for (std::size_t node = 0; node < nodes; ++node) {
        double xc;
        Vec y, z;
        grid.coordinates(node, xc, y, z);
        J_next[node] = utility.at_coordinate(xc);
    }

    auto policy_for = [&](std::size_t s) {
        return PolicySlice{&sol.policy.u[s], &sol.policy.hbar[s], &sol.policy.kappa[s],
                           &sol.policy.case_tag[s]};
    };

    std::ptrdiff_t slot = static_cast<std::ptrdiff_t>(S) - 1;
    for (int k = grid.t_steps; k >= 1; --k) {
        const bool keep = slot >= 0 && stored[slot] == k;
        if (keep) sol.value.J[slot] = J_next;
        const PolicySlice ps = keep ? policy_for(slot) : PolicySlice{};
        J_cur = J_next;
        sweep(spec, grid, fnodes, J_next, sol.dt, &J_cur, keep ? &ps : nullptr, opts.threads);
        extrapolate_boundary(grid, J_cur);
        for (std::size_t node = 0; node < nodes; ++node) {
            if (!std::isfinite(J_cur[node])) {
                std::ostringstream os;
                os << "solve_bellman: non-finite value in time slice " << k - 1
                   << " (t = " << (k - 1) * sol.dt << ")";
                throw NumericalError(os.str());
            }
        }
        if (keep) --slot;
        std::swap(J_next, J_cur);
    }
    // Slice 0.
    sol.value.J[0] = J_next;
    const PolicySlice ps0 = policy_for(0);
    sweep(spec, grid, fnodes, J_next, sol.dt, nullptr, &ps0, opts.threads);

    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t node = 0; node < nodes; ++node)
            if (sol.policy.case_tag[s][node] ==
                static_cast<std::uint8_t>(BallCase::degenerate_boundary))
                ++sol.degenerate_nodes;
    return sol;
}

// ---------------------------------------------------------------- interpolation

GridField::GridField(const Grid& grid, const std::vector<double>& times,
                     const std::vector<std::vector<double>>& data, int components) :
    grid_(&grid), times_(&times), data_(&data), components_(components) {
    if (times.size() != data.size() || times.empty())
        throw InputError("GridField: need one data slice per time");
    for (const auto& s : data)
        if (s.size() != grid.node_count() * components)
            throw InputError("GridField: slice size mismatch");
}

void GridField::evaluate(double x, const Vec& y, const Vec& z, double t, Vec& out) const {
    const Grid& g = *grid_;
    const int d = g.dim();
    int base[8];
    double w[8];
    auto locate = [&](int a, double c) {
        const Axis& ax = g.axis(a);
        const double h = ax.step();
        double s = (std::clamp(c, ax.lo, ax.hi) - ax.lo) / h;
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, ax.nodes - 2);
        base[a] = i;
        w[a] = std::clamp(s - i, 0.0, 1.0);
    };
    locate(0, x);
    for (int k = 0; k < y.size(); ++k) locate(1 + k, y[k]);
    for (int k = 0; k < z.size(); ++k) locate(1 + static_cast<int>(y.size()) + k, z[k]);

    const auto& times = *times_;
    std::size_t s0 = 0, s1 = 0;
    double wt = 0.0;
    if (t <= times.front()) {
        s0 = s1 = 0;
    } else if (t >= times.back()) {
        s0 = s1 = times.size() - 1;
    } else {
        s1 = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) -
                                      times.begin());
        s0 = s1 - 1;
        wt = (t - times[s0]) / (times[s1] - times[s0]);
    }

    out.setZero(components_);
    int idx[8];
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double weight = 1.0;
        for (int a = 0; a < d; ++a) {
            const int bit = (c >> a) & 1;
            idx[a] = base[a] + bit;
            weight *= bit ? w[a] : 1.0 - w[a];
        }
        if (weight == 0.0) continue;
        const std::size_t node = g.flatten(idx);
        const double* p0 = &(*data_)[s0][node * components_];
        const double* p1 = &(*data_)[s1][node * components_];
        for (int k = 0; k < components_; ++k)
            out[k] += weight * ((1.0 - wt) * p0[k] + wt * p1[k]);
    }
}

// ---------------------------------------------------------------- fund extraction

FundPolicyReport extract_fund_policy(const BellmanSolution& sol, const MarketSpec& spec) {
    const Grid& grid = sol.policy.grid;
    const auto fnodes = build_factor_nodes(spec, grid);
    const std::size_t nodes = grid.node_count(), fcount = grid.factor_node_count();
    const int n = spec.n, m = spec.m;
    std::vector<FundPoint> funds(fcount);
    for (std::size_t f = 0; f < fcount; ++f) funds[f] = fund_directions(fnodes[f].c);

    FundPolicyReport rep;
    rep.mu = funds.front().mu;
    rep.basis = funds.front().basis;
    const std::size_t S = sol.policy.times.size();
    rep.fund_coeffs.assign(S, std::vector<double>(nodes * rep.mu));
    Vec u(n), hb(m + 1);
    NodeDerivatives d;
    for (std::size_t s = 0; s < S; ++s) {
        const std::span<const double> J = sol.value.slice(s);
        for (std::size_t node = 0; node < nodes; ++node) {
            const FactorNode& fn = fnodes[node % fcount];
            for (int i = 0; i < n; ++i) u[i] = sol.policy.u[s][node * n + i];
            for (int i = 0; i <= m; ++i) hb[i] = sol.policy.hbar[s][node * (m + 1) + i];
            const bool degenerate =
                sol.policy.case_tag[s][node] ==
                static_cast<std::uint8_t>(BallCase::degenerate_boundary);
            if (degenerate) ++rep.degenerate_nodes;

            const SpanDecomposition dec = decompose(u, funds[node % fcount].directions);
            for (int k = 0; k < rep.mu; ++k)
                rep.fund_coeffs[s][node * rep.mu + k] = dec.coefficients[k];

            const double un = u.norm();
            const double factor_res = (u - fn.psi * hb).norm() / (un > 1e-30 ? un : 1.0);
            if (!degenerate || fn.tiebreak_fund >= 0)
                rep.max_factor_residual = std::max(rep.max_factor_residual, factor_res);
            if (degenerate) continue;
            ++rep.nodes_checked;
            rep.max_relative_residual = std::max(rep.max_relative_residual, dec.relative_residual);

            const double kappa = sol.policy.kappa[s][node];
            if (std::isfinite(kappa)) {
                fill_derivatives(J, grid, node, d);
                double mismatch = std::abs(hb[m] - kappa * d.Jx) / (1.0 + std::abs(hb[m]));
                for (int k = 0; k < m; ++k)
                    mismatch = std::max(mismatch, std::abs(hb[k] - kappa * d.Jxy[k]) /
                                                      (1.0 + std::abs(hb[k])));
                rep.max_hbar_mismatch = std::max(rep.max_hbar_mismatch, mismatch);
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- argmax witness

namespace {

struct BlackBox {
    const NodeDerivatives& d;
    const CoefficientSet& c;
    const Eigen::PartialPivLU<Mat>& vt_lu;
    Domain domain;
    mutable Vec u;

    double operator()(const Vec& p) const {
        u = vt_lu.solve(p);
        return g0_integrand(d.Jx, d.Jxx, d.Jxy, c, domain, u);
    }
};

Vec project_ball(const Vec& p, double rho) {
    const double r = p.norm();
    return r > rho ? Vec(p * (rho / r)) : p;
}

Vec fd_gradient(const BlackBox& f, const Vec& p, double h) {
    Vec g(p.size()), q = p;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        q[i] = p[i] + h;
        const double fp = f(q);
        q[i] = p[i] - h;
        const double fm = f(q);
        q[i] = p[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Vec numerical_argmax(const BlackBox& f, int n, double rho, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Vec best = Vec::Zero(n);
    double fbest = f(best);
    auto consider = [&](const Vec& p) {
        const double v = f(p);
        if (v > fbest) {
            fbest = v;
            best = p;
        }
    };
    std::vector<Vec> dirs;
    for (int i = 0; i < n; ++i) {
        dirs.push_back(Vec::Unit(n, i));
        dirs.push_back(-Vec::Unit(n, i));
    }
    for (int s = 0; s < 256; ++s) {
        Vec dvec(n);
        for (int i = 0; i < n; ++i) dvec[i] = gauss(rng);
        dirs.push_back(dvec / dvec.norm());
    }
    for (const Vec& dir : dirs)
        for (int r = 1; r <= 8; ++r) consider(dir * (rho * r / 8.0));

    // Projected gradient ascent with Armijo backtracking.
    Vec p = best;
    double fp = fbest;
    double step = rho;
    const double h = 1e-5 * rho;
    for (int it = 0; it < 5000; ++it) {
        const Vec g = fd_gradient(f, p, h);
        if (g.norm() == 0.0) break;
        double s = step;
        Vec trial;
        double ft = fp;
        bool moved = false;
        while (s > 1e-18 * rho) {
            trial = project_ball(p + s * g, rho);
            ft = f(trial);
            if (ft >= fp + 1e-6 * g.dot(trial - p) && ft >= fp) {
                moved = true;
                break;
            }
            s *= 0.5;
        }
        if (!moved) break;
        const double move = (trial - p).norm();
        p = trial;
        fp = ft;
        step = std::min(4.0 * s, 1e6 * rho);
        if (move < 1e-14 * rho) break;
    }
    return p;
}

}  // namespace

ArgmaxReport unrestricted_argmax_check(const ValueGrid& value, const MarketSpec& spec,
                                       int samples, std::uint64_t seed, double tolerance) {
    const Grid& grid = value.grid;
    if (spec.n > 4) throw InputError("unrestricted_argmax_check: supports n <= 4");
    const auto fnodes = build_factor_nodes(spec, grid);
    const std::size_t nodes = grid.node_count(), fcount = grid.factor_node_count();
    std::vector<std::size_t> interior;
    for (std::size_t node = 0; node < nodes; ++node)
        if (grid.interior(node)) interior.push_back(node);
    if (interior.empty()) throw InputError("unrestricted_argmax_check: grid has no interior nodes");

    ArgmaxReport rep;
    rep.samples = samples;
    rep.tolerance = tolerance;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_node(0, interior.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_slice(0, value.times.size() - 1);
    const double rho = std::sqrt(spec.K);
    NodeDerivatives d;
    for (int s = 0; s < samples; ++s) {
        ArgmaxSample rec;
        rec.slice = pick_slice(rng);
        rec.node = interior[pick_node(rng)];
        const FactorNode& fn = fnodes[rec.node % fcount];
        fill_derivatives(value.slice(rec.slice), grid, rec.node, d);
        const BlackBox f{d, fn.c, fn.vt_lu, spec.domain, Vec()};

        const double scale = std::abs(d.Jx) + std::abs(d.Jxx) + d.Jxy.cwiseAbs().sum();
        const Vec g0 = fd_gradient(f, Vec::Zero(spec.n), 1e-5 * rho);
        rec.informative = scale > 1e-14 && g0.norm() > 1e-10 * std::max(1.0, scale);
        if (rec.informative) {
            ++rep.informative;
            const Vec p = numerical_argmax(f, spec.n, rho, rng);
            const Vec u = fn.vt_lu.solve(p);
            const FundPoint funds = fund_directions(fn.c);
            rec.relative_residual = decompose(u, funds.directions).relative_residual;
            const G0Solution closed =
                solve_G0(d.Jx, d.Jxx, d.Jxy, fn.c, fn.vt_lu, spec.K, spec.domain, fn.tiebreak);
            rec.objective_gap = closed.value - f(p);
            rep.max_residual = std::max(rep.max_residual, rec.relative_residual);
            if (rec.relative_residual <= tolerance) ++rep.within_tolerance;
        }
        rep.records.push_back(rec);
    }
    return rep;
}

// ---------------------------------------------------------------- convergence

namespace {

double fit_order(const std::vector<double>& h, const std::vector<double>& err) {
    const std::size_t k = h.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double lx = std::log(h[i]), ly = std::log(err[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace

ConvergenceStudy convergence_study(const MarketSpec& spec, const Utility& utility,
                                   const std::vector<Grid>& grids, double reporting_halfwidth) {
    if (grids.size() < 3) throw InputError("convergence_study: need at least 3 grids");
    const MertonOracle oracle = merton_oracle(spec, utility);
    const double xc = std::log(spec.x0);

    ConvergenceStudy st;
    double scale = std::abs(oracle.value(xc, 0.0));
    for (const Grid& g : grids) {
        const BellmanSolution sol = solve_bellman(spec, utility, g);
        ConvergenceRow row;
        row.grid = g;
        row.h = g.x.step();
        row.dt = sol.dt;
        const auto& J0 = sol.value.J[0];
        const auto& u0 = sol.policy.u[0];
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            double x;
            Vec y, z;
            g.coordinates(node, x, y, z);
            if (std::abs(x - xc) > reporting_halfwidth + 1e-12 || !g.interior(node)) continue;
            const double ref = oracle.value(x, 0.0);
            row.value_error = std::max(row.value_error, std::abs(J0[node] - ref));
            Vec u(spec.n);
            for (int i = 0; i < spec.n; ++i) u[i] = u0[node * spec.n + i];
            row.policy_error =
                std::max(row.policy_error, (u - oracle.fraction).norm() / oracle.fraction.norm());
            if (std::abs(x - xc) < best_dist) {
                best_dist = std::abs(x - xc);
                row.center_value = J0[node];
                row.center_relative_error =
                    std::abs(J0[node] - ref) / std::max(std::abs(ref), 1e-300);
            }
        }
        st.c_disc = std::max(st.c_disc, row.value_error / (row.h + row.dt));
        st.rows.push_back(row);
    }

    const double floor = 1e-10 * std::max(1.0, scale);
    bool value_exact = true, policy_exact = true;
    std::vector<double> hs, ve, pe;
    for (const auto& r : st.rows) {
        hs.push_back(r.h);
        ve.push_back(std::max(r.value_error, 1e-300));
        pe.push_back(std::max(r.policy_error, 1e-300));
        value_exact = value_exact && r.value_error <= floor;
        policy_exact = policy_exact && r.policy_error <= 1e-10;
    }
    st.exact = value_exact && policy_exact;
    st.value_order = value_exact ? std::numeric_limits<double>::infinity() : fit_order(hs, ve);
    st.policy_order = policy_exact ? std::numeric_limits<double>::infinity() : fit_order(hs, pe);
    return st;
}

std::string ConvergenceStudy::to_text() const {
    std::ostringstream os;
    char buf[256];
    os << "       h           dt    value_err   policy_err   center_rel\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%9.5f  %11.4e  %11.4e  %11.4e  %11.4e\n", r.h, r.dt,
                      r.value_error, r.policy_error, r.center_relative_error);
        os << buf;
    }
    os << "value order: " << value_order << "  policy order: " << policy_order
       << (exact ? "  (exact to round-off)" : "") << "  C_disc: " << c_disc << '\n';
    return os.str();
}

// ---------------------------------------------------------------- export

namespace {

void put(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

void write_header(std::ostream& os, const Grid& g) {
    os << "slice,t,x";
    for (std::size_t k = 0; k < g.y.size(); ++k) os << ",y" << k + 1;
    for (std::size_t k = 0; k < g.z.size(); ++k) os << ",z" << k + 1;
}

void write_coords(std::ostream& os, const Grid& g, std::size_t node) {
    double x;
    Vec y, z;
    g.coordinates(node, x, y, z);
    os << ',';
    put(os, x);
    for (Eigen::Index k = 0; k < y.size(); ++k) os << ',', put(os, y[k]);
    for (Eigen::Index k = 0; k < z.size(); ++k) os << ',', put(os, z[k]);
}

template <class T>
void write_raw(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little,
                  "binary grid dumps assume a little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw InputError("read_grid_binary: truncated input");
    return v;
}

void write_binary_header(std::ostream& os, std::uint32_t kind, const Grid& g,
                         const std::vector<double>& times, std::uint64_t comps) {
    os.write("MFTGRID1", 8);
    write_raw<std::uint32_t>(os, kind);
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(g.dim()));
    for (int a = 0; a < g.dim(); ++a) {
        write_raw<double>(os, g.axis(a).lo);
        write_raw<double>(os, g.axis(a).hi);
        write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(g.axis(a).nodes));
    }
    write_raw<std::uint64_t>(os, times.size());
    for (double t : times) write_raw<double>(os, t);
    write_raw<std::uint64_t>(os, comps);
}

}  // namespace

void write_value_csv(const ValueGrid& v, std::ostream& os) {
    write_header(os, v.grid);
    os << ",J\n";
    for (std::size_t s = 0; s < v.times.size(); ++s)
        for (std::size_t node = 0; node < v.grid.node_count(); ++node) {
            os << s << ',';
            put(os, v.times[s]);
            write_coords(os, v.grid, node);
            os << ',';
            put(os, v.J[s][node]);
            os << '\n';
        }
}

void write_policy_csv(const PolicyGrid& p, std::ostream& os) {
    write_header(os, p.grid);
    for (int i = 0; i < p.n; ++i) os << ",u" << i + 1;
    for (int k = 0; k <= p.m; ++k) os << ",hbar" << k + 1;
    os << ",kappa,case\n";
    for (std::size_t s = 0; s < p.times.size(); ++s)
        for (std::size_t node = 0; node < p.grid.node_count(); ++node) {
            os << s << ',';
            put(os, p.times[s]);
            write_coords(os, p.grid, node);
            for (int i = 0; i < p.n; ++i) os << ',', put(os, p.u[s][node * p.n + i]);
            for (int k = 0; k <= p.m; ++k) os << ',', put(os, p.hbar[s][node * (p.m + 1) + k]);
            os << ',';
            put(os, p.kappa[s][node]);
            os << ',' << to_string(static_cast<BallCase>(p.case_tag[s][node])) << '\n';
        }
}

void write_value_binary(const ValueGrid& v, std::ostream& os) {
    write_binary_header(os, 0, v.grid, v.times, 1);
    for (const auto& slice : v.J)
        for (double x : slice) write_raw<double>(os, x);
}

void write_policy_binary(const PolicyGrid& p, std::ostream& os) {
    // Per node: u (n), hbar (m+1), kappa, case tag as a double.
    const std::uint64_t comps = p.n + p.m + 3;
    write_binary_header(os, 1, p.grid, p.times, comps);
    for (std::size_t s = 0; s < p.times.size(); ++s)
        for (std::size_t node = 0; node < p.grid.node_count(); ++node) {
            for (int i = 0; i < p.n; ++i) write_raw<double>(os, p.u[s][node * p.n + i]);
            for (int k = 0; k <= p.m; ++k) write_raw<double>(os, p.hbar[s][node * (p.m + 1) + k]);
            write_raw<double>(os, p.kappa[s][node]);
            write_raw<double>(os, static_cast<double>(p.case_tag[s][node]));
        }
}

BinaryGrid read_grid_binary(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "MFTGRID1", 8) != 0)
        throw InputError("read_grid_binary: bad magic");
    BinaryGrid g;
    g.kind = read_raw<std::uint32_t>(is);
    const auto dims = read_raw<std::uint32_t>(is);
    std::size_t nodes = 1;
    for (std::uint32_t a = 0; a < dims; ++a) {
        Axis ax;
        ax.lo = read_raw<double>(is);
        ax.hi = read_raw<double>(is);
        ax.nodes = static_cast<int>(read_raw<std::uint64_t>(is));
        nodes *= static_cast<std::size_t>(ax.nodes);
        g.axes.push_back(ax);
    }
    const auto slices = read_raw<std::uint64_t>(is);
    for (std::uint64_t s = 0; s < slices; ++s) g.times.push_back(read_raw<double>(is));
    g.components = read_raw<std::uint64_t>(is);
    g.data.resize(slices * nodes * g.components);
    for (double& x : g.data) x = read_raw<double>(is);
    return g;
}

}  // namespace mft

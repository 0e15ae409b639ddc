#include "mftlab/simulation.hpp"

#include "mftlab/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mft {

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

double PathBundle::terminal_wealth(int path) const {
    const double c = terminal_coord[path];
    return domain == Domain::positive ? std::exp(c) : c;
}

double PathBundle::state(int path, int step, int component) const {
    const std::size_t d = state_dim();
    return states[(static_cast<std::size_t>(path) * (steps + 1) + step) * d + component];
}

void PathBundle::write_csv(std::ostream& os) const {
    if (!recorded()) throw InputError("PathBundle::write_csv: paths were not recorded");
    os << "path,step,t,coordinate,wealth";
    for (int k = 0; k < m; ++k) os << ",eta" << k + 1;
    for (int k = 0; k < M; ++k) os << ",zeta" << k + 1;
    for (int k = 0; k < n; ++k) os << ",u" << k + 1;
    os << ",excluded\n";
    char buf[64];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, ",%.17g", x);
        os << buf;
    };
    const int d = state_dim();
    for (int p = 0; p < paths; ++p) {
        for (int s = 0; s <= steps; ++s) {
            os << p << ',' << s;
            put(times[s]);
            const double c = state(p, s, 0);
            put(c);
            put(domain == Domain::positive ? std::exp(c) : c);
            for (int k = 1; k < d; ++k) put(state(p, s, k));
            for (int k = 0; k < n; ++k) {
                if (s < steps)
                    put(controls[(static_cast<std::size_t>(p) * steps + s) * n + k]);
                else
                    os << ',';
            }
            os << ',' << static_cast<int>(excluded[p]) << '\n';
        }
    }
}

PathBundle simulate_paths(const MarketSpec& spec, const Strategy& strategy, int steps, int paths,
                          std::uint64_t seed, const SimulationOptions& opts) {
    if (steps < 1 || paths < 1) throw InputError("simulate_paths: steps and paths must be >= 1");
    spec.check();

    PathBundle out;
    out.domain = spec.domain;
    out.n = spec.n;
    out.m = spec.m;
    out.M = spec.M;
    out.paths = paths;
    out.steps = steps;
    out.seed = seed;
    const double dt = spec.T / steps;
    out.times.resize(steps + 1);
    for (int s = 0; s <= steps; ++s) out.times[s] = s == steps ? spec.T : s * dt;

    const int n = spec.n, m = spec.m, M = spec.M, N = spec.N, d = 1 + m + M;
    if (opts.record_paths) {
        out.states.resize(static_cast<std::size_t>(paths) * (steps + 1) * d);
        out.controls.resize(static_cast<std::size_t>(paths) * steps * n);
    }
    out.terminal_coord.resize(paths);
    out.excluded.assign(paths, 0);
    std::vector<double> max_norm(paths, 0.0);

    const double x0 = spec.domain == Domain::positive ? std::log(spec.x0) : spec.x0;
    const double sqdt = std::sqrt(dt);

    parallel_for(
        static_cast<std::size_t>(paths),
        [&](std::size_t begin, std::size_t end) {
            CoefficientSet c;
            Vec y(m), z(M), u(n), dw(n), dwt(N), p(n), dy(m), dz(M);
            std::normal_distribution<double> gauss;
            for (std::size_t path = begin; path < end; ++path) {
                auto rng = path_rng(seed, path);
                gauss.reset();
                double x = x0;
                y = spec.eta0;
                z = spec.zeta0;
                bool bad = false;
                double* rec = opts.record_paths ? &out.states[path * (steps + 1) * d] : nullptr;
                auto record = [&](int s) {
                    if (!rec) return;
                    double* row = rec + static_cast<std::size_t>(s) * d;
                    row[0] = x;
                    for (int k = 0; k < m; ++k) row[1 + k] = y[k];
                    for (int k = 0; k < M; ++k) row[1 + m + k] = z[k];
                };
                record(0);
                for (int s = 0; s < steps; ++s) {
                    const double t = out.times[s];
                    eval_coefficients_into(spec, y, z, t, c);
                    u.setZero();
                    strategy(StatePoint{x, &y, &z, t}, c, u);
                    for (int i = 0; i < n; ++i) dw[i] = sqdt * gauss(rng);
                    for (int i = 0; i < N; ++i) dwt[i] = sqdt * gauss(rng);

                    p.noalias() = c.v.transpose() * u;
                    double drift = u.dot(c.a_tilde);
                    if (spec.domain == Domain::positive) drift -= 0.5 * p.squaredNorm();
                    const double x_next = x + drift * dt + p.dot(dw);
                    if (m > 0) {
                        dy = c.f_eta * dt;
                        dy.noalias() += c.beta_eta * dw;
                        if (N > 0) dy.noalias() += c.beta_eta_tilde * dwt;
                    }
                    if (M > 0) {
                        dz = c.f_zeta * dt;
                        if (N > 0) dz.noalias() += c.beta_zeta_tilde * dwt;
                    }
                    if (opts.record_paths) {
                        double* urow = &out.controls[(path * steps + s) * n];
                        for (int i = 0; i < n; ++i) urow[i] = u[i];
                    }
                    max_norm[path] = std::max(max_norm[path], u.norm());
                    x = x_next;
                    if (m > 0) y += dy;
                    if (M > 0) z += dz;
                    if (!std::isfinite(x) || !y.allFinite() || !z.allFinite() || !u.allFinite()) {
                        bad = true;
                        break;
                    }
                    record(s + 1);
                }
                out.terminal_coord[path] = bad ? std::nan("") : x;
                out.excluded[path] = bad ? 1 : 0;
            }
        },
        opts.threads);

    for (int p = 0; p < paths; ++p) {
        out.excluded_count += out.excluded[p];
        out.max_control_norm = std::max(out.max_control_norm, max_norm[p]);
    }
    return out;
}

}  // namespace mft

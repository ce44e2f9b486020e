#include "possmix/gem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "possmix/densities.hpp"
#include "possmix/rng.hpp"
#include "possmix/special.hpp"

namespace possmix {

namespace {

// Stand-in for ln(0) inside the vectorized likelihood: a zero transition
// count multiplied by it stays 0.0, whereas 0 * -inf would be NaN.
constexpr double kLogZero = -1.0e300;
constexpr double kImpossible = -1.0e290;
constexpr double kDegenerateFrac = 1e-6;

struct PrepEvent {
    std::int32_t poss;
    std::int32_t type;          // 0..E for states 1..E+1
    double ds2[2];              // (du / sqrt(dt))^2
    double g_lo[2], g_hi[2];    // scaled gaps to the pitch bounds
    double m[2];                // min(-g_lo, g_hi), distance to the nearer bound
};

// Dataset rearranged for fast repeated evaluation: per-possession sufficient
// statistics by event type, per-possession transition-pair counts, and the
// per-event spatial quantities that cannot be aggregated away.
struct FitData {
    int n = 0;
    int E = 0;
    int S = 0;  // E + 1
    long n_tot = 0;
    std::vector<double> cnt, sum_dt, sum_dt2, sum_ln_dt;  // n*S
    std::vector<double> sum_ds2[2];                       // n*S
    std::vector<double> trans;                            // n*S*S
    std::vector<PrepEvent> events;
    std::vector<std::int32_t> ev_offset;                  // n+1
    std::vector<std::vector<std::int32_t>> by_type;       // S lists
    // dataset-level fallbacks for moment initialization
    std::vector<double> g_cnt, g_sum_dt, g_sum_dt2;       // S
    std::vector<double> g_sum_ds2[2];                     // S

    size_t te(int i, int e) const { return static_cast<size_t>(i) * S + e; }
    const double* trans_row(int i) const { return trans.data() + static_cast<size_t>(i) * S * S; }
};

FitData prepare(const Dataset& data) {
    FitData fd;
    fd.n = data.size();
    fd.E = data.E;
    fd.S = data.E + 1;
    const int S = fd.S;
    fd.cnt.assign(static_cast<size_t>(fd.n) * S, 0.0);
    fd.sum_dt = fd.cnt;
    fd.sum_dt2 = fd.cnt;
    fd.sum_ln_dt = fd.cnt;
    fd.sum_ds2[0] = fd.cnt;
    fd.sum_ds2[1] = fd.cnt;
    fd.trans.assign(static_cast<size_t>(fd.n) * S * S, 0.0);
    fd.ev_offset.assign(fd.n + 1, 0);
    fd.by_type.assign(S, {});
    fd.g_cnt.assign(S, 0.0);
    fd.g_sum_dt.assign(S, 0.0);
    fd.g_sum_dt2.assign(S, 0.0);
    fd.g_sum_ds2[0].assign(S, 0.0);
    fd.g_sum_ds2[1].assign(S, 0.0);

    const PitchBounds& bounds = data.bounds;
    for (int i = 0; i < fd.n; ++i) {
        const Possession& poss = data.possessions[i];
        check_possession(poss, fd.E, bounds);
        fd.n_tot += poss.size();
        int prev_state = 0;
        double prev_t = 0.0;
        double prev_u[2] = {poss.origin_x, poss.origin_y};
        for (const EventRecord& ev : poss.events) {
            const int e = ev.mark - 1;
            const double dt = ev.time - prev_t;
            const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
            PrepEvent pe;
            pe.poss = i;
            pe.type = e;
            for (int h = 0; h < 2; ++h) {
                double du = (ev.coord(h) - prev_u[h]) * inv_sqrt_dt;
                pe.ds2[h] = du * du;
                pe.g_lo[h] = (bounds.lo(h) - prev_u[h]) * inv_sqrt_dt;
                pe.g_hi[h] = (bounds.hi(h) - prev_u[h]) * inv_sqrt_dt;
                pe.m[h] = std::min(-pe.g_lo[h], pe.g_hi[h]);
                fd.sum_ds2[h][fd.te(i, e)] += pe.ds2[h];
                fd.g_sum_ds2[h][e] += pe.ds2[h];
                prev_u[h] = ev.coord(h);
            }
            fd.by_type[e].push_back(static_cast<std::int32_t>(fd.events.size()));
            fd.events.push_back(pe);
            fd.cnt[fd.te(i, e)] += 1.0;
            fd.sum_dt[fd.te(i, e)] += dt;
            fd.sum_dt2[fd.te(i, e)] += dt * dt;
            fd.sum_ln_dt[fd.te(i, e)] += std::log(dt);
            fd.g_cnt[e] += 1.0;
            fd.g_sum_dt[e] += dt;
            fd.g_sum_dt2[e] += dt * dt;
            fd.trans[(static_cast<size_t>(i) * S + prev_state) * S + e] += 1.0;
            prev_state = ev.mark;
            prev_t = ev.time;
        }
        fd.ev_offset[i + 1] = static_cast<std::int32_t>(fd.events.size());
    }
    return fd;
}

// Per-component constants rebuilt once per iteration.
struct CompTables {
    int K = 0, S = 0;
    std::vector<double> ln_pi;                             // K
    std::vector<double> ln_gamma;                          // K*S*S
    std::vector<double> shape_m1, inv_scale, gamma_const;  // K*S
    std::vector<double> inv_eta, inv_eta2, ln_eta, cut_m;  // K*2*S
    size_t ke(int k, int e) const { return static_cast<size_t>(k) * S + e; }
    size_t khe(int k, int h, int e) const {
        return (static_cast<size_t>(k) * 2 + h) * S + e;
    }
};

CompTables build_tables(const MixtureParams& p) {
    CompTables t;
    t.K = p.K;
    t.S = p.E + 1;
    const int S = t.S;
    t.ln_pi.resize(p.K);
    t.ln_gamma.resize(static_cast<size_t>(p.K) * S * S);
    t.shape_m1.resize(static_cast<size_t>(p.K) * S);
    t.inv_scale = t.shape_m1;
    t.gamma_const = t.shape_m1;
    t.inv_eta.resize(static_cast<size_t>(p.K) * 2 * S);
    t.inv_eta2 = t.inv_eta;
    t.ln_eta = t.inv_eta;
    t.cut_m = t.inv_eta;
    for (int k = 0; k < p.K; ++k) {
        t.ln_pi[k] = std::log(p.pi[k]);
        const double* g = p.gamma[k].data();
        double* lg = t.ln_gamma.data() + static_cast<size_t>(k) * S * S;
        for (int idx = 0; idx < S * S; ++idx) lg[idx] = g[idx] > 0.0 ? std::log(g[idx]) : kLogZero;
        for (int e = 0; e < S; ++e) {
            double shape = p.rho[k][e][0], scale = p.rho[k][e][1];
            t.shape_m1[t.ke(k, e)] = shape - 1.0;
            t.inv_scale[t.ke(k, e)] = 1.0 / scale;
            t.gamma_const[t.ke(k, e)] = -shape * std::log(scale) - lgamma_lanczos(shape);
            for (int h = 0; h < 2; ++h) {
                double eta = p.eta[k][h][e];
                t.inv_eta[t.khe(k, h, e)] = 1.0 / eta;
                t.inv_eta2[t.khe(k, h, e)] = 1.0 / (eta * eta);
                t.ln_eta[t.khe(k, h, e)] = std::log(eta);
                t.cut_m[t.khe(k, h, e)] = kGaussTailCut * eta;
            }
        }
    }
    return t;
}

struct EStepExtras {
    std::vector<double> total_r;  // K
    std::vector<double> s2;       // K*2*S, r-weighted sums of ds2 by type
    double loglik = 0.0;
    bool degenerate = false;
    size_t khe(int k, int h, int e, int S) const {
        return (static_cast<size_t>(k) * 2 + h) * S + e;
    }
};

void resize_resp(Responsibilities& resp, int n, int K, int E) {
    resp.n = n;
    resp.K = K;
    resp.E = E;
    resp.r = Matrix(n, K);
    resp.n1 = Matrix(K, E + 1);
    resp.n_dt = Matrix(K, E + 1);
    resp.n_ln_dt = Matrix(K, E + 1);
    resp.trans_counts.assign(K, Matrix(E + 1, E + 1));
}

double e_step_core(const FitData& fd, const MixtureParams& p, const CompTables& t,
                   Responsibilities& resp, EStepExtras& extras) {
    const int K = p.K, S = fd.S;
    resize_resp(resp, fd.n, K, fd.E);
    extras.total_r.assign(K, 0.0);
    extras.s2.assign(static_cast<size_t>(K) * 2 * S, 0.0);

    std::vector<double> comp(K);
    double total = 0.0;
    for (int i = 0; i < fd.n; ++i) {
        const double* ct = &fd.cnt[fd.te(i, 0)];
        const double* sdt = &fd.sum_dt[fd.te(i, 0)];
        const double* slndt = &fd.sum_ln_dt[fd.te(i, 0)];
        const double* s2x = &fd.sum_ds2[0][fd.te(i, 0)];
        const double* s2y = &fd.sum_ds2[1][fd.te(i, 0)];
        const double* trow = fd.trans_row(i);
        const std::int32_t ev_lo = fd.ev_offset[i], ev_hi = fd.ev_offset[i + 1];

        for (int k = 0; k < K; ++k) {
            double ll = t.ln_pi[k];
            for (int e = 0; e < S; ++e) {
                ll += slndt[e] * t.shape_m1[t.ke(k, e)] - sdt[e] * t.inv_scale[t.ke(k, e)] +
                      ct[e] * t.gamma_const[t.ke(k, e)];
                ll -= 0.5 * (s2x[e] * t.inv_eta2[t.khe(k, 0, e)] +
                             s2y[e] * t.inv_eta2[t.khe(k, 1, e)]);
                ll -= ct[e] * (t.ln_eta[t.khe(k, 0, e)] + t.ln_eta[t.khe(k, 1, e)] + kLn2Pi);
            }
            const double* lg = t.ln_gamma.data() + static_cast<size_t>(k) * S * S;
            for (int idx = 0; idx < S * S; ++idx) ll += trow[idx] * lg[idx];
            for (std::int32_t ev = ev_lo; ev < ev_hi; ++ev) {
                const PrepEvent& pe = fd.events[ev];
                for (int h = 0; h < 2; ++h) {
                    const size_t khe = t.khe(k, h, pe.type);
                    if (pe.m[h] < t.cut_m[khe]) {
                        const double inv_eta = t.inv_eta[khe];
                        ll -= ln_norm_mass(pe.g_lo[h] * inv_eta, pe.g_hi[h] * inv_eta);
                    }
                }
            }
            comp[k] = ll;
        }

        double mx = comp[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, comp[k]);
        if (!(mx > kImpossible))
            throw std::runtime_error("e_step: possession " + std::to_string(i) +
                                     " has zero density under every component");
        double norm = 0.0;
        for (int k = 0; k < K; ++k) norm += std::exp(comp[k] - mx);
        double lse = mx + std::log(norm);
        total += lse;

        for (int k = 0; k < K; ++k) {
            double w = std::exp(comp[k] - lse);
            resp.r(i, k) = w;
            extras.total_r[k] += w;
            for (int e = 0; e < S; ++e) {
                resp.n1(k, e) += w * ct[e];
                resp.n_dt(k, e) += w * sdt[e];
                resp.n_ln_dt(k, e) += w * slndt[e];
                extras.s2[extras.khe(k, 0, e, S)] += w * s2x[e];
                extras.s2[extras.khe(k, 1, e, S)] += w * s2y[e];
            }
            double* tc = resp.trans_counts[k].data();
            for (int idx = 0; idx < S * S; ++idx) tc[idx] += w * trow[idx];
        }
    }

    extras.loglik = total;
    extras.degenerate = false;
    for (int k = 0; k < K; ++k)
        if (extras.total_r[k] < kDegenerateFrac * fd.n) extras.degenerate = true;
    return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public building blocks

void m_step_closed_form(const Responsibilities& stats, int n, std::vector<double>& pi,
                        std::vector<Matrix>& gamma) {
    const int K = stats.K, S = stats.E + 1;
    pi.assign(K, 0.0);
    for (int i = 0; i < stats.n; ++i)
        for (int k = 0; k < K; ++k) pi[k] += stats.r(i, k);
    double pi_total = 0.0;
    for (int k = 0; k < K; ++k) {
        pi[k] = std::max(pi[k] / n, 1e-10);
        pi_total += pi[k];
    }
    for (int k = 0; k < K; ++k) pi[k] /= pi_total;

    gamma.assign(K, Matrix(S, S));
    for (int k = 0; k < K; ++k) {
        for (int row = 0; row < S; ++row) {
            double row_total = 0.0;
            for (int col = 0; col < S; ++col) row_total += stats.trans_counts[k](row, col);
            if (row_total > 0.0) {
                for (int col = 0; col < S; ++col)
                    gamma[k](row, col) = stats.trans_counts[k](row, col) / row_total;
            } else {
                for (int col = 0; col < S; ++col) gamma[k](row, col) = 1.0 / S;
            }
        }
    }
}

std::array<double, 2> gamma_gradient(const std::array<double, 2>& rho_e, double n1, double n_dt,
                                     double n_ln_dt) {
    const double shape = rho_e[0], scale = rho_e[1];
    return {n_ln_dt - n1 * (std::log(scale) + digamma(shape)),
            n_dt / (scale * scale) - n1 * shape / scale};
}

double gamma_objective(const std::array<double, 2>& rho_e, double n1, double n_dt,
                       double n_ln_dt) {
    const double shape = rho_e[0], scale = rho_e[1];
    return (shape - 1.0) * n_ln_dt - n_dt / scale -
           n1 * (shape * std::log(scale) + lgamma_lanczos(shape));
}

double eta_gradient(double eta, std::span<const WeightedDisplacement> events) {
    if (!(eta > 0.0)) throw std::domain_error("eta_gradient requires eta > 0");
    const double inv_eta = 1.0 / eta;
    double acc = 0.0;
    for (size_t idx = 0; idx < events.size(); ++idx) {
        const WeightedDisplacement& ev = events[idx];
        double zeta = 0.0;
        if (std::min(-ev.g_lo, ev.g_hi) < kGaussTailCut * eta) {
            zeta = trunc_zeta(ev.g_lo * inv_eta, ev.g_hi * inv_eta);
            if (std::isnan(zeta))
                throw std::runtime_error("eta_gradient: zero truncation mass at event " +
                                         std::to_string(idx));
        }
        acc += ev.weight *
               (ev.du * ev.du * inv_eta * inv_eta * inv_eta + (zeta - 1.0) * inv_eta);
    }
    return acc;
}

double eta_objective(double eta, std::span<const WeightedDisplacement> events) {
    double acc = 0.0;
    for (const WeightedDisplacement& ev : events)
        acc += ev.weight * truncnorm_logpdf(ev.du, ev.g_lo, ev.g_hi, eta);
    return acc;
}

std::array<double, 2> bounded_ascent_step(
    std::array<double, 2> x0, int dim,
    const std::function<std::array<double, 2>(const std::array<double, 2>&)>& grad_fn,
    const std::function<double(const std::array<double, 2>&)>& obj_fn, const AscentConfig& cfg,
    CurvatureState& state) {
    std::array<double, 2> g = grad_fn(x0);
    for (int j = 0; j < dim; ++j)
        if (!std::isfinite(g[j])) throw std::runtime_error("bounded_ascent_step: non-finite gradient");

    // Diagonal curvature from the previous iteration's secant pair,
    // identity scaling on the first iteration.
    std::array<double, 2> h = {1.0, 1.0};
    if (state.has_prev) {
        double sy = 0.0, yy = 0.0;
        std::array<double, 2> s{}, y{};
        for (int j = 0; j < dim; ++j) {
            s[j] = x0[j] - state.x[j];
            y[j] = g[j] - state.g[j];
            sy += s[j] * y[j];
            yy += y[j] * y[j];
        }
        double bb = (sy < 0.0 && yy > 0.0) ? -sy / yy : 1.0;
        for (int j = 0; j < dim; ++j) {
            h[j] = (s[j] * y[j] < 0.0) ? -s[j] / y[j] : bb;
            h[j] = std::clamp(h[j], 1e-12, 1e12);
        }
    }
    state.x = x0;
    state.g = g;
    state.has_prev = true;

    const double obj0 = obj_fn(x0);
    // Ascent below the objective's floating-point resolution cannot be
    // certified; rejecting it freezes converged blocks instead of letting
    // rounding noise drive a perpetual random walk.
    const double gain_floor =
        4.0 * std::numeric_limits<double>::epsilon() * (std::abs(obj0) + 1.0);
    double tau = 1.0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt, tau *= cfg.armijo_shrink) {
        std::array<double, 2> x1 = x0;
        double g_dx = 0.0;
        bool moved = false;
        for (int j = 0; j < dim; ++j) {
            x1[j] = std::max(cfg.floor, x0[j] + tau * h[j] * g[j]);
            g_dx += g[j] * (x1[j] - x0[j]);
            moved = moved || x1[j] != x0[j];
        }
        if (!moved || g_dx <= gain_floor) return x0;  // pinned, or gain below noise
        double obj1 = obj_fn(x1);
        if (obj1 >= obj0 + cfg.armijo_c * g_dx) return x1;
    }
    return x0;
}

GemState::GemState(int K, int E) : E_(E) {
    rho_.assign(static_cast<size_t>(K) * (E + 1), {});
    eta_.assign(static_cast<size_t>(K) * 2 * (E + 1), {});
}
CurvatureState& GemState::rho(int k, int e) { return rho_[static_cast<size_t>(k) * (E_ + 1) + e]; }
CurvatureState& GemState::eta(int k, int h, int e) {
    return eta_[(static_cast<size_t>(k) * 2 + h) * (E_ + 1) + e];
}

// ---------------------------------------------------------------------------
// Internal iteration engine

namespace {

class Runner {
public:
    Runner(const FitData& fd, const FitConfig& cfg) : fd_(fd), cfg_(cfg) {
        ascent_ = {cfg.param_floor, cfg.armijo_c, cfg.armijo_shrink, cfg.max_backtracks};
    }

    double estep(const MixtureParams& p) {
        CompTables tables = build_tables(p);
        return e_step_core(fd_, p, tables, resp_, extras_);
    }

    bool degenerate() const { return extras_.degenerate; }
    const Responsibilities& resp() const { return resp_; }
    const EStepExtras& extras() const { return extras_; }

    // One GEM iteration. Returns the observed-data log-likelihood at the
    // input parameters; p is advanced in place.
    double iterate(MixtureParams& p, GemState& st) {
        double ll = estep(p);
        if (extras_.degenerate) return ll;
        update_pi_gamma(p);
        update_rho(p, st);
        update_eta(p, st);
        return ll;
    }

private:
    void update_pi_gamma(MixtureParams& p) {
        const int K = p.K, S = fd_.S;
        double pi_total = 0.0;
        for (int k = 0; k < K; ++k) {
            p.pi[k] = std::max(extras_.total_r[k] / fd_.n, 1e-10);
            pi_total += p.pi[k];
        }
        for (int k = 0; k < K; ++k) p.pi[k] /= pi_total;
        for (int k = 0; k < K; ++k) {
            for (int row = 0; row < S; ++row) {
                double row_total = 0.0;
                for (int col = 0; col < S; ++col) row_total += resp_.trans_counts[k](row, col);
                if (row_total > 0.0) {
                    for (int col = 0; col < S; ++col)
                        p.gamma[k](row, col) = resp_.trans_counts[k](row, col) / row_total;
                } else {
                    for (int col = 0; col < S; ++col) p.gamma[k](row, col) = 1.0 / S;
                }
            }
        }
    }

    void update_rho(MixtureParams& p, GemState& st) {
        for (int k = 0; k < p.K; ++k) {
            for (int e = 0; e < fd_.S; ++e) {
                const double n1 = resp_.n1(k, e);
                if (n1 == 0.0) continue;  // no weighted events: nothing to learn
                const double ndt = resp_.n_dt(k, e), nlndt = resp_.n_ln_dt(k, e);
                auto grad = [&](const std::array<double, 2>& x) {
                    return gamma_gradient(x, n1, ndt, nlndt);
                };
                auto obj = [&](const std::array<double, 2>& x) {
                    return gamma_objective(x, n1, ndt, nlndt);
                };
                p.rho[k][e] = bounded_ascent_step(p.rho[k][e], 2, grad, obj, ascent_, st.rho(k, e));
            }
        }
    }

    void update_eta(MixtureParams& p, GemState& st) {
        const int S = fd_.S;
        for (int k = 0; k < p.K; ++k) {
            for (int e = 0; e < S; ++e) {
                if (resp_.n1(k, e) == 0.0) continue;
                for (int h = 0; h < 2; ++h) {
                    const double n1 = resp_.n1(k, e);
                    const double s2 = extras_.s2[extras_.khe(k, h, e, S)];
                    auto grad = [&](const std::array<double, 2>& x) -> std::array<double, 2> {
                        return {eta_grad_cell(x[0], k, h, e, n1, s2), 0.0};
                    };
                    auto obj = [&](const std::array<double, 2>& x) {
                        return eta_obj_cell(x[0], k, h, e, n1, s2);
                    };
                    std::array<double, 2> x0 = {p.eta[k][h][e], 0.0};
                    p.eta[k][h][e] =
                        bounded_ascent_step(x0, 1, grad, obj, ascent_, st.eta(k, h, e))[0];
                }
            }
        }
    }

    // Gradient and objective of one spatial-scale cell; the parts that do
    // not involve the truncation correction come from aggregated statistics,
    // so the event loop only touches events near a pitch bound.
    double eta_grad_cell(double eta, int k, int h, int e, double n1, double s2) const {
        const double inv_eta = 1.0 / eta;
        const double cut = kGaussTailCut * eta;
        double zeta_sum = 0.0;
        for (std::int32_t ev_id : fd_.by_type[e]) {
            const PrepEvent& pe = fd_.events[ev_id];
            if (pe.m[h] >= cut) continue;
            double w = resp_.r(pe.poss, k);
            if (w == 0.0) continue;
            double zeta = trunc_zeta(pe.g_lo[h] * inv_eta, pe.g_hi[h] * inv_eta);
            if (std::isnan(zeta))
                throw std::runtime_error("eta update: zero truncation mass at an event of type " +
                                         std::to_string(e + 1));
            zeta_sum += w * zeta;
        }
        return s2 * inv_eta * inv_eta * inv_eta - n1 * inv_eta + zeta_sum * inv_eta;
    }

    double eta_obj_cell(double eta, int k, int h, int e, double n1, double s2) const {
        const double inv_eta = 1.0 / eta;
        const double cut = kGaussTailCut * eta;
        double mass_sum = 0.0;
        for (std::int32_t ev_id : fd_.by_type[e]) {
            const PrepEvent& pe = fd_.events[ev_id];
            if (pe.m[h] >= cut) continue;
            double w = resp_.r(pe.poss, k);
            if (w == 0.0) continue;
            mass_sum += w * ln_norm_mass(pe.g_lo[h] * inv_eta, pe.g_hi[h] * inv_eta);
        }
        return -0.5 * s2 * inv_eta * inv_eta - n1 * (std::log(eta) + 0.5 * kLn2Pi) - mass_sum;
    }

    const FitData& fd_;
    FitConfig cfg_;
    AscentConfig ascent_;
    Responsibilities resp_;
    EStepExtras extras_;
};

// Random hard partition followed by one closed-form M-step and per-cell
// moment estimators.
MixtureParams init_start(const FitData& fd, const Dataset& data, int K, Rng& rng,
                         double floor_val) {
    const int n = fd.n, S = fd.S;
    std::vector<int> label(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<int> count(K, 0);
        for (int i = 0; i < n; ++i) ++count[label[i] = rng.next_below(K)];
        if (*std::min_element(count.begin(), count.end()) > 0) break;
    }

    MixtureParams p = make_uniform_params(K, fd.E, data.bounds);
    std::vector<double> cnt(static_cast<size_t>(K) * S, 0.0);
    std::vector<double> sdt = cnt, sdt2 = cnt, s2x = cnt, s2y = cnt;
    std::vector<double> trans(static_cast<size_t>(K) * S * S, 0.0);
    std::vector<int> group_size(K, 0);
    for (int i = 0; i < n; ++i) {
        const int k = label[i];
        ++group_size[k];
        for (int e = 0; e < S; ++e) {
            cnt[k * S + e] += fd.cnt[fd.te(i, e)];
            sdt[k * S + e] += fd.sum_dt[fd.te(i, e)];
            sdt2[k * S + e] += fd.sum_dt2[fd.te(i, e)];
            s2x[k * S + e] += fd.sum_ds2[0][fd.te(i, e)];
            s2y[k * S + e] += fd.sum_ds2[1][fd.te(i, e)];
        }
        const double* trow = fd.trans_row(i);
        for (int idx = 0; idx < S * S; ++idx) trans[static_cast<size_t>(k) * S * S + idx] += trow[idx];
    }

    auto moment_rho = [&](double c, double m1, double m2) -> std::array<double, 2> {
        // c events with sum m1 and sum of squares m2
        double mean = m1 / c;
        double var = m2 / c - mean * mean;
        if (!(var > 0.0) || !(mean > 0.0)) return {1.0, std::max(mean, floor_val)};
        double shape = std::clamp(mean * mean / var, floor_val, 1e6);
        double scale = std::max(var / mean, floor_val);
        return {shape, scale};
    };

    for (int k = 0; k < K; ++k) {
        p.pi[k] = static_cast<double>(std::max(group_size[k], 1)) / n;
        for (int row = 0; row < S; ++row) {
            double row_total = 0.0;
            for (int col = 0; col < S; ++col)
                row_total += trans[(static_cast<size_t>(k) * S + row) * S + col];
            for (int col = 0; col < S; ++col)
                p.gamma[k](row, col) =
                    row_total > 0.0
                        ? trans[(static_cast<size_t>(k) * S + row) * S + col] / row_total
                        : 1.0 / S;
        }
        for (int e = 0; e < S; ++e) {
            if (cnt[k * S + e] >= 2.0) {
                p.rho[k][e] = moment_rho(cnt[k * S + e], sdt[k * S + e], sdt2[k * S + e]);
            } else if (fd.g_cnt[e] >= 2.0) {
                p.rho[k][e] = moment_rho(fd.g_cnt[e], fd.g_sum_dt[e], fd.g_sum_dt2[e]);
            }
            const double* s2h[2] = {s2x.data(), s2y.data()};
            for (int h = 0; h < 2; ++h) {
                double c = cnt[k * S + e], s2 = s2h[h][k * S + e];
                if (!(c >= 1.0 && s2 > 0.0)) {
                    c = fd.g_cnt[e];
                    s2 = fd.g_sum_ds2[h][e];
                }
                p.eta[k][h][e] = (c >= 1.0 && s2 > 0.0) ? std::max(std::sqrt(s2 / c), floor_val)
                                                        : 1.0;
            }
        }
    }
    double pi_total = std::accumulate(p.pi.begin(), p.pi.end(), 0.0);
    for (int k = 0; k < K; ++k) p.pi[k] /= pi_total;
    return p;
}

void parallel_for(int n_items, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || n_items <= 1) {
        for (int i = 0; i < n_items; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (int i; (i = next.fetch_add(1)) < n_items;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(threads, n_items);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct RunSlot {
    int id = -1;
    MixtureParams params;
    GemState st{1, 1};
    std::vector<double> trace;
    double last_ll = 0.0;
    bool alive = false;
    bool converged = false;
    // filled by finalize
    double final_ll = 0.0;
    Responsibilities resp;
};

}  // namespace

// ---------------------------------------------------------------------------
// Public driver API

Responsibilities e_step(const Dataset& data, const MixtureParams& params) {
    if (params.E != data.E)
        throw std::invalid_argument("e_step: params.E does not match the dataset");
    FitData fd = prepare(data);
    CompTables tables = build_tables(params);
    Responsibilities resp;
    EStepExtras extras;
    e_step_core(fd, params, tables, resp, extras);
    return resp;
}

GemStepResult gem_iteration(const Dataset& data, const MixtureParams& params, GemState& state,
                            const FitConfig& config) {
    if (params.E != data.E)
        throw std::invalid_argument("gem_iteration: params.E does not match the dataset");
    FitData fd = prepare(data);
    Runner runner(fd, config);
    GemStepResult out;
    out.params = params;
    out.loglik = runner.iterate(out.params, state);
    out.stats = runner.resp();
    return out;
}

int n_free_params(int K, int E) {
    return (K - 1) + K * ((E + 1) * E + 2 * (E + 1) + 2 * (E + 1));
}

double bic(double loglik, const MixtureParams& params, const Dataset& data) {
    return loglik -
           0.5 * n_free_params(params.K, params.E) * std::log(static_cast<double>(data.total_events()));
}

FitResult fit(const Dataset& data, const FitConfig& config) {
    if (data.size() == 0) throw std::invalid_argument("fit: dataset is empty");
    if (config.k < 1) throw std::invalid_argument("fit: k must be >= 1");
    if (config.n_starts < 1 || config.n_keep < 1 || config.n_short_iters < 1 ||
        config.n_long_iters < 1)
        throw std::invalid_argument("fit: counts must be >= 1");
    if (config.n_keep > config.n_starts)
        throw std::invalid_argument("fit: n_keep must not exceed n_starts");
    if (!(config.rel_tol > 0.0)) throw std::invalid_argument("fit: rel_tol must be positive");
    if (config.init && config.n_starts != 1)
        throw std::invalid_argument("fit: forced init requires n_starts == 1");

    const FitData fd = prepare(data);
    const int K = config.k;
    // With one component every random partition is the same start.
    const int n_starts = (K == 1) ? 1 : config.n_starts;
    const int n_keep = (K == 1) ? 1 : std::min(config.n_keep, config.n_starts);

    std::vector<RunSlot> slots(n_starts);
    parallel_for(n_starts, config.threads, [&](int s) {
        RunSlot& slot = slots[s];
        slot.id = s;
        Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(s));
        slot.params = config.init ? *config.init
                                  : init_start(fd, data, K, rng, config.param_floor);
        slot.st = GemState(K, fd.E);
        Runner runner(fd, config);
        slot.alive = true;
        for (int it = 0; it < config.n_short_iters; ++it) {
            double ll = runner.iterate(slot.params, slot.st);
            slot.trace.push_back(ll);
            if (runner.degenerate()) {
                slot.alive = false;
                break;
            }
            slot.last_ll = ll;
        }
    });

    std::vector<int> order;
    for (int s = 0; s < n_starts; ++s)
        if (slots[s].alive) order.push_back(s);
    if (order.empty())
        throw std::runtime_error(
            "fit: all starts degenerate (a component lost its responsibility mass in every "
            "initialization); try fewer components or more data");
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (slots[a].last_ll != slots[b].last_ll) return slots[a].last_ll > slots[b].last_ll;
        return a < b;
    });
    if (static_cast<int>(order.size()) > n_keep) order.resize(n_keep);

    parallel_for(static_cast<int>(order.size()), config.threads, [&](int idx) {
        RunSlot& slot = slots[order[idx]];
        Runner runner(fd, config);
        double prev_ll = slot.last_ll;
        for (int it = 0; it < config.n_long_iters; ++it) {
            double ll = runner.iterate(slot.params, slot.st);
            slot.trace.push_back(ll);
            if (runner.degenerate()) {
                slot.alive = false;
                return;
            }
            slot.last_ll = ll;
            if (std::abs(ll - prev_ll) / (std::abs(prev_ll) + 1.0) < config.rel_tol) {
                slot.converged = true;
                break;
            }
            prev_ll = ll;
        }
        slot.final_ll = runner.estep(slot.params);
        if (runner.degenerate()) {
            slot.alive = false;
            return;
        }
        slot.trace.push_back(slot.final_ll);
        slot.resp = runner.resp();
    });

    int best = -1;
    for (int idx : order) {
        const RunSlot& slot = slots[idx];
        if (!slot.alive) continue;
        if (best < 0 || slot.final_ll > slots[best].final_ll ||
            (slot.final_ll == slots[best].final_ll && slot.id < slots[best].id))
            best = idx;
    }
    if (best < 0)
        throw std::runtime_error("fit: every refined start became degenerate");

    RunSlot& win = slots[best];
    FitResult out;
    out.params = std::move(win.params);
    out.loglik = win.final_ll;
    out.loglik_trace = std::move(win.trace);
    out.resp = std::move(win.resp);
    out.hard_assignment.resize(fd.n);
    for (int i = 0; i < fd.n; ++i) {
        int arg = 0;
        for (int k = 1; k < K; ++k)
            if (out.resp.r(i, k) > out.resp.r(i, arg)) arg = k;
        out.hard_assignment[i] = arg;
    }
    out.n_params = n_free_params(K, fd.E);
    out.n_tot = fd.n_tot;
    out.bic = out.loglik - 0.5 * out.n_params * std::log(static_cast<double>(fd.n_tot));
    out.converged = win.converged;
    out.start_id = win.id;
    out.iterations = static_cast<int>(out.loglik_trace.size()) - 1;
    return out;
}

KSelection select_k(const Dataset& data, int k_min, int k_max, FitConfig config) {
    if (k_min < 1 || k_max < k_min) throw std::invalid_argument("select_k: bad K range");
    KSelection out;
    for (int k = k_min; k <= k_max; ++k) {
        config.k = k;
        FitResult res = fit(data, config);
        out.rows.push_back({k, res.loglik, res.n_params, res.bic, res.converged});
        out.fits.push_back(std::move(res));
    }
    out.best_k = out.rows[0].k;
    double best_bic = out.rows[0].bic;
    for (const auto& row : out.rows) {
        if (row.bic > best_bic) {
            best_bic = row.bic;
            out.best_k = row.k;
        }
    }
    return out;
}

}  // namespace possmix

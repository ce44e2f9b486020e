#include "possmix/densities.hpp"

#include <cmath>
#include <stdexcept>

#include "possmix/special.hpp"

namespace possmix {

double markov_logprob(const Possession& poss, const Matrix& gamma_mat) {
    const int E = gamma_mat.rows() - 1;
    double ll = 0.0;
    int prev = 0;  // start state occupies row 0
    for (const EventRecord& ev : poss.events) {
        if (ev.mark < 1 || ev.mark > E + 1)
            throw std::domain_error("markov_logprob: mark out of range");
        double p = gamma_mat(prev, ev.mark - 1);
        ll += (p > 0.0) ? std::log(p) : neg_inf();
        prev = ev.mark;
    }
    return ll;
}

double gamma_logpdf(double x, double shape, double scale) {
    if (!(x > 0.0)) throw std::domain_error("gamma_logpdf requires x > 0");
    return (shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) -
           lgamma_lanczos(shape);
}

double time_logprob(const Possession& poss, const std::vector<std::array<double, 2>>& rho_k) {
    const int E = static_cast<int>(rho_k.size()) - 1;
    double ll = 0.0;
    double prev_t = 0.0;
    for (const EventRecord& ev : poss.events) {
        if (ev.mark < 1 || ev.mark > E + 1)
            throw std::domain_error("time_logprob: mark out of range");
        const auto& re = rho_k[ev.mark - 1];
        ll += gamma_logpdf(ev.time - prev_t, re[0], re[1]);
        prev_t = ev.time;
    }
    return ll;
}

double truncnorm_logpdf(double du, double g_lo, double g_hi, double eta, NumericalFlags* flags) {
    if (!(g_lo < g_hi)) throw std::domain_error("truncnorm_logpdf requires g_lo < g_hi");
    if (!(eta > 0.0)) throw std::domain_error("truncnorm_logpdf requires eta > 0");
    double z = du / eta;
    double ll = -0.5 * z * z - 0.5 * kLn2Pi - std::log(eta);
    // Both truncation tails beyond the cutoff leave ln(mass) = 0 exactly.
    if (-g_lo >= kGaussTailCut * eta && g_hi >= kGaussTailCut * eta) return ll;
    double lm = ln_norm_mass(g_lo / eta, g_hi / eta);
    if (std::isinf(lm)) {
        if (flags) ++flags->trunc_mass_underflows;
        return neg_inf();
    }
    return ll - lm;
}

double space_logprob(const Possession& poss, const std::array<std::vector<double>, 2>& eta_k,
                     const PitchBounds& bounds, NumericalFlags* flags) {
    const int E = static_cast<int>(eta_k[0].size()) - 1;
    double ll = 0.0;
    double prev_t = 0.0;
    double prev_u[2] = {poss.origin_x, poss.origin_y};
    for (const EventRecord& ev : poss.events) {
        if (ev.mark < 1 || ev.mark > E + 1)
            throw std::domain_error("space_logprob: mark out of range");
        double dt = ev.time - prev_t;
        double inv_sqrt_dt = 1.0 / std::sqrt(dt);
        for (int h = 0; h < 2; ++h) {
            double u = ev.coord(h);
            if (u < bounds.lo(h) || u > bounds.hi(h))
                throw std::domain_error("space_logprob: coordinate outside pitch bounds");
            double du = (u - prev_u[h]) * inv_sqrt_dt;
            double g_lo = (bounds.lo(h) - prev_u[h]) * inv_sqrt_dt;
            double g_hi = (bounds.hi(h) - prev_u[h]) * inv_sqrt_dt;
            ll += truncnorm_logpdf(du, g_lo, g_hi, eta_k[h][ev.mark - 1], flags);
            prev_u[h] = u;
        }
        prev_t = ev.time;
    }
    return ll;
}

ComponentLogDensity possession_loglik(const Possession& poss, const MixtureParams& params, int k,
                                      NumericalFlags* flags) {
    ComponentLogDensity out;
    out.mark_ll = markov_logprob(poss, params.gamma[k]);
    out.time_ll = time_logprob(poss, params.rho[k]);
    out.space_ll = space_logprob(poss, params.eta[k], params.bounds, flags);
    out.total_ll = out.mark_ll + out.time_ll + out.space_ll;
    return out;
}

double log_sum_exp(const double* values, int n) {
    double mx = neg_inf();
    for (int i = 0; i < n; ++i) mx = std::max(mx, values[i]);
    if (std::isinf(mx) && mx < 0) return neg_inf();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::exp(values[i] - mx);
    return mx + std::log(acc);
}

double mixture_loglik(const Dataset& data, const MixtureParams& params, NumericalFlags* flags) {
    const int K = params.K;
    std::vector<double> comp(K);
    double total = 0.0;
    for (const Possession& poss : data.possessions) {
        for (int k = 0; k < K; ++k)
            comp[k] = std::log(params.pi[k]) + possession_loglik(poss, params, k, flags).total_ll;
        total += log_sum_exp(comp.data(), K);
    }
    return total;
}

}  // namespace possmix

#include "possmix/report.hpp"

#include <cstdio>
#include <stdexcept>

#include "possmix/params_io.hpp"

namespace possmix {

namespace {

void num(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

std::string write_fit_report(const FitResult& result, const ClusterIndicators& ind,
                             std::uint64_t seed) {
    std::string out = "{\"loglik\": ";
    num(out, result.loglik);
    out += ", \"bic\": ";
    num(out, result.bic);
    out += ", \"n_params\": " + std::to_string(result.n_params);
    out += ", \"n_tot\": " + std::to_string(result.n_tot);
    out += ", \"converged\": ";
    out += result.converged ? "true" : "false";
    out += ", \"iterations\": " + std::to_string(result.iterations);
    out += ", \"start_id\": " + std::to_string(result.start_id);
    out += ", \"pi\": [";
    for (int k = 0; k < result.params.K; ++k) {
        if (k) out += ", ";
        num(out, result.params.pi[k]);
    }
    out += "], \"indicators\": {\"lambda\": [";
    for (int k = 0; k < ind.K; ++k) {
        if (k) out += ", ";
        num(out, ind.lambda[k]);
    }
    out += "], \"zeta\": [";
    for (int k = 0; k < ind.K; ++k) {
        if (k) out += ", ";
        num(out, ind.zeta[k]);
    }
    out += "], \"kappa\": [";
    for (int k = 0; k < ind.K; ++k) {
        out += k ? ", [" : "[";
        for (int e = 0; e < ind.E; ++e) {
            if (e) out += ", ";
            num(out, ind.kappa(k, e));
        }
        out += "]";
    }
    out += "]}, \"hard_assignment\": [";
    for (size_t i = 0; i < result.hard_assignment.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(result.hard_assignment[i] + 1);
    }
    out += "], \"seed\": " + std::to_string(seed);
    out += ", \"params\": ";
    std::string params_doc = serialize_params(result.params);
    if (!params_doc.empty() && params_doc.back() == '\n') params_doc.pop_back();
    out += params_doc;
    out += "}\n";
    return out;
}

std::string indicators_csv(const ClusterIndicators& ind, const std::vector<double>& pi,
                           const std::vector<std::string>* event_names) {
    if (static_cast<int>(pi.size()) != ind.K)
        throw std::invalid_argument("indicators_csv: pi length must equal K");
    if (event_names && static_cast<int>(event_names->size()) != ind.E)
        throw std::invalid_argument("indicators_csv: need one name per transient event");
    std::string out = "component,pi,lambda,zeta";
    for (int e = 0; e < ind.E; ++e) {
        out += ",kappa_";
        out += event_names ? (*event_names)[e] : std::to_string(e + 1);
    }
    out += '\n';
    for (int k = 0; k < ind.K; ++k) {
        out += std::to_string(k + 1);
        out += ',';
        num(out, pi[k]);
        out += ',';
        num(out, ind.lambda[k]);
        out += ',';
        num(out, ind.zeta[k]);
        for (int e = 0; e < ind.E; ++e) {
            out += ',';
            num(out, ind.kappa(k, e));
        }
        out += '\n';
    }
    return out;
}

std::string bic_table_csv(const KSelection& sel) {
    std::string out = "k,loglik,n_params,bic,converged\n";
    for (const auto& row : sel.rows) {
        out += std::to_string(row.k);
        out += ',';
        num(out, row.loglik);
        out += ',' + std::to_string(row.n_params) + ',';
        num(out, row.bic);
        out += ',';
        out += row.converged ? "true" : "false";
        out += '\n';
    }
    out += "best_k," + std::to_string(sel.best_k) + "\n";
    return out;
}

}  // namespace possmix

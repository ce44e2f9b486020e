#include "possmix/params_io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace possmix {

namespace {

using nlohmann::json;

void num(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

const json& field(const json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end()) throw std::runtime_error(std::string("missing field ") + name);
    return *it;
}

double number_at(const json& j, const char* where) {
    if (!j.is_number()) throw std::runtime_error(std::string(where) + " must be a number");
    return j.get<double>();
}

}  // namespace

std::string serialize_params(const MixtureParams& p) {
    std::string out;
    out.reserve(256 + static_cast<size_t>(p.K) * (p.E + 1) * (p.E + 6) * 26);
    out += "{\"K\": " + std::to_string(p.K) + ", \"E\": " + std::to_string(p.E);
    out += ", \"pi\": [";
    for (int k = 0; k < p.K; ++k) {
        if (k) out += ", ";
        num(out, p.pi[k]);
    }
    out += "], \"gamma\": [";
    for (int k = 0; k < p.K; ++k) {
        out += k ? ", [" : "[";
        for (int r = 0; r <= p.E; ++r) {
            out += r ? ", [" : "[";
            for (int c = 0; c <= p.E; ++c) {
                if (c) out += ", ";
                num(out, p.gamma[k](r, c));
            }
            out += "]";
        }
        out += "]";
    }
    out += "], \"rho\": [";
    for (int k = 0; k < p.K; ++k) {
        out += k ? ", [" : "[";
        for (int e = 0; e <= p.E; ++e) {
            out += e ? ", [" : "[";
            num(out, p.rho[k][e][0]);
            out += ", ";
            num(out, p.rho[k][e][1]);
            out += "]";
        }
        out += "]";
    }
    out += "], \"eta\": [";
    for (int k = 0; k < p.K; ++k) {
        out += k ? ", [" : "[";
        for (int h = 0; h < 2; ++h) {
            out += h ? ", [" : "[";
            for (int e = 0; e <= p.E; ++e) {
                if (e) out += ", ";
                num(out, p.eta[k][h][e]);
            }
            out += "]";
        }
        out += "]";
    }
    out += "], \"bounds\": [[";
    num(out, p.bounds.x_min);
    out += ", ";
    num(out, p.bounds.x_max);
    out += "], [";
    num(out, p.bounds.y_min);
    out += ", ";
    num(out, p.bounds.y_max);
    out += "]]}\n";
    return out;
}

MixtureParams deserialize_params(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& ex) {
        throw std::runtime_error(std::string("parameter document is not valid JSON: ") +
                                 ex.what());
    }
    if (!doc.is_object()) throw std::runtime_error("parameter document must be a JSON object");

    MixtureParams p;
    const json& jk = field(doc, "K");
    const json& je = field(doc, "E");
    if (!jk.is_number_integer() || !je.is_number_integer())
        throw std::runtime_error("K and E must be integers");
    p.K = jk.get<int>();
    p.E = je.get<int>();
    if (p.K < 1 || p.E < 1) throw std::runtime_error("K and E must be >= 1");
    const int S = p.E + 1;

    const json& jpi = field(doc, "pi");
    if (!jpi.is_array() || static_cast<int>(jpi.size()) != p.K)
        throw std::runtime_error("pi must be an array of length K");
    double pi_sum = 0.0;
    for (int k = 0; k < p.K; ++k) {
        p.pi.push_back(number_at(jpi[k], "pi"));
        if (!(p.pi.back() > 0.0)) throw std::runtime_error("pi entries must be positive");
        pi_sum += p.pi.back();
    }
    if (std::abs(pi_sum - 1.0) > 1e-10) throw std::runtime_error("pi does not sum to 1");

    const json& jg = field(doc, "gamma");
    if (!jg.is_array() || static_cast<int>(jg.size()) != p.K)
        throw std::runtime_error("gamma must be an array of K matrices");
    for (int k = 0; k < p.K; ++k) {
        if (!jg[k].is_array() || static_cast<int>(jg[k].size()) != S)
            throw std::runtime_error("gamma matrices must have E+1 rows");
        Matrix m(S, S);
        for (int r = 0; r < S; ++r) {
            const json& jrow = jg[k][r];
            if (!jrow.is_array() || static_cast<int>(jrow.size()) != S)
                throw std::runtime_error("gamma rows must have E+1 entries");
            double row_sum = 0.0;
            for (int c = 0; c < S; ++c) {
                m(r, c) = number_at(jrow[c], "gamma");
                if (m(r, c) < 0.0) throw std::runtime_error("gamma entries must be non-negative");
                row_sum += m(r, c);
            }
            if (std::abs(row_sum - 1.0) > 1e-10)
                throw std::runtime_error("gamma row does not sum to 1");
        }
        p.gamma.push_back(std::move(m));
    }

    const json& jr = field(doc, "rho");
    if (!jr.is_array() || static_cast<int>(jr.size()) != p.K)
        throw std::runtime_error("rho must be an array of length K");
    for (int k = 0; k < p.K; ++k) {
        if (!jr[k].is_array() || static_cast<int>(jr[k].size()) != S)
            throw std::runtime_error("rho[k] must have E+1 entries");
        std::vector<std::array<double, 2>> rk(S);
        for (int e = 0; e < S; ++e) {
            const json& jpair = jr[k][e];
            if (!jpair.is_array() || jpair.size() != 2)
                throw std::runtime_error("rho entries must be [shape, scale] pairs");
            rk[e] = {number_at(jpair[0], "rho"), number_at(jpair[1], "rho")};
            if (!(rk[e][0] > 0.0) || !(rk[e][1] > 0.0))
                throw std::runtime_error("rho entries must be positive");
        }
        p.rho.push_back(std::move(rk));
    }

    const json& jeta = field(doc, "eta");
    if (!jeta.is_array() || static_cast<int>(jeta.size()) != p.K)
        throw std::runtime_error("eta must be an array of length K");
    for (int k = 0; k < p.K; ++k) {
        if (!jeta[k].is_array() || jeta[k].size() != 2)
            throw std::runtime_error("eta[k] must have 2 rows");
        std::array<std::vector<double>, 2> ek;
        for (int h = 0; h < 2; ++h) {
            const json& jrow = jeta[k][h];
            if (!jrow.is_array() || static_cast<int>(jrow.size()) != S)
                throw std::runtime_error("eta rows must have E+1 entries");
            ek[h].resize(S);
            for (int e = 0; e < S; ++e) {
                ek[h][e] = number_at(jrow[e], "eta");
                if (!(ek[h][e] > 0.0)) throw std::runtime_error("eta entries must be positive");
            }
        }
        p.eta.push_back(std::move(ek));
    }

    const json& jb = field(doc, "bounds");
    if (!jb.is_array() || jb.size() != 2 || !jb[0].is_array() || jb[0].size() != 2 ||
        !jb[1].is_array() || jb[1].size() != 2)
        throw std::runtime_error("bounds must be [[x_min, x_max], [y_min, y_max]]");
    p.bounds.x_min = number_at(jb[0][0], "bounds");
    p.bounds.x_max = number_at(jb[0][1], "bounds");
    p.bounds.y_min = number_at(jb[1][0], "bounds");
    p.bounds.y_max = number_at(jb[1][1], "bounds");
    if (!(p.bounds.x_min < p.bounds.x_max) || !(p.bounds.y_min < p.bounds.y_max))
        throw std::runtime_error("bounds must satisfy min < max");

    return p;
}

}  // namespace possmix

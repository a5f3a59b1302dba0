#include "spinqsd/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spinqsd {

using nlohmann::json;

namespace {

const char* const kAxes[3] = {"x", "y", "z"};

/// Collects violations instead of stopping at the first one.
class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

    const json* child(const json& obj, const std::string& path, const char* key, bool required = true) {
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(path + "." + key, "missing field");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required = true) {
        const json* v = child(obj, path, key, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            fail(path + "." + key, "expected a number");
            return std::nullopt;
        }
        return v->get<double>();
    }

    template <class Int>
    std::optional<Int> integer(const json& obj, const std::string& path, const char* key, bool required = true) {
        const json* v = child(obj, path, key, required);
        if (!v) return std::nullopt;
        if (!v->is_number_integer() || (std::is_unsigned_v<Int> && v->is_number_integer() && !v->is_number_unsigned() &&
                                        v->get<long long>() < 0)) {
            fail(path + "." + key, "expected a non-negative integer");
            return std::nullopt;
        }
        return v->get<Int>();
    }

    std::optional<cplx> complex(const json& v, const std::string& path) {
        if (v.is_number()) return cplx(v.get<double>(), 0.0);
        if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
            return cplx(v[0].get<double>(), v[1].get<double>());
        fail(path, "expected a complex number [re, im]");
        return std::nullopt;
    }

    std::optional<CMatrix> matrix(const json& v, const std::string& path) {
        if (!v.is_array() || v.empty() || !v[0].is_array()) {
            fail(path, "expected a square matrix (array of rows)");
            return std::nullopt;
        }
        const auto n = static_cast<Eigen::Index>(v.size());
        CMatrix m(n, n);
        bool ok = true;
        for (Eigen::Index r = 0; r < n; ++r) {
            const json& row = v[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
                fail(path + "[" + std::to_string(r) + "]", "row length does not match the matrix size");
                ok = false;
                continue;
            }
            for (Eigen::Index c = 0; c < n; ++c) {
                auto z = complex(row[static_cast<std::size_t>(c)],
                                 path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
                if (z) m(r, c) = *z;
                else ok = false;
            }
        }
        if (!ok) return std::nullopt;
        return m;
    }

    std::optional<CVector> vector(const json& v, const std::string& path) {
        if (!v.is_array() || v.empty()) {
            fail(path, "expected a non-empty array of complex numbers");
            return std::nullopt;
        }
        CVector out(static_cast<Eigen::Index>(v.size()));
        bool ok = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto z = complex(v[i], path + "[" + std::to_string(i) + "]");
            if (z) out[static_cast<Eigen::Index>(i)] = *z;
            else ok = false;
        }
        if (!ok) return std::nullopt;
        return out;
    }

    std::optional<std::vector<double>> reals(const json& obj, const std::string& path, const char* key) {
        const json* v = child(obj, path, key);
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            fail(path + "." + key, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_number()) {
                fail(path + "." + key + "[" + std::to_string(i) + "]", "expected a number");
                return std::nullopt;
            }
            out.push_back((*v)[i].get<double>());
        }
        return out;
    }
};

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

BathSpec RunConfig::bath() const {
    SpinLength j(two_j);
    if (const auto* e = std::get_if<ExplicitBath>(&bath_source)) return BathSpec{j, e->g, e->omega};
    const auto& o = std::get<OhmicBath>(bath_source);
    return discretize_spectral_density(o.spec, j, o.modes, o.omega_max);
}

TimeGrid RunConfig::grid() const { return TimeGrid::uniform(run.t_max, run.n_outputs); }

ThermalSpec RunConfig::thermal() const {
    return beta ? ThermalSpec{*beta} : ThermalSpec::zero_temperature();
}

EnsembleConfig RunConfig::ensemble(unsigned threads) const {
    EnsembleConfig c;
    c.trajectories = run.trajectories;
    c.seed = run.seed;
    c.max_order = run.max_order;
    c.dt = run.dt;
    c.grid = grid();
    c.thermal = thermal();
    c.engine = run.engine;
    c.rescale = run.rescale;
    c.max_abort_fraction = run.max_abort_fraction;
    c.threads = threads;
    c.z_max = run.z_max;
    return c;
}

RunConfig parse_config(const json& doc) {
    Reader rd;
    RunConfig cfg;
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");

    if (auto tj = rd.integer<int>(doc, "config", "two_j")) {
        if (*tj < 1) rd.fail("config.two_j", "must be >= 1");
        else cfg.two_j = *tj;
    }

    if (const json* b = rd.child(doc, "config", "beta", false); b && !b->is_null()) {
        if (!b->is_number() || b->get<double>() < 0.0) rd.fail("config.beta", "expected null or a number >= 0");
        else cfg.beta = b->get<double>();
    }

    // Model
    bool model_ok = false;
    if (const json* m = rd.child(doc, "config", "model")) {
        const std::size_t before = rd.errors.size();
        if (const json* h = rd.child(*m, "model", "H_S"))
            if (auto hm = rd.matrix(*h, "model.H_S")) cfg.model.hamiltonian = *hm;
        const Eigen::Index d = cfg.model.hamiltonian.rows();
        if (const json* l = rd.child(*m, "model", "L")) {
            if (!l->is_object()) rd.fail("model.L", "expected an object with keys x, y, z");
            for (int a = 0; a < 3; ++a) {
                const json* la = l->is_object() ? rd.child(*l, "model.L", kAxes[a], false) : nullptr;
                if (la && !la->is_null()) {
                    if (auto lm = rd.matrix(*la, std::string("model.L.") + kAxes[a])) cfg.model.coupling[a] = *lm;
                } else {
                    cfg.model.coupling[a] = CMatrix::Zero(d, d);
                }
            }
        }
        if (const json* p = rd.child(*m, "model", "psi0"))
            if (auto pv = rd.vector(*p, "model.psi0")) cfg.model.psi0 = *pv;
        if (rd.errors.size() == before) {
            try {
                cfg.model.validate();
                model_ok = true;
            } catch (const ConfigError& e) {
                for (const auto& v : e.violations()) rd.errors.push_back(v);
            }
        }
    }

    if (const json* obs = rd.child(doc, "config", "observables", false)) {
        if (!obs->is_object()) rd.fail("observables", "expected an object of name -> matrix");
        else {
            for (auto it = obs->begin(); it != obs->end(); ++it) {
                const std::string path = "observables." + it.key();
                if (auto om = rd.matrix(it.value(), path)) {
                    if (model_ok && om->rows() != cfg.model.dim()) rd.fail(path, "dimension does not match H_S");
                    else if (hermiticity_violation(*om) > 1e-12) rd.fail(path, "observable is not Hermitian");
                    else cfg.observables.push_back({it.key(), *om});
                }
            }
        }
    }

    // Bath
    if (const json* b = rd.child(doc, "config", "bath")) {
        const json* ex = b->is_object() ? rd.child(*b, "bath", "explicit", false) : nullptr;
        const json* oh = b->is_object() ? rd.child(*b, "bath", "ohmic", false) : nullptr;
        if ((ex != nullptr) == (oh != nullptr)) {
            rd.fail("bath", "exactly one of 'explicit' or 'ohmic' is required");
        } else if (ex) {
            ExplicitBath e;
            if (auto g = rd.reals(*ex, "bath.explicit", "g")) e.g = *g;
            if (auto w = rd.reals(*ex, "bath.explicit", "omega")) e.omega = *w;
            if (auto tj = rd.integer<int>(*ex, "bath.explicit", "two_j", false); tj && *tj != cfg.two_j)
                rd.fail("bath.explicit.two_j", "j mismatch: bath has two_j = " + std::to_string(*tj) +
                                                   " but the run uses two_j = " + std::to_string(cfg.two_j));
            try {
                BathSpec{SpinLength(cfg.two_j), e.g, e.omega}.validate();
            } catch (const ConfigError& err) {
                for (const auto& v : err.violations()) rd.errors.push_back(v);
            }
            cfg.bath_source = std::move(e);
        } else {
            OhmicBath o;
            if (auto a = rd.number(*oh, "bath.ohmic", "alpha")) {
                if (*a < 0.0) rd.fail("bath.ohmic.alpha", "must be >= 0");
                o.spec.alpha = *a;
            }
            if (auto wc = rd.number(*oh, "bath.ohmic", "omega_c")) {
                if (!(*wc > 0.0)) rd.fail("bath.ohmic.omega_c", "must be > 0");
                o.spec.omega_c = *wc;
            }
            if (auto n = rd.integer<std::size_t>(*oh, "bath.ohmic", "N")) {
                if (*n < 1) rd.fail("bath.ohmic.N", "must be >= 1");
                o.modes = *n;
            }
            if (auto wm = rd.number(*oh, "bath.ohmic", "omega_max")) {
                if (!(*wm > 0.0)) rd.fail("bath.ohmic.omega_max", "must be > 0");
                o.omega_max = *wm;
            }
            cfg.bath_source = o;
        }
    }

    // Run block
    if (const json* r = rd.child(doc, "config", "run")) {
        if (const json* e = rd.child(*r, "run", "engine")) {
            if (!e->is_string()) rd.fail("run.engine", "expected a string");
            else {
                try {
                    cfg.run.engine = engine_from_string(e->get<std::string>());
                } catch (const ConfigError& err) {
                    rd.fail("run.engine", err.violations().front());
                }
            }
        }
        if (auto v = rd.integer<std::size_t>(*r, "run", "M")) {
            if (*v < 1) rd.fail("run.M", "must be >= 1");
            cfg.run.trajectories = *v;
        }
        if (auto v = rd.integer<int>(*r, "run", "K", false)) {
            if (*v < 0) rd.fail("run.K", "must be >= 0");
            cfg.run.max_order = *v;
        }
        if (auto v = rd.number(*r, "run", "dt")) {
            if (!(*v > 0.0)) rd.fail("run.dt", "must be > 0");
            cfg.run.dt = *v;
        }
        if (auto v = rd.number(*r, "run", "t_max")) {
            if (!(*v > 0.0)) rd.fail("run.t_max", "must be > 0");
            cfg.run.t_max = *v;
        }
        if (auto v = rd.integer<std::size_t>(*r, "run", "n_outputs")) {
            if (*v < 2) rd.fail("run.n_outputs", "must be >= 2");
            cfg.run.n_outputs = *v;
        }
        if (auto v = rd.integer<std::uint64_t>(*r, "run", "seed")) cfg.run.seed = *v;
        if (const json* v = rd.child(*r, "run", "rescale", false)) {
            if (!v->is_boolean()) rd.fail("run.rescale", "expected true or false");
            else cfg.run.rescale = v->get<bool>();
        }
        if (auto v = rd.number(*r, "run", "max_abort_fraction", false)) {
            if (*v < 0.0) rd.fail("run.max_abort_fraction", "must be >= 0");
            cfg.run.max_abort_fraction = *v;
        }
        if (auto v = rd.integer<std::size_t>(*r, "run", "dimension_cap", false)) cfg.run.dimension_cap = *v;
        if (auto v = rd.number(*r, "run", "z_max", false)) {
            if (!(*v > 0.0)) rd.fail("run.z_max", "must be > 0");
            cfg.run.z_max = *v;
        }
        if (cfg.run.dt > 0.0 && cfg.run.t_max > 0.0 && cfg.run.n_outputs >= 2) {
            const double spacing = cfg.run.t_max / static_cast<double>(cfg.run.n_outputs - 1);
            if (cfg.run.dt > spacing * (1.0 + 1e-12)) {
                rd.fail("run.dt", "dt exceeds the output grid spacing " + fmt_double(spacing));
            } else {
                try {
                    cfg.grid().steps_per_interval(cfg.run.dt);
                } catch (const ConfigError& err) {
                    rd.fail("run.dt", err.violations().front());
                }
            }
        }
    }

    if (const json* c = rd.child(doc, "config", "convergence", false)) {
        if (const json* ml = rd.child(*c, "convergence", "M_list")) {
            if (!ml->is_array() || ml->empty()) rd.fail("convergence.M_list", "expected a non-empty array");
            else {
                for (std::size_t i = 0; i < ml->size(); ++i) {
                    const json& v = (*ml)[i];
                    if (!v.is_number_unsigned() || v.get<std::size_t>() < 1) {
                        rd.fail("convergence.M_list[" + std::to_string(i) + "]", "expected a positive integer");
                        continue;
                    }
                    const auto m = v.get<std::size_t>();
                    if (!cfg.convergence_counts.empty() && m <= cfg.convergence_counts.back())
                        rd.fail("convergence.M_list", "values must be strictly increasing");
                    cfg.convergence_counts.push_back(m);
                }
            }
        }
    }

    if (const json* o = rd.child(doc, "config", "output", false)) {
        if (const json* d = rd.child(*o, "output", "dir", false)) {
            if (!d->is_string()) rd.fail("output.dir", "expected a string");
            else cfg.output_dir = d->get<std::string>();
        }
        if (const json* p = rd.child(*o, "output", "prefix", false)) {
            if (!p->is_string()) rd.fail("output.prefix", "expected a string");
            else cfg.output_prefix = p->get<std::string>();
        }
    }

    if (!rd.errors.empty()) throw ConfigError(std::move(rd.errors));
    return cfg;
}

RunConfig parse_and_validate(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

json to_json(const RunConfig& c) {
    // nlohmann::ordered_json would keep insertion order; plain json sorts keys, which is
    // already canonical.
    json doc;
    doc["two_j"] = c.two_j;
    doc["beta"] = c.beta ? json(*c.beta) : json(nullptr);
    json model;
    model["H_S"] = matrix_json(c.model.hamiltonian);
    json l = json::object();
    for (int a = 0; a < 3; ++a) l[kAxes[a]] = matrix_json(c.model.coupling[a]);
    model["L"] = l;
    json psi = json::array();
    for (Eigen::Index i = 0; i < c.model.psi0.size(); ++i) psi.push_back(complex_json(c.model.psi0[i]));
    model["psi0"] = psi;
    doc["model"] = model;
    if (!c.observables.empty()) {
        json obs = json::object();
        for (const auto& o : c.observables) obs[o.name] = matrix_json(o.op);
        doc["observables"] = obs;
    }
    if (const auto* e = std::get_if<ExplicitBath>(&c.bath_source)) {
        doc["bath"]["explicit"] = {{"g", e->g}, {"omega", e->omega}};
    } else {
        const auto& o = std::get<OhmicBath>(c.bath_source);
        doc["bath"]["ohmic"] = {
            {"alpha", o.spec.alpha}, {"omega_c", o.spec.omega_c}, {"N", o.modes}, {"omega_max", o.omega_max}};
    }
    doc["run"] = {{"engine", to_string(c.run.engine)},
                  {"M", c.run.trajectories},
                  {"K", c.run.max_order},
                  {"dt", c.run.dt},
                  {"t_max", c.run.t_max},
                  {"n_outputs", c.run.n_outputs},
                  {"seed", c.run.seed},
                  {"rescale", c.run.rescale},
                  {"max_abort_fraction", c.run.max_abort_fraction},
                  {"dimension_cap", c.run.dimension_cap},
                  {"z_max", c.run.z_max}};
    if (!c.convergence_counts.empty()) doc["convergence"]["M_list"] = c.convergence_counts;
    doc["output"] = {{"dir", c.output_dir}, {"prefix", c.output_prefix}};
    return doc;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string csv_header(Eigen::Index dim, const std::vector<ObservableSeries>& observables) {
    std::ostringstream os;
    os << "t";
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = i; j < dim; ++j) os << ",re_rho_" << i << "_" << j << ",im_rho_" << i << "_" << j;
    for (const auto& o : observables) os << "," << o.name << "_mean," << o.name << "_stderr";
    return os.str();
}

std::string format_csv(const std::vector<double>& times, const std::vector<CMatrix>& rho,
                       const std::vector<ObservableSeries>& observables) {
    const Eigen::Index dim = rho.empty() ? 0 : rho.front().rows();
    std::string out = csv_header(dim, observables);
    out += '\n';
    for (std::size_t t = 0; t < times.size(); ++t) {
        out += fmt_double(times[t]);
        for (Eigen::Index i = 0; i < dim; ++i) {
            for (Eigen::Index j = i; j < dim; ++j) {
                out += ',';
                out += fmt_double(rho[t](i, j).real());
                out += ',';
                out += fmt_double(rho[t](i, j).imag());
            }
        }
        for (const auto& o : observables) {
            out += ',';
            out += fmt_double(o.mean[t]);
            out += ',';
            out += o.std_error[t] ? fmt_double(*o.std_error[t]) : std::string("nan");
        }
        out += '\n';
    }
    return out;
}

}  // namespace spinqsd

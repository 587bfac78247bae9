#include "levmax/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace levmax {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config error at '" + path + "': " + what);
}

// ---- TOML subset ----------------------------------------------------------

struct TomlCursor {
    const std::string& text;
    std::size_t pos = 0;
    int line = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char get() {
        const char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }
    void skip_ws_inline() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
};

[[noreturn]] void toml_fail(const TomlCursor& cur, const std::string& what) {
    throw ConfigError("toml parse error on line " + std::to_string(cur.line) + ": " + what);
}

std::string parse_toml_string(TomlCursor& cur) {
    if (cur.get() != '"') toml_fail(cur, "expected '\"'");
    std::string out;
    while (!cur.eof()) {
        const char c = cur.get();
        if (c == '"') return out;
        if (c == '\\') {
            if (cur.eof()) break;
            const char e = cur.get();
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: toml_fail(cur, "unsupported escape");
            }
        } else if (c == '\n') {
            toml_fail(cur, "newline in string");
        } else {
            out.push_back(c);
        }
    }
    toml_fail(cur, "unterminated string");
}

json parse_toml_value(TomlCursor& cur);

json parse_toml_array(TomlCursor& cur) {
    if (cur.get() != '[') toml_fail(cur, "expected '['");
    json arr = json::array();
    for (;;) {
        // whitespace, newlines and comments are allowed inside arrays
        while (!cur.eof()) {
            cur.skip_ws_inline();
            if (!cur.eof() && cur.peek() == '#') {
                while (!cur.eof() && cur.peek() != '\n') ++cur.pos;
            } else if (!cur.eof() && (cur.peek() == '\n' || cur.peek() == '\r')) {
                cur.get();
            } else {
                break;
            }
        }
        if (cur.eof()) toml_fail(cur, "unterminated array");
        if (cur.peek() == ']') {
            cur.get();
            return arr;
        }
        arr.push_back(parse_toml_value(cur));
        while (!cur.eof()) {
            cur.skip_ws_inline();
            if (!cur.eof() && cur.peek() == '#') {
                while (!cur.eof() && cur.peek() != '\n') ++cur.pos;
            } else if (!cur.eof() && (cur.peek() == '\n' || cur.peek() == '\r')) {
                cur.get();
            } else {
                break;
            }
        }
        if (cur.eof()) toml_fail(cur, "unterminated array");
        if (cur.peek() == ',') {
            cur.get();
            continue;
        }
        if (cur.peek() == ']') {
            cur.get();
            return arr;
        }
        toml_fail(cur, "expected ',' or ']' in array");
    }
}

json parse_toml_value(TomlCursor& cur) {
    cur.skip_ws_inline();
    if (cur.eof()) toml_fail(cur, "expected a value");
    const char c = cur.peek();
    if (c == '"') return parse_toml_string(cur);
    if (c == '[') return parse_toml_array(cur);
    std::string tok;
    while (!cur.eof() && cur.peek() != ',' && cur.peek() != ']' && cur.peek() != '\n' &&
           cur.peek() != '\r' && cur.peek() != '#') {
        tok.push_back(cur.get());
    }
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok.empty()) toml_fail(cur, "empty value");
    // integer or float
    const bool is_int = tok.find_first_of(".eEnN") == std::string::npos;
    try {
        std::size_t used = 0;
        if (is_int) {
            const long long v = std::stoll(tok, &used);
            if (used == tok.size()) return v;
        }
        const double v = std::stod(tok, &used);
        if (used != tok.size()) toml_fail(cur, "bad number '" + tok + "'");
        return v;
    } catch (const std::exception&) {
        toml_fail(cur, "bad value '" + tok + "'");
    }
}

}  // namespace

json toml_subset_to_json(const std::string& text) {
    TomlCursor cur{text};
    json root = json::object();
    json* table = &root;
    while (!cur.eof()) {
        cur.skip_ws_inline();
        if (cur.eof()) break;
        const char c = cur.peek();
        if (c == '\n' || c == '\r') {
            cur.get();
            continue;
        }
        if (c == '#') {
            while (!cur.eof() && cur.peek() != '\n') ++cur.pos;
            continue;
        }
        if (c == '[') {
            cur.get();
            std::string name;
            while (!cur.eof() && cur.peek() != ']') name.push_back(cur.get());
            if (cur.eof()) toml_fail(cur, "unterminated table header");
            cur.get();
            table = &root;
            std::stringstream ss(name);
            std::string part;
            while (std::getline(ss, part, '.')) {
                if (part.empty()) toml_fail(cur, "empty table name");
                table = &(*table)[part];
                if (!table->is_object() && !table->is_null()) toml_fail(cur, "table redefines key");
                if (table->is_null()) *table = json::object();
            }
            continue;
        }
        std::string key;
        while (!cur.eof() && (std::isalnum(static_cast<unsigned char>(cur.peek())) ||
                              cur.peek() == '_' || cur.peek() == '-')) {
            key.push_back(cur.get());
        }
        if (key.empty()) toml_fail(cur, "expected a key");
        cur.skip_ws_inline();
        if (cur.eof() || cur.get() != '=') toml_fail(cur, "expected '=' after key");
        json value = parse_toml_value(cur);
        if (table->contains(key)) toml_fail(cur, "duplicate key '" + key + "'");
        (*table)[key] = std::move(value);
        cur.skip_ws_inline();
        if (!cur.eof() && cur.peek() == '#')
            while (!cur.eof() && cur.peek() != '\n') ++cur.pos;
        if (!cur.eof() && cur.peek() != '\n' && cur.peek() != '\r')
            toml_fail(cur, "trailing characters after value");
    }
    return root;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) fail(path, "expected a table");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) fail(path + "." + key, "unknown key");
    }
}

double need_number(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) fail(path + "." + std::string(key), "missing key");
    const auto& v = j.at(key);
    if (!v.is_number()) fail(path + "." + std::string(key), "expected a number");
    return v.get<double>();
}

double opt_number(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<double>();
}

std::vector<double> number_array(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(path, "expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

Matrix number_matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected an array of rows");
    std::vector<std::vector<double>> rows;
    for (const auto& row : v) rows.push_back(number_array(row, path));
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols) fail(path, "ragged matrix");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

StepFunction step_from_config(const json& section, const std::string& path, const char* name,
                              double fallback) {
    const std::string breaks_key = std::string(name) + "_breaks";
    const std::string values_key = std::string(name) + "_values";
    if (section.contains(breaks_key) || section.contains(values_key)) {
        if (!section.contains(breaks_key) || !section.contains(values_key))
            fail(path, std::string(name) + "_breaks and _values must come together");
        return StepFunction(number_array(section.at(breaks_key), path + "." + breaks_key),
                            number_array(section.at(values_key), path + "." + values_key));
    }
    if (section.contains(name)) return StepFunction::constant(section.at(name).get<double>());
    return StepFunction::constant(fallback);
}

std::function<double(double)> penalty_term_function(const json& terms, const std::string& path) {
    struct Term {
        std::string form;
        double coef = 0.0;
        double param = 0.0;
    };
    std::vector<Term> parsed;
    if (!terms.is_array()) fail(path, "expected an array of terms");
    for (const auto& t : terms) {
        if (!t.is_array() || t.size() < 2 || !t.at(0).is_string())
            fail(path, "each term is [form, coef, param?]");
        Term term;
        term.form = t.at(0).get<std::string>();
        term.coef = t.at(1).get<double>();
        term.param = t.size() > 2 ? t.at(2).get<double>() : 0.0;
        if (term.coef < 0.0) fail(path, "term coefficients must be >= 0");
        if (term.form != "abs_pow" && term.form != "expm1_sq" && term.form != "pos_quad" &&
            term.form != "log_neg")
            fail(path, "unknown term form '" + term.form + "'");
        parsed.push_back(term);
    }
    return [parsed](double x) {
        double acc = 0.0;
        for (const auto& t : parsed) {
            if (t.form == "abs_pow") {
                acc += t.coef * std::pow(std::fabs(x), t.param);
            } else if (t.form == "expm1_sq") {
                acc += t.coef * std::expm1(t.param * x * x);
            } else if (t.form == "pos_quad") {
                if (x >= 0.0) acc += t.coef * x * (1.0 + x);
            } else if (t.form == "log_neg") {
                if (x > -1.0 && x < 0.0)
                    acc += t.coef * std::max(std::fabs(x), x * std::log1p(x));
            }
        }
        return acc;
    };
}

}  // namespace

RunConfig config_from_json(const json& j, const std::string& config_hash) {
    RunConfig cfg;
    cfg.config_hash = config_hash;
    check_keys(j, "", {"version", "grid", "levy", "market", "utility", "penalty", "control",
                       "solver", "oracle", "output"});
    if (j.contains("version")) {
        if (!j.at("version").is_number_integer()) fail("version", "expected an integer");
        cfg.version = j.at("version").get<int>();
        if (cfg.version != 1) fail("version", "unsupported config version");
    }

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, "grid", {"horizon_T", "n_steps"});
        cfg.grid = make_time_grid(need_number(g, "grid", "horizon_T"),
                                  static_cast<std::size_t>(need_number(g, "grid", "n_steps")));
    }

    if (j.contains("levy")) {
        const auto& l = j.at("levy");
        check_keys(l, "levy", {"drift_b", "lambda", "jump_sizes", "jump_probs"});
        std::vector<double> sizes, probs;
        if (l.contains("jump_sizes")) sizes = number_array(l.at("jump_sizes"), "levy.jump_sizes");
        if (l.contains("jump_probs")) probs = number_array(l.at("jump_probs"), "levy.jump_probs");
        if (sizes.size() != probs.size()) fail("levy", "jump_sizes and jump_probs must match");
        std::vector<std::pair<double, double>> atoms;
        for (std::size_t k = 0; k < sizes.size(); ++k) atoms.emplace_back(sizes[k], probs[k]);
        try {
            cfg.model = build_levy_model(opt_number(l, "drift_b", 0.0),
                                         opt_number(l, "lambda", 0.0), atoms);
        } catch (const std::invalid_argument& e) {
            fail("levy", e.what());
        }
    }

    if (j.contains("market")) {
        const auto& m = j.at("market");
        check_keys(m, "market",
                   {"alpha", "alpha_breaks", "alpha_values", "beta", "beta_breaks", "beta_values",
                    "gamma", "gamma_breaks", "gamma_values", "s0", "beta_floor_c", "a3_bound",
                    "pi", "pi_breaks", "pi_values"});
        cfg.market.alpha = step_from_config(m, "market", "alpha", 0.0);
        cfg.market.beta = step_from_config(m, "market", "beta", 1.0);
        const std::size_t n_atoms = cfg.model.n_atoms();
        if (m.contains("gamma_values")) {
            std::vector<double> breaks = m.contains("gamma_breaks")
                                             ? number_array(m.at("gamma_breaks"), "market.gamma_breaks")
                                             : std::vector<double>{0.0};
            cfg.market.gamma =
                JumpCoefficient(breaks, number_matrix(m.at("gamma_values"), "market.gamma_values"));
            if (cfg.market.gamma.n_atoms() != n_atoms)
                fail("market.gamma_values", "column count must equal the number of jump atoms");
        } else {
            cfg.market.gamma = JumpCoefficient::constant(opt_number(m, "gamma", 0.0), n_atoms);
        }
        cfg.market_pi = step_from_config(m, "market", "pi", 0.0);
        cfg.market.s0 = opt_number(m, "s0", 1.0);
        cfg.market.beta_floor_c = opt_number(m, "beta_floor_c", 1e-8);
        cfg.market.a3_bound = opt_number(m, "a3_bound", 1e6);
        cfg.market.horizon_T = cfg.grid.horizon_T;
        cfg.has_market = true;
    }

    if (j.contains("utility")) {
        const auto& u = j.at("utility");
        check_keys(u, "utility", {"kind", "q", "certificate_q", "table_x", "table_u"});
        const std::string kind = u.contains("kind") ? u.at("kind").get<std::string>() : "log";
        if (kind == "log") {
            cfg.utility = make_log_utility();
        } else if (kind == "power") {
            const double q = need_number(u, "utility", "q");
            if (q == 0.0 || q >= 1.0) fail("utility.q", "q must lie in (-inf,1)\\{0}");
            cfg.utility = make_power_utility(q);
        } else if (kind == "custom") {
            if (!u.contains("table_x") || !u.contains("table_u"))
                fail("utility", "custom utility needs table_x and table_u");
            cfg.utility = make_table_utility(number_array(u.at("table_x"), "utility.table_x"),
                                             number_array(u.at("table_u"), "utility.table_u"));
            cfg.utility.certificate_q = opt_number(u, "certificate_q",
                                                   std::numeric_limits<double>::quiet_NaN());
        } else {
            fail("utility.kind", "expected log | power | custom");
        }
        cfg.has_utility = true;
    }

    if (j.contains("penalty")) {
        const auto& p = j.at("penalty");
        check_keys(p, "penalty",
                   {"kind", "scale", "q", "h_terms", "h0_terms", "h1_terms", "delta"});
        const std::string kind = p.contains("kind") ? p.at("kind").get<std::string>() : "log";
        if (kind == "log") {
            cfg.penalty = make_log_penalty(cfg.grid.horizon_T);
        } else if (kind == "power") {
            const double q = p.contains("q")
                                 ? p.at("q").get<double>()
                                 : (cfg.has_utility && cfg.utility.kind == UtilitySpec::Kind::power
                                        ? cfg.utility.q
                                        : 0.0);
            if (q == 0.0 || q >= 1.0) fail("penalty.q", "q must lie in (-inf,1)\\{0}");
            cfg.penalty = make_power_penalty(q, cfg.grid.horizon_T, cfg.market.beta_floor_c,
                                             cfg.market.gamma);
        } else if (kind == "custom") {
            if (!p.contains("h_terms") || !p.contains("h0_terms") || !p.contains("h1_terms"))
                fail("penalty", "custom penalty needs h_terms, h0_terms, h1_terms");
            cfg.penalty.h = penalty_term_function(p.at("h_terms"), "penalty.h_terms");
            cfg.penalty.h0 = penalty_term_function(p.at("h0_terms"), "penalty.h0_terms");
            cfg.penalty.h1 = penalty_term_function(p.at("h1_terms"), "penalty.h1_terms");
            const double d = opt_number(p, "delta", 1.0);
            cfg.penalty.delta = [d](double, std::size_t, double) { return d; };
            cfg.penalty.label = "custom";
            const auto rep = cfg.penalty.validate();
            if (!rep.ok()) fail("penalty", "custom penalty rejected: " + rep.detail);
        } else {
            fail("penalty.kind", "expected log | power | custom");
        }
        const double scale = opt_number(p, "scale", 1.0);
        if (scale != 1.0) cfg.penalty = scale_penalty(cfg.penalty, scale);
        cfg.has_penalty = true;
    }

    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_keys(s, "solver",
                   {"k_t", "theta0_box", "theta1_box", "theta1_floor", "n_paths", "seed",
                    "multi_starts", "max_sweeps", "tol", "y", "x", "y_lo", "y_hi", "y_points",
                    "audit_probes"});
        cfg.family.k_t = static_cast<std::size_t>(opt_number(s, "k_t", 4));
        cfg.family.theta0_box = opt_number(s, "theta0_box", 3.0);
        cfg.family.theta1_box_hi = opt_number(s, "theta1_box", 3.0);
        cfg.family.theta1_floor = opt_number(s, "theta1_floor", 1e-6);
        cfg.mc.n_paths = static_cast<std::size_t>(opt_number(s, "n_paths", 100000));
        cfg.mc.seed = static_cast<std::uint64_t>(opt_number(s, "seed", 1));
        cfg.solver_options.multi_starts =
            static_cast<std::size_t>(opt_number(s, "multi_starts", 8));
        cfg.solver_options.max_sweeps = static_cast<std::size_t>(opt_number(s, "max_sweeps", 30));
        cfg.solver_options.tol = opt_number(s, "tol", 1e-6);
        cfg.solver_y = opt_number(s, "y", 1.0);
        cfg.solver_x = opt_number(s, "x", 1.0);
        cfg.primal_options.y_lo = opt_number(s, "y_lo", 1e-3);
        cfg.primal_options.y_hi = opt_number(s, "y_hi", 1e3);
        cfg.primal_options.y_points = static_cast<std::size_t>(opt_number(s, "y_points", 33));
        cfg.audit_probes = static_cast<std::size_t>(opt_number(s, "audit_probes", 10));
    }

    if (j.contains("control")) {
        const auto& c = j.at("control");
        check_keys(c, "control", {"k_t", "theta0", "theta1", "complete_elmm", "theta1_floor"});
        const std::size_t k_t = static_cast<std::size_t>(opt_number(c, "k_t", 1));
        if (k_t == 0 || cfg.grid.n_steps % k_t != 0)
            fail("control.k_t", "must divide grid.n_steps");
        std::vector<double> breaks(k_t);
        for (std::size_t b = 0; b < k_t; ++b)
            breaks[b] = cfg.grid.node(b * (cfg.grid.n_steps / k_t));
        Matrix th1(k_t, cfg.model.n_atoms());
        if (c.contains("theta1")) {
            th1 = number_matrix(c.at("theta1"), "control.theta1");
            if (th1.rows != k_t || th1.cols != cfg.model.n_atoms())
                fail("control.theta1", "needs k_t rows and one column per atom");
        }
        cfg.control.theta1 = JumpCoefficient(breaks, std::move(th1));
        cfg.control.theta1_floor = opt_number(c, "theta1_floor", 1e-6);
        cfg.control_complete_elmm = c.contains("complete_elmm") && c.at("complete_elmm").get<bool>();
        if (cfg.control_complete_elmm) {
            if (!cfg.has_market) fail("control.complete_elmm", "needs a [market] block");
            cfg.control =
                complete_to_elmm(cfg.market, cfg.control.theta1, cfg.grid, cfg.model);
        } else {
            std::vector<double> th0(k_t, 0.0);
            if (c.contains("theta0")) {
                th0 = number_array(c.at("theta0"), "control.theta0");
                if (th0.size() != k_t) fail("control.theta0", "needs k_t entries");
            }
            cfg.control.theta0 = StepFunction(breaks, std::move(th0));
        }
        try {
            cfg.control.validate();
        } catch (const std::invalid_argument& e) {
            fail("control", e.what());
        }
        cfg.has_control = true;
    }

    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        check_keys(o, "oracle",
                   {"p_ref", "s0", "s_T", "penalty", "penalty_a", "penalty_c", "resolution",
                    "x_values"});
        OracleConfig oc;
        oc.market.p_ref = number_array(o.at("p_ref"), "oracle.p_ref");
        oc.market.s0 = opt_number(o, "s0", 1.0);
        oc.market.s_T = number_array(o.at("s_T"), "oracle.s_T");
        const std::string kind =
            o.contains("penalty") ? o.at("penalty").get<std::string>() : "quadratic";
        if (kind == "quadratic") {
            oc.market.penalty =
                quadratic_penalty_table(oc.market.p_ref, opt_number(o, "penalty_a", 5.0));
        } else if (kind == "entropic") {
            oc.market.penalty = entropic_penalty_table(oc.market.p_ref);
        } else if (kind == "affine") {
            if (!o.contains("penalty_c")) fail("oracle.penalty_c", "required for affine penalty");
            oc.market.penalty = affine_penalty_table(
                oc.market.p_ref, number_array(o.at("penalty_c"), "oracle.penalty_c"));
        } else {
            fail("oracle.penalty", "expected quadratic | entropic | affine");
        }
        oc.resolution = static_cast<int>(opt_number(o, "resolution", 40));
        if (o.contains("x_values")) oc.x_values = number_array(o.at("x_values"), "oracle.x_values");
        try {
            oc.market.validate();
        } catch (const std::invalid_argument& e) {
            fail("oracle", e.what());
        }
        cfg.oracle = std::move(oc);
    }

    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, "output", {"dir", "write_csv"});
        if (o.contains("dir")) cfg.out_dir = o.at("dir").get<std::string>();
        if (o.contains("write_csv")) cfg.write_csv = o.at("write_csv").get<bool>();
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::string hash = fnv1a_hex(text);

    json j;
    const bool looks_json = text.find_first_not_of(" \t\r\n") != std::string::npos &&
                            text[text.find_first_not_of(" \t\r\n")] == '{';
    if (looks_json || path.ends_with(".json")) {
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("json parse error: ") + e.what());
        }
    } else {
        j = toml_subset_to_json(text);
    }
    return config_from_json(j, hash);
}

}  // namespace levmax

#include "fdot/config.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fdot {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + key, "invalid value for '" + path + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& path) {
    std::set<std::string> allowed(known.begin(), known.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(path + it.key(), "unknown configuration key '" + path + it.key() + "'");
        }
    }
}

void read_network(const json& j, NetworkSpec& spec, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "'" + path + "' must be an object");
    reject_unknown(j, {"widths", "activation"}, path + ".");
    read_if(j, "widths", spec.widths, path + ".");
    read_if(j, "activation", spec.activation, path + ".");
}

void read_counts(const json& j, CollocationCounts& c, const std::string& path) {
    reject_unknown(j, {"N_int", "N_sb", "N_tb", "N_d"}, path + ".");
    read_if(j, "N_int", c.n_int, path + ".");
    read_if(j, "N_sb", c.n_sb, path + ".");
    read_if(j, "N_tb", c.n_tb, path + ".");
    read_if(j, "N_d", c.n_d, path + ".");
}

void read_schedule(const json& j, ScheduleSpec& s, const std::string& path) {
    reject_unknown(j, {"initial", "decay_factor", "decay_interval"}, path + ".");
    read_if(j, "initial", s.initial, path + ".");
    read_if(j, "decay_factor", s.decay_factor, path + ".");
    read_if(j, "decay_interval", s.decay_interval, path + ".");
}

GammaSpec parse_gamma(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "full") return GammaSpec::full();
        throw ConfigError("gamma_spec", "gamma_spec string must be \"full\"");
    }
    if (!j.is_array()) throw ConfigError("gamma_spec", "gamma_spec must be \"full\" or a list of edges");
    GammaSpec g{false, false, false, false};
    for (const auto& e : j) {
        const auto name = e.get<std::string>();
        if (name == "left") g.left = true;
        else if (name == "right") g.right = true;
        else if (name == "bottom") g.bottom = true;
        else if (name == "top") g.top = true;
        else throw ConfigError("gamma_spec", "unknown edge '" + name + "' in gamma_spec");
    }
    return g;
}

json gamma_json(const GammaSpec& g) {
    if (g == GammaSpec::full()) return "full";
    json arr = json::array();
    if (g.left) arr.push_back("left");
    if (g.right) arr.push_back("right");
    if (g.bottom) arr.push_back("bottom");
    if (g.top) arr.push_back("top");
    return arr;
}

void check(bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
}

void check_network(const NetworkSpec& n, const char* field) {
    check(n.widths.size() >= 2, field, std::string(field) + " needs at least input and output widths");
    check(n.widths.front() == 3, field, std::string(field) + " input width must be 3 (x, y, t)");
    check(n.widths.back() == 1, field, std::string(field) + " output width must be 1");
    for (int w : n.widths) check(w >= 1, field, std::string(field) + " widths must be positive");
    check(n.activation == "tanh", field, std::string(field) + " activation must be tanh");
}

void check_counts(const CollocationCounts& c, const char* field, bool needs_data) {
    check(c.n_int >= 1 && c.n_sb >= 1 && c.n_tb >= 1, field,
          std::string(field) + " counts must be at least 1");
    if (needs_data) check(c.n_d >= 1, field, std::string(field) + ".N_d must be at least 1");
}

void check_schedule(const ScheduleSpec& s, const char* field) {
    check(s.initial > 0, field, std::string(field) + ".initial must be positive");
    check(s.decay_factor > 0 && s.decay_factor <= 1, field,
          std::string(field) + ".decay_factor must lie in (0, 1]");
    check(s.decay_interval >= 1, field, std::string(field) + ".decay_interval must be at least 1");
}

}  // namespace

bool GammaSpec::contains(Edge e) const {
    switch (e) {
        case Edge::left: return left;
        case Edge::right: return right;
        case Edge::bottom: return bottom;
        case Edge::top: return top;
    }
    return false;
}

void ExperimentConfig::validate() const {
    check(domain.x_max > domain.x_min && domain.y_max > domain.y_min, "domain", "domain bounds must be increasing");
    check(final_time > 0, "final_time", "final_time must be positive");
    check(coefficients.c > 0, "coefficients.c", "coefficients.c must be positive");
    check(coefficients.kappa > 0, "coefficients.kappa", "coefficients.kappa must be positive");
    check(coefficients.mu_a > 0, "coefficients.mu_a", "coefficients.mu_a must be positive");
    check(coefficients.beta > 0, "coefficients.beta", "coefficients.beta must be positive");
    check(!gamma_spec.empty(), "gamma_spec", "gamma_spec must select at least one edge");
    check(K_time_mesh >= 1, "K_time_mesh", "K_time_mesh must be at least 1");
    check(noise_delta >= 0, "noise_delta", "noise_delta must be nonnegative");
    check(example == "example1" || example == "example2", "example", "example must be example1 or example2");
    check_network(net_excitation, "networks.excitation");
    check_network(net_emission, "networks.emission");
    check_network(net_source, "networks.source");
    check(lambda_weight >= 0, "lambda_weight", "lambda_weight must be nonnegative");
    check_counts(collocation, "collocation", true);
    check_counts(excitation_collocation, "excitation_collocation", false);
    check(K1 >= 0, "epochs.K1", "epochs.K1 must be nonnegative");
    check(K2 >= 0, "epochs.K2", "epochs.K2 must be nonnegative");
    check_schedule(schedule_excitation, "learning_rate.excitation");
    check_schedule(schedule_inverse, "learning_rate.inverse");
    check(grid.nx >= 3 && grid.ny >= 3 && grid.nt >= 2, "grid", "grid needs nx, ny >= 3 and nt >= 2");
    check((grid.nt - 1) % K_time_mesh == 0, "grid.nt", "grid.nt - 1 must be a multiple of K_time_mesh");
    check(data_refinement >= 2, "data_refinement", "data_refinement must be at least 2");
    check(log_interval >= 1, "log_interval", "log_interval must be at least 1");
    check(eval_interval >= 0, "eval_interval", "eval_interval must be nonnegative");
}

ExperimentConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("config parse failure: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("", "config root must be an object");
    reject_unknown(j,
                   {"domain", "final_time", "coefficients", "gamma_spec", "K_time_mesh", "noise_delta", "example",
                    "networks", "lambda_weight", "boundary_derivative", "collocation", "excitation_collocation", "epochs", "learning_rate",
                    "rng_seed", "grid", "data_refinement", "log_interval", "eval_interval"},
                   "");

    ExperimentConfig cfg;
    if (j.contains("domain")) {
        const auto& d = j["domain"];
        reject_unknown(d, {"x_min", "x_max", "y_min", "y_max"}, "domain.");
        read_if(d, "x_min", cfg.domain.x_min, "domain.");
        read_if(d, "x_max", cfg.domain.x_max, "domain.");
        read_if(d, "y_min", cfg.domain.y_min, "domain.");
        read_if(d, "y_max", cfg.domain.y_max, "domain.");
    }
    read_if(j, "final_time", cfg.final_time, "");
    if (j.contains("coefficients")) {
        const auto& c = j["coefficients"];
        reject_unknown(c, {"c", "kappa", "mu_a", "beta"}, "coefficients.");
        read_if(c, "c", cfg.coefficients.c, "coefficients.");
        read_if(c, "kappa", cfg.coefficients.kappa, "coefficients.");
        read_if(c, "mu_a", cfg.coefficients.mu_a, "coefficients.");
        read_if(c, "beta", cfg.coefficients.beta, "coefficients.");
    }
    if (j.contains("gamma_spec")) cfg.gamma_spec = parse_gamma(j["gamma_spec"]);
    read_if(j, "K_time_mesh", cfg.K_time_mesh, "");
    read_if(j, "noise_delta", cfg.noise_delta, "");
    read_if(j, "example", cfg.example, "");
    if (j.contains("networks")) {
        const auto& n = j["networks"];
        reject_unknown(n, {"excitation", "emission", "source"}, "networks.");
        if (n.contains("excitation")) read_network(n["excitation"], cfg.net_excitation, "networks.excitation");
        if (n.contains("emission")) read_network(n["emission"], cfg.net_emission, "networks.emission");
        if (n.contains("source")) read_network(n["source"], cfg.net_source, "networks.source");
    }
    read_if(j, "lambda_weight", cfg.lambda_weight, "");
    if (j.contains("boundary_derivative")) {
        const auto& b = j["boundary_derivative"];
        if (b == "normal") cfg.boundary_derivative = BoundaryDerivative::normal;
        else if (b == "tangential") cfg.boundary_derivative = BoundaryDerivative::tangential;
        else throw ConfigError("boundary_derivative", "boundary_derivative must be \"normal\" or \"tangential\"");
    }
    if (j.contains("collocation")) read_counts(j["collocation"], cfg.collocation, "collocation");
    if (j.contains("excitation_collocation"))
        read_counts(j["excitation_collocation"], cfg.excitation_collocation, "excitation_collocation");
    if (j.contains("epochs")) {
        const auto& e = j["epochs"];
        reject_unknown(e, {"K1", "K2"}, "epochs.");
        read_if(e, "K1", cfg.K1, "epochs.");
        read_if(e, "K2", cfg.K2, "epochs.");
    }
    if (j.contains("learning_rate")) {
        const auto& lr = j["learning_rate"];
        reject_unknown(lr, {"excitation", "inverse", "rate_source", "rate_emission"}, "learning_rate.");
        if (lr.contains("excitation")) read_schedule(lr["excitation"], cfg.schedule_excitation, "learning_rate.excitation");
        if (lr.contains("inverse")) read_schedule(lr["inverse"], cfg.schedule_inverse, "learning_rate.inverse");
        read_if(lr, "rate_source", cfg.rate_source, "learning_rate.");
        read_if(lr, "rate_emission", cfg.rate_emission, "learning_rate.");
    }
    read_if(j, "rng_seed", cfg.rng_seed, "");
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        reject_unknown(g, {"nx", "ny", "nt"}, "grid.");
        read_if(g, "nx", cfg.grid.nx, "grid.");
        read_if(g, "ny", cfg.grid.ny, "grid.");
        read_if(g, "nt", cfg.grid.nt, "grid.");
    }
    read_if(j, "data_refinement", cfg.data_refinement, "");
    read_if(j, "log_interval", cfg.log_interval, "");
    read_if(j, "eval_interval", cfg.eval_interval, "");

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    auto net = [](const NetworkSpec& n) { return json{{"widths", n.widths}, {"activation", n.activation}}; };
    auto counts = [](const CollocationCounts& c) {
        return json{{"N_int", c.n_int}, {"N_sb", c.n_sb}, {"N_tb", c.n_tb}, {"N_d", c.n_d}};
    };
    auto sched = [](const ScheduleSpec& s) {
        return json{{"initial", s.initial}, {"decay_factor", s.decay_factor}, {"decay_interval", s.decay_interval}};
    };
    json j;
    j["domain"] = {{"x_min", cfg.domain.x_min},
                   {"x_max", cfg.domain.x_max},
                   {"y_min", cfg.domain.y_min},
                   {"y_max", cfg.domain.y_max}};
    j["final_time"] = cfg.final_time;
    j["coefficients"] = {{"c", cfg.coefficients.c},
                         {"kappa", cfg.coefficients.kappa},
                         {"mu_a", cfg.coefficients.mu_a},
                         {"beta", cfg.coefficients.beta}};
    j["gamma_spec"] = gamma_json(cfg.gamma_spec);
    j["K_time_mesh"] = cfg.K_time_mesh;
    j["noise_delta"] = cfg.noise_delta;
    j["example"] = cfg.example;
    j["networks"] = {{"excitation", net(cfg.net_excitation)},
                     {"emission", net(cfg.net_emission)},
                     {"source", net(cfg.net_source)}};
    j["lambda_weight"] = cfg.lambda_weight;
    j["boundary_derivative"] = cfg.boundary_derivative == BoundaryDerivative::normal ? "normal" : "tangential";
    j["collocation"] = counts(cfg.collocation);
    j["excitation_collocation"] = counts(cfg.excitation_collocation);
    j["epochs"] = {{"K1", cfg.K1}, {"K2", cfg.K2}};
    j["learning_rate"] = {{"excitation", sched(cfg.schedule_excitation)},
                          {"inverse", sched(cfg.schedule_inverse)},
                          {"rate_source", cfg.rate_source},
                          {"rate_emission", cfg.rate_emission}};
    j["rng_seed"] = cfg.rng_seed;
    j["grid"] = {{"nx", cfg.grid.nx}, {"ny", cfg.grid.ny}, {"nt", cfg.grid.nt}};
    j["data_refinement"] = cfg.data_refinement;
    j["log_interval"] = cfg.log_interval;
    j["eval_interval"] = cfg.eval_interval;
    return j.dump(2);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file " + path.string());
    out << config_to_json(cfg) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::mt19937_64 make_engine(std::uint64_t seed, std::string_view label) {
    const std::uint64_t h = fnv1a(label);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)), engine_(make_engine(seed_, label_)) {}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t RngStream::index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::index: empty range");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

RngStream RngStream::substream(std::string_view sub) const {
    return RngStream(seed_, label_ + "/" + std::string(sub));
}

// ---------------------------------------------------------------------------

void Table::add_row(const Record& rec) {
    if (columns.empty() && rows.empty()) {
        for (const auto& [k, _] : rec) columns.push_back(k);
    }
    std::vector<double> row;
    row.reserve(columns.size());
    for (const auto& col : columns) {
        auto it = rec.find(col);
        if (it == rec.end()) throw std::invalid_argument("record is missing column '" + col + "'");
        row.push_back(it->second);
    }
    if (rec.size() != columns.size()) throw std::invalid_argument("record has columns outside the table header");
    rows.push_back(std::move(row));
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf.data(), ptr);
}

void export_table(const Table& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write table " + path.string());
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out << ',';
        out << table.columns[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) throw std::invalid_argument("row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failure on " + path.string());
}

void export_table(const std::vector<Record>& rows, const std::vector<std::string>& columns,
                  const std::filesystem::path& path) {
    Table t;
    t.columns = columns;
    for (const auto& r : rows) t.add_row(r);
    export_table(t, path);
}

Table import_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read table " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) return t;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc()) {
                // from_chars rejects "inf"/"nan" spellings produced elsewhere; fall back to strtod.
                v = std::strtod(cell.c_str(), nullptr);
            }
            row.push_back(v);
        }
        if (row.size() != t.columns.size())
            throw std::runtime_error("malformed row in " + path.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string run_id(std::string_view text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
    return buf;
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& files,
                    const std::filesystem::path& path) {
    const std::string cfg_text = config_to_json(cfg);
    json j;
    j["run_id"] = run_id(cfg_text);
    j["config"] = json::parse(cfg_text);
    json inv = json::array();
    for (const auto& f : files) {
        json entry{{"path", f.filename().string()}};
        std::error_code ec;
        const auto size = std::filesystem::file_size(f, ec);
        if (!ec) entry["bytes"] = size;
        inv.push_back(entry);
    }
    j["files"] = inv;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace fdot

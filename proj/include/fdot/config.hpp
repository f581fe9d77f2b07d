#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fdot {

/// Thrown when a configuration value violates its invariant; `field()` names
/// the offending key (dotted path).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct Coefficients {
    double c = 1.0;
    double kappa = 1.0;
    double mu_a = 0.1;
    double beta = 1.0;
    bool operator==(const Coefficients&) const = default;
};

struct Domain {
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    double length_x() const { return x_max - x_min; }
    double length_y() const { return y_max - y_min; }
    bool operator==(const Domain&) const = default;
};

/// Edges of the rectangle. Order is fixed and used everywhere for boundary bookkeeping.
enum class Edge : int { left = 0, right = 1, bottom = 2, top = 3 };

/// Union of rectangle edges making up the measurement boundary.
struct GammaSpec {
    bool left = true, right = true, bottom = true, top = true;
    bool contains(Edge e) const;
    bool empty() const { return !(left || right || bottom || top); }
    static GammaSpec full() { return {}; }
    bool operator==(const GammaSpec&) const = default;
};

struct NetworkSpec {
    std::vector<int> widths{3, 20, 20, 20, 1};
    std::string activation = "tanh";
    bool operator==(const NetworkSpec&) const = default;
};

struct CollocationCounts {
    int n_int = 500;
    int n_sb = 2000;  // total over all edges
    int n_tb = 500;
    int n_d = 500;
    bool operator==(const CollocationCounts&) const = default;
};

struct ScheduleSpec {
    double initial = 1e-3;
    double decay_factor = 0.1;
    int decay_interval = 20000;
    bool operator==(const ScheduleSpec&) const = default;
};

/// Direction of the first-order boundary derivatives in the emission loss (sb1, sb3).
/// `normal` differentiates B u along the outward normal. `tangential` differentiates along the edge,
/// which is the derivative the H^1 boundary norm controls and is satisfied by the exact solution.
enum class BoundaryDerivative { normal, tangential };

struct GridResolution {
    int nx = 33, ny = 33, nt = 65;
    bool operator==(const GridResolution&) const = default;
};

/// Full experiment description. Defaults reproduce the reduced-scale Example 2 setup.
struct ExperimentConfig {
    Domain domain;
    double final_time = 1.0;
    Coefficients coefficients;
    GammaSpec gamma_spec;
    int K_time_mesh = 8;
    double noise_delta = 0.01;
    std::string example = "example2";

    NetworkSpec net_excitation;
    NetworkSpec net_emission;
    NetworkSpec net_source;

    double lambda_weight = 100.0;
    BoundaryDerivative boundary_derivative = BoundaryDerivative::normal;
    CollocationCounts collocation;
    CollocationCounts excitation_collocation{256, 1024, 256, 0};

    int K1 = 20000;
    int K2 = 10000;
    ScheduleSpec schedule_excitation{1e-3, 0.1, 20000};
    ScheduleSpec schedule_inverse{2e-3, 0.1, 5000};
    // Per-network overrides of the inverse initial rate; <= 0 means "use schedule_inverse.initial".
    double rate_source = 0.0;
    double rate_emission = 0.0;

    std::uint64_t rng_seed = 0;
    GridResolution grid;
    int data_refinement = 2;
    int log_interval = 1;
    int eval_interval = 500;

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws ConfigError naming the first violated field.
    void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view json_text);
std::string config_to_json(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Labeled deterministic random stream. Identical (seed, label) pairs replay identical draws.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string label);

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }

    /// Uniform on [0, 1) with 53 random bits; independent of the standard library's distributions.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n);

    /// Derived stream `label/sub`, e.g. one per epoch.
    RngStream substream(std::string_view sub) const;

private:
    std::uint64_t seed_;
    std::string label_;
    std::mt19937_64 engine_;
};

/// One CSV row: column name -> value. All rows of a table share the same keys.
using Record = std::map<std::string, double>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_row(const Record& rec);
    bool operator==(const Table&) const = default;
};

/// Writes a CSV with header `columns` and full round-trip precision (%.17g).
void export_table(const Table& table, const std::filesystem::path& path);
/// Convenience: column order is taken from `columns`, rows may list keys in any order.
void export_table(const std::vector<Record>& rows, const std::vector<std::string>& columns,
                  const std::filesystem::path& path);
Table import_table(const std::filesystem::path& path);

std::string format_double(double v);

/// 16-hex-digit FNV-1a digest of the text; used as a run id.
std::string run_id(std::string_view text);

/// JSON manifest: config echo, produced files, run id.
void write_manifest(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& files,
                    const std::filesystem::path& path);

}  // namespace fdot

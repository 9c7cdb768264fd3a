#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bmmp/pgm.hpp"
#include "bmmp/problem.hpp"
#include "bmmp/solvers.hpp"

namespace bmmp {

// One solver entry of an experiment: registry name plus optional config
// overrides. label defaults to name and becomes the report/plot column id.
struct SolverSpec {
    std::string name;
    std::string label;
    std::optional<CorrelationKind> correlation;
    std::optional<int> g;
    std::optional<int> gomp_t;

    const std::string& display() const { return label.empty() ? name : label; }
};

struct GridPoint {
    int m = 0;
    int n = 0;
    int k = 0;
    std::optional<double> snr_db;  // nullopt = noiseless
};

struct ExperimentConfig {
    std::string experiment = "custom";
    std::vector<GridPoint> grid;
    std::vector<SolverSpec> solvers;
    int trials = 1;
    std::uint64_t seed_base = 0;
    SignalPrior prior;
    int jobs = 1;
};

struct TrialRecord {
    std::string experiment;
    std::string solver;
    int m = 0, n = 0, k = 0;
    std::optional<double> snr_db;
    int trial = 0;
    std::uint64_t trial_seed = 0;
    bool skipped = false;  // infeasible solver/grid combination
    bool exact = false;    // recovered support equals the true support
    double sq_error = 0.0;
    double wall_time_s = 0.0;
    int iterations = 0;
};

struct MetricsSummary {
    std::string solver;
    int m = 0, n = 0, k = 0;
    std::optional<double> snr_db;
    int trial_count = 0;
    double recovery_rate = 0.0;
    double ci95_half_width = 0.0;  // Wilson 95% interval half-width
    double mse = 0.0;
    double mean_time_s = 0.0;
};

// Runs trials x grid x solvers. All solvers at one (grid point, trial) share
// the same instance; the instance seed depends only on seed_base, the grid
// point values and the trial index, so any subset of the grid reproduces
// bit-identically.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& config);

// Group-by (solver, m, n, k, snr); skipped records are excluded.
std::vector<MetricsSummary> aggregate(const std::vector<TrialRecord>& records);

// Shortest round-trip decimal representation.
std::string format_double(double value);

void write_records_csv(const std::string& path, const std::vector<TrialRecord>& records,
                       bool overwrite = true);
std::vector<TrialRecord> read_records_csv(const std::string& path);
void write_summaries_csv(const std::string& path, const std::vector<MetricsSummary>& summaries,
                         bool overwrite = true);
std::vector<MetricsSummary> read_summaries_csv(const std::string& path);
void write_records_json(const std::string& path, const std::vector<TrialRecord>& records,
                        bool overwrite = true);
void write_summaries_json(const std::string& path, const std::vector<MetricsSummary>& summaries,
                          bool overwrite = true);

enum class PlotAxis { K, M, Snr };
enum class PlotValue { RecoveryRate, Mse };

// Whitespace-delimited columns: x, then one column per solver label in the
// given order. Missing points become nan; ambiguous (duplicate) points are
// an error.
void emit_plot_data(const std::string& path, const std::vector<MetricsSummary>& summaries,
                    PlotAxis axis, PlotValue value, const std::vector<std::string>& solver_labels,
                    bool overwrite = true);

// Canned experiment grids: fig2a (noiseless phase transition at m=128,
// n=256), fig2c (MSE vs SNR at k=60), fig2d (ablation ladder), fig3
// (detector comparison over m with k = floor(m/1.8), n = 2m). scale shrinks
// every dimension proportionally for desk-scale runs.
ExperimentConfig preset_config(const std::string& name, double scale, int trials,
                               std::uint64_t seed_base);
const std::vector<std::string>& preset_names();

struct ImageDemoEntry {
    std::string solver;
    std::vector<double> reconstruction;  // unclipped, 0..255 scale
    GrayImage display;                   // clipped and rounded
    double mse = 0.0;
    double psnr = 0.0;  // +inf when mse is zero
};

struct ImageDemoResult {
    int k = 0;  // measured nonzero pixel count
    std::vector<ImageDemoEntry> entries;
};

// Compresses the image with a fresh Gaussian matrix (sigma = 1/sqrt(m)) and
// reconstructs it with each solver. Throws when the nonzero pixel count
// reaches m.
ImageDemoResult image_demo(const GrayImage& image, int m, std::optional<double> snr_db,
                           const std::vector<SolverSpec>& solvers, std::uint64_t seed);

}  // namespace bmmp

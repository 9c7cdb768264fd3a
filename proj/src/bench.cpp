#include "bmmp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "bmmp/rng.hpp"

namespace bmmp {

namespace {

constexpr std::uint64_t kTagTrial = 101;

std::uint64_t snr_bits(const std::optional<double>& snr_db) {
    return snr_db.has_value() ? std::bit_cast<std::uint64_t>(*snr_db) : ~0ULL;
}

std::uint64_t trial_seed(std::uint64_t seed_base, const GridPoint& point, int trial) {
    return Rng::derive(seed_base,
                       {kTagTrial, static_cast<std::uint64_t>(point.m),
                        static_cast<std::uint64_t>(point.n), static_cast<std::uint64_t>(point.k),
                        snr_bits(point.snr_db), static_cast<std::uint64_t>(trial)});
}

SolverConfig apply_overrides(SolverConfig config, const SolverSpec& spec) {
    if (spec.correlation)
        config.correlation = *spec.correlation;
    if (spec.g)
        config.g = *spec.g;
    if (spec.gomp_t)
        config.gomp_t = *spec.gomp_t;
    return config;
}

// All solvers of one (grid point, trial) cell, sharing one instance.
std::vector<TrialRecord> run_cell(const ExperimentConfig& config, const GridPoint& point,
                                  int trial) {
    const std::uint64_t seed = trial_seed(config.seed_base, point, trial);
    const ProblemInstance inst =
        make_instance(point.m, point.n, point.k, config.prior, point.snr_db, seed);
    std::vector<TrialRecord> records;
    records.reserve(config.solvers.size());
    for (const SolverSpec& spec : config.solvers) {
        TrialRecord rec;
        rec.experiment = config.experiment;
        rec.solver = spec.display();
        rec.m = point.m;
        rec.n = point.n;
        rec.k = point.k;
        rec.snr_db = point.snr_db;
        rec.trial = trial;
        rec.trial_seed = seed;
        try {
            const SolverConfig solver_config =
                apply_overrides(make_solver_config(inst, spec.name), spec);
            const RecoveryResult result = solve_by_name(spec.name, inst.phi, inst.y, solver_config);
            rec.exact = result.support_hat == inst.support_true;
            rec.sq_error = (result.x_hat - inst.x_true).squaredNorm();
            rec.wall_time_s = result.wall_time_s;
            rec.iterations = result.iterations;
        } catch (const std::invalid_argument&) {
            rec.skipped = true;  // infeasible combination (e.g. 3k > m)
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void ensure_writable(const std::string& path, bool overwrite) {
    if (!overwrite && std::filesystem::exists(path))
        throw std::runtime_error("output file already exists: " + path);
}

std::ofstream open_output(const std::string& path, bool overwrite) {
    ensure_writable(path, overwrite);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open output file: " + path);
    return out;
}

std::string optional_to_string(const std::optional<double>& value) {
    return value.has_value() ? format_double(*value) : std::string();
}

std::optional<double> parse_optional_double(const std::string& text) {
    if (text.empty())
        return std::nullopt;
    return std::stod(text);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

// Timing is intentionally absent from the CSV schema: the CSV files are the
// deterministic, byte-reproducible artifact of a run. Per-trial wall times
// live in the JSON outputs.
const char* kRecordsHeader =
    "experiment,solver,m,n,k,snr_db,trial,trial_seed,skipped,exact_support_recovery,"
    "squared_error,iterations";
const char* kSummariesHeader =
    "solver,m,n,k,snr_db,trials,recovery_rate,recovery_rate_ci95,mse";

using GroupKey = std::tuple<std::string, int, int, int, bool, double>;

GroupKey summary_key(const TrialRecord& rec) {
    return {rec.solver, rec.m, rec.n, rec.k, rec.snr_db.has_value(),
            rec.snr_db.value_or(0.0)};
}

double wilson_half_width(double rate, int n) {
    if (n <= 0)
        return 0.0;
    const double z = 1.959963984540054;
    const double z2 = z * z;
    const double nn = static_cast<double>(n);
    return z * std::sqrt(rate * (1.0 - rate) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& config) {
    if (config.grid.empty() || config.solvers.empty() || config.trials < 1)
        throw std::invalid_argument("run_experiment: empty grid/solvers or trials < 1");
    for (const SolverSpec& spec : config.solvers)
        if (!is_known_solver(spec.name))
            throw std::invalid_argument("run_experiment: unknown solver " + spec.name);

    const std::size_t cell_count = config.grid.size() * static_cast<std::size_t>(config.trials);
    std::vector<std::vector<TrialRecord>> cells(cell_count);

    auto run_task = [&](std::size_t task) {
        const std::size_t grid_index = task / static_cast<std::size_t>(config.trials);
        const int trial = static_cast<int>(task % static_cast<std::size_t>(config.trials));
        cells[task] = run_cell(config, config.grid[grid_index], trial);
    };

    const int jobs = std::max(config.jobs, 1);
    if (jobs == 1) {
        for (std::size_t task = 0; task < cell_count; ++task)
            run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t task = next.fetch_add(1); task < cell_count;
                     task = next.fetch_add(1))
                    run_task(task);
            });
        }
        for (auto& worker : workers)
            worker.join();
    }

    std::vector<TrialRecord> records;
    records.reserve(cell_count * config.solvers.size());
    for (auto& cell : cells)
        for (auto& rec : cell)
            records.push_back(std::move(rec));
    return records;
}

std::vector<MetricsSummary> aggregate(const std::vector<TrialRecord>& records) {
    std::map<GroupKey, std::vector<const TrialRecord*>> groups;
    for (const TrialRecord& rec : records)
        if (!rec.skipped)
            groups[summary_key(rec)].push_back(&rec);

    std::vector<MetricsSummary> summaries;
    summaries.reserve(groups.size());
    for (const auto& [key, group] : groups) {
        MetricsSummary s;
        s.solver = std::get<0>(key);
        s.m = std::get<1>(key);
        s.n = std::get<2>(key);
        s.k = std::get<3>(key);
        if (std::get<4>(key))
            s.snr_db = std::get<5>(key);
        s.trial_count = static_cast<int>(group.size());
        int successes = 0;
        double sq_sum = 0.0, time_sum = 0.0;
        for (const TrialRecord* rec : group) {
            successes += rec->exact ? 1 : 0;
            sq_sum += rec->sq_error;
            time_sum += rec->wall_time_s;
        }
        s.recovery_rate = static_cast<double>(successes) / static_cast<double>(group.size());
        s.ci95_half_width = wilson_half_width(s.recovery_rate, s.trial_count);
        s.mse = sq_sum / static_cast<double>(group.size());
        s.mean_time_s = time_sum / static_cast<double>(group.size());
        summaries.push_back(std::move(s));
    }
    return summaries;
}

void write_records_csv(const std::string& path, const std::vector<TrialRecord>& records,
                       bool overwrite) {
    std::ofstream out = open_output(path, overwrite);
    out << kRecordsHeader << '\n';
    for (const TrialRecord& rec : records) {
        out << rec.experiment << ',' << rec.solver << ',' << rec.m << ',' << rec.n << ','
            << rec.k << ',' << optional_to_string(rec.snr_db) << ',' << rec.trial << ','
            << rec.trial_seed << ',' << (rec.skipped ? 1 : 0) << ',' << (rec.exact ? 1 : 0)
            << ',' << format_double(rec.sq_error) << ',' << rec.iterations << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

std::vector<TrialRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kRecordsHeader)
        throw std::runtime_error("unexpected records header in " + path);
    std::vector<TrialRecord> records;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 12)
            throw std::runtime_error("malformed record row in " + path);
        TrialRecord rec;
        rec.experiment = f[0];
        rec.solver = f[1];
        rec.m = std::stoi(f[2]);
        rec.n = std::stoi(f[3]);
        rec.k = std::stoi(f[4]);
        rec.snr_db = parse_optional_double(f[5]);
        rec.trial = std::stoi(f[6]);
        rec.trial_seed = std::stoull(f[7]);
        rec.skipped = f[8] == "1";
        rec.exact = f[9] == "1";
        rec.sq_error = std::stod(f[10]);
        rec.iterations = std::stoi(f[11]);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_summaries_csv(const std::string& path, const std::vector<MetricsSummary>& summaries,
                         bool overwrite) {
    std::ofstream out = open_output(path, overwrite);
    out << kSummariesHeader << '\n';
    for (const MetricsSummary& s : summaries) {
        out << s.solver << ',' << s.m << ',' << s.n << ',' << s.k << ','
            << optional_to_string(s.snr_db) << ',' << s.trial_count << ','
            << format_double(s.recovery_rate) << ',' << format_double(s.ci95_half_width) << ','
            << format_double(s.mse) << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

std::vector<MetricsSummary> read_summaries_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kSummariesHeader)
        throw std::runtime_error("unexpected summaries header in " + path);
    std::vector<MetricsSummary> summaries;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 9)
            throw std::runtime_error("malformed summary row in " + path);
        MetricsSummary s;
        s.solver = f[0];
        s.m = std::stoi(f[1]);
        s.n = std::stoi(f[2]);
        s.k = std::stoi(f[3]);
        s.snr_db = parse_optional_double(f[4]);
        s.trial_count = std::stoi(f[5]);
        s.recovery_rate = std::stod(f[6]);
        s.ci95_half_width = std::stod(f[7]);
        s.mse = std::stod(f[8]);
        summaries.push_back(std::move(s));
    }
    return summaries;
}

namespace {

nlohmann::json record_to_json(const TrialRecord& rec) {
    nlohmann::json j;
    j["experiment"] = rec.experiment;
    j["solver"] = rec.solver;
    j["m"] = rec.m;
    j["n"] = rec.n;
    j["k"] = rec.k;
    if (rec.snr_db)
        j["snr_db"] = *rec.snr_db;
    else
        j["snr_db"] = nullptr;
    j["trial"] = rec.trial;
    j["trial_seed"] = rec.trial_seed;
    j["skipped"] = rec.skipped;
    j["exact_support_recovery"] = rec.exact;
    j["squared_error"] = rec.sq_error;
    j["wall_time_s"] = rec.wall_time_s;
    j["iterations"] = rec.iterations;
    return j;
}

nlohmann::json summary_to_json(const MetricsSummary& s) {
    nlohmann::json j;
    j["solver"] = s.solver;
    j["m"] = s.m;
    j["n"] = s.n;
    j["k"] = s.k;
    if (s.snr_db)
        j["snr_db"] = *s.snr_db;
    else
        j["snr_db"] = nullptr;
    j["trials"] = s.trial_count;
    j["recovery_rate"] = s.recovery_rate;
    j["recovery_rate_ci95"] = s.ci95_half_width;
    j["mse"] = s.mse;
    j["mean_time_s"] = s.mean_time_s;
    return j;
}

}  // namespace

void write_records_json(const std::string& path, const std::vector<TrialRecord>& records,
                        bool overwrite) {
    std::ofstream out = open_output(path, overwrite);
    nlohmann::json j = nlohmann::json::array();
    for (const TrialRecord& rec : records)
        j.push_back(record_to_json(rec));
    out << j.dump(2) << '\n';
}

void write_summaries_json(const std::string& path, const std::vector<MetricsSummary>& summaries,
                          bool overwrite) {
    std::ofstream out = open_output(path, overwrite);
    nlohmann::json j = nlohmann::json::array();
    for (const MetricsSummary& s : summaries)
        j.push_back(summary_to_json(s));
    out << j.dump(2) << '\n';
}

void emit_plot_data(const std::string& path, const std::vector<MetricsSummary>& summaries,
                    PlotAxis axis, PlotValue value, const std::vector<std::string>& solver_labels,
                    bool overwrite) {
    auto x_of = [axis](const MetricsSummary& s) -> double {
        switch (axis) {
            case PlotAxis::K: return static_cast<double>(s.k);
            case PlotAxis::M: return static_cast<double>(s.m);
            case PlotAxis::Snr:
                if (!s.snr_db)
                    throw std::runtime_error("emit_plot_data: noiseless summary on SNR axis");
                return *s.snr_db;
        }
        return 0.0;
    };
    auto value_of = [value](const MetricsSummary& s) {
        return value == PlotValue::RecoveryRate ? s.recovery_rate : s.mse;
    };

    std::map<std::pair<std::string, double>, double> cells;
    std::vector<double> xs;
    for (const MetricsSummary& s : summaries) {
        if (std::find(solver_labels.begin(), solver_labels.end(), s.solver) ==
            solver_labels.end())
            continue;
        const double x = x_of(s);
        const auto key = std::make_pair(s.solver, x);
        if (cells.count(key))
            throw std::runtime_error("emit_plot_data: duplicate point for solver " + s.solver +
                                     " at x=" + format_double(x));
        cells[key] = value_of(s);
        xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::ofstream out = open_output(path, overwrite);
    out << "# x";
    for (const std::string& label : solver_labels)
        out << ' ' << label;
    out << '\n';
    for (double x : xs) {
        out << format_double(x);
        for (const std::string& label : solver_labels) {
            const auto it = cells.find({label, x});
            out << ' ' << (it == cells.end() ? "nan" : format_double(it->second));
        }
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

namespace {

const std::vector<std::string> kPresetNames = {"fig2a", "fig2c", "fig2d", "fig3"};

int scaled_dim(int base, double scale, int floor_value) {
    return std::max(floor_value, static_cast<int>(std::lround(base * scale)));
}

}  // namespace

const std::vector<std::string>& preset_names() { return kPresetNames; }

ExperimentConfig preset_config(const std::string& name, double scale, int trials,
                               std::uint64_t seed_base) {
    if (scale <= 0.0)
        throw std::invalid_argument("preset_config: scale must be > 0");
    ExperimentConfig config;
    config.trials = trials;
    config.seed_base = seed_base;
    if (name == "fig2a" || name == "fig2d") {
        config.experiment = name == "fig2a" ? "phase_transition" : "ablation";
        const int m = scaled_dim(128, scale, 16);
        const int n = 2 * m;
        const double k_fractions_2a[] = {0.25, 0.3125, 0.375, 0.4375, 0.5};
        const double k_fractions_2d[] = {0.3125, 0.375, 0.4375, 0.5};
        const auto fractions = name == "fig2a" ? std::span<const double>(k_fractions_2a)
                                               : std::span<const double>(k_fractions_2d);
        for (double frac : fractions) {
            const int k = std::clamp(static_cast<int>(std::lround(frac * m)), 1, m - 1);
            config.grid.push_back({m, n, k, std::nullopt});
        }
        if (name == "fig2a")
            config.solvers = {{"bmmp"},   {"map-gomp"}, {"map-sp"},
                              {"map-cosamp"}, {"map-omp"},  {"omp"}};
        else
            config.solvers = {{"bmmp"}, {"bmmp-u"}, {"bmmp-um"}, {"bmmp-ume"}};
    } else if (name == "fig2c") {
        config.experiment = "mse_vs_snr";
        config.prior = SignalPrior{0.1, 1.0};
        const int m = scaled_dim(128, scale, 16);
        const int n = 2 * m;
        const int k = std::clamp(static_cast<int>(std::lround(60.0 / 128.0 * m)), 1, m - 1);
        for (double snr : {20.0, 25.0, 30.0, 35.0, 40.0})
            config.grid.push_back({m, n, k, snr});
        config.solvers = {{"bmmp"}, {"map-gomp"}, {"map-sp"}, {"map-cosamp"}, {"map-omp"}};
    } else if (name == "fig3") {
        config.experiment = "detector_compare";
        for (int base_m : {32, 64, 96, 128, 160, 192, 224, 256}) {
            const int m = scaled_dim(base_m, scale, 8);
            // small scales can collapse neighboring points
            if (!config.grid.empty() && config.grid.back().m == m)
                continue;
            const int k = std::max(1, static_cast<int>(m / 1.8));
            config.grid.push_back({m, 2 * m, k, std::nullopt});
        }
        SolverSpec proposed{"map-gomp", "map-gomp-g", CorrelationKind::RaOrmp, {}, {}};
        SolverSpec baseline{"map-gomp", "map-gomp-h", CorrelationKind::NormalizedOmp, {}, {}};
        config.solvers = {proposed, baseline};
    } else {
        throw std::invalid_argument("preset_config: unknown preset " + name);
    }
    return config;
}

ImageDemoResult image_demo(const GrayImage& image, int m, std::optional<double> snr_db,
                           const std::vector<SolverSpec>& solvers, std::uint64_t seed) {
    const int n = image.width * image.height;
    if (n < 1)
        throw std::invalid_argument("image_demo: empty image");

    ProblemInstance inst;
    inst.x_true = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
        inst.x_true[i] = static_cast<double>(image.pixels[static_cast<std::size_t>(i)]) / 255.0;
        if (image.pixels[static_cast<std::size_t>(i)] != 0)
            inst.support_true.push_back(i);
    }
    const int k = static_cast<int>(inst.support_true.size());
    if (k >= m)
        throw std::invalid_argument("image_demo: image too dense (nonzero pixels >= m)");

    inst.k = k;
    inst.model.m = m;
    inst.model.n = n;
    inst.model.sigma = 1.0 / std::sqrt(static_cast<double>(m));
    inst.prior = SignalPrior{0.0, 1.0};
    inst.snr_db = snr_db;
    inst.seed = seed;
    inst.phi = gen_matrix(inst.model, Rng::derive(seed, {1}));
    inst.model.sigma_w = 0.0;
    if (snr_db.has_value() && inst.x_true.norm() > 0.0)
        inst.model.sigma_w = sigma_w_from_snr(inst.phi, inst.x_true, *snr_db);
    inst.y = synthesize(inst.phi, inst.x_true, inst.model.sigma_w, Rng::derive(seed, {3}));

    ImageDemoResult result;
    result.k = k;
    for (const SolverSpec& spec : solvers) {
        if (!is_known_solver(spec.name))
            throw std::invalid_argument("image_demo: unknown solver " + spec.name);
        const SolverConfig config = apply_overrides(make_solver_config(inst, spec.name), spec);
        const RecoveryResult solved = solve_by_name(spec.name, inst.phi, inst.y, config);

        ImageDemoEntry entry;
        entry.solver = spec.display();
        entry.reconstruction.resize(static_cast<std::size_t>(n));
        entry.display.width = image.width;
        entry.display.height = image.height;
        entry.display.pixels.resize(static_cast<std::size_t>(n));
        double sq_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double pixel = solved.x_hat[i] * 255.0;
            entry.reconstruction[static_cast<std::size_t>(i)] = pixel;
            const double diff = pixel - static_cast<double>(image.pixels[static_cast<std::size_t>(i)]);
            sq_sum += diff * diff;
            // clip only for the display file; the metric uses unclipped values
            const double clipped = std::clamp(std::round(pixel), 0.0, 255.0);
            entry.display.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(clipped);
        }
        entry.mse = sq_sum / static_cast<double>(n);
        entry.psnr = entry.mse == 0.0 ? std::numeric_limits<double>::infinity()
                                      : 10.0 * std::log10(255.0 * 255.0 / entry.mse);
        result.entries.push_back(std::move(entry));
    }
    return result;
}

}  // namespace bmmp

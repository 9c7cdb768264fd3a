// Command-line front end: instance generation, single-shot solving,
// benchmark sweeps, plot-data extraction and the image demo. Consumers are
// scripts; every run echoes its fully resolved configuration first and is
// deterministic given --seed.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmmp/bench.hpp"
#include "bmmp/pgm.hpp"
#include "bmmp/problem.hpp"
#include "bmmp/solvers.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("BMMP_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

bmmp::SignalPrior parse_prior(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw CLI::ValidationError("--prior", "expected a,b");
    bmmp::SignalPrior prior;
    prior.a = std::stod(text.substr(0, comma));
    prior.b = std::stod(text.substr(comma + 1));
    if (prior.a >= prior.b)
        throw CLI::ValidationError("--prior", "requires a < b");
    return prior;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream stream(text);
    std::string part;
    while (std::getline(stream, part, ','))
        if (!part.empty())
            parts.push_back(part);
    return parts;
}

void echo(const std::string& key, const std::string& value) {
    std::cout << "config " << key << " = " << value << '\n';
}

void echo_solver_config(const bmmp::SolverConfig& c) {
    echo("k", std::to_string(c.k));
    echo("g", std::to_string(c.g));
    echo("epsilon", bmmp::format_double(c.epsilon));
    echo("lambda", bmmp::format_double(c.lambda));
    echo("mode", c.mode == bmmp::EstimateMode::Noiseless ? "noiseless" : "noisy");
    echo("correlation", c.correlation == bmmp::CorrelationKind::RaOrmp ? "g" : "h");
    echo("prior", bmmp::format_double(c.prior.a) + "," + bmmp::format_double(c.prior.b));
    echo("sigma", bmmp::format_double(c.sigma));
    echo("sigma_w", bmmp::format_double(c.sigma_w));
    echo("gomp_t", std::to_string(c.gomp_t));
    echo("replace_size", std::to_string(c.replace_size >= 0 ? c.replace_size : c.k / 2));
    echo("max_extended_size", std::to_string(c.max_extended_size));
    echo("early_exit", c.early_exit ? "true" : "false");
}

int run(int argc, char** argv) {
    CLI::App app{"sparse-recovery toolbox: Bayesian multiple matching pursuit and baselines"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a synthetic problem instance");
    int gen_m = 128, gen_n = 256, gen_k = 60;
    double gen_snr = 0.0;
    bool gen_noiseless = false;
    std::string gen_prior = "0,1";
    std::uint64_t gen_seed = default_seed();
    std::string gen_out;
    gen->add_option("--m", gen_m, "measurements");
    gen->add_option("--n", gen_n, "signal dimension");
    gen->add_option("--k", gen_k, "sparsity");
    auto* snr_opt = gen->add_option("--snr", gen_snr, "SNR in dB");
    gen->add_flag("--noiseless", gen_noiseless, "no measurement noise");
    gen->add_option("--prior", gen_prior, "uniform prior bounds a,b");
    gen->add_option("--seed", gen_seed, "RNG seed (default: BMMP_SEED env or 0)");
    gen->add_option("--out", gen_out, "output instance file")->required();

    // ---- solve ----
    auto* solve = app.add_subcommand("solve", "run one solver on an instance file");
    std::string solve_in, solve_solver = "bmmp", solve_out, solve_corr;
    int solve_g = 4, solve_gomp_t = 2;
    double solve_epsilon = -1.0;
    solve->add_option("--in", solve_in, "instance file")->required();
    solve->add_option("--solver", solve_solver, "one of: bmmp, bmmp-u, bmmp-um, bmmp-ume, omp, "
                                                "gomp, sp, cosamp, map-omp, map-gomp, map-sp, "
                                                "map-cosamp");
    solve->add_option("--g", solve_g, "number of support candidates");
    solve->add_option("--gomp-t", solve_gomp_t, "indices per gOMP step");
    solve->add_option("--epsilon", solve_epsilon, "residual threshold override");
    solve->add_option("--correlation", solve_corr, "g (RA-ORMP) or h (normalized OMP)");
    solve->add_option("--out", solve_out, "JSON result file");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "run a Monte Carlo benchmark sweep");
    std::string bench_preset = "fig2a", bench_prefix = "bench";
    double bench_scale = 1.0;
    int bench_trials = 100, bench_jobs = 1;
    std::uint64_t bench_seed = default_seed();
    bench->add_option("--preset", bench_preset, "fig2a | fig2c | fig2d | fig3");
    bench->add_option("--scale", bench_scale, "proportional problem-size factor");
    bench->add_option("--trials", bench_trials, "Monte Carlo trials per grid point");
    bench->add_option("--seed", bench_seed, "base seed");
    bench->add_option("--jobs", bench_jobs, "parallel worker threads");
    bench->add_option("--out-prefix", bench_prefix, "prefix for records/summary/plot files");

    // ---- image ----
    auto* image = app.add_subcommand("image", "compress and reconstruct a sparse PGM image");
    std::string image_in, image_prefix = "image", image_solvers = "bmmp,map-omp";
    int image_m = 138;
    double image_snr = 25.0;
    bool image_noiseless = false;
    std::uint64_t image_seed = default_seed();
    image->add_option("--in", image_in, "input PGM (binary P5)")->required();
    image->add_option("--m", image_m, "measurements");
    image->add_option("--snr", image_snr, "SNR in dB");
    image->add_flag("--noiseless", image_noiseless, "no measurement noise");
    image->add_option("--solvers", image_solvers, "comma-separated solver list");
    image->add_option("--seed", image_seed, "RNG seed");
    image->add_option("--out-prefix", image_prefix, "prefix for reconstruction files");

    // ---- plot-data ----
    auto* plot = app.add_subcommand("plot-data", "extract plot columns from a summary CSV");
    std::string plot_summary, plot_axis = "k", plot_value = "rate", plot_solvers, plot_out;
    plot->add_option("--summary", plot_summary, "summary CSV from bench")->required();
    plot->add_option("--axis", plot_axis, "x axis: k | m | snr");
    plot->add_option("--value", plot_value, "cell value: rate | mse");
    plot->add_option("--solvers", plot_solvers, "comma-separated column order")->required();
    plot->add_option("--out", plot_out, "output plot-data file")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        if (gen_noiseless == snr_opt->count()) {
            std::cerr << "gen: exactly one of --snr and --noiseless is required\n";
            return kExitUsage;
        }
        const bmmp::SignalPrior prior = parse_prior(gen_prior);
        if (gen_k >= gen_n || gen_k >= gen_m || gen_k < 0 || gen_m >= gen_n) {
            std::cerr << "gen: requires 0 <= k < m < n\n";
            return kExitUsage;
        }
        std::optional<double> snr;
        if (!gen_noiseless)
            snr = gen_snr;
        echo("m", std::to_string(gen_m));
        echo("n", std::to_string(gen_n));
        echo("k", std::to_string(gen_k));
        echo("snr_db", snr ? bmmp::format_double(*snr) : "noiseless");
        echo("prior", gen_prior);
        echo("seed", std::to_string(gen_seed));
        echo("out", gen_out);
        const auto inst = bmmp::make_instance(gen_m, gen_n, gen_k, prior, snr, gen_seed);
        bmmp::save_instance(inst, gen_out);
        std::cout << "wrote " << gen_out << '\n';
        return 0;
    }

    if (solve->parsed()) {
        if (!bmmp::is_known_solver(solve_solver)) {
            std::cerr << "solve: unknown solver " << solve_solver << '\n';
            return kExitUsage;
        }
        if (solve_g < 1) {
            std::cerr << "solve: requires g >= 1\n";
            return kExitUsage;
        }
        if (!solve_corr.empty() && solve_corr != "g" && solve_corr != "h") {
            std::cerr << "solve: --correlation must be g or h\n";
            return kExitUsage;
        }
        const auto inst = bmmp::load_instance(solve_in);
        bmmp::SolverConfig config = bmmp::make_solver_config(inst, solve_solver);
        config.g = solve_g;
        config.gomp_t = solve_gomp_t;
        if (solve_epsilon >= 0.0)
            config.epsilon = solve_epsilon;
        if (!solve_corr.empty())
            config.correlation = solve_corr == "g" ? bmmp::CorrelationKind::RaOrmp
                                                   : bmmp::CorrelationKind::NormalizedOmp;
        echo("solver", solve_solver);
        echo_solver_config(config);

        const auto result = bmmp::solve_by_name(solve_solver, inst.phi, inst.y, config);
        const bool exact = result.support_hat == inst.support_true;
        std::cout << "support:";
        for (int idx : result.support_hat)
            std::cout << ' ' << idx;
        std::cout << '\n';
        std::cout << "residual: " << bmmp::format_double(result.residual_norm) << '\n';
        std::cout << "exact_recovery: " << (exact ? "true" : "false") << '\n';
        std::cout << "squared_error: "
                  << bmmp::format_double((result.x_hat - inst.x_true).squaredNorm()) << '\n';
        std::cout << "wall_time_s: " << bmmp::format_double(result.wall_time_s) << '\n';
        if (!solve_out.empty()) {
            nlohmann::json j;
            j["solver"] = solve_solver;
            j["support"] = result.support_hat;
            j["residual_norm"] = result.residual_norm;
            j["exact_recovery"] = exact;
            j["squared_error"] = (result.x_hat - inst.x_true).squaredNorm();
            j["iterations"] = result.iterations;
            j["wall_time_s"] = result.wall_time_s;
            j["chosen_candidate"] = result.chosen_candidate;
            j["x_hat"] = std::vector<double>(result.x_hat.data(),
                                             result.x_hat.data() + result.x_hat.size());
            std::ofstream out(solve_out);
            if (!out)
                throw std::runtime_error("cannot open " + solve_out);
            out << j.dump(2) << '\n';
            std::cout << "wrote " << solve_out << '\n';
        }
        return 0;
    }

    if (bench->parsed()) {
        if (bench_trials < 1 || bench_jobs < 1) {
            std::cerr << "bench: trials and jobs must be >= 1\n";
            return kExitUsage;
        }
        bmmp::ExperimentConfig config;
        try {
            config = bmmp::preset_config(bench_preset, bench_scale, bench_trials, bench_seed);
        } catch (const std::invalid_argument& e) {
            std::cerr << "bench: " << e.what() << '\n';
            return kExitUsage;
        }
        config.jobs = bench_jobs;
        echo("preset", bench_preset);
        echo("experiment", config.experiment);
        echo("scale", bmmp::format_double(bench_scale));
        echo("trials", std::to_string(bench_trials));
        echo("seed", std::to_string(bench_seed));
        echo("jobs", std::to_string(bench_jobs));
        {
            std::string grid;
            for (const auto& p : config.grid) {
                grid += "(m=" + std::to_string(p.m) + ",n=" + std::to_string(p.n) +
                        ",k=" + std::to_string(p.k) +
                        (p.snr_db ? ",snr=" + bmmp::format_double(*p.snr_db) : "") + ") ";
            }
            echo("grid", grid);
            std::string solvers;
            for (const auto& s : config.solvers)
                solvers += s.display() + " ";
            echo("solvers", solvers);
        }

        const auto records = bmmp::run_experiment(config);
        const auto summaries = bmmp::aggregate(records);
        const std::string records_path = bench_prefix + "_records.csv";
        const std::string summary_path = bench_prefix + "_summary.csv";
        const std::string plot_path = bench_prefix + "_plot.dat";
        bmmp::write_records_csv(records_path, records);
        bmmp::write_summaries_csv(summary_path, summaries);
        std::vector<std::string> labels;
        for (const auto& s : config.solvers)
            labels.push_back(s.display());
        const auto axis = bench_preset == "fig3" ? bmmp::PlotAxis::M
                          : bench_preset == "fig2c" ? bmmp::PlotAxis::Snr
                                                    : bmmp::PlotAxis::K;
        const auto value = bench_preset == "fig2c" ? bmmp::PlotValue::Mse
                                                   : bmmp::PlotValue::RecoveryRate;
        bmmp::emit_plot_data(plot_path, summaries, axis, value, labels);
        std::cout << "wrote " << records_path << ' ' << summary_path << ' ' << plot_path
                  << '\n';
        for (const auto& s : summaries) {
            std::cout << s.solver << " m=" << s.m << " k=" << s.k;
            if (s.snr_db)
                std::cout << " snr=" << bmmp::format_double(*s.snr_db);
            std::cout << " rate=" << bmmp::format_double(s.recovery_rate)
                      << " mse=" << bmmp::format_double(s.mse) << '\n';
        }
        return 0;
    }

    if (image->parsed()) {
        const auto solver_list = split_list(image_solvers);
        if (solver_list.empty()) {
            std::cerr << "image: empty solver list\n";
            return kExitUsage;
        }
        for (const auto& name : solver_list) {
            if (!bmmp::is_known_solver(name)) {
                std::cerr << "image: unknown solver " << name << '\n';
                return kExitUsage;
            }
        }
        std::optional<double> snr;
        if (!image_noiseless)
            snr = image_snr;
        echo("in", image_in);
        echo("m", std::to_string(image_m));
        echo("snr_db", snr ? bmmp::format_double(*snr) : "noiseless");
        echo("solvers", image_solvers);
        echo("seed", std::to_string(image_seed));

        const auto img = bmmp::read_pgm(image_in);
        std::vector<bmmp::SolverSpec> specs;
        for (const auto& name : solver_list)
            specs.push_back({name});
        const auto demo = bmmp::image_demo(img, image_m, snr, specs, image_seed);
        std::cout << "measured_k: " << demo.k << '\n';
        std::cout << "solver mse psnr_db\n";
        for (const auto& entry : demo.entries) {
            const std::string out_path = image_prefix + "_" + entry.solver + ".pgm";
            bmmp::write_pgm(out_path, entry.display);
            std::cout << entry.solver << ' ' << bmmp::format_double(entry.mse) << ' '
                      << bmmp::format_double(entry.psnr) << '\n';
        }
        return 0;
    }

    if (plot->parsed()) {
        bmmp::PlotAxis axis;
        if (plot_axis == "k")
            axis = bmmp::PlotAxis::K;
        else if (plot_axis == "m")
            axis = bmmp::PlotAxis::M;
        else if (plot_axis == "snr")
            axis = bmmp::PlotAxis::Snr;
        else {
            std::cerr << "plot-data: --axis must be k, m or snr\n";
            return kExitUsage;
        }
        bmmp::PlotValue value;
        if (plot_value == "rate")
            value = bmmp::PlotValue::RecoveryRate;
        else if (plot_value == "mse")
            value = bmmp::PlotValue::Mse;
        else {
            std::cerr << "plot-data: --value must be rate or mse\n";
            return kExitUsage;
        }
        echo("summary", plot_summary);
        echo("axis", plot_axis);
        echo("value", plot_value);
        echo("solvers", plot_solvers);
        const auto summaries = bmmp::read_summaries_csv(plot_summary);
        bmmp::emit_plot_data(plot_out, summaries, axis, value, split_list(plot_solvers));
        std::cout << "wrote " << plot_out << '\n';
        return 0;
    }

    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

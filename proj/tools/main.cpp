// Command-line driver: simulate benchmark datasets, fit the possession
// mixture model, select K by BIC, report cluster indicators, and run the
// Monte Carlo replication study. Data goes to files, logs to stderr; every
// command is deterministic given --seed and --threads.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "possmix/evaluate.hpp"
#include "possmix/gem.hpp"
#include "possmix/indicators.hpp"
#include "possmix/ingest.hpp"
#include "possmix/params_io.hpp"
#include "possmix/report.hpp"
#include "possmix/simulate.hpp"

namespace fs = std::filesystem;
using namespace possmix;

namespace {

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << body;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<Scenario> parse_scenarios(const std::string& name) {
    if (name == "all") return {Scenario::easy, Scenario::intermediate, Scenario::hard};
    return {scenario_from_string(name)};
}

struct FitFlags {
    int k = 3;
    int n_starts = 1000;
    int short_iters = 10;
    int keep = 100;
    int long_iters = 500;
    double rel_tol = 1e-8;
    std::uint64_t seed = 0;
    int threads = 1;

    void attach(CLI::App* cmd, bool study_defaults) {
        if (study_defaults) {  // desk scale; --paper-scale restores 1000/100
            n_starts = 200;
            keep = 20;
        }
        cmd->add_option("--k", k, "number of mixture components");
        cmd->add_option("--n-starts", n_starts, "random initializations");
        cmd->add_option("--short-iters", short_iters, "iterations per initial run");
        cmd->add_option("--keep", keep, "survivors refined after the short runs");
        cmd->add_option("--long-iters", long_iters, "refinement iteration cap");
        cmd->add_option("--rel-tol", rel_tol, "relative log-likelihood convergence threshold");
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_option("--threads", threads, "worker threads");
    }
    FitConfig to_config() const {
        FitConfig fc;
        fc.k = k;
        fc.n_starts = n_starts;
        fc.n_short_iters = short_iters;
        fc.n_keep = keep;
        fc.n_long_iters = long_iters;
        fc.rel_tol = rel_tol;
        fc.seed = seed;
        fc.threads = threads;
        return fc;
    }
};

Dataset load_dataset(const std::string& events_path, const std::string& vocab_path,
                     double clamp_dt, double velocity_percentile,
                     std::vector<std::string>* names_out) {
    EventVocabulary vocab = parse_vocabulary(read_file(vocab_path));
    auto rows = parse_events(read_file(events_path));
    IngestOptions opt;
    opt.clamp_dt = clamp_dt;
    opt.velocity_percentile = velocity_percentile;
    IngestResult res = build_possessions(rows, vocab, PitchBounds{}, opt);
    std::cerr << "ingest: " << res.report.retained << "/" << res.report.input_possessions
              << " possessions retained\n";
    if (names_out) *names_out = vocab.transient;
    return std::move(res.data);
}

int cmd_simulate(const std::string& scenario_name, int n, std::uint64_t seed, int reps,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto scenarios = parse_scenarios(scenario_name);
    std::vector<int> sizes = n > 0 ? std::vector<int>{n} : std::vector<int>{50, 100, 200, 400};
    write_file(fs::path(out_dir) / "vocab.txt", to_vocab_file(5));
    const bool single = scenarios.size() == 1 && sizes.size() == 1 && reps == 1;
    for (Scenario s : scenarios) {
        for (int size : sizes) {
            for (int rep = 0; rep < reps; ++rep) {
                std::uint64_t rep_seed =
                    single ? seed
                           : mix_seed(seed, (static_cast<std::uint64_t>(s) << 40) +
                                                (static_cast<std::uint64_t>(size) << 16) + rep);
                auto [data, labels] = generate_dataset(s, size, rep_seed);
                std::string stem = to_string(s) + "_n" + std::to_string(size);
                if (reps > 1) stem += "_rep" + std::to_string(rep);
                std::string events_name = single ? "events.csv" : stem + "_events.csv";
                std::string labels_name = single ? "labels.csv" : stem + "_labels.csv";
                write_file(fs::path(out_dir) / events_name, to_event_csv(data));
                write_file(fs::path(out_dir) / labels_name, to_label_csv(labels));
                std::cerr << "simulate: wrote " << events_name << " (" << data.size()
                          << " possessions)\n";
            }
        }
    }
    return 0;
}

int cmd_fit(const FitFlags& flags, const std::string& events_path, const std::string& vocab_path,
            double clamp_dt, double velocity_percentile, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    Dataset data = load_dataset(events_path, vocab_path, clamp_dt, velocity_percentile, &names);
    FitResult res = fit(data, flags.to_config());
    ClusterIndicators ind = indicators_for(res.params);
    write_file(fs::path(out_dir) / "fit_report.json", write_fit_report(res, ind, flags.seed));
    write_file(fs::path(out_dir) / "params.json", serialize_params(res.params));
    write_file(fs::path(out_dir) / "indicators.csv",
               indicators_csv(ind, res.params.pi, names.empty() ? nullptr : &names));
    std::cerr << "fit: loglik " << res.loglik << ", bic " << res.bic << ", converged "
              << (res.converged ? "yes" : "no") << "\n";
    return 0;
}

int cmd_select_k(const FitFlags& flags, int k_min, int k_max, const std::string& events_path,
                 const std::string& vocab_path, double clamp_dt, double velocity_percentile,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    Dataset data = load_dataset(events_path, vocab_path, clamp_dt, velocity_percentile, nullptr);
    KSelection sel = select_k(data, k_min, k_max, flags.to_config());
    write_file(fs::path(out_dir) / "bic.csv", bic_table_csv(sel));
    for (size_t i = 0; i < sel.rows.size(); ++i) {
        if (sel.rows[i].k == sel.best_k)
            write_file(fs::path(out_dir) / "best_params.json",
                       serialize_params(sel.fits[i].params));
    }
    std::cerr << "select-k: best K = " << sel.best_k << "\n";
    return 0;
}

int cmd_indicators(const std::string& params_path, const std::string& vocab_path,
                   const std::string& out_dir) {
    fs::create_directories(out_dir);
    MixtureParams params = deserialize_params(read_file(params_path));
    std::vector<std::string> names;
    if (!vocab_path.empty()) {
        EventVocabulary vocab = parse_vocabulary(read_file(vocab_path));
        if (vocab.E() != params.E)
            throw std::runtime_error("vocabulary size does not match the parameter document");
        names = vocab.transient;
    }
    ClusterIndicators ind = indicators_for(params);
    write_file(fs::path(out_dir) / "indicators.csv",
               indicators_csv(ind, params.pi, names.empty() ? nullptr : &names));
    std::cerr << "indicators: wrote " << ind.K << " components\n";
    return 0;
}

int cmd_evaluate(const FitFlags& flags, const std::string& scenario_name, int n, int reps,
                 bool paper_scale, const std::string& out_dir) {
    fs::create_directories(out_dir);
    StudyConfig sc;
    sc.scenarios = parse_scenarios(scenario_name);
    sc.sizes = n > 0 ? std::vector<int>{n} : std::vector<int>{50, 100, 200, 400};
    sc.reps = reps;
    sc.seed = flags.seed;
    sc.threads = flags.threads;
    sc.fit = flags.to_config();
    if (paper_scale) {
        sc.reps = 100;
        sc.fit.n_starts = 1000;
        sc.fit.n_keep = 100;
    }
    int done = 0;
    const int total = static_cast<int>(sc.scenarios.size() * sc.sizes.size()) * sc.reps;
    sc.on_progress = [&](const ReplicationResult& r) {
        ++done;
        std::cerr << "evaluate [" << done << "/" << total << "] " << to_string(r.scenario)
                  << " n=" << r.n << " ari=" << r.ari << "\n";
    };
    auto results = run_study(sc);
    auto cells = summarize_study(results);
    write_file(fs::path(out_dir) / "study_results.csv", study_results_csv(results));
    write_file(fs::path(out_dir) / "study_summary.csv", study_summary_csv(cells));
    std::cerr << "evaluate: wrote " << results.size() << " replications\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"possmix: model-based clustering of marked spatio-temporal event sequences"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "generate synthetic possession datasets");
    std::string sim_scenario = "easy", sim_out;
    int sim_n = 0, sim_reps = 1;
    std::uint64_t sim_seed = 0;
    sim->add_option("--scenario", sim_scenario, "easy, intermediate, hard, or all");
    sim->add_option("--n", sim_n, "possessions per dataset (0 = grid 50,100,200,400)");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--reps", sim_reps, "independent datasets per cell");
    sim->add_option("--out", sim_out, "output directory")->required();

    auto* fit_cmd = app.add_subcommand("fit", "fit the mixture model to an event file");
    FitFlags fit_flags;
    std::string fit_events, fit_vocab, fit_out;
    double fit_clamp = 0.01, fit_vel = 98.0;
    fit_flags.attach(fit_cmd, false);
    fit_cmd->add_option("--events", fit_events, "event CSV")->required();
    fit_cmd->add_option("--vocab", fit_vocab, "vocabulary file")->required();
    fit_cmd->add_option("--clamp-dt", fit_clamp, "tie-breaking time increment (s)");
    fit_cmd->add_option("--velocity-percentile", fit_vel,
                        "speed-filter percentile (>=100 disables)");
    fit_cmd->add_option("--out", fit_out, "output directory")->required();

    auto* sel = app.add_subcommand("select-k", "fit a range of K and pick the BIC argmax");
    FitFlags sel_flags;
    std::string sel_events, sel_vocab, sel_out;
    double sel_clamp = 0.01, sel_vel = 98.0;
    int k_min = 1, k_max = 6;
    sel_flags.attach(sel, false);
    sel->add_option("--k-min", k_min, "smallest K");
    sel->add_option("--k-max", k_max, "largest K");
    sel->add_option("--events", sel_events, "event CSV")->required();
    sel->add_option("--vocab", sel_vocab, "vocabulary file")->required();
    sel->add_option("--clamp-dt", sel_clamp, "tie-breaking time increment (s)");
    sel->add_option("--velocity-percentile", sel_vel, "speed-filter percentile (>=100 disables)");
    sel->add_option("--out", sel_out, "output directory")->required();

    auto* ind = app.add_subcommand("indicators", "analytic cluster summaries from parameters");
    std::string ind_params, ind_vocab, ind_out;
    ind->add_option("--params", ind_params, "parameter document")->required();
    ind->add_option("--vocab", ind_vocab, "vocabulary file (names the kappa columns)");
    ind->add_option("--out", ind_out, "output directory")->required();

    auto* ev = app.add_subcommand("evaluate", "Monte Carlo replication study");
    FitFlags ev_flags;
    std::string ev_scenario = "all", ev_out;
    int ev_n = 0, ev_reps = 20;
    bool paper_scale = false;
    ev_flags.attach(ev, true);
    ev->add_option("--scenario", ev_scenario, "easy, intermediate, hard, or all");
    ev->add_option("--n", ev_n, "sample size (0 = grid 50,100,200,400)");
    ev->add_option("--reps", ev_reps, "replications per cell");
    ev->add_flag("--paper-scale", paper_scale, "100 replications, 1000 starts, keep 100");
    ev->add_option("--out", ev_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_scenario, sim_n, sim_seed, sim_reps, sim_out);
        if (fit_cmd->parsed())
            return cmd_fit(fit_flags, fit_events, fit_vocab, fit_clamp, fit_vel, fit_out);
        if (sel->parsed())
            return cmd_select_k(sel_flags, k_min, k_max, sel_events, sel_vocab, sel_clamp,
                                sel_vel, sel_out);
        if (ind->parsed()) return cmd_indicators(ind_params, ind_vocab, ind_out);
        if (ev->parsed())
            return cmd_evaluate(ev_flags, ev_scenario, ev_n, ev_reps, paper_scale, ev_out);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}

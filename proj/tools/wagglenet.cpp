// Command-line front door: scenario runs, parameter sweeps, the energy
// report, and the live REST pipeline.

#include <atomic>
#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wagglenet/cli.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic beehive telemetry pipeline simulator"};
    app.require_subcommand(1);

    wagglenet::cli::RunOptions run_opt;
    auto* run = app.add_subcommand("run", "Run a scenario and write its reports");
    run->add_option("scenario", run_opt.scenario_path, "Scenario JSON file")->required();
    run->add_option("--out-dir", run_opt.out_dir, "Directory for report files");
    std::uint64_t run_seed = 0;
    auto* run_seed_opt = run->add_option("--seed", run_seed, "Override the scenario seed");
    run->add_flag("--quiet", run_opt.quiet, "Suppress the summary lines");

    wagglenet::cli::RangeSweepOptions sweep_opt;
    auto* sweep = app.add_subcommand("range-sweep", "PDR and RSSI versus distance");
    sweep->add_option("--min-m", sweep_opt.min_m, "First distance");
    sweep->add_option("--max-m", sweep_opt.max_m, "Last distance");
    sweep->add_option("--step-m", sweep_opt.step_m, "Distance step");
    sweep->add_option("--packets", sweep_opt.packets_per_point, "Draws per distance");
    sweep->add_option("--env", sweep_opt.environment, "Channel preset: urban or rural");
    sweep->add_option("--seed", sweep_opt.seed, "RNG seed");
    sweep->add_option("--csv", sweep_opt.csv_path, "Write CSV here instead of stdout");

    wagglenet::cli::CollisionStudyOptions coll_opt;
    auto* coll = app.add_subcommand("collision-study",
                                    "Monte Carlo loss versus the closed forms");
    coll->add_option("--nodes", coll_opt.node_counts, "Node counts to test")
        ->delimiter(',');
    coll->add_option("--interval-s", coll_opt.interval_s, "Sample interval");
    coll->add_option("--airtime-s", coll_opt.airtime_s, "Packet airtime");
    coll->add_option("--trials", coll_opt.trials, "Monte Carlo trials per count");
    coll->add_option("--seed", coll_opt.seed, "RNG seed");
    coll->add_option("--csv", coll_opt.csv_path, "Write CSV here instead of stdout");

    wagglenet::cli::BatteryOptions batt_opt;
    auto* batt = app.add_subcommand("battery", "Duty-cycle energy report");
    batt->add_option("--active-ma", batt_opt.profile.active_current_ma, "Active current");
    batt->add_option("--active-s", batt_opt.profile.active_duration_s, "Active window");
    batt->add_option("--sleep-ma", batt_opt.profile.sleep_current_ma, "Sleep current");
    batt->add_option("--deep-sleep-ma", batt_opt.profile.deep_sleep_current_ma,
                     "Deep-sleep current");
    batt->add_option("--capacity-mah", batt_opt.profile.battery_capacity_mah,
                     "Battery capacity");
    batt->add_option("--interval-s", batt_opt.sample_interval_s, "Sample interval");
    batt->add_flag("--deep-sleep", batt_opt.use_deep_sleep,
                   "Use the deep-sleep current between samples");

    wagglenet::cli::ServeOptions serve_opt;
    auto* serve = app.add_subcommand("serve",
                                     "Run a scenario, then serve the REST API over it");
    serve->add_option("scenario", serve_opt.scenario_path, "Scenario JSON file")->required();
    serve->add_option("--port", serve_opt.port, "TCP port on 127.0.0.1");
    serve->add_option("--secret", serve_opt.token_secret,
                      "Token secret (default: $WAGGLENET_TOKEN_SECRET)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (run_seed_opt->count() > 0) run_opt.seed = run_seed;
        return wagglenet::cli::cmd_run(run_opt, std::cout, std::cerr);
    }
    if (sweep->parsed()) return wagglenet::cli::cmd_range_sweep(sweep_opt, std::cout, std::cerr);
    if (coll->parsed())
        return wagglenet::cli::cmd_collision_study(coll_opt, std::cout, std::cerr);
    if (batt->parsed()) return wagglenet::cli::cmd_battery(batt_opt, std::cout, std::cerr);
    if (serve->parsed()) {
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        return wagglenet::cli::cmd_serve(serve_opt, std::cout, std::cerr,
                                         [] { return !g_interrupted.load(); });
    }
    return 1;
}

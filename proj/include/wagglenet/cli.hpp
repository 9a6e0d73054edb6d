#pragma once

// Command implementations behind the wagglenet binary. Each command is a
// plain function over an options struct writing to caller-supplied streams,
// so the test suite can drive them without spawning processes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "wagglenet/cloud/auth.hpp"
#include "wagglenet/cloud/rest.hpp"
#include "wagglenet/sim/scenario.hpp"
#include "wagglenet/sim/simulation.hpp"

namespace wagglenet::cli {

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    std::string scenario_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;  // overrides the scenario's seed
    bool quiet = false;
};

inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    sim::Scenario scenario;
    try {
        scenario = sim::load_scenario_file(opt.scenario_path);
    } catch (const sim::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    if (opt.seed) scenario.sim.seed = *opt.seed;

    sim::Simulation simulation(scenario.sim);
    const sim::RunResult result = simulation.run();

    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    const auto report_path = std::filesystem::path(opt.out_dir) / scenario.report_json;
    const auto csv_path = std::filesystem::path(opt.out_dir) / scenario.readings_csv;
    {
        std::ofstream f(report_path);
        if (!f) {
            err << "error: cannot write " << report_path.string() << "\n";
            return 1;
        }
        f << result.report.to_json_string();
    }
    {
        std::ofstream f(csv_path);
        if (!f) {
            err << "error: cannot write " << csv_path.string() << "\n";
            return 1;
        }
        f << sim::readings_csv(result.readings);
    }

    if (!opt.quiet) {
        const auto& r = result.report;
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%s: %d sent, %d delivered (PDR %.3f), %d lost, %d rejected, %zu alerts\n",
                      r.scenario.c_str(), r.packets_sent, r.delivered, r.pdr,
                      r.lost_range + r.lost_collision, r.rejected, r.alerts.size());
        out << line;
        if (r.latency.count > 0) {
            std::snprintf(line, sizeof(line),
                          "latency: mean %.3f s, stddev %.3f s, max %.3f s over %zu deliveries\n",
                          r.latency.mean_s, r.latency.stddev_s, r.latency.max_s,
                          r.latency.count);
            out << line;
        }
        out << "report: " << report_path.string() << "\n";
        out << "readings: " << csv_path.string() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// range-sweep

struct RangeSweepOptions {
    double min_m = 0.0;
    double max_m = 170.0;
    double step_m = 10.0;
    int packets_per_point = 1000;
    std::string environment = "urban";
    std::uint64_t seed = 1;
    std::string csv_path;  // optional CSV output
};

struct RangeRow {
    double distance_m = 0.0;
    double pdr = 0.0;
    double mean_rssi_dbm = 0.0;
};

/// PDR and mean RSSI per distance, Monte Carlo over the shadowing draw.
inline std::vector<RangeRow> range_sweep(const RangeSweepOptions& opt) {
    if (opt.min_m >= opt.max_m) throw sim::ConfigError("range sweep needs min < max");
    if (opt.step_m <= 0.0) throw sim::ConfigError("range sweep needs step > 0");
    if (opt.packets_per_point < 1) throw sim::ConfigError("packets_per_point must be >= 1");

    rf::ChannelParams channel;
    if (opt.environment == "urban") channel = rf::ChannelParams::urban();
    else if (opt.environment == "rural") channel = rf::ChannelParams::rural();
    else throw sim::ConfigError("unknown environment preset: " + opt.environment);

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> shadow(0.0, channel.shadowing_sigma_db);

    std::vector<RangeRow> rows;
    for (double d = opt.min_m; d <= opt.max_m + 1e-9; d += opt.step_m) {
        RangeRow row;
        row.distance_m = d;
        int delivered = 0;
        double rssi_sum = 0.0;
        rf::TransmissionEvent event{"probe", 0.0, 0.0, d, 0};
        for (int i = 0; i < opt.packets_per_point; ++i) {
            const double draw = channel.shadowing_sigma_db > 0.0 ? shadow(rng) : 0.0;
            const double rssi = rf::received_power_dbm(event, channel, draw);
            rssi_sum += rssi;
            if (rf::delivery_outcome(rssi, channel)) ++delivered;
        }
        row.pdr = static_cast<double>(delivered) / opt.packets_per_point;
        row.mean_rssi_dbm = rssi_sum / opt.packets_per_point;
        rows.push_back(row);
    }
    return rows;
}

inline std::string range_sweep_csv(const std::vector<RangeRow>& rows) {
    std::string out = "distance_m,pdr,mean_rssi_dbm\n";
    char line[96];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%.1f,%.4f,%.2f\n", r.distance_m, r.pdr,
                      r.mean_rssi_dbm);
        out += line;
    }
    return out;
}

inline int cmd_range_sweep(const RangeSweepOptions& opt, std::ostream& out,
                           std::ostream& err) {
    std::vector<RangeRow> rows;
    try {
        rows = range_sweep(opt);
    } catch (const sim::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    const std::string csv = range_sweep_csv(rows);
    if (!opt.csv_path.empty()) {
        std::ofstream f(opt.csv_path);
        if (!f) {
            err << "error: cannot write " << opt.csv_path << "\n";
            return 1;
        }
        f << csv;
        out << "wrote " << rows.size() << " rows to " << opt.csv_path << "\n";
    } else {
        out << csv;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// collision-study

struct CollisionStudyOptions {
    std::vector<int> node_counts{2, 5, 10, 20};
    double interval_s = 180.0;
    double airtime_s = 1.8;
    int trials = 20000;
    std::uint64_t seed = 1;
    std::string csv_path;
};

struct CollisionRow {
    int n_nodes = 0;
    double sim_loss = 0.0;
    double std_error = 0.0;  // of sim_loss, from per-trial spread
    double approx_pc = 0.0;
    double exact_pc = 0.0;
};

/// Monte Carlo per-packet collision probability for N unslotted periodic
/// senders with uniform phases. Each trial lays out three consecutive
/// periods and scores only the middle copies, so wraparound overlaps at the
/// window edges are counted.
inline std::vector<CollisionRow> collision_study(const CollisionStudyOptions& opt) {
    if (opt.trials < 1000) throw sim::ConfigError("collision study needs >= 1000 trials");
    if (opt.airtime_s <= 0.0 || opt.interval_s <= 2.0 * opt.airtime_s)
        throw sim::ConfigError("need 0 < 2*airtime < interval");
    if (opt.node_counts.empty()) throw sim::ConfigError("empty node count list");

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> phase(0.0, opt.interval_s);

    std::vector<CollisionRow> rows;
    for (const int n : opt.node_counts) {
        if (n < 1) throw sim::ConfigError("node counts must be >= 1");
        CollisionRow row;
        row.n_nodes = n;
        row.approx_pc = rf::collision_probability_approx(n, opt.airtime_s, opt.interval_s);
        row.exact_pc = rf::collision_probability_exact(n, opt.airtime_s, opt.interval_s);

        double sum = 0.0;
        double sum_sq = 0.0;
        std::vector<rf::TransmissionEvent> events;
        for (int trial = 0; trial < opt.trials; ++trial) {
            events.clear();
            for (int node = 0; node < n; ++node) {
                const double p = phase(rng);
                for (int copy = 0; copy < 3; ++copy)
                    events.push_back({std::to_string(node), p + copy * opt.interval_s,
                                      opt.airtime_s, 0.0, 0});
            }
            std::sort(events.begin(), events.end(),
                      [](const auto& a, const auto& b) { return a.start_time_s < b.start_time_s; });
            const auto lost = rf::resolve_collisions(events);
            int middle_lost = 0;
            for (const auto i : lost) {
                const double start = events[i].start_time_s;
                if (start >= opt.interval_s && start < 2.0 * opt.interval_s) ++middle_lost;
            }
            const double frac = static_cast<double>(middle_lost) / n;
            sum += frac;
            sum_sq += frac * frac;
        }
        row.sim_loss = sum / opt.trials;
        const double var = (sum_sq - sum * sum / opt.trials) / (opt.trials - 1);
        row.std_error = std::sqrt(std::max(var, 0.0) / opt.trials);
        rows.push_back(row);
    }
    return rows;
}

inline std::string collision_study_csv(const std::vector<CollisionRow>& rows) {
    std::string out = "n_nodes,sim_loss,std_error,approx_pc,exact_pc\n";
    char line[128];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", r.n_nodes, r.sim_loss,
                      r.std_error, r.approx_pc, r.exact_pc);
        out += line;
    }
    return out;
}

inline int cmd_collision_study(const CollisionStudyOptions& opt, std::ostream& out,
                               std::ostream& err) {
    std::vector<CollisionRow> rows;
    try {
        rows = collision_study(opt);
    } catch (const sim::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    const std::string csv = collision_study_csv(rows);
    if (!opt.csv_path.empty()) {
        std::ofstream f(opt.csv_path);
        if (!f) {
            err << "error: cannot write " << opt.csv_path << "\n";
            return 1;
        }
        f << csv;
        out << "wrote " << rows.size() << " rows to " << opt.csv_path << "\n";
    } else {
        out << csv;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// battery

struct BatteryOptions {
    EnergyProfile profile;
    double sample_interval_s = 180.0;
    bool use_deep_sleep = false;  // substitute the deep-sleep current for light sleep
};

inline int cmd_battery(const BatteryOptions& opt, std::ostream& out, std::ostream& err) {
    EnergyProfile p = opt.profile;
    if (opt.use_deep_sleep) p.sleep_current_ma = p.deep_sleep_current_ma;
    try {
        p.validate(opt.sample_interval_s);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    const double avg_ma = average_current_ma(p, opt.sample_interval_s);
    const double closed_form_h = battery_life_hours(p, opt.sample_interval_s);
    const double simulated_h = simulate_depletion_hours(p, opt.sample_interval_s);
    const double disagreement = std::abs(simulated_h - closed_form_h) / closed_form_h;

    char line[160];
    std::snprintf(line, sizeof(line), "average current: %.2f mA\n", avg_ma);
    out << line;
    std::snprintf(line, sizeof(line), "closed-form battery life: %.1f h\n", closed_form_h);
    out << line;
    std::snprintf(line, sizeof(line), "simulated depletion: %.1f h (%.2f%% from closed form)\n",
                  simulated_h, disagreement * 100.0);
    out << line;
    std::snprintf(line, sizeof(line), "cycle energy: %.4f mAh per %.0f s interval\n",
                  cycle_energy_mah(p, opt.sample_interval_s), opt.sample_interval_s);
    out << line;
    return disagreement <= 0.02 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// serve

struct ServeOptions {
    std::string scenario_path;
    std::uint16_t port = 8080;
    std::string token_secret;  // empty: read WAGGLENET_TOKEN_SECRET or generate
};

/// Runs the scenario to populate the store, then serves the REST API until
/// keep_running() turns false. Prints a ready-to-use bearer token.
inline int cmd_serve(const ServeOptions& opt, std::ostream& out, std::ostream& err,
                     const std::function<bool()>& keep_running) {
    sim::Scenario scenario;
    try {
        scenario = sim::load_scenario_file(opt.scenario_path);
    } catch (const sim::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    std::string secret = opt.token_secret;
    if (secret.empty()) {
        if (const char* env = std::getenv("WAGGLENET_TOKEN_SECRET")) secret = env;
    }
    if (secret.empty()) {
        std::random_device rd;
        for (int i = 0; i < 4; ++i) secret += std::to_string(rd());
        err << "note: generated an ephemeral token secret; set WAGGLENET_TOKEN_SECRET "
               "for stable tokens\n";
    }

    sim::Simulation simulation(scenario.sim);
    const sim::RunResult result = simulation.run();
    out << scenario.sim.name << ": " << result.report.delivered
        << " readings stored, " << result.report.alerts.size() << " alerts\n";

    cloud::TokenAuthority auth(secret);
    const std::int64_t now = static_cast<std::int64_t>(
        scenario.sim.sim_start_epoch_s + scenario.sim.duration_s);
    cloud::RestServer server(simulation.store(), simulation.service(), auth,
                             [now] { return now; });
    try {
        server.start(opt.port);
    } catch (const cloud::PortInUse& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    out << "serving http://127.0.0.1:" << server.port() << "\n";
    out << "bearer token: " << auth.issue("operator", now) << "\n";
    out.flush();

    while (keep_running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    out << "stopped\n";
    return 0;
}

}  // namespace wagglenet::cli

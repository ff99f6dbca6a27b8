#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvreflect/csv.hpp"
#include "mvreflect/ldp.hpp"
#include "mvreflect/version.hpp"

namespace mvreflect {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

// Parsed and validated form of the JSON config file. Everything an
// experiment needs is in here; the CLI only adds overrides for the seed,
// output directory, and worker count.
struct ExperimentConfig {
    json raw;

    std::string experiment;
    std::uint64_t master_seed = 0;
    std::string out_dir = "run_output";

    // domain
    std::string domain_preset;
    double domain_r0 = 1.0;
    double domain_amplitude = 0.0;
    Vec domain_center;
    Vec domain_velocity;
    Vec box_half_widths;
    double box_corner_radius = 0.2;

    // direction field
    std::string field_preset = "normal";
    double field_angle_deg = 30.0;
    double field_rho = 0.5;

    // coefficients
    std::string coefficient_preset = "mean_reversion";

    // grid
    double horizon = 1.0;
    std::size_t n_steps = 200;

    // initial condition
    bool x0_uniform = false;
    Vec x0;

    // experiment-specific knobs
    std::size_t n_particles = 64;
    std::size_t picard_copies = 256;
    std::size_t picard_max_iters = 15;
    double picard_tol = 1e-2;
    std::vector<std::size_t> chaos_n_list{8, 32, 128, 512};
    std::size_t chaos_n_rep = 16;
    std::vector<double> epsilon_list{0.4, 0.2, 0.1, 0.05};
    Vec control_value;
    double ldp_theta = 0.25;
    std::size_t ldp_copies = 512;
    std::vector<std::size_t> ldp_copies_list;
    std::string event_type = "terminal_escape";
    double event_a = 1.0;
    double event_delta = 0.5;
    std::string rate_target = "terminal_point";
    Vec rate_point;
    double rate_a = 1.0;
    std::vector<std::size_t> ldp1_frequencies{1, 2, 4, 8, 16};
    double ldp1_amplitude = 1.0;
    std::size_t validate_samples = 1000;
};

namespace detail {

inline Vec json_vec(const json& j) {
    Vec v;
    for (const auto& x : j) v.push_back(x.get<double>());
    return v;
}

inline const char* known_experiments[] = {
    "simulate", "picard", "chaos", "ldp-rate", "ldp-rare-event",
    "ldp-check-ldp1", "ldp-check-ldp2", "ldp-check-limit-law", "geometry-validate",
};

} // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    c.raw = j;
    if (!j.contains("experiment")) throw Error(ErrorCode::config, "missing 'experiment'");
    c.experiment = j.at("experiment").get<std::string>();
    bool known = false;
    for (const char* e : detail::known_experiments) known = known || c.experiment == e;
    if (!known) throw Error(ErrorCode::config, "unknown experiment '" + c.experiment + "'");

    c.master_seed = j.value("master_seed", std::uint64_t{12345});
    c.out_dir = j.value("out_dir", std::string{"run_output"});

    const json grid = j.value("grid", json::object());
    c.horizon = grid.value("horizon", 1.0);
    c.n_steps = grid.value("steps", std::size_t{200});
    if (!(c.horizon > 0.0)) throw Error(ErrorCode::invalid_grid, "grid horizon must be positive");
    if (c.n_steps < 2) throw Error(ErrorCode::invalid_grid, "grid needs at least 2 steps");

    const json dom = j.value("domain", json{{"preset", "interval"}});
    c.domain_preset = dom.value("preset", std::string{"interval"});
    c.domain_r0 = dom.value("r0", 1.0);
    c.domain_amplitude = dom.value("amplitude", 0.0);
    if (dom.contains("center")) c.domain_center = detail::json_vec(dom.at("center"));
    if (dom.contains("velocity")) c.domain_velocity = detail::json_vec(dom.at("velocity"));
    if (dom.contains("half_widths")) c.box_half_widths = detail::json_vec(dom.at("half_widths"));
    c.box_corner_radius = dom.value("corner_radius", 0.2);
    if (c.domain_preset != "interval" && c.domain_preset != "disk" && c.domain_preset != "box")
        throw Error(ErrorCode::unknown_preset, "unknown domain preset '" + c.domain_preset + "'");

    const json field = j.value("field", json::object());
    c.field_preset = field.value("preset", std::string{"normal"});
    c.field_angle_deg = field.value("angle_deg", 30.0);
    c.field_rho = field.value("rho", c.field_preset == "normal" ? 0.5 : 0.4);
    if (c.field_preset != "normal" && c.field_preset != "rotated" && c.field_preset != "outward")
        throw Error(ErrorCode::unknown_preset, "unknown field preset '" + c.field_preset + "'");
    if (!(c.field_rho > 0.0) || !(c.field_rho < 1.0))
        throw Error(ErrorCode::config, "field rho must lie in (0, 1)");

    const json coeff = j.value("coefficients", json::object());
    c.coefficient_preset = coeff.value("preset", std::string{"mean_reversion"});
    if (c.coefficient_preset != "zero" && c.coefficient_preset != "mean_reversion" &&
        c.coefficient_preset != "std_vol" && c.coefficient_preset != "unit_noise")
        throw Error(ErrorCode::unknown_preset, "unknown coefficient preset '" + c.coefficient_preset + "'");

    if (j.contains("x0")) {
        if (j.at("x0").is_array()) c.x0 = detail::json_vec(j.at("x0"));
        else if (j.at("x0").is_object() && j.at("x0").value("sampler", "") == "uniform_section")
            c.x0_uniform = true;
        else
            throw Error(ErrorCode::config, "x0 must be an array or {\"sampler\": \"uniform_section\"}");
    }

    if (j.contains("particles")) c.n_particles = j.at("particles").value("n", std::size_t{64});
    if (j.contains("picard")) {
        const json p = j.at("picard");
        c.picard_copies = p.value("n_copies", std::size_t{256});
        c.picard_max_iters = p.value("max_iters", std::size_t{15});
        c.picard_tol = p.value("tol", 1e-2);
    }
    if (j.contains("chaos")) {
        const json p = j.at("chaos");
        if (p.contains("n_list")) {
            c.chaos_n_list.clear();
            for (const auto& v : p.at("n_list")) c.chaos_n_list.push_back(v.get<std::size_t>());
        }
        c.chaos_n_rep = p.value("n_rep", std::size_t{16});
    }
    if (j.contains("epsilon_list")) {
        c.epsilon_list.clear();
        for (const auto& v : j.at("epsilon_list")) c.epsilon_list.push_back(v.get<double>());
    }
    for (double eps : c.epsilon_list)
        if (!(eps > 0.0) || eps > 1.0)
            throw Error(ErrorCode::config, "epsilon values must lie in (0, 1]");

    if (j.contains("control")) {
        const json ctl = j.at("control");
        if (ctl.value("type", "constant") != "constant")
            throw Error(ErrorCode::config, "only constant controls are configurable; register others in code");
        c.control_value = detail::json_vec(ctl.at("value"));
    }
    if (j.contains("ldp")) {
        const json l = j.at("ldp");
        c.ldp_theta = l.value("theta", 0.25);
        c.ldp_copies = l.value("n_copies", std::size_t{512});
        if (l.contains("n_copies_list"))
            for (const auto& v : l.at("n_copies_list")) c.ldp_copies_list.push_back(v.get<std::size_t>());
        if (l.contains("event")) {
            c.event_type = l.at("event").value("type", std::string{"terminal_escape"});
            c.event_a = l.at("event").value("a", 1.0);
            c.event_delta = l.at("event").value("delta", 0.5);
            if (c.event_type != "terminal_escape" && c.event_type != "sup_deviation")
                throw Error(ErrorCode::unknown_preset, "unknown event type '" + c.event_type + "'");
        }
        if (l.contains("rate")) {
            c.rate_target = l.at("rate").value("target", std::string{"terminal_point"});
            if (l.at("rate").contains("point")) c.rate_point = detail::json_vec(l.at("rate").at("point"));
            c.rate_a = l.at("rate").value("a", 1.0);
            if (c.rate_target != "terminal_point" && c.rate_target != "terminal_escape" && c.rate_target != "psi")
                throw Error(ErrorCode::unknown_preset, "unknown rate target '" + c.rate_target + "'");
        }
        if (l.contains("frequencies")) {
            c.ldp1_frequencies.clear();
            for (const auto& v : l.at("frequencies")) c.ldp1_frequencies.push_back(v.get<std::size_t>());
        }
        c.ldp1_amplitude = l.value("amplitude", 1.0);
    }
    if (j.contains("validate")) c.validate_samples = j.at("validate").value("samples", std::size_t{1000});
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Config -> model objects
// ---------------------------------------------------------------------------

inline TimeDomain build_domain(const ExperimentConfig& c) {
    if (c.domain_preset == "interval")
        return make_moving_interval(c.domain_r0, c.domain_amplitude, c.horizon);
    if (c.domain_preset == "disk") {
        Vec center = c.domain_center.empty() ? Vec{0.0, 0.0} : c.domain_center;
        Vec velocity = c.domain_velocity.empty() ? Vec{0.0, 0.0} : c.domain_velocity;
        return make_moving_disk(c.domain_r0, c.domain_amplitude, c.horizon, center, velocity);
    }
    Vec hw = c.box_half_widths.empty() ? Vec{1.0, 1.0} : c.box_half_widths;
    return make_moving_box(hw, c.box_corner_radius, c.domain_amplitude, c.horizon);
}

inline DirectionField build_field(const ExperimentConfig& c, const TimeDomain& domain) {
    if (c.field_preset == "normal") return make_normal_field(domain, c.field_rho);
    if (c.field_preset == "rotated")
        return make_rotated_field(domain, c.field_angle_deg * std::numbers::pi / 180.0, c.field_rho);
    return make_outward_field(domain, c.field_rho);
}

inline CoefficientSet build_coefficients(const ExperimentConfig& c, const TimeDomain& domain) {
    return make_preset_coefficients(c.coefficient_preset, domain.dim, domain.bounding_radius);
}

inline Vec resolve_x0(const ExperimentConfig& c, const TimeDomain& domain) {
    if (!c.x0.empty()) {
        if (c.x0.size() != domain.dim) throw Error(ErrorCode::config, "x0 dimension mismatch");
        return c.x0;
    }
    return zeros(domain.dim);
}

inline InitialSampler resolve_sampler(const ExperimentConfig& c, const TimeDomain& domain) {
    if (c.x0_uniform) return uniform_section_start(domain, c.master_seed);
    return fixed_start(resolve_x0(c, domain));
}

// ---------------------------------------------------------------------------
// Run record and manifest
// ---------------------------------------------------------------------------

struct RunRecord {
    std::uint64_t config_hash = 0;
    std::string out_dir;
    std::string version = version_string;
    std::vector<std::string> files;
    bool passed = true;   // report-style experiments set this from their flags
    json manifest;
};

namespace detail {

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot hash '" + path + "'");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

} // namespace detail

inline void finalize_manifest(RunRecord& rec, const std::string& started) {
    json files = json::array();
    for (const std::string& f : rec.files) {
        const std::string full = rec.out_dir + "/" + f;
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(detail::hash_file(full)));
        files.push_back({{"name", f},
                         {"bytes", std::filesystem::file_size(full)},
                         {"fnv1a64", std::string(hex)}});
    }
    char cfg_hex[24];
    std::snprintf(cfg_hex, sizeof(cfg_hex), "%016llx", static_cast<unsigned long long>(rec.config_hash));
    rec.manifest = {{"config_hash", std::string(cfg_hex)},
                    {"version", rec.version},
                    {"started_utc", started},
                    {"finished_utc", detail::iso_timestamp()},
                    {"passed", rec.passed},
                    {"files", files}};
    std::ofstream out(rec.out_dir + "/manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write manifest");
    out << rec.manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Experiment dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline void dump_ensemble_csv(const ParticleEnsemble& ens, const std::string& path) {
    const std::size_t d = ens.paths.empty() ? 0 : ens.paths[0].states[0].size();
    std::vector<std::string> header{"particle", "step", "t"};
    for (std::size_t i = 0; i < d; ++i) header.push_back("x_" + std::to_string(i));
    header.push_back("local_time");
    for (std::size_t i = 0; i < d; ++i) header.push_back("K_" + std::to_string(i));
    CsvWriter csv(path, header);
    for (std::size_t p = 0; p < ens.paths.size(); ++p) {
        const ReflectedPath& path_p = ens.paths[p];
        for (std::size_t k = 0; k < path_p.n_nodes(); ++k) {
            std::vector<std::string> row{cell(p), cell(k), cell(path_p.times[k])};
            for (double v : path_p.states[k]) row.push_back(cell(v));
            row.push_back(cell(path_p.local_time[k]));
            for (double v : path_p.reflector[k]) row.push_back(cell(v));
            csv.row(row);
        }
    }
    csv.close();
}

inline void dump_flow_csv(const MeasureFlow& flow, const std::string& path) {
    const std::size_t d = flow.measures.empty() ? 0 : flow.measures[0].dim();
    std::vector<std::string> header{"node", "t", "atom", "weight"};
    for (std::size_t i = 0; i < d; ++i) header.push_back("x_" + std::to_string(i));
    CsvWriter csv(path, header);
    for (std::size_t k = 0; k < flow.n_nodes(); ++k) {
        const EmpiricalMeasure& mu = flow.measures[k];
        for (std::size_t a = 0; a < mu.size(); ++a) {
            std::vector<std::string> row{cell(k), cell(flow.times[k]), cell(a), cell(mu.weight(a))};
            for (double v : mu.point(a)) row.push_back(cell(v));
            csv.row(row);
        }
    }
    csv.close();
}

} // namespace detail

// Runs the configured experiment, writes its CSV artifacts and manifest into
// out_dir, and reports pass/fail of the experiment's own invariant checks.
inline RunRecord run_experiment(const ExperimentConfig& cfg, std::size_t workers = 0) {
    const std::string started = detail::iso_timestamp();
    const TimeDomain domain = build_domain(cfg);
    const DirectionField field = build_field(cfg, domain);
    const CoefficientSet cs = build_coefficients(cfg, domain);
    const TimeGrid grid(cfg.horizon, cfg.n_steps);
    const NoiseDriver driver(cfg.master_seed);

    RunRecord rec;
    rec.config_hash = fnv1a64(cfg.raw.dump());
    rec.out_dir = cfg.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create output directory '" + cfg.out_dir + "'");

    auto out = [&](const std::string& name) { return cfg.out_dir + "/" + name; };

    if (cfg.experiment == "simulate") {
        const ParticleEnsemble ens = simulate_interacting(domain, field, cs, cfg.n_particles,
                                                          resolve_sampler(cfg, domain), grid, driver,
                                                          1.0, workers);
        detail::dump_ensemble_csv(ens, out("paths.csv"));
        rec.files.push_back("paths.csv");
    } else if (cfg.experiment == "picard") {
        const PicardResult res = picard_iterate(domain, field, cs, resolve_x0(cfg, domain), grid, driver,
                                                1.0, cfg.picard_copies, cfg.picard_max_iters,
                                                cfg.picard_tol, workers);
        CsvWriter csv(out("picard_history.csv"), {"iteration", "distance"});
        for (std::size_t i = 0; i < res.history.size(); ++i)
            csv.row({cell(i + 1), cell(res.history[i])});
        csv.close();
        detail::dump_flow_csv(res.flow, out("fixed_point_flow.csv"));
        rec.files.push_back("picard_history.csv");
        rec.files.push_back("fixed_point_flow.csv");
        rec.passed = res.converged;
    } else if (cfg.experiment == "chaos") {
        const ChaosTable table = chaos_experiment(domain, field, cs, resolve_sampler(cfg, domain), grid,
                                                  cfg.chaos_n_list, cfg.chaos_n_rep, cfg.master_seed, workers);
        CsvWriter csv(out("chaos.csv"), {"n", "mean_sq_dist", "stderr"});
        for (const ChaosRow& r : table.rows) csv.row({cell(r.n), cell(r.mean_sq_dist), cell(r.stderr_sq_dist)});
        csv.close();
        rec.files.push_back("chaos.csv");
    } else if (cfg.experiment == "ldp-rate") {
        const Vec x0 = resolve_x0(cfg, domain);
        const ReflectedPath psi = solve_limit_ode(domain, field, cs, x0, grid);
        RateTarget target;
        if (cfg.rate_target == "psi") target = target_path(psi);
        else if (cfg.rate_target == "terminal_escape") target = target_terminal_escape(x0, cfg.rate_a);
        else {
            if (cfg.rate_point.size() != domain.dim)
                throw Error(ErrorCode::config, "rate target point dimension mismatch");
            target = target_terminal_point(cfg.rate_point);
        }
        const RateValue rv = rate_of_path(domain, field, cs, x0, psi, target, grid);
        CsvWriter csv(out("rate.csv"), {"infinite", "value", "feasibility", "stages"});
        csv.row({cell(rv.infinite), cell(rv.infinite ? 0.0 : rv.value), cell(rv.feasibility), cell(rv.stages_used)});
        csv.close();
        rec.files.push_back("rate.csv");
        if (rv.witness) {
            std::vector<std::string> header{"t"};
            for (std::size_t j = 0; j < cs.noise_dim; ++j) header.push_back("h_" + std::to_string(j));
            CsvWriter wcsv(out("witness_control.csv"), header);
            for (std::size_t k = 0; k < grid.n_steps; ++k) {
                std::vector<std::string> row{cell(grid.node(k))};
                for (double v : rv.witness->values[k]) row.push_back(cell(v));
                wcsv.row(row);
            }
            wcsv.close();
            rec.files.push_back("witness_control.csv");
        }
    } else if (cfg.experiment == "ldp-rare-event") {
        const Vec x0 = resolve_x0(cfg, domain);
        PathEvent event;
        if (cfg.event_type == "terminal_escape") event = terminal_escape_event(x0, cfg.event_a);
        else event = sup_deviation_event(solve_limit_ode(domain, field, cs, x0, grid), cfg.event_delta);
        std::vector<double> eps_desc = cfg.epsilon_list;
        const std::vector<std::size_t> copies =
            cfg.ldp_copies_list.empty() ? std::vector<std::size_t>{cfg.ldp_copies} : cfg.ldp_copies_list;
        const RareEventTable table = estimate_rare_event(domain, field, cs, x0, grid, driver, eps_desc,
                                                         event, copies, cfg.ldp_copies, workers);
        CsvWriter csv(out("rare_event.csv"),
                      {"epsilon", "n_copies", "hits", "p_hat", "ci_low", "ci_high", "neg_eps_log_p", "one_sided"});
        for (const RareEventRow& r : table.rows)
            csv.row({cell(r.epsilon), cell(r.n_copies), cell(r.hits), cell(r.p_hat), cell(r.ci_low),
                     cell(r.ci_high), r.one_sided ? "" : cell(r.neg_eps_log_p), cell(r.one_sided)});
        csv.close();
        rec.files.push_back("rare_event.csv");
    } else if (cfg.experiment == "ldp-check-ldp1") {
        const Vec x0 = resolve_x0(cfg, domain);
        const ReflectedPath psi = solve_limit_ode(domain, field, cs, x0, grid);
        const Vec hv = cfg.control_value.empty() ? zeros(cs.noise_dim) : cfg.control_value;
        const Control h = Control::constant(grid, hv);
        const auto seq = make_oscillatory_controls(h, cfg.ldp1_amplitude, cfg.ldp1_frequencies);
        const Ldp1Report report = check_ldp1(domain, field, cs, x0, psi, seq, h);
        CsvWriter csv(out("ldp1.csv"), {"frequency", "sup_distance"});
        for (std::size_t i = 0; i < seq.size(); ++i)
            csv.row({cell(cfg.ldp1_frequencies[i]), cell(report.distances[i])});
        csv.close();
        rec.files.push_back("ldp1.csv");
        rec.passed = report.nonincreasing && report.converged;
    } else if (cfg.experiment == "ldp-check-ldp2") {
        const Vec x0 = resolve_x0(cfg, domain);
        const Vec hv = cfg.control_value.empty() ? zeros(cs.noise_dim) : cfg.control_value;
        const Ldp2Report report = check_ldp2(domain, field, cs, x0, grid, driver, cfg.epsilon_list,
                                             Control::constant(grid, hv), cfg.ldp_theta, cfg.ldp_copies,
                                             workers);
        CsvWriter csv(out("ldp2.csv"), {"epsilon", "prob", "stderr"});
        for (const Ldp2Row& r : report.rows) csv.row({cell(r.epsilon), cell(r.prob), cell(r.std_err)});
        csv.close();
        rec.files.push_back("ldp2.csv");
        rec.passed = report.nonincreasing_within_2se;
    } else if (cfg.experiment == "ldp-check-limit-law") {
        const Vec x0 = resolve_x0(cfg, domain);
        const LimitLawReport report = check_limit_law(domain, field, cs, x0, grid, driver,
                                                      cfg.epsilon_list, cfg.ldp_copies, workers);
        CsvWriter csv(out("limit_law.csv"), {"epsilon", "sup_w2", "stderr"});
        for (const LimitLawRow& r : report.rows) csv.row({cell(r.epsilon), cell(r.sup_w2), cell(r.std_err)});
        csv.close();
        rec.files.push_back("limit_law.csv");
        rec.passed = report.nonincreasing_within_2se;
    } else if (cfg.experiment == "geometry-validate") {
        const ConeReport cone = validate_cone_condition(domain, field, cfg.validate_samples, cfg.master_seed);
        const TimeRegularityReport reg =
            validate_time_regularity(domain, cfg.validate_samples, cfg.horizon / 256.0, cfg.master_seed);
        CsvWriter csv(out("cone_report.csv"), {"t", "xi", "dist", "anchor_0"});
        for (const ConeViolation& v : cone.violations)
            csv.row({cell(v.t), cell(v.xi), cell(v.dist_value), cell(v.anchor[0])});
        csv.close();
        CsvWriter rcsv(out("regularity.csv"), {"max_quotient", "declared_bound", "ok"});
        rcsv.row({cell(reg.max_quotient), cell(reg.declared_bound), cell(reg.ok)});
        rcsv.close();
        rec.files.push_back("cone_report.csv");
        rec.files.push_back("regularity.csv");
        rec.passed = cone.ok() && reg.ok;
    } else {
        throw Error(ErrorCode::config, "unhandled experiment '" + cfg.experiment + "'");
    }

    finalize_manifest(rec, started);
    return rec;
}

// ---------------------------------------------------------------------------
// Plot-data emission: tidy long format (series, x, y, y_err)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "missing table '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace detail

inline std::string emit_plot_data(const RunRecord& rec, const std::string& kind) {
    const std::string out_path = rec.out_dir + "/plot_" + kind + ".csv";
    CsvWriter csv(out_path, {"series", "x", "y", "y_err"});
    if (kind == "chaos") {
        const auto rows = detail::read_csv(rec.out_dir + "/chaos.csv");
        for (std::size_t i = 1; i < rows.size(); ++i)
            csv.row({"chaos", rows[i][0], rows[i][1], rows[i][2]});
    } else if (kind == "ldp") {
        const auto rows = detail::read_csv(rec.out_dir + "/rare_event.csv");
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i][7] == "1") continue;  // zero hits: no point estimate
            const double eps = std::stod(rows[i][0]);
            const double lo = std::stod(rows[i][4]);
            const double hi = std::stod(rows[i][5]);
            const double err = lo > 0.0 ? 0.5 * eps * (std::log(hi) - std::log(lo)) : 0.0;
            csv.row({"neg_eps_log_p", rows[i][0], rows[i][6], cell(err)});
        }
    } else if (kind == "paths") {
        const auto rows = detail::read_csv(rec.out_dir + "/paths.csv");
        for (std::size_t i = 1; i < rows.size(); ++i)
            csv.row({"particle_" + rows[i][0], rows[i][2], rows[i][3], "0"});
    } else {
        throw Error(ErrorCode::argument, "unknown plot kind '" + kind + "'");
    }
    csv.close();
    return out_path;
}

} // namespace mvreflect

#include "sknap/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sknap/batch.hpp"
#include "sknap/bounds.hpp"
#include "sknap/dp.hpp"
#include "sknap/io.hpp"
#include "sknap/model.hpp"
#include "sknap/pricing.hpp"
#include "sknap/sim.hpp"
#include "sknap/switchover.hpp"

#ifdef SKNAP_HAVE_OPENMP
#include <omp.h>
#endif

namespace sknap::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

/// Failure carrying the process exit code it should map to.
struct CliError : std::runtime_error {
    ExitCode code;
    CliError(ExitCode c, const std::string& message)
        : std::runtime_error(message), code(c) {}
};

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

std::string resolve_out_base(std::string out, const std::string& fallback) {
    if (out.empty()) out = fallback;
    std::filesystem::path p(out);
    if (p.is_absolute() || out.find('/') != std::string::npos) return out;
    const char* env = std::getenv("SKNAP_OUT_DIR");
    std::filesystem::path dir = (env && *env) ? std::filesystem::path(env)
                                              : std::filesystem::path(".");
    return (dir / p).string();
}

/// Both artifacts are composed in memory first; nothing touches the
/// filesystem until the computation has fully succeeded.
void write_outputs(const std::string& base, const ordered_json& doc,
                   const std::string& csv) {
    try {
        std::filesystem::path parent = std::filesystem::path(base).parent_path();
        if (!parent.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(parent, ec);
        }
        io::write_file(base + ".json", doc.dump(2) + "\n");
        io::write_file(base + ".csv", csv);
    } catch (const std::runtime_error& e) {
        throw CliError(IoError, e.what());
    }
    std::cout << base << ".json\n" << base << ".csv\n";
}

ordered_json json_vector(const std::vector<double>& values) {
    ordered_json arr = ordered_json::array();
    for (double v : values) arr.push_back(v);
    return arr;
}

std::string join_prices(const std::vector<double>& prices) {
    std::string out;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (i) out += ';';
        out += io::format_double(prices[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config loading
// ---------------------------------------------------------------------------

model::ProblemInstance load_config(const std::string& path) {
    try {
        return model::load_instance(path);
    } catch (const std::invalid_argument& e) {
        throw CliError(ConfigError, e.what());
    }
}

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
    throw CliError(ConfigError, "config field '" + path + "': " + why);
}

double require_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) bad_field(path, "expected a number");
    return j.get<double>();
}

int require_int(const ordered_json& j, const std::string& path) {
    if (!j.is_number_integer()) bad_field(path, "expected an integer");
    return j.get<int>();
}

pricing::DemandKind demand_kind_from(const std::string& name,
                                     const std::string& path) {
    if (name == "linear") return pricing::DemandKind::linear;
    if (name == "exponential") return pricing::DemandKind::exponential;
    if (name == "power") return pricing::DemandKind::power;
    bad_field(path, "unknown demand kind '" + name +
                        "' (expected linear, exponential or power)");
}

std::string demand_kind_name(pricing::DemandKind kind) {
    switch (kind) {
    case pricing::DemandKind::linear: return "linear";
    case pricing::DemandKind::exponential: return "exponential";
    case pricing::DemandKind::power: return "power";
    }
    return "?";
}

/// Markdown-pricing config: {"inventory": W, "segments": m, "list_price": p1,
/// "demand": {"kind": ..., "a": ..., "b": ..., "period_scale": [...]?},
/// "batch": {...}? (unit when omitted)}.
pricing::PricingFrame load_pricing_frame(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::runtime_error& e) {
        throw CliError(ConfigError, e.what());
    }
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw CliError(ConfigError,
                       std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CliError(ConfigError, "config root must be a JSON object");
    for (const char* field : {"inventory", "segments", "list_price", "demand"}) {
        if (!j.contains(field)) bad_field(field, "missing");
    }

    pricing::PricingFrame frame;
    frame.inventory = require_int(j["inventory"], "inventory");
    frame.segments = require_int(j["segments"], "segments");
    frame.list_price = require_number(j["list_price"], "list_price");

    const auto& d = j["demand"];
    if (!d.is_object()) bad_field("demand", "expected an object");
    for (const char* field : {"kind", "a", "b"}) {
        if (!d.contains(field)) bad_field(std::string("demand.") + field, "missing");
    }
    if (!d["kind"].is_string()) bad_field("demand.kind", "expected a string");
    frame.demand.kind = demand_kind_from(d["kind"].get<std::string>(), "demand.kind");
    frame.demand.a = require_number(d["a"], "demand.a");
    frame.demand.b = require_number(d["b"], "demand.b");
    if (d.contains("period_scale")) {
        const auto& ps = d["period_scale"];
        if (!ps.is_array()) bad_field("demand.period_scale", "expected an array");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            frame.demand.period_scale.push_back(
                require_number(ps[i], "demand.period_scale[" + std::to_string(i) + "]"));
        }
        if (frame.demand.period_scale.size() !=
            static_cast<std::size_t>(frame.segments)) {
            bad_field("demand.period_scale", "expected one entry per segment");
        }
    }

    if (j.contains("batch")) {
        try {
            frame.batch = model::batch_from_json(j["batch"].dump(), frame.inventory);
        } catch (const std::invalid_argument& e) {
            throw CliError(ConfigError, e.what());
        }
    } else {
        frame.batch = model::BatchDistribution::unit(frame.inventory);
    }
    return frame;
}

std::vector<double> warm_start_field(const std::string& path, const char* field,
                                     std::size_t expected) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::runtime_error& e) {
        throw CliError(ConfigError, e.what());
    }
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw CliError(ConfigError,
                       std::string("warm start is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains(field) || !j[field].is_array()) {
        throw CliError(ConfigError, std::string("warm start needs an array field '") +
                                        field + "'");
    }
    std::vector<double> values;
    for (const auto& v : j[field]) {
        if (!v.is_number())
            throw CliError(ConfigError, std::string("warm start field '") + field +
                                            "' must hold numbers");
        values.push_back(v.get<double>());
    }
    if (values.size() != expected) {
        throw CliError(ConfigError, std::string("warm start field '") + field +
                                        "' has size " + std::to_string(values.size()) +
                                        ", expected " + std::to_string(expected));
    }
    return values;
}

// ---------------------------------------------------------------------------
// Shared solver plumbing
// ---------------------------------------------------------------------------

struct SwitchOutcome {
    switchover::SwitchOverSolution solution;
    std::optional<switchover::KktReport> kkt;
    std::vector<double> acceptance;
};

/// Dispatch on the order-size structure: shared (or unit) batch instances go
/// through the kernel bisection solver, per-class batches through the
/// projected-gradient schedule search.
SwitchOutcome solve_switch(const model::ProblemInstance& inst) {
    SwitchOutcome out;
    if (inst.unit_batch() || inst.homogeneous()) {
        auto kernel = batch::kernel_for(inst);
        out.solution = switchover::optimize_switch_times(inst, kernel);
        out.kkt = switchover::kkt_check(inst, kernel, out.solution);
        out.acceptance = switchover::acceptance_rates(inst, kernel, out.solution);
    } else {
        out.solution = batch::solve_price_dependent(inst);
    }
    return out;
}

double effective_delta(const model::ProblemInstance& inst, double delta_flag) {
    return delta_flag > 0.0 ? delta_flag : model::default_delta(inst);
}

sim::Policy make_policy(const std::string& name, const model::ProblemInstance& inst,
                        double delta_flag) {
    if (name == "switch" || name == "switch_over") {
        return sim::Policy::switch_over_policy(solve_switch(inst).solution.t);
    }
    if (name == "fcfs") return sim::Policy::fcfs_policy();
    if (name == "equal" || name == "equal_spaced") {
        return sim::Policy::equal_spaced_policy(inst);
    }
    if (name == "dp" || name == "dp_table") {
        auto disc = std::make_shared<model::DiscretizedInstance>(
            model::discretize(inst, effective_delta(inst, delta_flag)));
        auto table = std::make_shared<dp::ValueTable>(dp::solve(*disc));
        return sim::Policy::dp_policy(std::move(table), std::move(disc));
    }
    throw CliError(UsageError, "unknown policy '" + name +
                                   "' (expected switch, fcfs, equal or dp)");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

ordered_json estimate_json(const sim::SimEstimate& est) {
    ordered_json j;
    j["mean"] = est.mean;
    j["ci99"] = est.ci99;
    j["replications"] = est.replications;
    j["seed"] = est.seed;
    j["per_class_acceptance"] = json_vector(est.per_class_acceptance);
    return j;
}

ordered_json switch_solution_json(const switchover::SwitchOverSolution& sol) {
    ordered_json j;
    j["revenue"] = sol.revenue;
    j["weighted_shortfall"] = sol.weighted_shortfall;
    j["eta"] = sol.eta;
    j["converged"] = sol.converged;
    j["constraint_binding"] = sol.constraint_binding;
    j["constraint_residual"] = sol.constraint_residual;
    j["stationarity_residual"] = sol.stationarity_residual;
    j["t"] = json_vector(sol.t);
    j["y"] = json_vector(sol.y);
    j["mu"] = json_vector(sol.mu);
    j["nu"] = json_vector(sol.nu);
    return j;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_solve_dp(const std::string& config, const std::string& out, double delta_flag) {
    auto inst = load_config(config);
    double delta = effective_delta(inst, delta_flag);
    model::DiscretizedInstance disc;
    try {
        disc = model::discretize(inst, delta);
    } catch (const std::invalid_argument& e) {
        throw CliError(ConfigError, e.what());
    }
    auto table = dp::solve(disc);
    auto structure = dp::structure_report(table);

    ordered_json doc;
    doc["command"] = "solve-dp";
    doc["config"] = config;
    doc["inventory"] = inst.inventory;
    doc["horizon"] = inst.horizon;
    doc["classes"] = inst.classes();
    doc["delta"] = delta;
    doc["periods"] = disc.periods;
    doc["optimal_value"] = table.optimal_value();
    doc["structure"]["max_concavity_violation"] = structure.max_concavity_violation;
    doc["structure"]["max_submodularity_violation"] =
        structure.max_submodularity_violation;
    if (inst.unit_batch()) {
        auto thresholds = dp::extract_thresholds(table, disc);
        doc["threshold_violations"] = thresholds.violations.size();
    }

    std::ostringstream csv;
    dp::write_csv(table, csv);
    write_outputs(resolve_out_base(out, "solve_dp"), doc, csv.str());
    return Ok;
}

int cmd_optimize_switchover(const std::string& config, const std::string& out,
                            const std::string& warm_start) {
    auto inst = load_config(config);
    if (!warm_start.empty()) {
        // The schedule solver is deterministic and global; a warm start is
        // validated for shape so round-tripping a result file is well-formed,
        // then the solve proceeds from scratch.
        warm_start_field(warm_start, "y", inst.classes());
    }
    auto outcome = solve_switch(inst);
    const auto& sol = outcome.solution;

    ordered_json doc;
    doc["command"] = "optimize-switchover";
    doc["config"] = config;
    doc["inventory"] = inst.inventory;
    doc["horizon"] = inst.horizon;
    doc["classes"] = inst.classes();
    doc["solution"] = switch_solution_json(sol);
    if (outcome.kkt) {
        ordered_json k;
        k["stationarity"] = outcome.kkt->stationarity;
        k["primal"] = outcome.kkt->primal;
        k["dual"] = outcome.kkt->dual;
        k["complementarity"] = outcome.kkt->complementarity;
        k["max_residual"] = outcome.kkt->max_residual;
        k["constraint_slack"] = outcome.kkt->constraint_slack;
        doc["kkt"] = k;
    }
    if (!outcome.acceptance.empty()) {
        doc["per_class_acceptance"] = json_vector(outcome.acceptance);
    }

    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"class", "t", "mu", "y", "nu"};
    w.header(names);
    for (std::size_t l = 0; l < inst.classes(); ++l) {
        w.field(static_cast<long long>(l + 1))
            .field(sol.t[l])
            .field(sol.mu[l])
            .field(sol.y[l])
            .field(sol.nu[l]);
        w.end_row();
    }
    write_outputs(resolve_out_base(out, "optimize_switchover"), doc, csv.str());
    return Ok;
}

int cmd_optimize_pricing(const std::string& config, const std::string& out,
                         const std::string& method, const std::string& warm_start,
                         const std::string& p1_range) {
    auto frame = load_pricing_frame(config);
    pricing::ExactOptions opts;
    if (!warm_start.empty()) {
        opts.warm_start = warm_start_field(warm_start, "r",
                                           static_cast<std::size_t>(frame.segments));
    }

    pricing::PricingSolution sol;
    std::optional<pricing::ListPriceSolution> list_sol;
    try {
        if (!p1_range.empty()) {
            auto parts = split(p1_range, ':');
            if (parts.size() != 2)
                throw CliError(UsageError, "--p1-range expects low:high");
            double lo = 0.0, hi = 0.0;
            try {
                lo = std::stod(parts[0]);
                hi = std::stod(parts[1]);
            } catch (const std::exception&) {
                throw CliError(UsageError, "--p1-range expects numeric low:high");
            }
            list_sol = pricing::solve_pricing_with_p1(frame, lo, hi, opts);
            sol = list_sol->solution;
            frame.list_price = list_sol->list_price;
        } else if (method == "approx") {
            sol = pricing::solve_pricing_approx(frame);
        } else {
            sol = pricing::solve_pricing_exact(frame, opts);
        }
    } catch (const std::invalid_argument& e) {
        throw CliError(ConfigError, e.what());
    } catch (const std::runtime_error& e) {
        throw CliError(SolverError, e.what());
    }

    ordered_json doc;
    doc["command"] = "optimize-pricing";
    doc["config"] = config;
    doc["method"] = sol.method;
    if (!sol.note.empty()) doc["note"] = sol.note;
    if (!sol.warning.empty()) doc["warning"] = sol.warning;
    doc["inventory"] = frame.inventory;
    doc["segments"] = frame.segments;
    doc["list_price"] = frame.list_price;
    doc["demand"]["kind"] = demand_kind_name(frame.demand.kind);
    doc["demand"]["a"] = frame.demand.a;
    doc["demand"]["b"] = frame.demand.b;
    doc["objective"] = sol.objective;
    doc["eta"] = sol.eta;
    doc["kkt_residual"] = sol.kkt_residual;
    if (list_sol) doc["eta_gap"] = list_sol->eta_gap;
    doc["prices"] = json_vector(sol.prices);
    doc["r"] = json_vector(sol.r);

    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"segment", "price", "r"};
    w.header(names);
    for (std::size_t i = 0; i < sol.prices.size(); ++i) {
        w.field(static_cast<long long>(i + 1)).field(sol.prices[i]).field(sol.r[i]);
        w.end_row();
    }
    write_outputs(resolve_out_base(out, "optimize_pricing"), doc, csv.str());
    return Ok;
}

void sim_csv_header(io::CsvWriter& w) {
    const std::vector<std::string> names = {"policy", "W",    "T",
                                            "mean",   "ci99", "pct_off_best"};
    w.header(names);
}

int cmd_simulate(const std::string& config, const std::string& out,
                 const std::string& policy_name, std::uint64_t reps,
                 std::uint64_t seed, double delta_flag) {
    auto inst = load_config(config);
    auto policy = make_policy(policy_name, inst, delta_flag);
    auto est = sim::simulate(inst, policy, reps, seed);

    ordered_json doc;
    doc["command"] = "simulate";
    doc["config"] = config;
    doc["policy"] = policy.label;
    doc["inventory"] = inst.inventory;
    doc["horizon"] = inst.horizon;
    doc["estimate"] = estimate_json(est);

    std::ostringstream csv;
    io::CsvWriter w(csv);
    sim_csv_header(w);
    w.field(policy.label)
        .field(inst.inventory)
        .field(inst.horizon)
        .field(est.mean)
        .field(est.ci99)
        .field(0.0);
    w.end_row();
    write_outputs(resolve_out_base(out, "simulate"), doc, csv.str());
    return Ok;
}

int cmd_compare(const std::string& config, const std::string& out,
                const std::string& policy_list, std::uint64_t reps,
                std::uint64_t seed, double delta_flag) {
    auto inst = load_config(config);
    auto names = split(policy_list, ',');
    if (names.empty()) throw CliError(UsageError, "--policy list is empty");
    std::vector<sim::Policy> policies;
    for (const auto& name : names) policies.push_back(make_policy(name, inst, delta_flag));
    auto comparison = sim::compare(inst, policies, reps, seed);

    ordered_json doc;
    doc["command"] = "compare";
    doc["config"] = config;
    doc["inventory"] = inst.inventory;
    doc["horizon"] = inst.horizon;
    doc["replications"] = reps;
    doc["seed"] = seed;
    doc["best"] = comparison.rows[comparison.best].label;
    ordered_json rows = ordered_json::array();
    for (const auto& row : comparison.rows) {
        ordered_json r;
        r["policy"] = row.label;
        r["estimate"] = estimate_json(row.estimate);
        r["pct_off_best"] = row.pct_off_best;
        r["diff_mean"] = row.diff_mean;
        r["diff_ci99"] = row.diff_ci99;
        rows.push_back(r);
    }
    doc["rows"] = rows;

    std::ostringstream csv;
    io::CsvWriter w(csv);
    sim_csv_header(w);
    for (const auto& row : comparison.rows) {
        w.field(row.label)
            .field(inst.inventory)
            .field(inst.horizon)
            .field(row.estimate.mean)
            .field(row.estimate.ci99)
            .field(row.pct_off_best);
        w.end_row();
    }
    write_outputs(resolve_out_base(out, "compare"), doc, csv.str());
    return Ok;
}

int cmd_bounds(const std::string& config, const std::string& out,
               const std::string& sweep) {
    auto inst = load_config(config);
    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"W",     "T",      "upper",
                                            "lower", "switch", "rel_gap"};
    w.header(names);

    ordered_json doc;
    doc["command"] = "bounds";
    doc["config"] = config;

    try {
        if (sweep.empty()) {
            auto report = bounds::revenue_bounds(inst);
            auto sw = solve_switch(inst).solution;
            double rel_gap =
                report.upper > 0.0 ? (report.upper - sw.revenue) / report.upper : 0.0;
            doc["inventory"] = inst.inventory;
            doc["horizon"] = inst.horizon;
            doc["upper"] = report.upper;
            doc["lower"] = report.lower;
            doc["switch_revenue"] = sw.revenue;
            doc["rel_gap"] = rel_gap;
            doc["regime_class"] = report.regime_class;
            doc["marginal_time"] = report.marginal_time;
            w.field(inst.inventory)
                .field(inst.horizon)
                .field(report.upper)
                .field(report.lower)
                .field(sw.revenue)
                .field(rel_gap);
            w.end_row();
        } else {
            std::vector<int> inventories;
            for (const auto& item : split(sweep, ',')) {
                try {
                    inventories.push_back(std::stoi(item));
                } catch (const std::exception&) {
                    throw CliError(UsageError, "--sweep expects comma-separated integers");
                }
            }
            auto study = bounds::gap_study(inst, inventories);
            ordered_json rows = ordered_json::array();
            for (const auto& row : study.rows) {
                ordered_json r;
                r["W"] = row.inventory;
                r["T"] = row.horizon;
                r["upper"] = row.upper;
                r["lower"] = row.lower;
                r["switch_revenue"] = row.switch_revenue;
                r["rel_gap"] = row.rel_gap;
                rows.push_back(r);
                w.field(row.inventory)
                    .field(row.horizon)
                    .field(row.upper)
                    .field(row.lower)
                    .field(row.switch_revenue)
                    .field(row.rel_gap);
                w.end_row();
            }
            doc["rows"] = rows;
            doc["gap_slope"] = study.slope;
        }
    } catch (const std::invalid_argument& e) {
        throw CliError(ConfigError, e.what());
    }

    write_outputs(resolve_out_base(out, "bounds"), doc, csv.str());
    return Ok;
}

// ---------------------------------------------------------------------------
// Experiment reproduction (all inputs are embedded)
// ---------------------------------------------------------------------------

/// Four-class demand mix shared by the policy-comparison studies.
model::ProblemInstance study_instance(int inventory, double horizon,
                                      model::BatchDistribution batch) {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.8, 0.65, 0.45};
    inst.rates = {0.2, 0.3, 0.1, 0.4};
    inst.batches.push_back(std::move(batch));
    inst.inventory = inventory;
    inst.horizon = horizon;
    return inst;
}

/// Discretization fine enough that the simulated table policy is the
/// benchmark: delta * sum(lambda) <= 0.05 with an integral period count.
double fine_delta(const model::ProblemInstance& inst) {
    double periods = std::ceil(inst.horizon * inst.total_rate() / 0.05);
    return inst.horizon / std::max(1.0, periods);
}

sim::Policy fine_dp_policy(const model::ProblemInstance& inst) {
    auto disc = std::make_shared<model::DiscretizedInstance>(
        model::discretize(inst, fine_delta(inst)));
    auto table = std::make_shared<dp::ValueTable>(dp::solve(*disc));
    return sim::Policy::dp_policy(std::move(table), std::move(disc));
}

int reproduce_table1(const std::string& out, std::uint64_t reps, std::uint64_t seed) {
    struct BatchSpec {
        int r;
        double p;
    };
    const BatchSpec specs[] = {{4, 0.33}, {8, 0.5}};
    const int widths[] = {20, 40, 60, 160, 180, 200};

    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {
        "W",      "batch",          "optimal", "switch",
        "switch_pct_off", "equal", "equal_pct_off"};
    w.header(names);

    ordered_json rows = ordered_json::array();
    for (const auto& spec : specs) {
        std::string label = "negbin(" + std::to_string(spec.r) + "," +
                            io::format_double(spec.p) + ")";
        for (int width : widths) {
            auto inst = study_instance(
                width, 20.0,
                model::BatchDistribution::negative_binomial(spec.r, spec.p, width));
            // The quoted optimal cells use a unit-period discretization; the
            // %-off columns are paired against the simulated fine-grid table
            // policy, the realizable optimum of the continuous-time model.
            double cell = dp::solve(model::discretize(inst, 1.0)).optimal_value();
            auto sw = batch::solve_homogeneous(inst);
            std::vector<sim::Policy> policies = {
                fine_dp_policy(inst),
                sim::Policy::switch_over_policy(sw.t),
                sim::Policy::equal_spaced_policy(inst)};
            auto comp = sim::compare(inst, policies, reps, seed);
            double dp_mean = comp.rows[0].estimate.mean;
            double sw_mean = comp.rows[1].estimate.mean;
            double eq_mean = comp.rows[2].estimate.mean;
            double sw_off = 100.0 * (dp_mean - sw_mean) / dp_mean;
            double eq_off = 100.0 * (dp_mean - eq_mean) / dp_mean;

            w.field(width)
                .field(label)
                .field(cell)
                .field(sw_mean)
                .field(sw_off)
                .field(eq_mean)
                .field(eq_off);
            w.end_row();

            ordered_json r;
            r["W"] = width;
            r["batch"] = label;
            r["optimal"] = cell;
            r["optimal_policy_sim"] = dp_mean;
            r["optimal_policy_ci99"] = comp.rows[0].estimate.ci99;
            r["switch"] = sw_mean;
            r["switch_ci99"] = comp.rows[1].estimate.ci99;
            r["switch_pct_off"] = sw_off;
            r["switch_pct_off_ci99"] =
                100.0 * comp.rows[1].diff_ci99 / std::max(dp_mean, 1e-300);
            r["switch_analytic"] = sw.revenue;
            r["equal"] = eq_mean;
            r["equal_ci99"] = comp.rows[2].estimate.ci99;
            r["equal_pct_off"] = eq_off;
            rows.push_back(r);
        }
    }

    ordered_json doc;
    doc["command"] = "reproduce";
    doc["artifact"] = "table1";
    doc["replications"] = reps;
    doc["seed"] = seed;
    doc["note"] = "optimal column: unit-period backward recursion; %-off columns: "
                  "common-random-number simulation against the fine-grid table policy";
    doc["rows"] = rows;
    write_outputs(resolve_out_base(out, "table1"), doc, csv.str());
    return Ok;
}

int reproduce_table2(const std::string& out, std::uint64_t reps, std::uint64_t seed) {
    const std::pair<int, double> ladder[] = {{20, 20.0}, {40, 40.0}, {60, 60.0}, {80, 80.0}};

    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"W", "T", "optimal", "switch",
                                            "rel_err_pct"};
    w.header(names);

    ordered_json rows = ordered_json::array();
    for (const auto& [width, horizon] : ladder) {
        auto inst = study_instance(
            width, horizon, model::BatchDistribution::negative_binomial(4, 0.33, width));
        auto sw = batch::solve_homogeneous(inst);
        std::vector<sim::Policy> policies = {
            fine_dp_policy(inst),
            sim::Policy::switch_over_policy(sw.t)};
        auto comp = sim::compare(inst, policies, reps, seed);
        double dp_mean = comp.rows[0].estimate.mean;
        double sw_mean = comp.rows[1].estimate.mean;
        double rel = 100.0 * (dp_mean - sw_mean) / dp_mean;
        double cell = dp::solve(model::discretize(inst, 1.0)).optimal_value();

        w.field(width).field(horizon).field(dp_mean).field(sw_mean).field(rel);
        w.end_row();

        ordered_json r;
        r["W"] = width;
        r["T"] = horizon;
        r["optimal"] = dp_mean;
        r["optimal_ci99"] = comp.rows[0].estimate.ci99;
        r["optimal_unit_period_value"] = cell;
        r["switch"] = sw_mean;
        r["switch_ci99"] = comp.rows[1].estimate.ci99;
        r["switch_analytic"] = sw.revenue;
        r["rel_err_pct"] = rel;
        r["rel_err_ci99_pct"] =
            100.0 * comp.rows[1].diff_ci99 / std::max(dp_mean, 1e-300);
        rows.push_back(r);
    }

    ordered_json doc;
    doc["command"] = "reproduce";
    doc["artifact"] = "table2";
    doc["replications"] = reps;
    doc["seed"] = seed;
    doc["note"] = "optimal column: simulated fine-grid table policy; "
                  "rel_err_pct from paired replications";
    doc["rows"] = rows;
    write_outputs(resolve_out_base(out, "table2"), doc, csv.str());
    return Ok;
}

struct PricingStudyRow {
    const char* kind;
    pricing::DemandKind demand;
    double a;
    double b;
    int segments;
};

pricing::PricingFrame study_frame(const PricingStudyRow& row, int inventory) {
    pricing::PricingFrame frame;
    frame.inventory = inventory;
    frame.segments = row.segments;
    frame.list_price = 1.0;
    frame.demand.kind = row.demand;
    frame.demand.a = row.a;
    frame.demand.b = row.b;
    frame.batch = model::BatchDistribution::unit(inventory);
    return frame;
}

const PricingStudyRow kPricingRows[] = {
    {"linear", pricing::DemandKind::linear, 15.0, 14.0, 8},
    {"linear", pricing::DemandKind::linear, 40.0, 37.33, 3},
    {"exponential", pricing::DemandKind::exponential, 15.0, 2.0, 8},
    {"exponential", pricing::DemandKind::exponential, 40.0, 2.0, 3},
    {"power", pricing::DemandKind::power, 2.0, 1.5, 8},
    {"power", pricing::DemandKind::power, 5.33, 1.5, 3},
};

int reproduce_table3(const std::string& out) {
    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"kind",      "a", "b", "segments",
                                            "objective", "prices"};
    w.header(names);

    ordered_json rows = ordered_json::array();
    for (const auto& row : kPricingRows) {
        auto frame = study_frame(row, 40);
        auto sol = pricing::solve_pricing_exact(frame);
        w.field(std::string(row.kind))
            .field(row.a)
            .field(row.b)
            .field(row.segments)
            .field(sol.objective)
            .field(join_prices(sol.prices));
        w.end_row();

        ordered_json r;
        r["kind"] = row.kind;
        r["a"] = row.a;
        r["b"] = row.b;
        r["segments"] = row.segments;
        r["objective"] = sol.objective;
        r["eta"] = sol.eta;
        r["kkt_residual"] = sol.kkt_residual;
        r["prices"] = json_vector(sol.prices);
        rows.push_back(r);
    }

    ordered_json doc;
    doc["command"] = "reproduce";
    doc["artifact"] = "table3";
    doc["rows"] = rows;
    write_outputs(resolve_out_base(out, "table3"), doc, csv.str());
    return Ok;
}

int reproduce_table4(const std::string& out) {
    const int widths[] = {10, 15, 20, 25, 30, 50};
    const PricingStudyRow row = {"exponential", pricing::DemandKind::exponential,
                                 15.0, 2.0, 8};

    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"W", "objective", "full_price_periods",
                                            "prices"};
    w.header(names);

    ordered_json rows = ordered_json::array();
    for (int width : widths) {
        auto frame = study_frame(row, width);
        auto sol = pricing::solve_pricing_exact(frame);
        long long full = std::count_if(
            sol.prices.begin(), sol.prices.end(),
            [&](double p) { return p > frame.list_price - 1e-3; });
        w.field(width).field(sol.objective).field(full).field(join_prices(sol.prices));
        w.end_row();

        ordered_json r;
        r["W"] = width;
        r["objective"] = sol.objective;
        r["full_price_periods"] = full;
        r["prices"] = json_vector(sol.prices);
        rows.push_back(r);
    }

    ordered_json doc;
    doc["command"] = "reproduce";
    doc["artifact"] = "table4";
    doc["demand"] = "exponential(15, 2), 8 segments";
    doc["rows"] = rows;
    write_outputs(resolve_out_base(out, "table4"), doc, csv.str());
    return Ok;
}

int reproduce_table5(const std::string& out) {
    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {
        "kind", "a", "b", "segments", "exact_objective", "approx_objective",
        "gap_pct", "approx_note"};
    w.header(names);

    ordered_json rows = ordered_json::array();
    for (const auto& row : kPricingRows) {
        if (row.segments != 3) continue;
        auto frame = study_frame(row, 40);
        auto exact = pricing::solve_pricing_exact(frame);
        auto approx = pricing::solve_pricing_approx(frame);
        double gap = 100.0 * (exact.objective - approx.objective) /
                     std::max(exact.objective, 1e-300);
        w.field(std::string(row.kind))
            .field(row.a)
            .field(row.b)
            .field(row.segments)
            .field(exact.objective)
            .field(approx.objective)
            .field(gap)
            .field(approx.note);
        w.end_row();

        ordered_json r;
        r["kind"] = row.kind;
        r["a"] = row.a;
        r["b"] = row.b;
        r["segments"] = row.segments;
        r["exact_objective"] = exact.objective;
        r["approx_objective"] = approx.objective;
        r["gap_pct"] = gap;
        r["approx_note"] = approx.note;
        if (!approx.warning.empty()) r["approx_warning"] = approx.warning;
        r["exact_prices"] = json_vector(exact.prices);
        r["approx_prices"] = json_vector(approx.prices);
        rows.push_back(r);
    }

    ordered_json doc;
    doc["command"] = "reproduce";
    doc["artifact"] = "table5";
    doc["rows"] = rows;
    write_outputs(resolve_out_base(out, "table5"), doc, csv.str());
    return Ok;
}

int reproduce_figure1(const std::string& out) {
    const int max_width = 100;
    std::vector<double> optimal(max_width + 1, 0.0);
    std::vector<double> switch_over(max_width + 1, 0.0);
    std::vector<double> fcfs(max_width + 1, 0.0);
    std::string first_error;

#ifdef SKNAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int width = 1; width <= max_width; ++width) {
        try {
            auto inst = study_instance(
                width, 20.0,
                model::BatchDistribution::discretized_exponential(12.0, width));
            auto disc = model::discretize(inst, model::default_delta(inst));
            optimal[width] = dp::solve(disc).optimal_value();
            auto kernel = batch::kernel_for(inst);
            auto sol = switchover::optimize_switch_times(inst, kernel);
            switch_over[width] = sol.revenue;
            auto averaged = switchover::averaged_prices(inst);
            fcfs[width] = averaged.p1k.back() *
                          (width - kernel.remaining(inst.total_rate() * inst.horizon));
        } catch (const std::exception& e) {
#ifdef SKNAP_HAVE_OPENMP
#pragma omp critical
#endif
            if (first_error.empty()) first_error = e.what();
        }
    }
    if (!first_error.empty()) throw CliError(SolverError, first_error);

    std::ostringstream csv;
    io::CsvWriter w(csv);
    const std::vector<std::string> names = {"W", "optimal", "switch", "fcfs"};
    w.header(names);
    for (int width = 1; width <= max_width; ++width) {
        w.field(width).field(optimal[width]).field(switch_over[width]).field(fcfs[width]);
        w.end_row();
    }

    ordered_json doc;
    doc["command"] = "reproduce";
    doc["artifact"] = "figure1";
    doc["note"] = "objective vs inventory for the optimal, switch-over and "
                  "first-come-first-served policies (plot data)";
    doc["W"] = ordered_json::array();
    doc["optimal"] = ordered_json::array();
    doc["switch"] = ordered_json::array();
    doc["fcfs"] = ordered_json::array();
    for (int width = 1; width <= max_width; ++width) {
        doc["W"].push_back(width);
        doc["optimal"].push_back(optimal[width]);
        doc["switch"].push_back(switch_over[width]);
        doc["fcfs"].push_back(fcfs[width]);
    }
    write_outputs(resolve_out_base(out, "figure1"), doc, csv.str());
    return Ok;
}

int cmd_reproduce(const std::string& artifact, const std::string& out,
                  std::uint64_t reps, std::uint64_t seed) {
    if (artifact == "table1") return reproduce_table1(out, reps, seed);
    if (artifact == "table2") return reproduce_table2(out, reps, seed);
    if (artifact == "table3") return reproduce_table3(out);
    if (artifact == "table4") return reproduce_table4(out);
    if (artifact == "table5") return reproduce_table5(out);
    if (artifact == "figure1") return reproduce_figure1(out);
    throw CliError(UsageError, "unknown artifact '" + artifact +
                                   "' (expected table1..table5 or figure1)");
}

int report_error(ExitCode code, const std::string& message) {
    ordered_json record;
    record["error"] = message;
    record["code"] = static_cast<int>(code);
    std::cerr << record.dump() << "\n";
    return code;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Finite-horizon stochastic knapsack: admission policies, "
                 "revenue bounds and markdown pricing"};
    app.require_subcommand(1);

    std::string config, out, warm_start, method = "exact", policy, sweep, p1_range;
    std::string artifact;
    std::uint64_t seed = 20260814;
    std::uint64_t reps = 0;
    double delta = 0.0;
    int jobs = 0;

    app.add_option("--jobs", jobs, "Worker threads (0 = library default)");

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) {
            sub->add_option("--config", config, "Instance config (JSON)")->required();
        }
        sub->add_option("--out", out,
                        "Output base path (writes BASE.json and BASE.csv; relative "
                        "names go to $SKNAP_OUT_DIR)");
    };

    auto* solve_dp = app.add_subcommand("solve-dp", "Exact value table by backward recursion");
    add_common(solve_dp, true);
    solve_dp->add_option("--delta", delta, "Period length (0 = auto)");

    auto* opt_switch = app.add_subcommand(
        "optimize-switchover", "Optimal class-opening schedule");
    add_common(opt_switch, true);
    opt_switch->add_option("--warm-start", warm_start, "Previous result JSON");

    auto* opt_pricing = app.add_subcommand(
        "optimize-pricing", "Markdown price path for a single product");
    add_common(opt_pricing, true);
    opt_pricing->add_option("--method", method, "exact | approx")
        ->check(CLI::IsMember({"exact", "approx"}));
    opt_pricing->add_option("--warm-start", warm_start, "Previous result JSON");
    opt_pricing->add_option("--p1-range", p1_range,
                            "low:high bracket to optimize the list price too");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo policy evaluation");
    add_common(simulate, true);
    simulate->add_option("--policy", policy, "switch | fcfs | equal | dp");
    simulate->add_option("--reps", reps, "Replications");
    simulate->add_option("--seed", seed, "RNG seed");
    simulate->add_option("--delta", delta, "Period length for the dp policy (0 = auto)");

    auto* compare = app.add_subcommand(
        "compare", "Policies under common random numbers");
    add_common(compare, true);
    compare->add_option("--policy", policy, "Comma-separated policy list");
    compare->add_option("--reps", reps, "Replications");
    compare->add_option("--seed", seed, "RNG seed");
    compare->add_option("--delta", delta, "Period length for the dp policy (0 = auto)");

    auto* bounds_cmd = app.add_subcommand("bounds", "Closed-form revenue bounds");
    add_common(bounds_cmd, true);
    bounds_cmd->add_option("--sweep", sweep,
                           "Comma-separated inventories for the scaling study");

    auto* reproduce = app.add_subcommand(
        "reproduce", "Regenerate a bundled experiment (table1..table5, figure1)");
    reproduce->add_option("artifact", artifact, "table1..table5 or figure1")->required();
    add_common(reproduce, false);
    reproduce->add_option("--reps", reps, "Replications for the simulated columns");
    reproduce->add_option("--seed", seed, "RNG seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        return report_error(UsageError, e.what());
    }

#ifdef SKNAP_HAVE_OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#endif

    try {
        if (solve_dp->parsed()) return cmd_solve_dp(config, out, delta);
        if (opt_switch->parsed()) return cmd_optimize_switchover(config, out, warm_start);
        if (opt_pricing->parsed())
            return cmd_optimize_pricing(config, out, method, warm_start, p1_range);
        if (simulate->parsed())
            return cmd_simulate(config, out, policy.empty() ? "switch" : policy,
                                reps ? reps : 10000, seed, delta);
        if (compare->parsed())
            return cmd_compare(config, out, policy.empty() ? "dp,switch,fcfs,equal" : policy,
                               reps ? reps : 10000, seed, delta);
        if (bounds_cmd->parsed()) return cmd_bounds(config, out, sweep);
        if (reproduce->parsed())
            return cmd_reproduce(artifact, out, reps ? reps : 20000, seed);
    } catch (const CliError& e) {
        return report_error(e.code, e.what());
    } catch (const std::invalid_argument& e) {
        return report_error(ConfigError, e.what());
    } catch (const std::runtime_error& e) {
        return report_error(SolverError, e.what());
    } catch (const std::exception& e) {
        return report_error(SolverError, e.what());
    }
    return report_error(UsageError, "no command given");
}

} // namespace sknap::cli

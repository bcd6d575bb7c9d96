// Command-line front end: analyze count data with the clFDR, marginal
// lFDR, or BH procedures; emit two-group threshold tables; run Monte
// Carlo FDR/MDR simulations. Outputs are CSV/JSON; every run writes a
// manifest.json (the only timestamped file) beside its results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "clfdr/count_data.hpp"
#include "clfdr/fdr.hpp"
#include "clfdr/loglinear.hpp"
#include "clfdr/multinomial_mixture.hpp"
#include "clfdr/normal_mixture.hpp"
#include "clfdr/sim.hpp"
#include "clfdr/threshold.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitNumericalWarning = 3;

std::string iso_timestamp() {
    const std::time_t t =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw clfdr::DataError("cannot write " + path.string());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw clfdr::DataError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const nlohmann::json& parameters) {
    nlohmann::json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["parameters"] = parameters;
    j["version"] = CLFDR_VERSION;
    j["timestamp"] = iso_timestamp();
    write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, ',')) {
        try {
            values.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw clfdr::DataError("not a number: '" + cell + "'");
        }
    }
    return values;
}

// CSV with columns n,prob (header optional).
clfdr::SizePmf load_size_pmf(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw clfdr::DataError("cannot read " + path.string());
    clfdr::SizePmf pmf;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string n_cell;
        std::string p_cell;
        if (!std::getline(row, n_cell, ',') || !std::getline(row, p_cell)) {
            throw clfdr::DataError("size distribution rows need n,prob");
        }
        try {
            pmf.push_back({static_cast<std::int64_t>(std::stoll(n_cell)),
                           std::stod(p_cell)});
        } catch (const std::exception&) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw clfdr::DataError("bad size distribution row: " + line);
        }
        first = false;
    }
    clfdr::validate_size_pmf(pmf);
    return pmf;
}

struct AnalyzeArgs {
    std::string counts_path;
    std::string method = "clfdr";
    double alpha = 0.05;
    std::size_t components = 3;
    double tol = 1e-8;
    std::size_t max_iter = 1000;
    std::uint64_t seed = 0;
    std::size_t restarts = 5;
    bool exact_null = false;
    std::size_t null_reps = 100000;
    std::string out_dir = ".";
};

int run_analyze(const AnalyzeArgs& a) {
    const clfdr::CountDataset ds = clfdr::load_counts_file(a.counts_path);
    fs::create_directories(a.out_dir);
    const fs::path out_dir(a.out_dir);

    const std::size_t m_total = ds.num_tests();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> t_vals(m_total, nan);
    std::vector<double> z_vals(m_total, nan);
    std::vector<double> p_vals(m_total, nan);
    std::vector<bool> usable(m_total, false);

    std::map<std::int64_t, clfdr::NullDistribution> nulls;
    for (std::size_t m = 0; m < m_total; ++m) {
        const clfdr::TestRecord rec = ds.record(m);
        if (rec.n_total <= 0) continue;
        usable[m] = true;
        const clfdr::TestStatistics s = clfdr::z_score(rec, ds.covariate);
        t_vals[m] = s.t;
        z_vals[m] = s.z;
        if (a.exact_null) {
            auto it = nulls.find(rec.n_total);
            if (it == nulls.end()) {
                it = nulls.emplace(rec.n_total,
                                   clfdr::simulate_null(ds.covariate,
                                                        rec.n_total,
                                                        a.null_reps, a.seed))
                         .first;
            }
            p_vals[m] = clfdr::p_value(s.z, it->second);
        } else {
            p_vals[m] = s.p;
        }
    }

    std::vector<double> stats(m_total, nan);
    clfdr::DecisionResult res;
    nlohmann::json summary;
    bool converged = true;

    if (a.method == "bh") {
        stats = p_vals;
        res = clfdr::bh_procedure(p_vals, a.alpha);
    } else if (a.method == "lfdr-normal") {
        std::vector<double> z_used;
        for (std::size_t m = 0; m < m_total; ++m) {
            if (usable[m]) z_used.push_back(z_vals[m]);
        }
        const clfdr::NormalFitResult fit = clfdr::fit_normal_mixture(
            z_used, a.components, a.tol, a.max_iter, a.seed, a.restarts);
        converged = fit.converged;
        const std::vector<double> fitted = clfdr::lfdr_stats(z_used, fit.params);
        std::size_t u = 0;
        for (std::size_t m = 0; m < m_total; ++m) {
            if (usable[m]) stats[m] = fitted[u++];
        }
        res = clfdr::lfdr_stepup(stats, a.alpha);
        summary = nlohmann::json::parse(clfdr::normal_fit_to_json(fit));
        summary["q"] = fit.q;
        summary["iterations"] = fit.iterations;
        summary["converged"] = fit.converged;
    } else if (a.method == "clfdr") {
        if (a.components < 2) {
            throw clfdr::DataError(
                "clfdr needs at least 2 components (null plus one effect)");
        }
        clfdr::EmOptions opts;
        opts.tol = a.tol;
        opts.max_iter = a.max_iter;
        opts.restarts = a.restarts;
        opts.seed = a.seed;
        const clfdr::FitResult fit = clfdr::fit_em(ds, a.components - 1, opts);
        converged = fit.converged;
        stats = clfdr::clfdr_stats(ds, fit.params);
        res = clfdr::lfdr_stepup(stats, a.alpha);
        summary = nlohmann::json::parse(clfdr::fit_result_to_json(fit));
    } else {
        throw clfdr::DataError("unknown method: " + a.method);
    }

    summary["method"] = a.method;
    summary["k"] = res.k;
    summary["lambda"] = res.lambda;
    summary["alpha"] = a.alpha;
    if (!converged) summary["warning"] = "fit did not converge";

    std::string csv = "id,n,t,z,p,statistic,decision\n";
    const std::vector<std::int64_t> totals = clfdr::row_totals(ds);
    for (std::size_t m = 0; m < m_total; ++m) {
        csv += ds.labels.empty() ? std::to_string(m + 1) : ds.labels[m];
        csv += ',';
        csv += std::to_string(totals[m]);
        csv += ',';
        if (usable[m]) {
            csv += clfdr::format_double(t_vals[m]);
            csv += ',';
            csv += clfdr::format_double(z_vals[m]);
            csv += ',';
            csv += clfdr::format_double(p_vals[m]);
        } else {
            csv += ",,";
        }
        csv += ',';
        if (!std::isnan(stats[m])) csv += clfdr::format_double(stats[m]);
        csv += ',';
        switch (res.delta[m]) {
            case clfdr::Decision::reject: csv += "reject"; break;
            case clfdr::Decision::retain: csv += "retain"; break;
            case clfdr::Decision::skipped: csv += "skipped"; break;
        }
        csv += '\n';
    }
    write_file(out_dir / "per_test.csv", csv);
    write_file(out_dir / "summary.json", summary.dump(2) + "\n");

    nlohmann::json params;
    params["method"] = a.method;
    params["alpha"] = a.alpha;
    params["components"] = a.components;
    params["tol"] = a.tol;
    params["max_iter"] = a.max_iter;
    params["seed"] = a.seed;
    params["restarts"] = a.restarts;
    params["exact_null"] = a.exact_null;
    if (a.exact_null) params["null_reps"] = a.null_reps;
    write_manifest(out_dir, "analyze", {a.counts_path}, params);

    return converged ? kExitOk : kExitNumericalWarning;
}

struct ThresholdArgs {
    double pi0 = 0.5;
    double gamma1 = 1.0;
    double lambda = 0.2;
    std::string covariate;
    std::string size_pmf_path;
    std::int64_t n_max = 1000;
    std::string out_dir = ".";
};

int run_thresholds(const ThresholdArgs& a) {
    clfdr::TwoGroupModel model;
    model.pi0 = a.pi0;
    model.gamma1 = a.gamma1;
    model.covariate.values = parse_double_list(a.covariate);
    model.size_pmf = a.size_pmf_path.empty()
                         ? clfdr::default_size_pmf()
                         : load_size_pmf(a.size_pmf_path);
    model.validate();
    if (!(a.lambda > 0.0 && a.lambda < 1.0)) {
        throw clfdr::DataError("lambda must lie in (0, 1)");
    }
    if (a.n_max < 1) throw clfdr::DataError("n-max must be at least 1");

    fs::create_directories(a.out_dir);
    const fs::path out_dir(a.out_dir);

    std::vector<std::int64_t> ns(static_cast<std::size_t>(a.n_max));
    for (std::size_t i = 0; i < ns.size(); ++i) {
        ns[i] = static_cast<std::int64_t>(i) + 1;
    }
    write_file(out_dir / "boundaries.csv",
               clfdr::boundary_table_csv(model, a.lambda, ns));
    write_file(out_dir / "power.csv",
               clfdr::power_table_csv(model, a.lambda, ns));

    std::vector<double> gammas;
    for (int i = 1; i <= 30; ++i) gammas.push_back(0.1 * i);
    const std::vector<double> lambdas = {0.05, 0.1, 0.2};
    write_file(out_dir / "frontier.csv",
               clfdr::monotone_frontier_csv(model, gammas, lambdas, a.n_max));

    nlohmann::json params;
    params["pi0"] = a.pi0;
    params["gamma1"] = a.gamma1;
    params["lambda"] = a.lambda;
    params["covariate"] = model.covariate.values;
    params["n_max"] = a.n_max;
    std::vector<std::string> inputs;
    if (!a.size_pmf_path.empty()) inputs.push_back(a.size_pmf_path);
    write_manifest(out_dir, "thresholds", inputs, params);
    return kExitOk;
}

int run_simulate(const std::string& config_path, const std::string& out_dir_s) {
    const clfdr::SimConfig config =
        clfdr::sim_config_from_json(read_file(config_path));
    const clfdr::SimReport report = clfdr::run_simulation(config);

    fs::create_directories(out_dir_s);
    const fs::path out_dir(out_dir_s);
    write_file(out_dir / "report.json", clfdr::sim_report_to_json(report) + "\n");
    write_file(out_dir / "rejections_by_n.csv",
               clfdr::sim_histograms_csv(report));

    nlohmann::json params;
    params["alpha"] = config.alpha;
    params["m"] = config.m;
    params["reps"] = config.reps;
    params["seed"] = config.seed;
    params["procedures"] = config.procedures;
    write_manifest(out_dir, "simulate", {config_path}, params);

    for (const clfdr::ArmReport& arm : report.arms) {
        if (arm.nonconverged_reps >= config.reps) return kExitNumericalWarning;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Conditional local false discovery rate procedures for "
        "heterogeneous multinomial count data"};
    app.require_subcommand(1);

    AnalyzeArgs az;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "Run a multiple-testing procedure on a counts CSV");
    analyze->add_option("counts", az.counts_path, "counts CSV file")
        ->required();
    analyze->add_option("--method", az.method,
                        "procedure: clfdr, lfdr-normal, or bh")
        ->check(CLI::IsMember({"clfdr", "lfdr-normal", "bh"}));
    analyze->add_option("--alpha", az.alpha, "FDR level (default 0.05)");
    analyze->add_option("--components", az.components,
                        "total mixture components including the null");
    analyze->add_option("--tol", az.tol, "EM convergence tolerance");
    analyze->add_option("--max-iter", az.max_iter, "EM iteration cap");
    analyze->add_option("--seed", az.seed, "random seed");
    analyze->add_option("--restarts", az.restarts, "EM restarts");
    analyze->add_flag("--exact-null", az.exact_null,
                      "Monte Carlo null for p-values instead of N(0,1)");
    analyze->add_option("--null-reps", az.null_reps,
                        "Monte Carlo null sample size per row total");
    analyze->add_option("--out-dir", az.out_dir, "output directory");

    ThresholdArgs th;
    CLI::App* thresholds = app.add_subcommand(
        "thresholds", "Emit two-group rejection-boundary and power tables");
    thresholds->add_option("--pi0", th.pi0, "null proportion")->required();
    thresholds->add_option("--gamma1", th.gamma1, "alternative effect")
        ->required();
    thresholds->add_option("--lambda", th.lambda, "statistic threshold");
    thresholds->add_option("--covariate", th.covariate,
                           "comma-separated covariate values")
        ->required();
    thresholds->add_option("--size-pmf", th.size_pmf_path,
                           "row-total pmf CSV (n,prob)");
    thresholds->add_option("--n-max", th.n_max, "largest row total tabulated");
    thresholds->add_option("--out-dir", th.out_dir, "output directory");

    std::string sim_config_path;
    std::string sim_out_dir = ".";
    CLI::App* simulate = app.add_subcommand(
        "simulate", "Run the Monte Carlo FDR/MDR study from a JSON config");
    simulate->add_option("config", sim_config_path, "JSON config file")
        ->required();
    simulate->add_option("--out-dir", sim_out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (analyze->parsed()) return run_analyze(az);
        if (thresholds->parsed()) return run_thresholds(th);
        return run_simulate(sim_config_path, sim_out_dir);
    } catch (const clfdr::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputError;
    }
}

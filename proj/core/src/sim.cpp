#include "clfdr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "clfdr/fdr.hpp"
#include "clfdr/loglinear.hpp"
#include "clfdr/normal_mixture.hpp"
#include "clfdr/rng.hpp"
#include "json.hpp"

namespace clfdr {

namespace {

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kNormalFitStream = 1;
constexpr std::uint64_t kEmFitStream = 2;

const std::set<std::string> kKnownProcedures = {
    "bh", "lfdr-normal", "clfdr-oracle", "clfdr-adaptive"};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep,
                          std::uint64_t stream) {
    Rng rng = Rng::substream(seed, rep, 0, stream);
    return rng();
}

}  // namespace

void SimConfig::validate() const {
    if (m < 1) throw DataError("m must be at least 1");
    if (reps < 1) throw DataError("reps must be at least 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw DataError("alpha must lie in (0, 1]");
    }
    params.validate();
    covariate.validate();
    validate_size_pmf(size_pmf);
    if (procedures.empty()) {
        throw DataError("at least one procedure is required");
    }
    std::set<std::string> seen;
    for (const std::string& name : procedures) {
        if (!kKnownProcedures.count(name)) {
            throw DataError("unknown procedure: " + name);
        }
        if (!seen.insert(name).second) {
            throw DataError("duplicate procedure: " + name);
        }
    }
    if (normal_components < 2) {
        throw DataError("normal mixture needs at least 2 components");
    }
    if (!(tol > 0.0) || max_iter < 1) {
        throw DataError("tolerance must be positive and max_iter at least 1");
    }
}

SimConfig sim_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config is not valid JSON: ") + e.what());
    }
    SimConfig c;
    try {
        c.covariate.values = j.at("covariate").get<std::vector<double>>();
        c.params.gammas = j.at("gammas").get<std::vector<double>>();
        c.params.pis = j.at("pis").get<std::vector<double>>();
        if (j.contains("m")) c.m = j["m"].get<std::size_t>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("reps")) c.reps = j["reps"].get<std::size_t>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("tol")) c.tol = j["tol"].get<double>();
        if (j.contains("max_iter")) {
            c.max_iter = j["max_iter"].get<std::size_t>();
        }
        if (j.contains("em_restarts")) {
            c.em_restarts = j["em_restarts"].get<std::size_t>();
        }
        if (j.contains("normal_components")) {
            c.normal_components = j["normal_components"].get<std::size_t>();
        }
        if (j.contains("normal_restarts")) {
            c.normal_restarts = j["normal_restarts"].get<std::size_t>();
        }
        if (j.contains("procedures")) {
            c.procedures = j["procedures"].get<std::vector<std::string>>();
        }
        if (j.contains("size_pmf")) {
            c.size_pmf.clear();
            for (const auto& e : j["size_pmf"]) {
                c.size_pmf.push_back({e.at("n").get<std::int64_t>(),
                                      e.at("prob").get<double>()});
            }
        } else {
            c.size_pmf = default_size_pmf();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

std::pair<CountDataset, std::vector<int>> sample_dataset(
    const SimConfig& config, std::size_t rep_index) {
    std::vector<std::vector<double>> comp_probs;
    comp_probs.reserve(config.params.components());
    for (double g : config.params.gammas) {
        comp_probs.push_back(multinomial_probs(g, config.covariate));
    }
    std::vector<double> size_probs;
    std::vector<std::int64_t> size_values;
    for (const SizePmfEntry& e : config.size_pmf) {
        size_values.push_back(e.n);
        size_probs.push_back(e.prob);
    }

    CountDataset ds;
    ds.covariate = config.covariate;
    ds.counts.reserve(config.m);
    std::vector<int> truth(config.m, 0);
    std::vector<std::int64_t> row;
    for (std::size_t t = 0; t < config.m; ++t) {
        Rng rng = Rng::substream(config.seed, rep_index, t, kDataStream);
        const std::size_t k = rng.categorical(config.params.pis);
        const std::size_t ni = rng.categorical(size_probs);
        rng.multinomial(size_values[ni], comp_probs[k], row);
        ds.counts.push_back(row);
        truth[t] = k == 0 ? 0 : 1;
    }
    return {std::move(ds), std::move(truth)};
}

SimReport run_simulation(const SimConfig& config) {
    config.validate();
    const std::size_t k_alt = config.params.components() - 1;

    struct ArmState {
        std::string name;
        std::vector<ErrorCounts> batches;
        std::map<std::int64_t, HistogramRow> hist;
        std::size_t nonconverged = 0;
        double r_total = 0.0;
    };
    std::vector<ArmState> arms;
    for (const std::string& name : config.procedures) {
        arms.push_back({name, {}, {}, 0, 0.0});
    }
    const bool need_z =
        std::any_of(arms.begin(), arms.end(), [](const ArmState& a) {
            return a.name == "bh" || a.name == "lfdr-normal";
        });

    for (std::size_t rep = 0; rep < config.reps; ++rep) {
        const auto [ds, truth] = sample_dataset(config, rep);
        const std::vector<std::int64_t> totals = row_totals(ds);
        std::vector<double> z;
        std::vector<double> p;
        if (need_z) {
            z.reserve(config.m);
            p.reserve(config.m);
            for (std::size_t i = 0; i < ds.num_tests(); ++i) {
                const TestStatistics s = z_score(ds.record(i), ds.covariate);
                z.push_back(s.z);
                p.push_back(s.p);
            }
        }

        for (ArmState& arm : arms) {
            DecisionResult res;
            if (arm.name == "bh") {
                res = bh_procedure(p, config.alpha);
            } else if (arm.name == "lfdr-normal") {
                const NormalFitResult fit = fit_normal_mixture(
                    z, config.normal_components, config.tol, config.max_iter,
                    derive_seed(config.seed, rep, kNormalFitStream),
                    config.normal_restarts);
                if (!fit.converged) {
                    ++arm.nonconverged;
                    continue;
                }
                res = lfdr_stepup(lfdr_stats(z, fit.params), config.alpha);
            } else if (arm.name == "clfdr-oracle") {
                res = lfdr_stepup(clfdr_stats(ds, config.params),
                                  config.alpha);
            } else {
                EmOptions opts;
                opts.tol = config.tol;
                opts.max_iter = config.max_iter;
                opts.restarts = config.em_restarts;
                opts.seed = derive_seed(config.seed, rep, kEmFitStream);
                const FitResult fit = fit_em(ds, k_alt, opts);
                if (!fit.converged) {
                    ++arm.nonconverged;
                    continue;
                }
                res = lfdr_stepup(clfdr_stats(ds, fit.params), config.alpha);
            }

            arm.batches.push_back(confusion_counts(res, truth));
            arm.r_total += static_cast<double>(res.k);
            for (std::size_t i = 0; i < ds.num_tests(); ++i) {
                HistogramRow& h = arm.hist[totals[i]];
                h.n = totals[i];
                ++h.tests;
                if (truth[i] != 0) ++h.alternatives;
                if (res.delta[i] == Decision::reject) {
                    ++h.rejections;
                    if (truth[i] != 0) ++h.true_rejections;
                }
            }
        }
    }

    SimReport report;
    report.alpha = config.alpha;
    report.m = config.m;
    report.reps = config.reps;
    report.seed = config.seed;
    for (ArmState& arm : arms) {
        ArmReport ar;
        ar.procedure = arm.name;
        ar.nonconverged_reps = arm.nonconverged;
        if (!arm.batches.empty()) {
            const FdrMdr est = fdr_mdr_from_counts(arm.batches);
            const double included = static_cast<double>(arm.batches.size());
            ar.fdr_hat = est.fdr_hat;
            ar.mdr_hat = est.mdr_hat;
            ar.mean_r = arm.r_total / included;
            ar.mc_error =
                std::sqrt(est.fdr_hat * (1.0 - est.fdr_hat) / included);
        }
        for (const auto& [n, row] : arm.hist) ar.by_n.push_back(row);
        report.mc_error = std::max(report.mc_error, ar.mc_error);
        report.arms.push_back(std::move(ar));
    }
    return report;
}

std::string sim_report_to_json(const SimReport& report) {
    nlohmann::json j;
    j["alpha"] = report.alpha;
    j["m"] = report.m;
    j["reps"] = report.reps;
    j["seed"] = report.seed;
    j["mc_error"] = report.mc_error;
    j["arms"] = nlohmann::json::array();
    for (const ArmReport& ar : report.arms) {
        nlohmann::json a;
        a["procedure"] = ar.procedure;
        a["fdr_hat"] = ar.fdr_hat;
        a["mdr_hat"] = ar.mdr_hat;
        a["mean_r"] = ar.mean_r;
        a["mc_error"] = ar.mc_error;
        a["nonconverged_reps"] = ar.nonconverged_reps;
        a["rejections_by_n"] = nlohmann::json::array();
        for (const HistogramRow& h : ar.by_n) {
            a["rejections_by_n"].push_back(
                {{"n", h.n},
                 {"tests", h.tests},
                 {"alternatives", h.alternatives},
                 {"rejections", h.rejections},
                 {"true_rejections", h.true_rejections}});
        }
        j["arms"].push_back(std::move(a));
    }
    return j.dump(2);
}

std::string sim_histograms_csv(const SimReport& report) {
    std::string out =
        "procedure,n,tests,alternatives,rejections,true_rejections\n";
    for (const ArmReport& ar : report.arms) {
        for (const HistogramRow& h : ar.by_n) {
            out += ar.procedure;
            out += ',';
            out += std::to_string(h.n);
            out += ',';
            out += std::to_string(h.tests);
            out += ',';
            out += std::to_string(h.alternatives);
            out += ',';
            out += std::to_string(h.rejections);
            out += ',';
            out += std::to_string(h.true_rejections);
            out += '\n';
        }
    }
    return out;
}

}  // namespace clfdr

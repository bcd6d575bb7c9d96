#include "clfdr/fdr.hpp"

#include <algorithm>
#include <cmath>

#include "clfdr/count_data.hpp"
#include "json.hpp"

namespace clfdr {

namespace {

struct Admitted {
    std::vector<double> stat;
    std::vector<std::size_t> index;  // original positions, sorted order
};

// Admitted entries sorted ascending by (statistic, original index).
Admitted sort_admitted(std::span<const double> stats, double alpha,
                       const char* what) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw DataError("alpha must lie in (0, 1]");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (std::isnan(stats[i])) continue;
        if (!(stats[i] >= 0.0 && stats[i] <= 1.0)) {
            throw DataError(std::string(what) + " entries must lie in [0, 1]");
        }
        idx.push_back(i);
    }
    if (idx.empty()) {
        throw DataError(std::string(what) +
                        " input has no admitted entries");
    }
    std::sort(idx.begin(), idx.end(), [&stats](std::size_t a, std::size_t b) {
        if (stats[a] != stats[b]) return stats[a] < stats[b];
        return a < b;
    });
    Admitted adm;
    adm.index = std::move(idx);
    adm.stat.reserve(adm.index.size());
    for (std::size_t i : adm.index) adm.stat.push_back(stats[i]);
    return adm;
}

DecisionResult make_result(std::span<const double> stats,
                           const Admitted& adm, std::size_t k) {
    DecisionResult res;
    res.delta.assign(stats.size(), Decision::skipped);
    for (std::size_t i : adm.index) res.delta[i] = Decision::retain;
    for (std::size_t m = 0; m < k; ++m) {
        res.delta[adm.index[m]] = Decision::reject;
    }
    res.k = k;
    res.lambda = k > 0 ? adm.stat[k - 1] : 0.0;
    return res;
}

}  // namespace

DecisionResult bh_procedure(std::span<const double> p, double alpha) {
    const Admitted adm = sort_admitted(p, alpha, "p-value");
    const double m_count = static_cast<double>(adm.stat.size());
    std::size_t k = 0;
    for (std::size_t m = 1; m <= adm.stat.size(); ++m) {
        if (adm.stat[m - 1] <= alpha * static_cast<double>(m) / m_count) {
            k = m;
        }
    }
    return make_result(p, adm, k);
}

DecisionResult lfdr_stepup(std::span<const double> stats, double alpha) {
    const Admitted adm = sort_admitted(stats, alpha, "statistic");
    std::size_t k = 0;
    double running = 0.0;
    for (std::size_t m = 1; m <= adm.stat.size(); ++m) {
        running += adm.stat[m - 1];
        const bool group_end =
            m == adm.stat.size() || adm.stat[m] != adm.stat[m - 1];
        if (group_end && running <= alpha * static_cast<double>(m)) {
            k = m;
        }
    }
    return make_result(stats, adm, k);
}

ErrorCounts confusion_counts(const DecisionResult& result,
                             std::span<const int> truth) {
    if (result.delta.size() != truth.size()) {
        throw DataError("decision and truth lengths differ");
    }
    ErrorCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        switch (result.delta[i]) {
            case Decision::skipped:
                ++c.skipped;
                break;
            case Decision::reject:
                ++c.m;
                ++c.r;
                if (truth[i] == 0) ++c.v;
                break;
            case Decision::retain:
                ++c.m;
                if (truth[i] != 0) ++c.s;
                break;
        }
    }
    return c;
}

FdrMdr fdr_mdr_from_counts(std::span<const ErrorCounts> batches) {
    if (batches.empty()) {
        throw DataError("estimates require at least one batch");
    }
    FdrMdr est;
    double s_total = 0.0;
    double retained_total = 0.0;
    for (const ErrorCounts& c : batches) {
        if (c.r > 0) {
            est.fdr_hat +=
                static_cast<double>(c.v) / static_cast<double>(c.r);
        }
        s_total += static_cast<double>(c.s);
        retained_total += static_cast<double>(c.m - c.r);
    }
    est.fdr_hat /= static_cast<double>(batches.size());
    est.mdr_hat = retained_total > 0.0 ? s_total / retained_total : 0.0;
    return est;
}

FdrMdr fdr_mdr_estimates(
    std::span<const std::pair<DecisionResult, std::vector<int>>> batches) {
    std::vector<ErrorCounts> counts;
    counts.reserve(batches.size());
    for (const auto& [result, truth] : batches) {
        counts.push_back(confusion_counts(result, truth));
    }
    return fdr_mdr_from_counts(counts);
}

std::string decisions_to_csv(const DecisionResult& result,
                             std::span<const double> stats,
                             std::span<const std::string> ids) {
    if (stats.size() != result.delta.size()) {
        throw DataError("statistic and decision lengths differ");
    }
    if (!ids.empty() && ids.size() != result.delta.size()) {
        throw DataError("id and decision lengths differ");
    }
    std::string out = "id,statistic,decision\n";
    for (std::size_t i = 0; i < result.delta.size(); ++i) {
        out += ids.empty() ? std::to_string(i + 1) : ids[i];
        out += ',';
        out += std::isnan(stats[i]) ? "" : format_double(stats[i]);
        out += ',';
        switch (result.delta[i]) {
            case Decision::reject: out += "reject"; break;
            case Decision::retain: out += "retain"; break;
            case Decision::skipped: out += "skipped"; break;
        }
        out += '\n';
    }
    return out;
}

std::string decision_summary_json(const DecisionResult& result, double alpha) {
    nlohmann::json j;
    j["k"] = result.k;
    j["lambda"] = result.lambda;
    j["alpha"] = alpha;
    return j.dump(2);
}

}  // namespace clfdr

#include "cdk/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cdk/errors.hpp"

namespace cdk {

namespace {
constexpr double kZ95 = 1.96;

double binomial_ci(double p, double n) { return kZ95 * std::sqrt(p * (1.0 - p) / n) * 100.0; }
}  // namespace

std::vector<std::string> filter_raters(const std::vector<RaterResponse>& responses,
                                       double threshold) {
    std::map<std::string, std::pair<int, int>> controls;  // rater -> {correct, total}
    std::vector<std::string> rater_order;
    for (const auto& r : responses) {
        if (!controls.count(r.rater_id)) rater_order.push_back(r.rater_id);
        auto& c = controls[r.rater_id];
        if (r.kind == RatingKind::Control) {
            c.second += 1;
            if (r.correct) c.first += 1;
        }
    }
    std::vector<std::string> kept;
    for (const auto& id : rater_order) {
        const auto& [correct, total] = controls[id];
        if (total == 0)
            throw std::invalid_argument("filter_raters: rater " + id + " has no control records");
        if (static_cast<double>(correct) / total >= threshold) kept.push_back(id);
    }
    return kept;
}

RateCI preference_rate(const std::vector<RaterResponse>& responses) {
    long prefers = 0, total = 0;
    for (const auto& r : responses) {
        if (r.kind != RatingKind::TwoAFC) continue;
        ++total;
        if (r.prefers_model) ++prefers;
    }
    if (total == 0) throw std::invalid_argument("preference_rate: no 2AFC responses");
    const double p = static_cast<double>(prefers) / total;
    return {p * 100.0, binomial_ci(p, static_cast<double>(total))};
}

RateCI alignment_aggregate(const std::vector<RaterResponse>& responses) {
    std::vector<double> scores;
    for (const auto& r : responses) {
        if (r.kind != RatingKind::Alignment) continue;
        scores.push_back(r.level == AlignLevel::Yes ? 100.0
                                                    : (r.level == AlignLevel::Somewhat ? 50.0 : 0.0));
    }
    if (scores.empty()) throw std::invalid_argument("alignment_aggregate: no alignment responses");
    const double n = static_cast<double>(scores.size());
    double mean = 0.0;
    for (double s : scores) mean += s / n;
    double ci = 0.0;
    if (scores.size() > 1) {
        double var = 0.0;
        for (double s : scores) var += (s - mean) * (s - mean) / (n - 1.0);
        ci = kZ95 * std::sqrt(var / n);
    }
    return {mean, ci};
}

PairwiseShares pairwise_aggregate(const std::vector<RaterResponse>& responses) {
    long a = 0, ind = 0, b = 0;
    for (const auto& r : responses) {
        if (r.kind != RatingKind::Pairwise) continue;
        switch (r.choice) {
            case PairChoice::A: ++a; break;
            case PairChoice::Indifferent: ++ind; break;
            case PairChoice::B: ++b; break;
        }
    }
    if (a + ind + b == 0) throw std::invalid_argument("pairwise_aggregate: no pairwise responses");
    const double n = static_cast<double>(a + ind + b);
    const double pa = a / n, pi = ind / n, pb = b / n;
    return {{pa * 100.0, binomial_ci(pa, n)},
            {pi * 100.0, binomial_ci(pi, n)},
            {pb * 100.0, binomial_ci(pb, n)}};
}

std::vector<RaterResponse> load_ratings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("ratings: cannot open " + path);
    std::vector<RaterResponse> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("rater_id", 0) == 0) continue;  // header
        std::istringstream is(line);
        std::string rater, item, kind, value;
        if (!std::getline(is, rater, ',') || !std::getline(is, item, ',') ||
            !std::getline(is, kind, ',') || !std::getline(is, value))
            throw ConfigError("ratings: bad row at " + path + ":" + std::to_string(lineno));
        RaterResponse r;
        r.rater_id = rater;
        r.item_id = item;
        if (kind == "2afc") {
            r.kind = RatingKind::TwoAFC;
            if (value == "model") r.prefers_model = true;
            else if (value == "reference") r.prefers_model = false;
            else throw ConfigError("ratings: bad 2afc value at line " + std::to_string(lineno));
        } else if (kind == "alignment") {
            r.kind = RatingKind::Alignment;
            if (value == "yes") r.level = AlignLevel::Yes;
            else if (value == "somewhat") r.level = AlignLevel::Somewhat;
            else if (value == "no") r.level = AlignLevel::No;
            else throw ConfigError("ratings: bad alignment value at line " + std::to_string(lineno));
        } else if (kind == "pairwise") {
            r.kind = RatingKind::Pairwise;
            if (value == "A") r.choice = PairChoice::A;
            else if (value == "indifferent") r.choice = PairChoice::Indifferent;
            else if (value == "B") r.choice = PairChoice::B;
            else throw ConfigError("ratings: bad pairwise value at line " + std::to_string(lineno));
        } else if (kind == "control") {
            r.kind = RatingKind::Control;
            if (value == "1") r.correct = true;
            else if (value == "0") r.correct = false;
            else throw ConfigError("ratings: bad control value at line " + std::to_string(lineno));
        } else {
            throw ConfigError("ratings: unknown kind '" + kind + "' at line " +
                              std::to_string(lineno));
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ConfigError("ratings: no rows in " + path);
    return out;
}

void aggregate_ratings_csv(const std::vector<RaterResponse>& responses,
                           const std::string& out_path, double threshold) {
    bool any_controls = false;
    for (const auto& r : responses)
        if (r.kind == RatingKind::Control) { any_controls = true; break; }

    std::vector<RaterResponse> kept_responses;
    std::size_t raters_kept = 0;
    if (any_controls) {
        const std::vector<std::string> kept = filter_raters(responses, threshold);
        raters_kept = kept.size();
        for (const auto& r : responses)
            if (std::find(kept.begin(), kept.end(), r.rater_id) != kept.end())
                kept_responses.push_back(r);
    } else {
        // No control questions in the file: aggregate everyone.
        kept_responses = responses;
        std::vector<std::string> ids;
        for (const auto& r : responses)
            if (std::find(ids.begin(), ids.end(), r.rater_id) == ids.end())
                ids.push_back(r.rater_id);
        raters_kept = ids.size();
    }

    bool has_2afc = false, has_align = false, has_pair = false;
    for (const auto& r : kept_responses) {
        has_2afc |= r.kind == RatingKind::TwoAFC;
        has_align |= r.kind == RatingKind::Alignment;
        has_pair |= r.kind == RatingKind::Pairwise;
    }

    const std::string tmp = out_path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw NumericError("ratings: cannot write " + tmp);
        os << "metric,value,ci95\n";
        os << "raters_kept," << raters_kept << ",0\n";
        char buf[128];
        if (has_2afc) {
            const RateCI r = preference_rate(kept_responses);
            std::snprintf(buf, sizeof buf, "preference_rate,%.4f,%.4f\n", r.value, r.ci95);
            os << buf;
        }
        if (has_align) {
            const RateCI r = alignment_aggregate(kept_responses);
            std::snprintf(buf, sizeof buf, "alignment_mean,%.4f,%.4f\n", r.value, r.ci95);
            os << buf;
        }
        if (has_pair) {
            const PairwiseShares s = pairwise_aggregate(kept_responses);
            std::snprintf(buf, sizeof buf, "pairwise_a,%.4f,%.4f\n", s.a.value, s.a.ci95);
            os << buf;
            std::snprintf(buf, sizeof buf, "pairwise_indifferent,%.4f,%.4f\n",
                          s.indifferent.value, s.indifferent.ci95);
            os << buf;
            std::snprintf(buf, sizeof buf, "pairwise_b,%.4f,%.4f\n", s.b.value, s.b.ci95);
            os << buf;
        }
    }
    std::filesystem::rename(tmp, out_path);
}

}  // namespace cdk

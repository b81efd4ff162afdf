#pragma once

#include <string>
#include <vector>

namespace cdk {

enum class RatingKind { TwoAFC, Alignment, Pairwise, Control };
enum class AlignLevel { Yes, Somewhat, No };
enum class PairChoice { A, Indifferent, B };

/// One human-rating record; exactly one payload is meaningful per kind.
struct RaterResponse {
    std::string rater_id;
    std::string item_id;
    RatingKind kind = RatingKind::Control;
    bool prefers_model = false;            // TwoAFC
    AlignLevel level = AlignLevel::No;     // Alignment
    PairChoice choice = PairChoice::A;     // Pairwise
    bool correct = false;                  // Control
};

/// Raters whose control accuracy is >= threshold (inclusive). Throws if any
/// rater has no control records.
std::vector<std::string> filter_raters(const std::vector<RaterResponse>& responses,
                                       double threshold = 0.8);

struct RateCI {
    double value = 0.0;
    double ci95 = 0.0;
};

/// Percentage preferring the model with a normal-approximation 95% CI.
RateCI preference_rate(const std::vector<RaterResponse>& responses);

/// yes/somewhat/no mapped to 100/50/0; mean and 1.96 * sem.
RateCI alignment_aggregate(const std::vector<RaterResponse>& responses);

struct PairwiseShares {
    RateCI a, indifferent, b;  // percentages; values sum to 100
};

PairwiseShares pairwise_aggregate(const std::vector<RaterResponse>& responses);

/// Ratings CSV: header `rater_id,item_id,kind,value` with kinds
/// 2afc (value model|reference), alignment (yes|somewhat|no),
/// pairwise (A|indifferent|B), control (1|0).
std::vector<RaterResponse> load_ratings_csv(const std::string& path);

/// Full pipeline used by the CLI: when control rows exist, drop raters below
/// the control threshold, then aggregate per kind into `metric,value,ci95`
/// rows written to out_path.
void aggregate_ratings_csv(const std::vector<RaterResponse>& responses,
                           const std::string& out_path, double threshold = 0.8);

}  // namespace cdk

#pragma once

// OOD detection metrics. Convention: a higher score means "more OOD"; ID
// samples are the positives of the detector and are detected below the
// threshold.

#include <span>
#include <vector>

namespace heat {

struct ScoredSets {
    std::vector<double> id_scores;
    std::vector<double> ood_scores;
};

// P(ood > id) + 0.5 * P(ood == id), via mid-ranks.
double auroc(const ScoredSets& s);

// Smallest threshold tau keeping at least `tpr` of the ID scores (<= tau),
// then the fraction of OOD scores <= tau.
double fpr_at_tpr(const ScoredSets& s, double tpr = 0.95);

// Area under the precision-recall curve with ID as the positive class
// (predicted ID when score <= threshold), step-wise over every distinct
// threshold: sum of (recall_t - recall_{t-1}) * precision_t.
double aupr_in(const ScoredSets& s);

struct DetectionMetrics {
    double fpr95 = 0.0;
    double auroc = 0.0;
    double aupr_in = 0.0;
};

DetectionMetrics evaluate(const ScoredSets& s);

}  // namespace heat

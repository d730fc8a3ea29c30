#include "heat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "heat/error.hpp"
#include "heat/linalg.hpp"

namespace heat {

namespace {

void validate(const ScoredSets& s) {
    require(!s.id_scores.empty() && !s.ood_scores.empty(), ErrorCode::EmptySet,
            "both ID and OOD score sets must be non-empty");
    require(all_finite(s.id_scores) && all_finite(s.ood_scores), ErrorCode::NonFiniteValue,
            "scores must be finite");
}

struct Tagged {
    double score;
    bool ood;
};

// Pooled scores sorted ascending.
std::vector<Tagged> pooled(const ScoredSets& s) {
    std::vector<Tagged> all;
    all.reserve(s.id_scores.size() + s.ood_scores.size());
    for (double v : s.id_scores) all.push_back({v, false});
    for (double v : s.ood_scores) all.push_back({v, true});
    std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) { return a.score < b.score; });
    return all;
}

// Calls fn(id_count, ood_count) for each group of equal scores, ascending.
template <typename Fn>
void for_each_tie_group(const std::vector<Tagged>& all, Fn&& fn) {
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        std::uint64_t ids = 0, oods = 0;
        while (j < all.size() && all[j].score == all[i].score) {
            (all[j].ood ? oods : ids) += 1;
            ++j;
        }
        fn(ids, oods);
        i = j;
    }
}

}  // namespace

double auroc(const ScoredSets& s) {
    validate(s);
    const auto all = pooled(s);
    // Twice the Mann-Whitney U statistic, kept integral so the result is exact.
    std::uint64_t twice_u = 0;
    std::uint64_t ids_below = 0;
    for_each_tie_group(all, [&](std::uint64_t ids, std::uint64_t oods) {
        twice_u += 2 * oods * ids_below + oods * ids;
        ids_below += ids;
    });
    const double pairs = static_cast<double>(s.id_scores.size()) * static_cast<double>(s.ood_scores.size());
    return static_cast<double>(twice_u) / (2.0 * pairs);
}

double fpr_at_tpr(const ScoredSets& s, double tpr) {
    validate(s);
    require(tpr > 0.0 && tpr <= 1.0, ErrorCode::InvalidSpec, "tpr must be in (0, 1]");
    std::vector<double> id = s.id_scores;
    std::sort(id.begin(), id.end());
    const std::size_t n = id.size();
    const double nd = static_cast<double>(n);

    auto k = static_cast<std::size_t>(std::ceil(tpr * nd));
    k = std::clamp<std::size_t>(k, 1, n);
    while (k > 1 && static_cast<double>(k - 1) / nd >= tpr) --k;
    while (k < n && static_cast<double>(k) / nd < tpr) ++k;
    const double tau = id[k - 1];

    const auto below = std::count_if(s.ood_scores.begin(), s.ood_scores.end(), [tau](double v) { return v <= tau; });
    return static_cast<double>(below) / static_cast<double>(s.ood_scores.size());
}

double aupr_in(const ScoredSets& s) {
    validate(s);
    const auto all = pooled(s);
    const double n_id = static_cast<double>(s.id_scores.size());
    std::uint64_t tp = 0, fp = 0, tp_prev = 0;
    double area = 0.0;
    for_each_tie_group(all, [&](std::uint64_t ids, std::uint64_t oods) {
        tp += ids;
        fp += oods;
        const double recall_step = static_cast<double>(tp - tp_prev) / n_id;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += recall_step * precision;
        tp_prev = tp;
    });
    return area;
}

DetectionMetrics evaluate(const ScoredSets& s) {
    return {fpr_at_tpr(s, 0.95), auroc(s), aupr_in(s)};
}

}  // namespace heat

// Multilabel / multiclass evaluation, session-level count aggregation, and
// Bland-Altman agreement analysis.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "azil/targets.hpp"

namespace azil {

struct EvalReport {
    double hamming = 0.0;
    std::vector<double> logitwise_accuracy;
    std::vector<double> logitwise_f1;
    double macro_f1 = 0.0;
    double accuracy = 0.0;  // multiclass tasks only
    std::vector<int> support;  // positives per bin
};

struct AgreementReport {
    double mean_diff = 0.0;
    double sd_diff = 0.0;
    double loa_low = 0.0;   // mean - 1.96 sd
    double loa_high = 0.0;  // mean + 1.96 sd
    double pct_within = 0.0;
    double mae = 0.0;
};

namespace detail {
inline void check_pairs(const std::vector<ZoneLabel>& y, const std::vector<ZoneLabel>& yhat) {
    if (y.empty() || y.size() != yhat.size())
        throw std::invalid_argument("need equal-length non-empty label sets");
    for (size_t i = 0; i < y.size(); ++i)
        if (y[i].bits.size() != yhat[i].bits.size())
            throw std::invalid_argument("bin count mismatch");
}
}  // namespace detail

/// Mean Jaccard similarity between true and predicted label sets.
/// Both-empty pairs count as perfect agreement.
inline double hamming_score(const std::vector<ZoneLabel>& y,
                            const std::vector<ZoneLabel>& yhat) {
    detail::check_pairs(y, yhat);
    double total = 0.0;
    for (size_t s = 0; s < y.size(); ++s) {
        int inter = 0, uni = 0;
        for (size_t i = 0; i < y[s].bits.size(); ++i) {
            bool a = y[s].bits[i], b = yhat[s].bits[i];
            inter += (a && b) ? 1 : 0;
            uni += (a || b) ? 1 : 0;
        }
        total += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
    }
    return total / static_cast<double>(y.size());
}

/// Fraction of samples whose bit for bin i matches.
inline double logitwise_accuracy(const std::vector<ZoneLabel>& y,
                                 const std::vector<ZoneLabel>& yhat, int bin) {
    detail::check_pairs(y, yhat);
    int correct = 0;
    for (size_t s = 0; s < y.size(); ++s)
        if (!y[s].bits[bin] == !yhat[s].bits[bin]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

/// Binary F1 for bin i. TP=FP=FN=0 counts as 1 (an all-negative bin
/// predicted all-negative is correct); TP=0 otherwise scores 0.
inline double logitwise_f1(const std::vector<ZoneLabel>& y,
                           const std::vector<ZoneLabel>& yhat, int bin) {
    detail::check_pairs(y, yhat);
    int tp = 0, fp = 0, fn = 0;
    for (size_t s = 0; s < y.size(); ++s) {
        bool t = y[s].bits[bin], p = yhat[s].bits[bin];
        if (t && p) ++tp;
        else if (!t && p) ++fp;
        else if (t && !p) ++fn;
    }
    if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
    double precision = static_cast<double>(tp) / (tp + fp);
    double recall = static_cast<double>(tp) / (tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

inline double macro_f1(const std::vector<ZoneLabel>& y, const std::vector<ZoneLabel>& yhat) {
    detail::check_pairs(y, yhat);
    size_t n = y.front().bits.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += logitwise_f1(y, yhat, static_cast<int>(i));
    return acc / static_cast<double>(n);
}

inline double multiclass_accuracy(const std::vector<int>& y, const std::vector<int>& yhat) {
    if (y.empty() || y.size() != yhat.size())
        throw std::invalid_argument("need equal-length non-empty class sets");
    int correct = 0;
    for (size_t i = 0; i < y.size(); ++i)
        if (y[i] == yhat[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

inline EvalReport evaluate_multilabel(const std::vector<ZoneLabel>& y,
                                      const std::vector<ZoneLabel>& yhat) {
    detail::check_pairs(y, yhat);
    EvalReport r;
    size_t n = y.front().bits.size();
    r.hamming = hamming_score(y, yhat);
    r.support.assign(n, 0);
    for (const auto& l : y)
        for (size_t i = 0; i < n; ++i) r.support[i] += l.bits[i] ? 1 : 0;
    for (size_t i = 0; i < n; ++i) {
        r.logitwise_accuracy.push_back(logitwise_accuracy(y, yhat, static_cast<int>(i)));
        r.logitwise_f1.push_back(logitwise_f1(y, yhat, static_cast<int>(i)));
    }
    r.macro_f1 = macro_f1(y, yhat);
    return r;
}

/// Per-zone counts accumulated over a session's segment labels.
inline std::vector<int> session_counts(const std::vector<ZoneLabel>& segment_labels,
                                       int n_bins) {
    std::vector<int> counts(n_bins, 0);
    for (const auto& l : segment_labels) {
        if (static_cast<int>(l.bits.size()) != n_bins)
            throw std::invalid_argument("bin count mismatch");
        for (int i = 0; i < n_bins; ++i) counts[i] += l.bits[i] ? 1 : 0;
    }
    return counts;
}

/// Pearson correlation and elementwise MAE between ground-truth and
/// predicted session count vectors. Zero-variance inputs are rejected.
inline std::pair<double, double> session_agreement(const std::vector<int>& c_gt,
                                                   const std::vector<int>& c_p) {
    if (c_gt.empty() || c_gt.size() != c_p.size())
        throw std::invalid_argument("count vectors must be equal-length, non-empty");
    double n = static_cast<double>(c_gt.size());
    double mg = 0.0, mp = 0.0;
    for (size_t i = 0; i < c_gt.size(); ++i) {
        mg += c_gt[i];
        mp += c_p[i];
    }
    mg /= n;
    mp /= n;
    double sgg = 0.0, spp = 0.0, sgp = 0.0, mae = 0.0;
    for (size_t i = 0; i < c_gt.size(); ++i) {
        double dg = c_gt[i] - mg, dp = c_p[i] - mp;
        sgg += dg * dg;
        spp += dp * dp;
        sgp += dg * dp;
        mae += std::abs(static_cast<double>(c_gt[i]) - c_p[i]);
    }
    if (sgg == 0.0 || spp == 0.0)
        throw std::invalid_argument("pearson undefined for zero-variance input");
    return {sgp / std::sqrt(sgg * spp), mae / n};
}

/// Bland-Altman agreement between a reference series and a test series.
/// Differences are test - reference; limits of agreement are mean +/- 1.96
/// sample standard deviations.
inline AgreementReport bland_altman(const std::vector<double>& reference,
                                    const std::vector<double>& test) {
    if (reference.empty() || reference.size() != test.size())
        throw std::invalid_argument("series must be aligned and non-empty");
    size_t n = reference.size();
    AgreementReport r;
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) {
        d[i] = test[i] - reference[i];
        r.mean_diff += d[i];
        r.mae += std::abs(d[i]);
    }
    r.mean_diff /= static_cast<double>(n);
    r.mae /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) ss += (x - r.mean_diff) * (x - r.mean_diff);
    r.sd_diff = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    r.loa_low = r.mean_diff - 1.96 * r.sd_diff;
    r.loa_high = r.mean_diff + 1.96 * r.sd_diff;
    int within = 0;
    for (double x : d)
        if (x >= r.loa_low && x <= r.loa_high) ++within;
    r.pct_within = 100.0 * within / static_cast<double>(n);
    return r;
}

}  // namespace azil

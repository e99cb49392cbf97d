#include "relfeat/featselect.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>
#include <thread>

#include "relfeat/stats.hpp"

namespace relfeat {

const char* to_string(DropReason r) {
    switch (r) {
    case DropReason::Constant: return "constant";
    case DropReason::BelowInfoGain: return "below_info_gain";
    case DropReason::BelowCorrelation: return "below_correlation";
    case DropReason::AllNull: return "all_null";
    }
    return "?";
}

std::vector<std::string> SelectionReport::kept() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.kept) out.push_back(e.name);
    return out;
}

double info_gain(const std::vector<double>& feature,
                 const std::vector<double>& labels, int bins) {
    if (feature.size() != labels.size())
        throw std::invalid_argument("feature/label length mismatch");

    std::map<double, int> class_of;
    for (double y : labels) class_of.emplace(y, 0);
    if (class_of.size() < 2)
        throw std::invalid_argument("info gain needs at least 2 classes");
    {
        int next = 0;
        for (auto& [y, idx] : class_of) idx = next++;
    }
    const size_t n_classes = class_of.size();

    // Bin assignment: nulls get their own bin, non-nulls equal-frequency.
    std::vector<size_t> non_null;
    for (size_t i = 0; i < feature.size(); ++i)
        if (!is_feature_null(feature[i])) non_null.push_back(i);
    std::vector<size_t> order = non_null;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return feature[a] < feature[b]; });

    // Equal-frequency cut points; duplicate boundaries merge bins.
    std::vector<double> uppers;
    if (!order.empty()) {
        size_t count = order.size();
        size_t want = std::min<size_t>(static_cast<size_t>(bins), count);
        for (size_t b = 1; b < want; ++b) {
            size_t at = b * count / want;
            double cut = feature[order[at]];
            if (uppers.empty() || cut > uppers.back()) uppers.push_back(cut);
        }
    }
    auto bin_of = [&](double v) -> size_t {
        size_t b = 0;
        while (b < uppers.size() && v >= uppers[b]) ++b;
        return b;
    };
    const size_t null_bin = uppers.size() + 1;
    const size_t n_bins = null_bin + 1;

    std::vector<std::vector<size_t>> joint(n_bins, std::vector<size_t>(n_classes, 0));
    std::vector<size_t> label_counts(n_classes, 0);
    for (size_t i = 0; i < feature.size(); ++i) {
        size_t b = is_feature_null(feature[i]) ? null_bin : bin_of(feature[i]);
        size_t y = static_cast<size_t>(class_of[labels[i]]);
        joint[b][y] += 1;
        label_counts[y] += 1;
    }

    double h_y = entropy_from_counts(label_counts);
    double h_cond = 0;
    double total = static_cast<double>(feature.size());
    for (const auto& bin : joint) {
        size_t bin_total = 0;
        for (size_t c : bin) bin_total += c;
        if (bin_total == 0) continue;
        h_cond += (static_cast<double>(bin_total) / total) * entropy_from_counts(bin);
    }
    double gain = h_y - h_cond;
    return gain > 0 ? gain : 0.0;
}

std::pair<FeatureMatrix, SelectionReport> select(const FeatureMatrix& matrix,
                                                 const SelectOptions& options) {
    const bool classification = matrix.target.task == Task::Classification;
    SelectionReport report;
    report.min_info_gain = options.min_info_gain;
    report.min_correlation = options.min_correlation;
    report.entries.resize(matrix.columns.size());

    auto in_train = [&](size_t e) {
        return options.train_mask.empty() || options.train_mask[e];
    };
    std::vector<double> train_labels;
    for (size_t e = 0; e < matrix.target.labels.size(); ++e)
        if (in_train(e)) train_labels.push_back(matrix.target.labels[e]);

    auto score_column = [&](size_t i) {
        const FeatureColumn& col = matrix.columns[i];
        SelectionReport::Entry entry;
        entry.name = col.name;
        entry.kept = false;
        entry.score = 0.0;

        std::vector<double> train_values;
        train_values.reserve(train_labels.size());
        for (size_t e = 0; e < col.values.size(); ++e)
            if (in_train(e)) train_values.push_back(col.values[e]);

        size_t non_null = 0;
        bool constant = true;
        double first = feature_null();
        bool any_null = false;
        for (double v : train_values) {
            if (is_feature_null(v)) {
                any_null = true;
                continue;
            }
            if (non_null == 0) first = v;
            else if (v != first) constant = false;
            ++non_null;
        }
        if (non_null == 0) {
            entry.reason = DropReason::AllNull;
            report.entries[i] = std::move(entry);
            return;
        }
        // A column is constant when every training cell is the same value;
        // a null-vs-value split still carries information and goes through
        // the gain gate instead.
        if (constant && !any_null) {
            entry.reason = DropReason::Constant;
            report.entries[i] = std::move(entry);
            return;
        }

        if (classification) {
            entry.score = info_gain(train_values, train_labels, options.bins);
            if (entry.score < options.min_info_gain) {
                entry.reason = DropReason::BelowInfoGain;
            } else {
                entry.kept = true;
            }
        } else {
            // Pearson over non-null rows.
            std::vector<double> x, y;
            for (size_t e = 0; e < train_values.size(); ++e) {
                if (is_feature_null(train_values[e])) continue;
                x.push_back(train_values[e]);
                y.push_back(train_labels[e]);
            }
            double r = pearson(x, y);
            entry.score = std::isnan(r) ? 0.0 : std::fabs(r);
            if (entry.score < options.min_correlation) {
                entry.reason = DropReason::BelowCorrelation;
            } else {
                entry.kept = true;
            }
        }
        report.entries[i] = std::move(entry);
    };

    if (options.threads > 1 && matrix.columns.size() > 1) {
        std::atomic<size_t> next{0};
        size_t workers = std::min<size_t>(static_cast<size_t>(options.threads),
                                          matrix.columns.size());
        std::vector<std::thread> pool;
        for (size_t w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= matrix.columns.size()) return;
                    score_column(i);
                }
            });
        for (auto& t : pool) t.join();
    } else {
        for (size_t i = 0; i < matrix.columns.size(); ++i) score_column(i);
    }

    FeatureMatrix kept;
    kept.example_ids = matrix.example_ids;
    kept.target = matrix.target;
    for (size_t i = 0; i < matrix.columns.size(); ++i)
        if (report.entries[i].kept) kept.columns.push_back(matrix.columns[i]);
    return {std::move(kept), std::move(report)};
}

std::string selection_report_to_text(const SelectionReport& report) {
    std::string out;
    char buf[48];
    for (const auto& e : report.entries) {
        out += e.name;
        out += '\t';
        out += e.kept ? "kept" : "dropped";
        out += '\t';
        out += e.kept ? "-" : to_string(e.reason);
        out += '\t';
        std::snprintf(buf, sizeof(buf), "%.17g", e.score);
        out += buf;
        out += '\n';
    }
    return out;
}

}  // namespace relfeat

#pragma once

#include <string>
#include <vector>

#include "relfeat/onebm.hpp"

namespace relfeat {

enum class DropReason : uint8_t {
    Constant,
    BelowInfoGain,
    BelowCorrelation,
    AllNull,
};
const char* to_string(DropReason r);

struct SelectionReport {
    struct Entry {
        std::string name;
        bool kept;
        DropReason reason;  // valid when !kept
        double score;       // info gain or |Pearson|; 0 for constant/all-null
    };
    std::vector<Entry> entries;  // input column order
    double min_info_gain;
    double min_correlation;

    std::vector<std::string> kept() const;
};

// H(Y) - H(Y | binned feature), natural log. Equal-frequency binning into at
// most `bins` bins; nulls form their own bin. Labels must span >= 2 classes.
double info_gain(const std::vector<double>& feature,
                 const std::vector<double>& labels, int bins = 10);

struct SelectOptions {
    double min_info_gain = 1e-16;
    double min_correlation = 1e-16;
    int bins = 10;
    std::vector<bool> train_mask;  // empty = all examples
    int threads = 1;
};

// Drops all-null and constant columns, then gates on info gain
// (classification) or |Pearson| against the target (regression). Scores are
// computed on the training split only; column order is preserved.
std::pair<FeatureMatrix, SelectionReport> select(const FeatureMatrix& matrix,
                                                 const SelectOptions& options = {});

std::string selection_report_to_text(const SelectionReport& report);

}  // namespace relfeat

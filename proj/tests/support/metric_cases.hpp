#pragma once

// Confusion matrices with metric values worked out by hand from the rate
// definitions (fractions kept exact until the last step). Zero-denominator
// rates count as 0.

#include <cmath>
#include <cstdint>

namespace mcguard::testing {

struct MetricCase {
    uint64_t tp, fp, tn, fn;
    double informedness, markedness, mcc, gm, accuracy;
};

inline const MetricCase kMetricCases[] = {
    // perfect
    {50, 0, 50, 0, 1, 1, 1, 1, 1},
    // all predicted normal: PPV is 0/0
    {0, 0, 50, 50, 0, -0.5, 0, 0, 0.5},
    // TPR 9/10, TNR 8/10, PPV 9/11, NPV 8/9
    {90, 20, 80, 10, 0.7, 70.0 / 99, 7000 / std::sqrt(110.0 * 100 * 100 * 90), std::sqrt(0.72), 0.85},
    // everything wrong
    {0, 50, 0, 50, -1, -1, -1, 0, 0},
    // all predicted anomalous: NPV is 0/0
    {50, 50, 0, 0, 0, -0.5, 0, 0, 0.5},
    // no positives at all
    {0, 0, 100, 0, 0, 0, 0, 0, 1},
    // no negatives at all
    {10, 0, 0, 0, 0, 0, 0, 0, 1},
    // coin flip: GM 0.5 with the other three at 0
    {1, 1, 1, 1, 0, 0, 0, 0.5, 0.5},
    // TPR 1, TNR 2/3, PPV 3/4, NPV 1; MCC 6/sqrt(72)
    {3, 1, 2, 0, 2.0 / 3, 0.75, 1 / std::sqrt(2.0), std::sqrt(2.0 / 3), 5.0 / 6},
    // TPR 1/2, TNR 1, PPV 1, NPV 1/2; MCC 25/50
    {5, 0, 5, 5, 0.5, 0.5, 0.5, std::sqrt(0.5), 2.0 / 3},
    // TPR 2/3, TNR 4/7, PPV 2/5, NPV 4/5
    {2, 3, 4, 1, 5.0 / 21, 0.2, 5 / std::sqrt(525.0), std::sqrt(8.0 / 21), 0.6},
    // TPR 7/8, TNR 9/11, PPV 7/9, NPV 9/10
    {7, 2, 9, 1, 61.0 / 88, 61.0 / 90, 61 / std::sqrt(7920.0), std::sqrt(63.0 / 88), 16.0 / 19},
    // TNR is 0/0
    {1, 0, 0, 1, -0.5, 0, 0, 0, 0.5},
    // TPR is 0/0
    {0, 1, 1, 0, -0.5, 0, 0, 0, 0.5},
    // TPR 1, TNR 899/900, PPV 100/101, NPV 1
    {100, 1, 899, 0, 899.0 / 900, 100.0 / 101, 89900 / std::sqrt(101.0 * 100 * 900 * 899), std::sqrt(899.0 / 900),
     0.999},
    {4, 4, 4, 4, 0, 0, 0, 0.5, 0.5},
    // TPR 1/2, TNR 1/2, PPV 3/4, NPV 1/4
    {6, 2, 2, 6, 0, 0, 0, 0.5, 0.5},
    {9, 1, 9, 1, 0.8, 0.8, 0.8, 0.9, 0.9},
    {1, 9, 1, 9, -0.8, -0.8, -0.8, 0.1, 0.1},
    // TPR 3/4, TNR 5/6, PPV 3/4, NPV 5/6; MCC 1400/2400
    {30, 10, 50, 10, 7.0 / 12, 7.0 / 12, 7.0 / 12, std::sqrt(0.625), 0.8},
    // TPR 2/5, TNR 0/0, PPV 1, NPV 0/3
    {2, 0, 0, 3, -0.6, 0, 0, 0, 0.4},
    // TPR 0/0, TNR 7/10, PPV 0/3, NPV 1
    {0, 3, 7, 0, -0.3, 0, 0, 0, 0.7},
};

}  // namespace mcguard::testing

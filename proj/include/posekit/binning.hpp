#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "posekit/errors.hpp"

namespace posekit {

// Overlapping angular bins. A bin's nominal width is range/n_bins and its
// effective interval extends a further overlap_deg on each side, so border
// angles count as correct for either neighbor. Odd bin counts only: with an
// even count, symmetric shapes render identical silhouettes for opposite
// bins.
//
// Azimuth layouts wrap (range 360, bin 0 centered at the frontal view 0);
// elevation layouts do not wrap and tile [0, range] with half-offset centers
// so the whole range is covered.
struct BinSpec {
    int n_bins = 0;
    double overlap_deg = 0.0;
    double range_deg = 0.0;
    bool wraparound = false;
    std::vector<double> centers;

    double nominal_width() const { return range_deg / n_bins; }
    double effective_width() const { return nominal_width() + 2.0 * overlap_deg; }
    double center(int k) const { return centers[static_cast<size_t>(k)]; }
};

inline BinSpec make_binspec(int n_bins, double overlap_deg, double range_deg, bool wraparound) {
    if (n_bins < 3 || n_bins % 2 == 0)
        throw ConfigError("bin count must be odd and >= 3");
    if (!(range_deg > 0)) throw ConfigError("bin range must be positive");
    if (overlap_deg < 0) throw ConfigError("bin overlap must be >= 0");
    const double nominal = range_deg / n_bins;
    if (overlap_deg >= nominal / 2)
        throw ConfigError("bin overlap must be smaller than half the nominal width");
    BinSpec spec;
    spec.n_bins = n_bins;
    spec.overlap_deg = overlap_deg;
    spec.range_deg = range_deg;
    spec.wraparound = wraparound;
    spec.centers.reserve(static_cast<size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        const double c = wraparound ? k * nominal : (k + 0.5) * nominal;
        spec.centers.push_back(c);
    }
    return spec;
}

namespace detail {

inline double circular_diff(double a, double b, double range) {
    double d = std::fmod(std::abs(a - b), range);
    if (d > range / 2) d = range - d;
    return d;
}

} // namespace detail

// Nearest-center assignment; ties go to the lower index. Azimuth inputs are
// wrapped modulo 360 first; out-of-range elevation is clamped into the range
// and counted through `clamp_warnings` when provided.
inline int assign_bin(double angle_deg, const BinSpec& spec, int* clamp_warnings = nullptr) {
    double a = angle_deg;
    if (spec.wraparound) {
        a = std::fmod(a, spec.range_deg);
        if (a < 0) a += spec.range_deg;
    } else if (a < 0 || a > spec.range_deg) {
        if (clamp_warnings) ++*clamp_warnings;
        a = std::min(spec.range_deg, std::max(0.0, a));
    }
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < spec.n_bins; ++k) {
        const double d = spec.wraparound ? detail::circular_diff(a, spec.center(k), spec.range_deg)
                                         : std::abs(a - spec.center(k));
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

// True iff the ground-truth angle lies inside the predicted bin's effective
// (overlap-extended) interval.
inline bool is_correct(int pred_bin, double gt_angle_deg, const BinSpec& spec) {
    if (pred_bin < 0 || pred_bin >= spec.n_bins) throw ConfigError("is_correct: bad bin index");
    double a = gt_angle_deg;
    if (spec.wraparound) {
        a = std::fmod(a, spec.range_deg);
        if (a < 0) a += spec.range_deg;
    } else {
        a = std::min(spec.range_deg, std::max(0.0, a));
    }
    const double d = spec.wraparound
                         ? detail::circular_diff(a, spec.center(pred_bin), spec.range_deg)
                         : std::abs(a - spec.center(pred_bin));
    return d <= spec.effective_width() / 2.0;
}

} // namespace posekit

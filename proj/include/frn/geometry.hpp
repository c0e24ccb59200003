#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace frn {

// Axis-aligned box over real pixel coordinates. Half-open rectangle: area is
// (xmax-xmin)*(ymax-ymin) with no +1 pixel convention, so all geometry is
// invariant under the cascade's coordinate scaling.
struct BBox {
    double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

    BBox() = default;
    BBox(double x0, double y0, double x1, double y1) : xmin(x0), ymin(y0), xmax(x1), ymax(y1) {
        if (!(xmax > xmin) || !(ymax > ymin))
            throw std::invalid_argument("BBox: requires xmax > xmin and ymax > ymin");
    }

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    double cx() const { return (xmin + xmax) / 2; }
    double cy() const { return (ymin + ymax) / 2; }

    bool contains(double x, double y) const {
        return x >= xmin && x < xmax && y >= ymin && y < ymax;
    }

    auto tie() const { return std::tie(xmin, ymin, xmax, ymax); }
    bool operator==(const BBox& o) const { return tie() == o.tie(); }
    bool operator<(const BBox& o) const { return tie() < o.tie(); }
};

struct Detection {
    BBox box;
    double score = 0;

    Detection() = default;
    Detection(BBox b, double s) : box(b), score(s) {
        if (!(std::isfinite(s)) || s < 0 || s > 1)
            throw std::invalid_argument("Detection: score must be finite in [0,1]");
    }
};

inline double intersection_area(const BBox& a, const BBox& b) {
    const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (w <= 0 || h <= 0) return 0;
    return w * h;
}

inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0) return 0;
    return inter / (a.area() + b.area() - inter);
}

inline double average_scale(const BBox& b) { return (b.width() + b.height()) / 2; }

// Strict inequality: a box of exactly `threshold` average scale is large.
inline bool is_small(const BBox& b, double threshold = 20.0) {
    return average_scale(b) < threshold;
}

namespace detail {

// Descending score; score ties broken by box coordinates so the result is
// independent of input order.
inline bool det_before(const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.box < b.box;
}

}  // namespace detail

// Greedy non-maximum suppression: repeatedly keep the highest-score detection
// and discard every remaining one with IoU > threshold against it. Output is
// sorted by descending score.
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
    if (iou_threshold < 0 || iou_threshold > 1)
        throw std::invalid_argument("nms: threshold must be in [0,1]");
    std::sort(dets.begin(), dets.end(), detail::det_before);
    std::vector<Detection> kept;
    std::vector<bool> dead(dets.size(), false);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dead[i]) continue;
        kept.push_back(dets[i]);
        for (std::size_t j = i + 1; j < dets.size(); ++j)
            if (!dead[j] && iou(dets[i].box, dets[j].box) > iou_threshold) dead[j] = true;
    }
    return kept;
}

}  // namespace frn

#include "hoi/boxes.hpp"

#include <algorithm>
#include <string>

#include "hoi/errors.hpp"

namespace hoi {

namespace {

std::string box_string(const Box& b) {
    return "[" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) +
           ", " + std::to_string(b.y2) + "]";
}

void require_valid(const Box& b, const char* which) {
    if (!(b.x1 < b.x2) || !(b.y1 < b.y2)) {
        throw DegenerateBoxError(std::string(which) + " box has no area: " + box_string(b));
    }
}

double intersection_area(const Box& a, const Box& b) {
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

}  // namespace

Box box_from_cxcywh(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

Box box_from_cxcywh(const std::array<double, 4>& c) {
    return box_from_cxcywh(c[0], c[1], c[2], c[3]);
}

double box_area(const Box& b) {
    return (b.x2 - b.x1) * (b.y2 - b.y1);
}

double iou(const Box& a, const Box& b) {
    require_valid(a, "first");
    require_valid(b, "second");
    const double inter = intersection_area(a, b);
    const double uni = box_area(a) + box_area(b) - inter;
    return inter / uni;
}

double giou(const Box& a, const Box& b) {
    require_valid(a, "first");
    require_valid(b, "second");
    const double inter = intersection_area(a, b);
    const double uni = box_area(a) + box_area(b) - inter;
    const Box hull{std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
                   std::max(a.y2, b.y2)};
    const double hull_area = box_area(hull);
    // The hull contains the union, so the penalty is nonnegative; clamping
    // removes the rounding residue that appears when the two areas are equal
    // but computed through different expressions (containment), keeping
    // giou <= iou exact.
    const double penalty = std::max(0.0, hull_area - uni);
    return inter / uni - penalty / hull_area;
}

}  // namespace hoi

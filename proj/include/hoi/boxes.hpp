#pragma once

#include <array>

namespace hoi {

// Axis-aligned box, corner form. All box math on plain doubles lives here;
// the differentiable GIoU used by the loss is composed from tensor ops and
// tested against these functions.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;
};

Box box_from_cxcywh(double cx, double cy, double w, double h);
Box box_from_cxcywh(const std::array<double, 4>& cxcywh);

double box_area(const Box& b);

// Intersection over union in [0,1]; 0 when disjoint. Throws
// DegenerateBoxError unless x1 < x2 and y1 < y2 for both boxes.
double iou(const Box& a, const Box& b);

// Generalized IoU in (-1, 1]: iou minus (hull - union)/hull. Same validity
// requirements as iou.
double giou(const Box& a, const Box& b);

}  // namespace hoi

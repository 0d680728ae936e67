#pragma once

#include <span>
#include <string>
#include <vector>

#include "centerfpa/bbox.hpp"

namespace cfpa {

double iou(const BBox& a, const BBox& b);

/// Greedy matching in the given order (callers sort by score descending). A
/// detection is a true positive when its best-overlapping unmatched ground
/// truth has IoU > iou_thresh; that ground truth is consumed.
std::vector<bool> match_detections(std::span<const BBox> dets, std::span<const BBox> gts,
                                   double iou_thresh);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;

    friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

/// Cumulative (recall, precision) after each detection. Recall is reported as
/// 0 when there is no ground truth.
std::vector<PrPoint> pr_curve(const std::vector<bool>& tp_flags, int total_gt);

/// Mean of the interpolated precision at recall 0, 0.1, ..., 1.0.
double ap_11point(std::span<const PrPoint> curve);

struct ClassReport {
    int class_id = 0;
    int num_gt = 0;
    int num_det = 0;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double ap = 0.0;
    bool has_gt = false; // classes without ground truth are left out of mAP
    std::vector<PrPoint> curve;
};

struct EvalReport {
    std::vector<ClassReport> classes;
    double mAP = 0.0;
    int classes_with_gt = 0;
    bool empty_ground_truth = false;
};

EvalReport evaluate(std::span<const BBox> dets, std::span<const BBox> gts, int num_classes,
                    double iou_thresh);

std::string format_report_table(const EvalReport& report, const std::vector<std::string>& class_names);
std::string report_to_json(const EvalReport& report, const std::vector<std::string>& class_names);

} // namespace cfpa

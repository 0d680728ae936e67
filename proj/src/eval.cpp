#include "centerfpa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cfpa {

double iou(const BBox& a, const BBox& b)
{
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<bool> match_detections(std::span<const BBox> dets, std::span<const BBox> gts,
                                   double iou_thresh)
{
    std::vector<bool> used(gts.size(), false);
    std::vector<bool> flags(dets.size(), false);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        double best = -1.0;
        std::size_t best_g = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g]) continue;
            const double v = iou(dets[d], gts[g]);
            if (v > best) {
                best = v;
                best_g = g;
            }
        }
        if (best_g < gts.size() && best > iou_thresh) {
            used[best_g] = true;
            flags[d] = true;
        }
    }
    return flags;
}

std::vector<PrPoint> pr_curve(const std::vector<bool>& tp_flags, int total_gt)
{
    if (total_gt < 0) throw std::invalid_argument("pr_curve: total_gt must be >= 0");
    std::vector<PrPoint> curve;
    curve.reserve(tp_flags.size());
    int tp = 0;
    for (std::size_t i = 0; i < tp_flags.size(); ++i) {
        if (tp_flags[i]) ++tp;
        const double recall = total_gt > 0 ? static_cast<double>(tp) / total_gt : 0.0;
        curve.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
    }
    return curve;
}

double ap_11point(std::span<const PrPoint> curve)
{
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double r = i / 10.0;
        double p = 0.0;
        for (const PrPoint& pt : curve) {
            if (pt.recall >= r) p = std::max(p, pt.precision);
        }
        sum += p;
    }
    return sum / 11.0;
}

EvalReport evaluate(std::span<const BBox> dets, std::span<const BBox> gts, int num_classes,
                    double iou_thresh)
{
    if (num_classes < 1) throw std::invalid_argument("evaluate: need at least one class");
    auto check = [&](const BBox& b, const char* what) {
        if (b.class_id < 0 || b.class_id >= num_classes) {
            throw std::invalid_argument(std::string("evaluate: ") + what + " class id " +
                                        std::to_string(b.class_id) + " out of range for " +
                                        std::to_string(num_classes) + " classes");
        }
    };
    std::vector<std::vector<BBox>> det_by_class(num_classes), gt_by_class(num_classes);
    for (const BBox& b : dets) {
        check(b, "detection");
        det_by_class[b.class_id].push_back(b);
    }
    for (const BBox& b : gts) {
        check(b, "ground truth");
        gt_by_class[b.class_id].push_back(b);
    }

    EvalReport report;
    double ap_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        auto& cd = det_by_class[c];
        std::stable_sort(cd.begin(), cd.end(), [](const BBox& a, const BBox& b) { return a.score > b.score; });
        ClassReport cr;
        cr.class_id = c;
        cr.num_gt = static_cast<int>(gt_by_class[c].size());
        cr.num_det = static_cast<int>(cd.size());
        cr.has_gt = cr.num_gt > 0;
        const std::vector<bool> flags = match_detections(cd, gt_by_class[c], iou_thresh);
        cr.tp = static_cast<int>(std::count(flags.begin(), flags.end(), true));
        cr.fp = cr.num_det - cr.tp;
        cr.fn = cr.num_gt - cr.tp;
        cr.curve = pr_curve(flags, cr.num_gt);
        cr.ap = cr.has_gt ? ap_11point(cr.curve) : 0.0;
        if (cr.has_gt) {
            ap_sum += cr.ap;
            ++report.classes_with_gt;
        }
        report.classes.push_back(std::move(cr));
    }
    report.empty_ground_truth = report.classes_with_gt == 0;
    report.mAP = report.classes_with_gt > 0 ? ap_sum / report.classes_with_gt : 0.0;
    return report;
}

namespace {

std::string class_label(const std::vector<std::string>& names, int id)
{
    return id < static_cast<int>(names.size()) ? names[id] : "class" + std::to_string(id);
}

} // namespace

std::string format_report_table(const EvalReport& report, const std::vector<std::string>& class_names)
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %8s %6s %6s %6s %6s\n", "class", "AP", "GT", "TP", "FP", "FN");
    os << line;
    for (const ClassReport& c : report.classes) {
        if (!c.has_gt && c.num_det == 0) continue;
        const std::string name = class_label(class_names, c.class_id);
        if (c.has_gt) {
            std::snprintf(line, sizeof line, "%-20s %8.4f %6d %6d %6d %6d\n", name.c_str(), c.ap, c.num_gt,
                          c.tp, c.fp, c.fn);
        } else {
            std::snprintf(line, sizeof line, "%-20s %8s %6d %6d %6d %6d\n", name.c_str(), "n/a", c.num_gt,
                          c.tp, c.fp, c.fn);
        }
        os << line;
    }
    if (report.empty_ground_truth) os << "warning: ground truth is empty, mAP is not meaningful\n";
    std::snprintf(line, sizeof line, "mAP %.4f over %d classes\n", report.mAP, report.classes_with_gt);
    os << line;
    return os.str();
}

std::string report_to_json(const EvalReport& report, const std::vector<std::string>& class_names)
{
    nlohmann::json j;
    j["mAP"] = report.mAP;
    j["classes_with_gt"] = report.classes_with_gt;
    j["empty_ground_truth"] = report.empty_ground_truth;
    j["classes"] = nlohmann::json::array();
    for (const ClassReport& c : report.classes) {
        nlohmann::json row;
        row["class"] = class_label(class_names, c.class_id);
        row["ap"] = c.ap;
        row["has_gt"] = c.has_gt;
        row["gt"] = c.num_gt;
        row["detections"] = c.num_det;
        row["tp"] = c.tp;
        row["fp"] = c.fp;
        row["fn"] = c.fn;
        nlohmann::json curve = nlohmann::json::array();
        for (const PrPoint& p : c.curve) curve.push_back({p.recall, p.precision});
        row["curve"] = std::move(curve);
        j["classes"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

} // namespace cfpa
